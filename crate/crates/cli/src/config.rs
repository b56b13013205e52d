//! Training-knob resolution: built-in defaults, then a key=value config
//! file, then explicit command-line flags, each layer overriding the one
//! below. The fully resolved config is what lands in every run record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;

use nimparity::datagen::SamplerSpec;
use nimparity::lstm::InputEncoding;
use nimparity::noise::NoiseMode;
use nimparity::trainer::{AccuracyFeedback, TrainConfig};

/// Mirror of the sampler kinds for flag parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKindArg {
    Uniform01,
    #[value(alias = "latent_curriculum")]
    LatentCurriculum,
    #[value(alias = "variable_length")]
    VariableLength,
    #[value(alias = "nim_trajectory")]
    NimTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseModeArg {
    Exact,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeedbackArg {
    Latest,
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Scalar,
    #[value(alias = "one_hot")]
    OneHot,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(value: NoiseModeArg) -> Self {
        match value {
            NoiseModeArg::Exact => NoiseMode::Exact,
            NoiseModeArg::Bernoulli => NoiseMode::Bernoulli,
        }
    }
}

impl From<FeedbackArg> for AccuracyFeedback {
    fn from(value: FeedbackArg) -> Self {
        match value {
            FeedbackArg::Latest => AccuracyFeedback::Latest,
            FeedbackArg::Best => AccuracyFeedback::Best,
        }
    }
}

impl From<EncodingArg> for InputEncoding {
    fn from(value: EncodingArg) -> Self {
        match value {
            EncodingArg::Scalar => InputEncoding::Scalar,
            EncodingArg::OneHot => InputEncoding::OneHot3,
        }
    }
}

/// Every knob a training run takes, each optional so that layers can be
/// merged field by field.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    pub sampler: Option<SamplerKindArg>,
    pub n: Option<usize>,
    pub heaps: Option<Vec<u32>>,
    pub capacity: Option<u32>,
    pub scrambled: Option<bool>,
    pub rho0: Option<f64>,
    pub noise_mode: Option<NoiseModeArg>,
    pub feedback: Option<FeedbackArg>,
    pub batch_size: Option<usize>,
    pub max_steps: Option<u64>,
    pub success_threshold: Option<f64>,
    pub eval_interval: Option<u64>,
    pub test_set_size: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub hidden_size: Option<usize>,
    pub encoding: Option<EncodingArg>,
    pub dataset_size: Option<usize>,
    pub seed: Option<u64>,
}

impl Overlay {
    /// `self` wins over `under` wherever both are set.
    pub fn over(self, under: Overlay) -> Overlay {
        Overlay {
            sampler: self.sampler.or(under.sampler),
            n: self.n.or(under.n),
            heaps: self.heaps.or(under.heaps),
            capacity: self.capacity.or(under.capacity),
            scrambled: self.scrambled.or(under.scrambled),
            rho0: self.rho0.or(under.rho0),
            noise_mode: self.noise_mode.or(under.noise_mode),
            feedback: self.feedback.or(under.feedback),
            batch_size: self.batch_size.or(under.batch_size),
            max_steps: self.max_steps.or(under.max_steps),
            success_threshold: self.success_threshold.or(under.success_threshold),
            eval_interval: self.eval_interval.or(under.eval_interval),
            test_set_size: self.test_set_size.or(under.test_set_size),
            lr: self.lr.or(under.lr),
            momentum: self.momentum.or(under.momentum),
            hidden_size: self.hidden_size.or(under.hidden_size),
            encoding: self.encoding.or(under.encoding),
            dataset_size: self.dataset_size.or(under.dataset_size),
            seed: self.seed.or(under.seed),
        }
    }

    /// Resolves the sampler spec. `default_length` feeds the length-like
    /// kinds when no explicit `n` was given (sweeps supply the first
    /// swept length); None means a length is mandatory.
    pub fn sampler_spec(&self, default_length: Option<usize>) -> Result<SamplerSpec> {
        let kind = self.sampler.unwrap_or(SamplerKindArg::LatentCurriculum);
        let length = || {
            self.n.or(default_length).ok_or_else(|| {
                anyhow!("this sampler needs a length: pass --n or set n in the config file")
            })
        };
        let spec = match kind {
            SamplerKindArg::Uniform01 => SamplerSpec::Uniform01 { n: length()? },
            SamplerKindArg::LatentCurriculum => SamplerSpec::LatentCurriculum { n: length()? },
            SamplerKindArg::VariableLength => SamplerSpec::VariableLength { max_n: length()? },
            SamplerKindArg::NimTrajectory => {
                let heaps = self
                    .heaps
                    .clone()
                    .ok_or_else(|| anyhow!("nim-trajectory needs --heaps (e.g. --heaps 5,5,5)"))?;
                let capacity = self
                    .capacity
                    .or_else(|| heaps.iter().copied().max())
                    .ok_or_else(|| anyhow!("nim-trajectory needs --capacity"))?;
                SamplerSpec::NimTrajectory {
                    heaps,
                    capacity,
                    scrambled: self.scrambled.unwrap_or(false),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The fully resolved training config.
    pub fn train_config(&self, default_length: Option<usize>) -> Result<TrainConfig> {
        let sampler = self.sampler_spec(default_length)?;
        let mut config =
            TrainConfig::new(sampler, self.rho0.unwrap_or(0.0), self.seed.unwrap_or(0));
        if let Some(v) = self.noise_mode {
            config.noise_mode = v.into();
        }
        if let Some(v) = self.feedback {
            config.feedback = v.into();
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.max_steps {
            config.max_steps = v;
        }
        if let Some(v) = self.success_threshold {
            config.success_threshold = v;
        }
        if let Some(v) = self.eval_interval {
            config.eval_interval = v;
        }
        if let Some(v) = self.test_set_size {
            config.test_set_size = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.momentum {
            config.momentum = v;
        }
        if let Some(v) = self.hidden_size {
            config.hidden_size = v;
        }
        if let Some(v) = self.encoding {
            config.encoding = v.into();
        }
        config.dataset_size = self.dataset_size;
        config.validate()?;
        Ok(config)
    }
}

/// Parses a plain key=value file: one pair per line, `#` comments and
/// blank lines ignored, keys matching the long flag names.
pub fn load_config_file(path: &Path) -> Result<Overlay> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        if pairs
            .insert(key.trim().to_string(), value.trim().to_string())
            .is_some()
        {
            bail!(
                "{}:{}: duplicate key {}",
                path.display(),
                lineno + 1,
                key.trim()
            );
        }
    }

    let mut overlay = Overlay::default();
    for (key, value) in &pairs {
        let fail = |what: &str| anyhow!("config key {key}: invalid {what}: {value}");
        match key.as_str() {
            "sampler" => {
                overlay.sampler =
                    Some(SamplerKindArg::from_str(value, true).map_err(|_| fail("sampler"))?)
            }
            "n" => overlay.n = Some(value.parse().map_err(|_| fail("integer"))?),
            "heaps" => overlay.heaps = Some(parse_u32_list(value)?),
            "capacity" => overlay.capacity = Some(value.parse().map_err(|_| fail("integer"))?),
            "scrambled" => overlay.scrambled = Some(value.parse().map_err(|_| fail("bool"))?),
            "rho0" => overlay.rho0 = Some(value.parse().map_err(|_| fail("number"))?),
            "noise_mode" => {
                overlay.noise_mode =
                    Some(NoiseModeArg::from_str(value, true).map_err(|_| fail("noise mode"))?)
            }
            "feedback" => {
                overlay.feedback =
                    Some(FeedbackArg::from_str(value, true).map_err(|_| fail("feedback"))?)
            }
            "batch_size" => overlay.batch_size = Some(value.parse().map_err(|_| fail("integer"))?),
            "max_steps" => overlay.max_steps = Some(value.parse().map_err(|_| fail("integer"))?),
            "success_threshold" => {
                overlay.success_threshold = Some(value.parse().map_err(|_| fail("number"))?)
            }
            "eval_interval" => {
                overlay.eval_interval = Some(value.parse().map_err(|_| fail("integer"))?)
            }
            "test_set_size" => {
                overlay.test_set_size = Some(value.parse().map_err(|_| fail("integer"))?)
            }
            "lr" => overlay.lr = Some(value.parse().map_err(|_| fail("number"))?),
            "momentum" => overlay.momentum = Some(value.parse().map_err(|_| fail("number"))?),
            "hidden_size" => {
                overlay.hidden_size = Some(value.parse().map_err(|_| fail("integer"))?)
            }
            "encoding" => {
                overlay.encoding =
                    Some(EncodingArg::from_str(value, true).map_err(|_| fail("encoding"))?)
            }
            "dataset_size" => {
                overlay.dataset_size = Some(value.parse().map_err(|_| fail("integer"))?)
            }
            "seed" => overlay.seed = Some(value.parse().map_err(|_| fail("integer"))?),
            other => bail!("config file {}: unknown key {other}", path.display()),
        }
    }
    Ok(overlay)
}

/// "3,5,7" -> [3, 5, 7]
pub fn parse_u32_list(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| anyhow!("invalid list entry: {part}"))
        })
        .collect()
}

/// "10,15,20" -> [10, 15, 20]
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("invalid list entry: {part}"))
        })
        .collect()
}

/// Seed lists come as either "1,2,3" or an inclusive range "1..10".
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| anyhow!("invalid range start: {lo}"))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| anyhow!("invalid range end: {hi}"))?;
        if lo > hi {
            bail!("empty seed range {lo}..{hi}");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| anyhow!("invalid seed: {part}"))
        })
        .collect()
}

/// Trit strings come as "1,0,-1" or "1 0 -1".
pub fn parse_trits(text: &str) -> Result<Vec<i8>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|part| !part.is_empty())
        .map(|part| {
            part.parse::<i8>()
                .map_err(|_| anyhow!("invalid trit: {part}"))
        })
        .collect()
}

/// Output directory: explicit flag, then NIMPARITY_OUT_DIR, then ./runs.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("NIMPARITY_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
