//! TOML run configuration shared by the command-line subcommands.
//!
//! ```toml
//! dataset = "data/manifest.txt"   # relative to this file
//! output_dir = "out"
//! metric = "lem"
//! target_dim = 5
//! vb = 2
//! vw = 4            # optional, defaults to the smallest class size
//! beta = "auto"     # or a positive number
//! seed = 0
//!
//! [optimizer]
//! max_iters = 50
//!
//! [eval]
//! repeats = 10
//! train_fraction = 0.5
//! k = 1
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::pipeline::TrainConfig;
use crate::spd::MetricKind;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BetaMode {
    /// `β = 1/σ²` from the mean pairwise distance of the training set.
    #[default]
    Auto,
    Explicit(f64),
}

impl BetaMode {
    pub fn as_option(self) -> Option<f64> {
        match self {
            BetaMode::Auto => None,
            BetaMode::Explicit(b) => Some(b),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BetaMode::Auto);
        }
        let b: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("beta: expected \"auto\" or a positive number, got '{s}'")))?;
        if b > 0.0 && b.is_finite() {
            Ok(BetaMode::Explicit(b))
        } else {
            Err(Error::InvalidConfig(format!("beta: must be positive, got {b}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub repeats: usize,
    pub train_fraction: f64,
    pub k: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            repeats: 10,
            train_fraction: 0.5,
            k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub metric: MetricKind,
    /// Required before training; there is no sensible default.
    pub target_dim: Option<usize>,
    pub v_w: Option<usize>,
    pub v_b: usize,
    pub beta: BetaMode,
    pub optimizer: OptimizerConfig,
    pub eval: EvalSettings,
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Seeds initialization and splits; overrides `optimizer.seed`.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: MetricKind::Aim,
            target_dim: None,
            v_w: None,
            v_b: 1,
            beta: BetaMode::Auto,
            optimizer: OptimizerConfig::default(),
            eval: EvalSettings::default(),
            dataset: None,
            output_dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawBeta {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    metric: Option<String>,
    target_dim: Option<usize>,
    vw: Option<usize>,
    vb: Option<usize>,
    beta: Option<RawBeta>,
    seed: Option<u64>,
    dataset: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    optimizer: OptimizerConfig,
    #[serde(default)]
    eval: EvalSettings,
}

impl RunConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {}", origin.display(), e.to_string().trim_end())))?;
        let field = |name: &str, e: Error| Error::InvalidConfig(format!("{}: {name}: {e}", origin.display()));

        let mut cfg = RunConfig::default();
        if let Some(m) = raw.metric {
            cfg.metric = m.parse().map_err(|e| field("metric", e))?;
        }
        cfg.target_dim = raw.target_dim;
        cfg.v_w = raw.vw;
        if let Some(vb) = raw.vb {
            cfg.v_b = vb;
        }
        cfg.beta = match raw.beta {
            None => BetaMode::Auto,
            Some(RawBeta::Number(b)) => BetaMode::parse(&b.to_string()).map_err(|e| field("beta", e))?,
            Some(RawBeta::Text(s)) => BetaMode::parse(&s).map_err(|e| field("beta", e))?,
        };
        cfg.seed = raw.seed.unwrap_or(0);
        cfg.optimizer = raw.optimizer;
        cfg.eval = raw.eval;
        cfg.dataset = raw.dataset.map(|p| base_dir.join(p));
        cfg.output_dir = raw.output_dir.map(|p| base_dir.join(p));
        cfg.validate().map_err(|e| Error::InvalidConfig(format!("{}: {e}", origin.display())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml_str(&text, base, path)
    }

    /// Field-level checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.target_dim == Some(0) {
            return Err(Error::InvalidConfig("target_dim: must be at least 1".into()));
        }
        if self.v_w == Some(0) {
            return Err(Error::InvalidConfig("vw: must be at least 1".into()));
        }
        if self.v_b == 0 {
            return Err(Error::InvalidConfig("vb: must be at least 1".into()));
        }
        if self.eval.repeats == 0 {
            return Err(Error::InvalidConfig("eval.repeats: must be at least 1".into()));
        }
        if !(self.eval.train_fraction > 0.0 && self.eval.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eval.train_fraction: must lie in (0, 1), got {}",
                self.eval.train_fraction
            )));
        }
        if self.eval.k == 0 {
            return Err(Error::InvalidConfig("eval.k: must be at least 1".into()));
        }
        if let Some(ds) = &self.dataset {
            if !ds.is_file() {
                return Err(Error::InvalidConfig(format!("dataset: '{}' does not exist", ds.display())));
            }
        }
        self.optimizer.validate()
    }

    /// Training settings, checked against the dataset dimension `n`.
    pub fn train_config(&self, n: usize) -> Result<TrainConfig> {
        let m = self
            .target_dim
            .ok_or_else(|| Error::InvalidConfig("target_dim: required (set it in the config or with --target-dim)".into()))?;
        if m >= n {
            return Err(Error::InvalidConfig(format!(
                "target_dim: must be smaller than the SPD dimension n = {n}, got {m}"
            )));
        }
        Ok(TrainConfig {
            metric: self.metric,
            target_dim: m,
            v_w: self.v_w,
            v_b: self.v_b,
            beta: self.beta.as_option(),
            optimizer: OptimizerConfig {
                seed: self.seed,
                ..self.optimizer.clone()
            },
        })
    }
}
