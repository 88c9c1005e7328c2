//! Run configuration, stored as TOML.
//!
//! ```toml
//! seed = 7
//! horizon = 1000
//! trace_every = 1
//! iterate_mode = "last"
//!
//! [problem]
//! kind = "separable"
//! dim = 20
//! sigma_g = 1.0
//! sigma_h = 0.5
//!
//! [optimizer]
//! algorithm = "sgdhess"
//! schedule = "theorem1"
//!
//! [output]
//! dir = "out/separable"
//! ```
//!
//! Any schedule constant may be pinned in `[optimizer]` (`eta`, `alpha`,
//! `rate_c`, `k`, `clip_g`, `adaptive_c`, `adaptive_w`, `decay_every`,
//! `decay_factor`); the rest are derived from the problem's constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::Algorithm;
use crate::oracle::AssumptionConstants;
use crate::problems::ProblemConfig;
use crate::schedules::{ScheduleParams, ScheduleVariant};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SGDHESS_OUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterateMode {
    /// `x̂` drawn uniformly from `x_1, …, x_T`.
    UniformRandom,
    /// `x̂ = x_T`.
    #[default]
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon: usize,
    /// Defaults to 1 for `d ≤ 100` and 10 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<usize>,
    #[serde(default)]
    pub iterate_mode: IterateMode,
    pub problem: ProblemConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Defaults: `theorem1` for sgdhess, `normalized` for nsgdhess,
    /// `adaptive` for adasgdhess, `manual` for the baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_factor: Option<f64>,
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        OptimizerConfig {
            algorithm,
            schedule: None,
            eta: None,
            alpha: None,
            rate_c: None,
            k: None,
            clip_g: None,
            adaptive_c: None,
            adaptive_w: None,
            decay_every: None,
            decay_factor: None,
        }
    }

    pub fn with_schedule(mut self, schedule: ScheduleVariant) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn schedule_variant(&self) -> ScheduleVariant {
        self.schedule.unwrap_or(match self.algorithm {
            Algorithm::Sgdhess => ScheduleVariant::Theorem1,
            Algorithm::Nsgdhess => ScheduleVariant::Normalized,
            Algorithm::Adasgdhess => ScheduleVariant::Adaptive,
            Algorithm::SgdMomentum | Algorithm::GradDiff => ScheduleVariant::Manual,
        })
    }

    /// Derives the schedule from `consts` and applies the pinned values.
    pub fn resolve(&self, consts: &AssumptionConstants, horizon: usize) -> Result<ScheduleParams> {
        let variant = self.schedule_variant();
        match (self.algorithm, variant) {
            (Algorithm::Adasgdhess, ScheduleVariant::Adaptive) => {}
            (Algorithm::Adasgdhess, v) => {
                return Err(Error::Config(format!("adasgdhess needs schedule = \"adaptive\", got {v:?}")))
            }
            (a, ScheduleVariant::Adaptive) => {
                return Err(Error::Config(format!("schedule \"adaptive\" is only valid for adasgdhess, not {}", a.name())))
            }
            _ => {}
        }
        let mut p = match variant {
            ScheduleVariant::Theorem1 => ScheduleParams::theorem1(consts, horizon),
            ScheduleVariant::Adaptive => ScheduleParams::adaptive(consts, horizon),
            ScheduleVariant::Normalized if self.eta.is_some() && self.alpha.is_some() => ScheduleParams {
                variant,
                ..ScheduleParams::manual(f64::NAN, f64::NAN, horizon)
            },
            ScheduleVariant::Normalized => ScheduleParams::normalized(consts, horizon)?,
            ScheduleVariant::Manual => ScheduleParams::manual(f64::NAN, f64::NAN, horizon),
        };
        macro_rules! pin {
            ($($f:ident),*) => {$(if self.$f.is_some() { p.$f = self.$f; })*};
        }
        pin!(eta, alpha, rate_c, k, clip_g, adaptive_c, adaptive_w, decay_every, decay_factor);
        if variant == ScheduleVariant::Manual && (self.eta.is_none() || self.alpha.is_none()) {
            return Err(Error::Config("schedule \"manual\" needs both eta and alpha".into()));
        }
        // only the clipping methods clip
        if !self.algorithm.clips() {
            p.clip_g = None;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for all outputs. Falls back to `$SGDHESS_OUT_DIR`, then `out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    /// Write an SVG plot next to the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
}

impl OutputConfig {
    pub fn dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn trace_path(&self) -> PathBuf {
        self.dir().join(self.trace.as_deref().unwrap_or("trace.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir().join(self.summary.as_deref().unwrap_or("summary.json"))
    }

    pub fn plot_path(&self) -> Option<PathBuf> {
        self.plot.as_deref().map(|p| self.dir().join(p))
    }
}

impl RunConfig {
    pub fn new(problem: ProblemConfig, optimizer: OptimizerConfig, horizon: usize, seed: u64) -> Self {
        RunConfig {
            seed,
            horizon,
            trace_every: None,
            iterate_mode: IterateMode::Last,
            problem,
            optimizer,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.trace_every == Some(0) {
            return Err(Error::Config("trace_every must be >= 1".into()));
        }
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be <= {}", i64::MAX)));
        }
        Ok(())
    }

    /// Stride of exact-gradient evaluation.
    pub fn trace_stride(&self, dim: usize) -> usize {
        self.trace_every.unwrap_or(if dim <= 100 { 1 } else { 10 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
horizon = 1000
trace_every = 1
iterate_mode = "uniform_random"

[problem]
kind = "separable"
dim = 20
sigma_g = 1.0
sigma_h = 0.5

[optimizer]
algorithm = "sgdhess"
schedule = "theorem1"
clip_g = 4.5

[output]
dir = "out/separable"
"#;

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.optimizer.clip_g, Some(4.5));
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn awkward_floats_survive_round_trip() {
        let mut cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        cfg.optimizer.eta = Some(0.1 + 0.2);
        cfg.optimizer.alpha = Some(1e-300);
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again.optimizer.eta.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_field_is_reported_with_location() {
        let bad = EXAMPLE.replace("clip_g = 4.5", "clip = 4.5");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("clip"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn schedule_defaults_and_pins() {
        let consts = ProblemConfig::by_name("separable").unwrap().build().unwrap();
        let c = crate::oracle::StochasticOracle::constants(&consts);
        let mut opt = OptimizerConfig::new(Algorithm::Sgdhess);
        let p = opt.resolve(&c, 100).unwrap();
        assert_eq!(p.variant, ScheduleVariant::Theorem1);
        assert_eq!(p.clip_g, Some(c.grad_bound_g));
        opt.rate_c = Some(50.0);
        assert_eq!(opt.resolve(&c, 100).unwrap().rate_c, Some(50.0));

        let opt = OptimizerConfig::new(Algorithm::SgdMomentum);
        assert!(opt.resolve(&c, 100).is_err());
        let opt = OptimizerConfig {
            eta: Some(0.01),
            alpha: Some(0.1),
            ..OptimizerConfig::new(Algorithm::SgdMomentum)
        };
        let p = opt.resolve(&c, 100).unwrap();
        assert_eq!((p.eta, p.alpha, p.clip_g), (Some(0.01), Some(0.1), None));

        let opt = OptimizerConfig::new(Algorithm::Sgdhess).with_schedule(ScheduleVariant::Adaptive);
        assert!(opt.resolve(&c, 100).is_err());
    }

    #[test]
    fn zero_horizon_and_stride_rejected() {
        assert!(RunConfig::from_toml(&EXAMPLE.replace("horizon = 1000", "horizon = 0")).is_err());
        assert!(RunConfig::from_toml(&EXAMPLE.replace("trace_every = 1", "trace_every = 0")).is_err());
    }
}
