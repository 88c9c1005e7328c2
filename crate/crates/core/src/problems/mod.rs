//! Synthetic problems with closed-form objectives.
//!
//! Each problem is an exact [`Model`] (population objective or finite sum)
//! wrapped in a [`ProblemSpec`], which adds the configured [`NoiseModel`],
//! the declared [`AssumptionConstants`] and an initial point.

mod logistic;
mod mlp;
mod quadratic;
mod rosenbrock;
mod separable;

use serde::{Deserialize, Serialize};

pub use logistic::{make_logistic, Logistic};
pub use mlp::{make_mlp, make_mlp_with_input, Mlp};
pub use quadratic::{make_noisy_quadratic, quadratic, Quadratic};
pub use rosenbrock::{make_rosenbrock, make_rosenbrock_with_noise, Rosenbrock};
pub use separable::{make_separable_nonconvex, Separable};

use crate::error::{Error, Result};
use crate::oracle::{AssumptionConstants, NoiseModel, OracleSample, StochasticOracle};
use crate::rng::{RngStream, Stream};
use crate::vector::{dot, ParamVector};

/// Default half-width of the `‖x‖∞` box on which declared gradient bounds hold.
pub const DEFAULT_BOX: f64 = 10.0;

/// An exact smooth objective, optionally a finite sum of components.
///
/// `component = None` addresses the full objective `F`; `Some(i)` addresses
/// `f_i`. Population models (no finite sum) ignore the component.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of components for finite sums, `None` for population models.
    fn components(&self) -> Option<usize>;

    fn loss(&self, x: &[f64], component: Option<usize>) -> f64;

    fn grad(&self, x: &[f64], component: Option<usize>) -> Vec<f64>;

    fn hvp(&self, x: &[f64], component: Option<usize>, v: &[f64]) -> Vec<f64>;
}

/// A concrete problem instance, usable as a [`StochasticOracle`].
pub struct ProblemSpec {
    name: String,
    model: Box<dyn Model>,
    noise: NoiseModel,
    constants: AssumptionConstants,
    initial_point: ParamVector,
    feasible_box: Option<f64>,
    certified: bool,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.model.dim())
            .field("noise", &self.noise)
            .field("constants", &self.constants)
            .field("feasible_box", &self.feasible_box)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        model: Box<dyn Model>,
        noise: NoiseModel,
        constants: AssumptionConstants,
        initial_point: ParamVector,
    ) -> Self {
        ProblemSpec {
            name: name.into(),
            model,
            noise,
            constants,
            initial_point,
            feasible_box: None,
            certified: true,
        }
    }

    /// Declares that `grad_bound_g` only holds on `‖x‖∞ ≤ half_width`.
    pub fn with_box(mut self, half_width: f64) -> Self {
        self.feasible_box = Some(half_width);
        self
    }

    /// Marks the declared constants as numerical estimates.
    pub fn estimated(mut self) -> Self {
        self.certified = false;
        self
    }

    pub fn with_initial_point(mut self, x: ParamVector) -> Result<Self> {
        x.check_dim(self.model.dim())?;
        self.initial_point = x;
        Ok(self)
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn initial_point(&self) -> &ParamVector {
        &self.initial_point
    }

    pub fn feasible_box(&self) -> Option<f64> {
        self.feasible_box
    }

    /// `false` when the declared constants are estimates rather than proven bounds.
    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    pub fn in_box(&self, x: &ParamVector) -> bool {
        self.feasible_box.is_none_or(|b| x.max_abs() <= b)
    }

    fn check(&self, x: &ParamVector) -> Result<()> {
        x.check_dim(self.model.dim())
    }
}

impl StochasticOracle for ProblemSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn constants(&self) -> AssumptionConstants {
        self.constants
    }

    fn sample(&self, rng: &mut RngStream) -> OracleSample {
        let index = self.model.components().map(|n| rng.index(n));
        let (grad_noise, hess_shift) = self.noise.draw(self.model.dim(), rng);
        OracleSample {
            index,
            grad_noise,
            hess_shift,
        }
    }

    fn loss(&self, x: &ParamVector, z: &OracleSample) -> Result<f64> {
        self.check(x)?;
        let mut f = self.model.loss(x, component(&*self.model, z)?);
        if let Some(xi) = &z.grad_noise {
            f += dot(xi, x);
        }
        Ok(f)
    }

    fn grad(&self, x: &ParamVector, z: &OracleSample) -> Result<ParamVector> {
        self.check(x)?;
        let mut g = self.model.grad(x, component(&*self.model, z)?);
        if let Some(xi) = &z.grad_noise {
            g.iter_mut().zip(xi).for_each(|(g, n)| *g += n);
        }
        Ok(ParamVector::from_raw(g))
    }

    fn hvp(&self, x: &ParamVector, z: &OracleSample, v: &ParamVector) -> Result<ParamVector> {
        self.check(x)?;
        self.check(v)?;
        let mut h = self.model.hvp(x, component(&*self.model, z)?, v);
        if z.hess_shift != 0.0 {
            h.iter_mut().zip(v.iter()).for_each(|(h, v)| *h += z.hess_shift * v);
        }
        Ok(ParamVector::from_raw(h))
    }

    fn true_loss(&self, x: &ParamVector) -> Result<f64> {
        self.check(x)?;
        Ok(self.model.loss(x, None))
    }

    fn true_grad(&self, x: &ParamVector) -> Result<ParamVector> {
        self.check(x)?;
        Ok(ParamVector::from_raw(self.model.grad(x, None)))
    }

    fn true_hvp(&self, x: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        self.check(x)?;
        self.check(v)?;
        Ok(ParamVector::from_raw(self.model.hvp(x, None, v)))
    }
}

fn component(model: &dyn Model, z: &OracleSample) -> Result<Option<usize>> {
    match (model.components(), z.index) {
        (Some(n), Some(i)) if i < n => Ok(Some(i)),
        (Some(n), Some(i)) => Err(Error::invalid(format!("sample index {i} out of range 0..{n}"))),
        // a degenerate sample on a finite sum queries the full objective
        (Some(_), None) => Ok(None),
        (None, _) => Ok(None),
    }
}

/// Problem selection as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        dim: usize,
        #[serde(default = "one")]
        condition_number: f64,
        #[serde(default)]
        sigma_g: f64,
        #[serde(default)]
        data_seed: u64,
    },
    Separable {
        dim: usize,
        #[serde(default)]
        sigma_g: f64,
        #[serde(default)]
        sigma_h: f64,
    },
    Logistic {
        dim: usize,
        n_samples: usize,
        #[serde(default)]
        data_seed: u64,
    },
    Rosenbrock {
        #[serde(default)]
        sigma_g: f64,
        #[serde(default)]
        sigma_h: f64,
    },
    Mlp {
        hidden_width: usize,
        n_samples: usize,
        #[serde(default = "default_mlp_input")]
        input_dim: usize,
        #[serde(default)]
        data_seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_mlp_input() -> usize {
    3
}

impl ProblemConfig {
    /// Default instance for each name accepted by `check <problem>`.
    pub fn by_name(name: &str) -> Option<ProblemConfig> {
        Some(match name {
            "quadratic" => ProblemConfig::Quadratic {
                dim: 10,
                condition_number: 10.0,
                sigma_g: 1.0,
                data_seed: 0,
            },
            "separable" => ProblemConfig::Separable {
                dim: 20,
                sigma_g: 1.0,
                sigma_h: 0.5,
            },
            "logistic" => ProblemConfig::Logistic {
                dim: 10,
                n_samples: 200,
                data_seed: 0,
            },
            "rosenbrock" => ProblemConfig::Rosenbrock {
                sigma_g: 1.0,
                sigma_h: 0.0,
            },
            "mlp" => ProblemConfig::Mlp {
                hidden_width: 8,
                n_samples: 64,
                input_dim: 3,
                data_seed: 0,
            },
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 5] = ["quadratic", "separable", "logistic", "rosenbrock", "mlp"];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::Separable { .. } => "separable",
            ProblemConfig::Logistic { .. } => "logistic",
            ProblemConfig::Rosenbrock { .. } => "rosenbrock",
            ProblemConfig::Mlp { .. } => "mlp",
        }
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        match *self {
            ProblemConfig::Quadratic {
                dim,
                condition_number,
                sigma_g,
                data_seed,
            } => make_noisy_quadratic(
                dim,
                condition_number,
                sigma_g,
                &mut RngStream::new(data_seed, Stream::Problem),
            ),
            ProblemConfig::Separable { dim, sigma_g, sigma_h } => {
                make_separable_nonconvex(dim, sigma_g, sigma_h)
            }
            ProblemConfig::Logistic {
                dim,
                n_samples,
                data_seed,
            } => make_logistic(dim, n_samples, &mut RngStream::new(data_seed, Stream::Problem)),
            ProblemConfig::Rosenbrock { sigma_g, sigma_h } => make_rosenbrock_with_noise(sigma_g, sigma_h),
            ProblemConfig::Mlp {
                hidden_width,
                n_samples,
                input_dim,
                data_seed,
            } => make_mlp_with_input(
                hidden_width,
                n_samples,
                input_dim,
                &mut RngStream::new(data_seed, Stream::Problem),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_problem_builds() {
        for name in ProblemConfig::NAMES {
            let cfg = ProblemConfig::by_name(name).unwrap();
            assert_eq!(cfg.name(), name);
            let p = cfg.build().unwrap();
            p.constants().validate().unwrap();
            assert_eq!(p.initial_point().dim(), p.dim());
        }
        assert!(ProblemConfig::by_name("cifar").is_none());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = ProblemConfig::by_name("quadratic").unwrap().build().unwrap();
        let z = OracleSample::degenerate();
        let bad = ParamVector::zeros(3);
        assert!(matches!(p.grad(&bad, &z), Err(Error::DimensionMismatch { .. })));
        let x = ParamVector::zeros(p.dim());
        assert!(matches!(p.hvp(&x, &z, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn out_of_range_sample_index() {
        let p = ProblemConfig::by_name("logistic").unwrap().build().unwrap();
        let z = OracleSample {
            index: Some(10_000),
            grad_noise: None,
            hess_shift: 0.0,
        };
        assert!(p.grad(&ParamVector::zeros(p.dim()), &z).is_err());
    }

    #[test]
    fn datasets_regenerate_identically() {
        for name in ["quadratic", "logistic", "mlp"] {
            let cfg = ProblemConfig::by_name(name).unwrap();
            let a = cfg.build().unwrap();
            let b = cfg.build().unwrap();
            let mut rng = RngStream::new(9, Stream::Init);
            let x = ParamVector::from_raw(rng.normal_vec(a.dim(), 1.0));
            assert_eq!(a.true_loss(&x).unwrap().to_bits(), b.true_loss(&x).unwrap().to_bits());
            assert_eq!(a.initial_point(), b.initial_point());
        }
    }
}
