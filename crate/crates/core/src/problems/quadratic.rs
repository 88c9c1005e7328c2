use super::{Model, ProblemSpec, DEFAULT_BOX};
use crate::error::{Error, Result};
use crate::oracle::{AssumptionConstants, NoiseModel};
use crate::rng::RngStream;
use crate::vector::{norm, ParamVector};

/// `F(x) = ½ xᵀ diag(a) x - bᵀx`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    diag: Vec<f64>,
    b: Vec<f64>,
}

impl Quadratic {
    pub fn new(diag: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if diag.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len(),
                got: b.len(),
            });
        }
        if diag.is_empty() || diag.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("quadratic needs a non-empty positive diagonal"));
        }
        Ok(Quadratic { diag, b })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn min_value(&self) -> f64 {
        -0.5 * self.diag.iter().zip(&self.b).map(|(a, b)| b * b / a).sum::<f64>()
    }
}

impl Model for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn components(&self) -> Option<usize> {
        None
    }

    fn loss(&self, x: &[f64], _: Option<usize>) -> f64 {
        x.iter()
            .zip(&self.diag)
            .zip(&self.b)
            .map(|((x, a), b)| 0.5 * a * x * x - b * x)
            .sum()
    }

    fn grad(&self, x: &[f64], _: Option<usize>) -> Vec<f64> {
        x.iter().zip(&self.diag).zip(&self.b).map(|((x, a), b)| a * x - b).collect()
    }

    fn hvp(&self, _x: &[f64], _: Option<usize>, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.diag).map(|(v, a)| a * v).collect()
    }
}

/// Quadratic from an explicit diagonal and linear term, started at the origin.
///
/// Declares `L = max a_i`, `ρ = 0`, `σ_H = 0`, `Δ = F(0) - F*` and a gradient
/// bound valid on the default `‖x‖∞ ≤ 10` box (plus a noise envelope).
pub fn quadratic(diag: Vec<f64>, b: Vec<f64>, sigma_g: f64) -> Result<ProblemSpec> {
    let model = Quadratic::new(diag, b)?;
    let noise = NoiseModel::new(sigma_g, 0.0)?;
    let dim = model.dim();
    let x1 = ParamVector::zeros(dim);
    let delta = model.loss(&x1, None) - model.min_value();
    let lipschitz_l = model.diag.iter().fold(0.0_f64, |m, a| m.max(*a));
    let grad_bound_g =
        DEFAULT_BOX * norm(&model.diag) + norm(&model.b) + noise.grad_noise_envelope(dim);
    let constants = AssumptionConstants {
        delta,
        lipschitz_l,
        sigma_g,
        sigma_h: 0.0,
        rho: 0.0,
        grad_bound_g: grad_bound_g.max(f64::MIN_POSITIVE),
    };
    Ok(ProblemSpec::new("quadratic", Box::new(model), noise, constants, x1).with_box(DEFAULT_BOX))
}

/// Diagonal spectrum log-spaced in `[1, condition_number]`, `b ~ N(0, I)`.
pub fn make_noisy_quadratic(
    dim: usize,
    condition_number: f64,
    sigma_g: f64,
    rng: &mut RngStream,
) -> Result<ProblemSpec> {
    if dim == 0 {
        return Err(Error::invalid("dim must be >= 1"));
    }
    if !(condition_number >= 1.0 && condition_number.is_finite()) {
        return Err(Error::invalid(format!(
            "condition_number must be >= 1, got {condition_number}"
        )));
    }
    let diag: Vec<f64> = if dim == 1 {
        vec![condition_number]
    } else {
        (0..dim)
            .map(|i| condition_number.powf(i as f64 / (dim - 1) as f64))
            .collect()
    };
    let b = rng.normal_vec(dim, 1.0);
    quadratic(diag, b, sigma_g)
}
