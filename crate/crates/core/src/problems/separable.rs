//! `F(x) = Σ φ(x_i - x*_i)` with `φ(u) = u² / (1 + u²)`.
//!
//! Bounded, smooth and non-convex (`φ'' < 0` for `|u| > 1/√3`), with a
//! unique global minimizer `x*`. Derivatives of the 1-D component:
//!
//! ```text
//! φ'(u)   = 2u / (1 + u²)²                 max |φ'|   = 9 / (8√3)      at u² = 1/3
//! φ''(u)  = (2 - 6u²) / (1 + u²)³          max |φ''|  = 2              at u = 0
//! φ'''(u) = 24u (u² - 1) / (1 + u²)⁴       max |φ'''| ≈ 4.66855928     at u² = 1 - 2/√5
//! ```
//!
//! The Hessian is diagonal, so `L = max|φ''|`, `ρ = max|φ'''|` and
//! `‖∇F‖ ≤ √d · max|φ'|` everywhere.

use super::{Model, ProblemSpec};
use crate::error::{Error, Result};
use crate::oracle::{AssumptionConstants, NoiseModel};
use crate::vector::ParamVector;

/// `max |φ'|`
pub const MAX_D1: f64 = 0.649_519_052_838_329;
/// `max |φ''|`
pub const MAX_D2: f64 = 2.0;
/// `max |φ'''|`
pub const MAX_D3: f64 = 4.668_559_284_155_213;

#[derive(Clone, Debug)]
pub struct Separable {
    minimizer: Vec<f64>,
}

impl Separable {
    pub fn new(minimizer: Vec<f64>) -> Self {
        Separable { minimizer }
    }

    /// `x*_i = 1.5 sin(i + 1)`.
    pub fn standard(dim: usize) -> Self {
        Separable::new((0..dim).map(|i| 1.5 * ((i + 1) as f64).sin()).collect())
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }
}

pub(crate) fn phi(u: f64) -> f64 {
    let u2 = u * u;
    u2 / (1.0 + u2)
}

pub(crate) fn phi_d1(u: f64) -> f64 {
    let q = 1.0 + u * u;
    2.0 * u / (q * q)
}

pub(crate) fn phi_d2(u: f64) -> f64 {
    let q = 1.0 + u * u;
    (2.0 - 6.0 * u * u) / (q * q * q)
}

impl Model for Separable {
    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn components(&self) -> Option<usize> {
        None
    }

    fn loss(&self, x: &[f64], _: Option<usize>) -> f64 {
        x.iter().zip(&self.minimizer).map(|(x, m)| phi(x - m)).sum()
    }

    fn grad(&self, x: &[f64], _: Option<usize>) -> Vec<f64> {
        x.iter().zip(&self.minimizer).map(|(x, m)| phi_d1(x - m)).collect()
    }

    fn hvp(&self, x: &[f64], _: Option<usize>, v: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.minimizer)
            .zip(v)
            .map(|((x, m), v)| phi_d2(x - m) * v)
            .collect()
    }
}

/// Separable non-convex problem started at the origin.
///
/// The gradient bound adds the noise envelope of [`NoiseModel`] to the exact
/// `√d · max|φ'|`; it holds on all of `R^d`.
pub fn make_separable_nonconvex(dim: usize, sigma_g: f64, sigma_h: f64) -> Result<ProblemSpec> {
    if dim == 0 {
        return Err(Error::invalid("dim must be >= 1"));
    }
    let model = Separable::standard(dim);
    let noise = NoiseModel::new(sigma_g, sigma_h)?;
    let x1 = ParamVector::zeros(dim);
    let constants = AssumptionConstants {
        delta: model.loss(&x1, None),
        lipschitz_l: MAX_D2,
        sigma_g,
        sigma_h,
        rho: MAX_D3,
        grad_bound_g: (dim as f64).sqrt() * MAX_D1 + noise.grad_noise_envelope(dim),
    };
    Ok(ProblemSpec::new("separable", Box::new(model), noise, constants, x1))
}
