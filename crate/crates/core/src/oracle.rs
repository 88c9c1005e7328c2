//! The stochastic first/second-order oracle contract.
//!
//! An oracle answers three kinds of queries at a sample `z`:
//! the sampled loss `f(x, z)`, the sampled gradient `∇f(x, z)` and the sampled
//! Hessian-vector product `∇²f(x, z) v`. Samples are plain values, so the same
//! `z` can be replayed at several points (the gradient-difference baseline
//! needs `∇f(x_t, z_t)` and `∇f(x_{t-1}, z_t)`).
//!
//! Synthetic oracles also expose the exact objective `F`, `∇F` and `∇²F v`.
//! Those feed the traces only; optimizers never see them.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::ParamVector;

/// Problem constants appearing in the convergence guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConstants {
    /// Initial suboptimality `F(x_1) - inf F`.
    pub delta: f64,
    /// Smoothness of `F`.
    pub lipschitz_l: f64,
    /// Gradient noise: `E‖∇f(x,z) - ∇F(x)‖² ≤ σ_G²`.
    pub sigma_g: f64,
    /// Hessian-vector noise: `E‖(∇²f(x,z) - ∇²F(x))w‖² ≤ σ_H²‖w‖²`.
    pub sigma_h: f64,
    /// Lipschitz constant of the Hessian.
    pub rho: f64,
    /// Bound on sampled gradient norms.
    pub grad_bound_g: f64,
}

impl AssumptionConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta, false),
            ("lipschitz_l", self.lipschitz_l, true),
            ("sigma_g", self.sigma_g, false),
            ("sigma_h", self.sigma_h, false),
            ("rho", self.rho, false),
            ("grad_bound_g", self.grad_bound_g, true),
        ];
        for (name, value, strict) in fields {
            if !value.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {value}")));
            }
            if (strict && value <= 0.0) || value < 0.0 {
                let bound = if strict { "> 0" } else { ">= 0" };
                return Err(Error::invalid(format!("{name} must be {bound}, got {value}")));
            }
        }
        Ok(())
    }
}

/// Additive noise channels layered on top of an exact model.
///
/// * gradient: `ξ ~ N(0, (σ_G²/d) I)`, so `E‖ξ‖² = σ_G²` exactly;
/// * Hessian: `s ~ Uniform(-σ_H, σ_H)` and the HVP becomes `(∇²f + sI) v`,
///   so the HVP noise has norm `|s|‖v‖ ≤ σ_H‖v‖` for every sample.
///
/// The Hessian channel is not the derivative of the gradient channel; the two
/// are drawn independently per sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_g: f64,
    pub sigma_h: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma_g: 0.0,
        sigma_h: 0.0,
    };

    pub fn new(sigma_g: f64, sigma_h: f64) -> Result<Self> {
        if !(sigma_g >= 0.0 && sigma_g.is_finite() && sigma_h >= 0.0 && sigma_h.is_finite()) {
            return Err(Error::invalid(format!(
                "noise levels must be finite and >= 0 (sigma_g={sigma_g}, sigma_h={sigma_h})"
            )));
        }
        Ok(NoiseModel { sigma_g, sigma_h })
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_g == 0.0 && self.sigma_h == 0.0
    }

    /// Draws the noise part of a sample. Noiseless channels consume no randomness.
    pub fn draw(&self, dim: usize, rng: &mut RngStream) -> (Option<Vec<f64>>, f64) {
        let xi = (self.sigma_g > 0.0).then(|| rng.normal_vec(dim, self.sigma_g / (dim as f64).sqrt()));
        let shift = if self.sigma_h > 0.0 {
            rng.uniform_in(-self.sigma_h, self.sigma_h)
        } else {
            0.0
        };
        (xi, shift)
    }

    /// A high-probability envelope on `‖ξ‖`: six standard deviations of the
    /// chi distribution above its mean, `σ_G (1 + 6/√(2d))`.
    pub fn grad_noise_envelope(&self, dim: usize) -> f64 {
        self.sigma_g * (1.0 + 6.0 / (2.0 * dim as f64).sqrt())
    }
}

/// One draw `z ~ P_z`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSample {
    /// Component index for finite-sum problems (`None` = population objective).
    pub index: Option<usize>,
    /// Additive gradient noise `ξ`.
    pub grad_noise: Option<Vec<f64>>,
    /// Hessian shift `s`.
    pub hess_shift: f64,
}

impl OracleSample {
    /// The sample carrying no randomness at all.
    pub fn degenerate() -> Self {
        OracleSample {
            index: None,
            grad_noise: None,
            hess_shift: 0.0,
        }
    }

    /// Same component, noise channels removed.
    pub fn structural(&self) -> Self {
        OracleSample {
            index: self.index,
            grad_noise: None,
            hess_shift: 0.0,
        }
    }
}

pub trait StochasticOracle: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn constants(&self) -> AssumptionConstants;

    fn sample(&self, rng: &mut RngStream) -> OracleSample;

    /// Sampled loss `f(x, z)`. Includes the linear term `⟨ξ, x⟩` so that its
    /// gradient is exactly [`StochasticOracle::grad`].
    fn loss(&self, x: &ParamVector, z: &OracleSample) -> Result<f64>;

    fn grad(&self, x: &ParamVector, z: &OracleSample) -> Result<ParamVector>;

    fn hvp(&self, x: &ParamVector, z: &OracleSample, v: &ParamVector) -> Result<ParamVector>;

    fn true_loss(&self, _x: &ParamVector) -> Result<f64> {
        Err(Error::NoReference(self.name().to_string()))
    }

    fn true_grad(&self, _x: &ParamVector) -> Result<ParamVector> {
        Err(Error::NoReference(self.name().to_string()))
    }

    fn true_hvp(&self, _x: &ParamVector, _v: &ParamVector) -> Result<ParamVector> {
        Err(Error::NoReference(self.name().to_string()))
    }
}

impl<T: StochasticOracle + ?Sized> StochasticOracle for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn constants(&self) -> AssumptionConstants {
        (**self).constants()
    }
    fn sample(&self, rng: &mut RngStream) -> OracleSample {
        (**self).sample(rng)
    }
    fn loss(&self, x: &ParamVector, z: &OracleSample) -> Result<f64> {
        (**self).loss(x, z)
    }
    fn grad(&self, x: &ParamVector, z: &OracleSample) -> Result<ParamVector> {
        (**self).grad(x, z)
    }
    fn hvp(&self, x: &ParamVector, z: &OracleSample, v: &ParamVector) -> Result<ParamVector> {
        (**self).hvp(x, z, v)
    }
    fn true_loss(&self, x: &ParamVector) -> Result<f64> {
        (**self).true_loss(x)
    }
    fn true_grad(&self, x: &ParamVector) -> Result<ParamVector> {
        (**self).true_grad(x)
    }
    fn true_hvp(&self, x: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        (**self).true_hvp(x, v)
    }
}

/// Counts stochastic grad/HVP queries. Reference queries are not counted.
pub struct CountingOracle<O> {
    inner: O,
    grads: AtomicU64,
    hvps: AtomicU64,
}

impl<O: StochasticOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            grads: AtomicU64::new(0),
            hvps: AtomicU64::new(0),
        }
    }

    pub fn grad_calls(&self) -> u64 {
        self.grads.load(Ordering::Relaxed)
    }

    pub fn hvp_calls(&self) -> u64 {
        self.hvps.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: StochasticOracle> StochasticOracle for CountingOracle<O> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn constants(&self) -> AssumptionConstants {
        self.inner.constants()
    }
    fn sample(&self, rng: &mut RngStream) -> OracleSample {
        self.inner.sample(rng)
    }
    fn loss(&self, x: &ParamVector, z: &OracleSample) -> Result<f64> {
        self.inner.loss(x, z)
    }
    fn grad(&self, x: &ParamVector, z: &OracleSample) -> Result<ParamVector> {
        self.grads.fetch_add(1, Ordering::Relaxed);
        self.inner.grad(x, z)
    }
    fn hvp(&self, x: &ParamVector, z: &OracleSample, v: &ParamVector) -> Result<ParamVector> {
        self.hvps.fetch_add(1, Ordering::Relaxed);
        self.inner.hvp(x, z, v)
    }
    fn true_loss(&self, x: &ParamVector) -> Result<f64> {
        self.inner.true_loss(x)
    }
    fn true_grad(&self, x: &ParamVector) -> Result<ParamVector> {
        self.inner.true_grad(x)
    }
    fn true_hvp(&self, x: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        self.inner.true_hvp(x, v)
    }
}

/// Outcome of a finite-difference comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub eps: f64,
    pub passed: bool,
}

/// Step size `1e-5 (1 + ‖x‖)`.
pub fn default_fd_eps(x: &ParamVector) -> f64 {
    1e-5 * (1.0 + x.norm())
}

/// Max over coordinates of `|a_i - n_i| / max(|a_i|, |n_i|, 0.01 ‖n‖_∞)`.
///
/// The floor keeps coordinates that are tiny relative to the rest of the
/// vector from amplifying round-off.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric
        .iter()
        .chain(analytic)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = (1e-2 * scale).max(f64::MIN_POSITIVE);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of the sampled loss.
pub fn fd_grad<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    z: &OracleSample,
    eps: f64,
) -> Result<ParamVector> {
    x.check_dim(oracle.dim())?;
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        probe[i] = x[i] + eps;
        let plus = oracle.loss(&probe, z)?;
        probe[i] = x[i] - eps;
        let minus = oracle.loss(&probe, z)?;
        probe[i] = x[i];
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(ParamVector::from_raw(out))
}

/// Central-difference HVP: `(∇f(x + εv, z) - ∇f(x - εv, z)) / 2ε`.
pub fn fd_hvp<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    z: &OracleSample,
    v: &ParamVector,
    eps: f64,
) -> Result<ParamVector> {
    x.check_dim(oracle.dim())?;
    v.check_dim(oracle.dim())?;
    let plus = oracle.grad(&x.add(&v.scaled(eps)), z)?;
    let minus = oracle.grad(&x.sub(&v.scaled(eps)), z)?;
    Ok(plus.sub(&minus).scaled(0.5 / eps))
}

pub fn fd_check_grad<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    z: &OracleSample,
    eps: f64,
    tolerance: f64,
) -> Result<FdReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("fd step must be > 0, got {eps}")));
    }
    let analytic = oracle.grad(x, z)?;
    let numeric = fd_grad(oracle, x, z, eps)?;
    Ok(report(&analytic, &numeric, eps, tolerance))
}

/// Checks `hvp(x, z, v)` against differences of `grad(·, z)`.
///
/// Only the structural part of a sample is differentiable: the Hessian
/// noise channel of [`NoiseModel`] is not the derivative of anything, so
/// callers pass `z.structural()` when `σ_H > 0`.
pub fn fd_check_hvp<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    z: &OracleSample,
    v: &ParamVector,
    eps: f64,
    tolerance: f64,
) -> Result<FdReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("fd step must be > 0, got {eps}")));
    }
    let analytic = oracle.hvp(x, z, v)?;
    let numeric = fd_hvp(oracle, x, z, v, eps)?;
    Ok(report(&analytic, &numeric, eps, tolerance))
}

/// Reference-gradient check: `true_grad` against differences of `true_loss`.
pub fn fd_check_true_grad<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    eps: f64,
    tolerance: f64,
) -> Result<FdReport> {
    let analytic = oracle.true_grad(x)?;
    let mut probe = x.clone();
    let mut numeric = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        probe[i] = x[i] + eps;
        let plus = oracle.true_loss(&probe)?;
        probe[i] = x[i] - eps;
        let minus = oracle.true_loss(&probe)?;
        probe[i] = x[i];
        numeric.push((plus - minus) / (2.0 * eps));
    }
    Ok(report(&analytic, &numeric, eps, tolerance))
}

fn report(analytic: &[f64], numeric: &[f64], eps: f64, tolerance: f64) -> FdReport {
    let max_rel_err = max_relative_error(analytic, numeric);
    FdReport {
        max_rel_err,
        tolerance,
        eps,
        passed: max_rel_err <= tolerance,
    }
}

/// Largest eigenvalue of `∇²F(x)` by power iteration on reference HVPs.
pub fn power_iteration<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &ParamVector,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let mut v = ParamVector::from_raw(rng.normal_vec(oracle.dim(), 1.0));
    let n = v.norm();
    v.scale(1.0 / n);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let hv = oracle.true_hvp(x, &v)?;
        lambda = v.dot(&hv);
        let n = hv.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        v = hv.scaled(1.0 / n);
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn constants_validation() {
        let ok = AssumptionConstants {
            delta: 1.0,
            lipschitz_l: 1.0,
            sigma_g: 0.0,
            sigma_h: 0.0,
            rho: 0.0,
            grad_bound_g: 1.0,
        };
        assert!(ok.validate().is_ok());
        assert!(AssumptionConstants { lipschitz_l: 0.0, ..ok }.validate().is_err());
        assert!(AssumptionConstants { rho: -1.0, ..ok }.validate().is_err());
        assert!(AssumptionConstants { delta: f64::NAN, ..ok }.validate().is_err());
    }

    #[test]
    fn noiseless_draw_consumes_nothing() {
        let mut a = RngStream::new(3, Stream::Sampling);
        let b = a.clone();
        let (xi, s) = NoiseModel::NONE.draw(5, &mut a);
        assert!(xi.is_none());
        assert_eq!(s, 0.0);
        let mut a2 = a;
        let mut b2 = b;
        assert_eq!(a2.uniform(), b2.uniform());
    }

    #[test]
    fn hessian_shift_is_bounded() {
        let noise = NoiseModel::new(0.0, 0.3).unwrap();
        let mut rng = RngStream::new(1, Stream::Sampling);
        for _ in 0..10_000 {
            let (_, s) = noise.draw(3, &mut rng);
            assert!(s.abs() <= 0.3);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(max_relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(max_relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        // 1e-12 off in a coordinate that is 1e-9 of the scale: floor applies
        let e = max_relative_error(&[1.0, 1e-9], &[1.0, 1e-9 + 1e-12]);
        assert!(e < 1e-9);
        assert!((max_relative_error(&[2.0], &[1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_noise_rejected() {
        assert!(NoiseModel::new(-1.0, 0.0).is_err());
        assert!(NoiseModel::new(0.0, f64::INFINITY).is_err());
    }
}
