//! Stepping rules.
//!
//! All Hessian-corrected variants share the momentum update
//!
//! ```text
//! ĝ_t = (1 - α_{t-1}) (ĝ_{t-1} + ∇²f(x_t, z_t)(x_t - x_{t-1})) + α_{t-1} ∇f(x_t, z_t)
//! ```
//!
//! and differ in what they do with `ĝ_t`: the clipped method rescales it to
//! norm at most `G` and steps `-η_t ĝ_t`; the normalized method steps
//! `-η ĝ_t / ‖ĝ_t‖`; the adaptive method clips like the first but picks
//! `η_t` from the running sum of squared stochastic gradient norms.
//!
//! The first step is the same update with `x_0 = x_1`, `ĝ_0 = 0` and weight
//! `1`, so it reduces to `ĝ_1 = ∇f(x_1, z_1)` while still issuing one HVP
//! (along the zero displacement). Every Hessian-corrected step therefore costs
//! exactly one gradient and one HVP query.
//!
//! Momentum weights are passed explicitly: the step at `t` receives `α_{t-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::StochasticOracle;
use crate::rng::RngStream;
use crate::schedules::{adaptive_eta, alpha_from_etas, AdaptiveAccumulator};
use crate::vector::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Clipped SGD with Hessian-corrected momentum.
    Sgdhess,
    /// Normalized SGD with Hessian-corrected momentum.
    Nsgdhess,
    /// Clipped, with adaptive step sizes.
    Adasgdhess,
    /// Plain exponential-average momentum.
    SgdMomentum,
    /// Momentum corrected by `∇f(x_t, z_t) - ∇f(x_{t-1}, z_t)`.
    GradDiff,
}

impl Algorithm {
    pub fn uses_hvp(self) -> bool {
        matches!(self, Algorithm::Sgdhess | Algorithm::Nsgdhess | Algorithm::Adasgdhess)
    }

    pub fn clips(self) -> bool {
        matches!(self, Algorithm::Sgdhess | Algorithm::Adasgdhess)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgdhess => "sgdhess",
            Algorithm::Nsgdhess => "nsgdhess",
            Algorithm::Adasgdhess => "adasgdhess",
            Algorithm::SgdMomentum => "sgd_momentum",
            Algorithm::GradDiff => "grad_diff",
        }
    }
}

/// Mutable per-run optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    /// Current iterate `x_t` (the next point to be stepped from).
    pub x: ParamVector,
    /// Previous iterate `x_{t-1}`.
    pub x_prev: ParamVector,
    /// Momentum estimate, stored after clipping where the method clips.
    pub g_hat: ParamVector,
    /// Number of completed steps.
    pub t: usize,
    pub acc: AdaptiveAccumulator,
    pub clipped_last: bool,
    /// `η` used by the last step; the adaptive method needs `η_{t-1}`.
    pub last_eta: f64,
}

impl OptimizerState {
    pub fn new(x1: ParamVector) -> Self {
        let d = x1.dim();
        OptimizerState {
            x_prev: x1.clone(),
            x: x1,
            g_hat: ParamVector::zeros(d),
            t: 0,
            acc: AdaptiveAccumulator::new(),
            clipped_last: false,
            last_eta: f64::NAN,
        }
    }
}

/// What one step did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Index of the iterate the step started from.
    pub t: usize,
    pub eta: f64,
    /// Momentum weight applied when forming `ĝ_t`.
    pub alpha: f64,
    pub clipped: bool,
    /// Normalized method only: `ĝ_t = 0`, no movement.
    pub zero_step: bool,
    /// Norm of the applied update.
    pub step_norm: f64,
    /// `‖∇f(x_t, z_t)‖`
    pub sample_grad_norm: f64,
}

/// Rescales `g` to norm `threshold` when it is longer; `‖g‖ = threshold` is kept as is.
pub fn clip(g: &ParamVector, threshold: f64) -> (ParamVector, bool) {
    let n = g.norm();
    if n <= threshold {
        (g.clone(), false)
    } else {
        (g.scaled(threshold / n), true)
    }
}

/// `(1 - α)(ĝ_{t-1} + H (x_t - x_{t-1})) + α g`, one grad and one HVP query.
fn corrected_estimate<O: StochasticOracle + ?Sized>(
    state: &OptimizerState,
    oracle: &O,
    z: &crate::oracle::OracleSample,
    alpha: f64,
) -> Result<(ParamVector, f64)> {
    let grad = oracle.grad(&state.x, z)?;
    let displacement = state.x.sub(&state.x_prev);
    let hv = oracle.hvp(&state.x, z, &displacement)?;
    let mut g_hat = state.g_hat.add(&hv);
    g_hat.scale(1.0 - alpha);
    g_hat.axpy(alpha, &grad);
    Ok((g_hat, grad.norm()))
}

fn ensure_finite(t: usize, what: &str, v: &ParamVector) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalAbort {
            t,
            what: format!("non-finite {what}"),
        })
    }
}

/// Applies `x_{t+1} = x_t - update` and advances the counters.
fn apply(state: &mut OptimizerState, g_hat: ParamVector, update: ParamVector, eta: f64) -> Result<f64> {
    let t = state.t + 1;
    ensure_finite(t, "momentum estimate", &g_hat)?;
    let next = state.x.sub(&update);
    ensure_finite(t, "iterate", &next)?;
    state.x_prev = std::mem::replace(&mut state.x, next);
    state.g_hat = g_hat;
    state.t = t;
    state.last_eta = eta;
    Ok(update.norm())
}

fn check_step(eta: f64, alpha: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be finite and >= 0, got {eta}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// First step, `t = 1`: `ĝ_1 = ∇f(x_1, z_1)`, then a step of size `η_1`.
///
/// Clipping methods clip `ĝ_1` before storing it. The adaptive method records
/// `G_1 = ‖∇f(x_1, z_1)‖` in its accumulator.
pub fn init_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    algorithm: Algorithm,
    eta: f64,
    clip_g: f64,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    check_step(eta, 1.0)?;
    if state.t != 0 {
        return Err(Error::invalid("init_step on a state that already stepped"));
    }
    state.x_prev = state.x.clone();
    state.g_hat = ParamVector::zeros(state.x.dim());
    let z = oracle.sample(rng);
    let (g_hat, grad_norm) = if algorithm.uses_hvp() {
        corrected_estimate(state, oracle, &z, 1.0)?
    } else {
        let g = oracle.grad(&state.x, &z)?;
        let n = g.norm();
        (g, n)
    };
    if algorithm == Algorithm::Adasgdhess {
        state.acc.push(grad_norm);
    }
    finish(state, algorithm, g_hat, eta, 1.0, clip_g, grad_norm)
}

/// Shared tail: clip or normalize, then move.
fn finish(
    state: &mut OptimizerState,
    algorithm: Algorithm,
    g_hat: ParamVector,
    eta: f64,
    alpha: f64,
    clip_g: f64,
    grad_norm: f64,
) -> Result<StepInfo> {
    let t = state.t + 1;
    let (stored, clipped, zero_step, update) = match algorithm {
        Algorithm::Sgdhess | Algorithm::Adasgdhess => {
            let (c, clipped) = clip(&g_hat, clip_g);
            let u = c.scaled(eta);
            (c, clipped, false, u)
        }
        Algorithm::Nsgdhess => {
            let n = g_hat.norm();
            if n == 0.0 {
                let d = g_hat.dim();
                (g_hat, false, true, ParamVector::zeros(d))
            } else {
                let u = g_hat.scaled(eta / n);
                (g_hat, false, false, u)
            }
        }
        Algorithm::SgdMomentum | Algorithm::GradDiff => {
            let u = g_hat.scaled(eta);
            (g_hat, false, false, u)
        }
    };
    state.clipped_last = clipped;
    let step_norm = apply(state, stored, update, eta)?;
    Ok(StepInfo {
        t,
        eta,
        alpha,
        clipped,
        zero_step,
        step_norm,
        sample_grad_norm: grad_norm,
    })
}

fn require_started(state: &OptimizerState) -> Result<()> {
    if state.t == 0 {
        Err(Error::invalid("call init_step before the first regular step"))
    } else {
        Ok(())
    }
}

/// Clipped step at `t ≥ 2` with step size `η_t` and weight `α_{t-1}`.
pub fn sgdhess_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    eta: f64,
    alpha_prev: f64,
    clip_g: f64,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    require_started(state)?;
    check_step(eta, alpha_prev)?;
    let z = oracle.sample(rng);
    let (g_hat, grad_norm) = corrected_estimate(state, oracle, &z, alpha_prev)?;
    finish(state, Algorithm::Sgdhess, g_hat, eta, alpha_prev, clip_g, grad_norm)
}

/// Normalized step: unclipped momentum, displacement `-η ĝ_t / ‖ĝ_t‖`.
pub fn nsgdhess_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    eta: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    require_started(state)?;
    check_step(eta, alpha)?;
    let z = oracle.sample(rng);
    let (g_hat, grad_norm) = corrected_estimate(state, oracle, &z, alpha)?;
    finish(state, Algorithm::Nsgdhess, g_hat, eta, alpha, f64::INFINITY, grad_norm)
}

/// Constants of the adaptive method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConstants {
    pub c: f64,
    pub w: f64,
    pub k: f64,
    pub clip_g: f64,
}

impl AdaptiveConstants {
    /// `η_1 = η_2 = c / w^{1/3}`.
    pub fn initial_eta(&self) -> f64 {
        self.c / self.w.cbrt()
    }
}

/// Adaptive step: `η_t = c / (w + Σ_{i ≤ t-2} G_i²)^{1/3}`,
/// `α_{t-1} = min(2K η_{t-1} η_t, 1)`, then the clipped update. Records
/// `G_t = ‖∇f(x_t, z_t)‖` for later steps.
pub fn adasgdhess_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    consts: &AdaptiveConstants,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    require_started(state)?;
    let eta = adaptive_eta(&state.acc, consts.c, consts.w);
    let alpha = alpha_from_etas(consts.k, state.last_eta, eta);
    check_step(eta, alpha)?;
    let z = oracle.sample(rng);
    let (g_hat, grad_norm) = corrected_estimate(state, oracle, &z, alpha)?;
    state.acc.push(grad_norm);
    finish(state, Algorithm::Adasgdhess, g_hat, eta, alpha, consts.clip_g, grad_norm)
}

/// `ĝ_t = (1 - α) ĝ_{t-1} + α ∇f(x_t, z_t)`.
pub fn sgd_momentum_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    eta: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    require_started(state)?;
    check_step(eta, alpha)?;
    let z = oracle.sample(rng);
    let grad = oracle.grad(&state.x, &z)?;
    let mut g_hat = state.g_hat.scaled(1.0 - alpha);
    g_hat.axpy(alpha, &grad);
    finish(state, Algorithm::SgdMomentum, g_hat, eta, alpha, f64::INFINITY, grad.norm())
}

/// `ĝ_t = (1 - α)(ĝ_{t-1} + ∇f(x_t, z_t) - ∇f(x_{t-1}, z_t)) + α ∇f(x_t, z_t)`,
/// two gradient queries at the same sample.
pub fn grad_diff_step<O: StochasticOracle + ?Sized>(
    state: &mut OptimizerState,
    oracle: &O,
    eta: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<StepInfo> {
    require_started(state)?;
    check_step(eta, alpha)?;
    let z = oracle.sample(rng);
    let grad = oracle.grad(&state.x, &z)?;
    let grad_prev = oracle.grad(&state.x_prev, &z)?;
    let mut g_hat = state.g_hat.add(&grad.sub(&grad_prev));
    g_hat.scale(1.0 - alpha);
    g_hat.axpy(alpha, &grad);
    finish(state, Algorithm::GradDiff, g_hat, eta, alpha, f64::INFINITY, grad.norm())
}
