//! Step-size and momentum schedules, and the theoretical bounds they come with.
//!
//! Three tunings are provided:
//!
//! * **clipped** (`Theorem1`): `η_t = 1/(C t^{1/3})`, `α_t = min(2K η_t η_{t+1}, 1)`
//!   with `C = max(√(2K), 4L)`;
//! * **normalized**: constant `(α, η)` from a closed-form min/max rule in
//!   `(Δ, L, ρ, σ_G, σ_H, T)`;
//! * **adaptive**: `η_t = c / (w + Σ_{i ≤ t-2} G_i²)^{1/3}` where `G_i` are
//!   observed stochastic gradient norms.
//!
//! `K` couples step size and momentum. It depends on `(G, ρ, σ_H)` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::AssumptionConstants;

/// Lower bound on `K`, so that `α_t > 0` even when `ρ = σ_H = 0`.
pub const K_MIN: f64 = 1e-12;

/// `K = 8σ_H² + 4√(4σ_H⁴ + ρ²G²/2)`, floored at [`K_MIN`].
///
/// This is `2G²ρ² / (-2σ_H² + √(4σ_H⁴ + ρ²G²/2))` multiplied through by the
/// conjugate of its denominator, which avoids cancellation when `σ_H ≫ ρG`
/// and is finite at `ρ = 0`.
pub fn compute_k(grad_bound: f64, rho: f64, sigma_h: f64) -> f64 {
    let s2 = sigma_h * sigma_h;
    let k = 8.0 * s2 + 4.0 * (4.0 * s2 * s2 + rho * rho * grad_bound * grad_bound / 2.0).sqrt();
    k.max(K_MIN)
}

pub fn eta_theorem1(rate_c: f64, t: usize) -> f64 {
    1.0 / (rate_c * (t as f64).cbrt())
}

/// `min(2K η_t η_{t+1}, 1)`.
pub fn alpha_from_etas(k: f64, eta_t: f64, eta_next: f64) -> f64 {
    (2.0 * k * eta_t * eta_next).min(1.0)
}

/// `num / den` with the `den → 0⁺` limit: `+∞` for a positive numerator, `0` otherwise.
fn limit_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Constant `(α, η)` for the normalized method at horizon `T`:
///
/// ```text
/// α = min{ max{ T^{-2/3}, Δ^{4/5} ρ^{2/5} / (T^{4/5} σ_G^{6/5}), (2Δσ_H)^{2/3} / (T^{2/3} σ_G^{4/3}) }, 1 }
/// η = min{ √(2Δ) α^{1/4} / √(T (L√α + 4σ_H)), (Δα)^{1/3} / (ρT)^{1/3} }
/// ```
///
/// With `σ_G = 0` the noise-dependent terms are `+∞` (so `α = 1`) unless
/// their numerator vanishes; with `ρ = 0` the second `η` branch is `+∞`.
pub fn tune_normalized(consts: &AssumptionConstants, horizon: usize) -> Result<(f64, f64)> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    consts.validate()?;
    let t = horizon as f64;
    let AssumptionConstants {
        delta,
        lipschitz_l: l,
        sigma_g,
        sigma_h,
        rho,
        ..
    } = *consts;

    let a1 = t.powf(-2.0 / 3.0);
    let a2 = limit_ratio(delta.powf(0.8) * rho.powf(0.4), t.powf(0.8) * sigma_g.powf(1.2));
    let a3 = limit_ratio((2.0 * delta * sigma_h).powf(2.0 / 3.0), t.powf(2.0 / 3.0) * sigma_g.powf(4.0 / 3.0));
    let alpha = a1.max(a2).max(a3).min(1.0);

    let e1 = (2.0 * delta).sqrt() * alpha.powf(0.25) / (t * (l * alpha.sqrt() + 4.0 * sigma_h)).sqrt();
    let e2 = limit_ratio((delta * alpha).cbrt(), (rho * t).cbrt());
    Ok((alpha, e1.min(e2)))
}

/// Running `Σ G_i²` for the adaptive step size, kept one push behind.
///
/// After pushing `G_1, …, G_{t-1}` the sum holds `G_1² + … + G_{t-2}²`, which
/// is exactly what `η_t` needs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveAccumulator {
    pub sum_g_sq: f64,
    pub pending: f64,
    pub t: usize,
}

impl AdaptiveAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, g_norm: f64) {
        debug_assert!(g_norm >= 0.0);
        self.sum_g_sq += self.pending;
        self.pending = g_norm * g_norm;
        self.t += 1;
    }
}

/// Functional form of [`AdaptiveAccumulator::push`].
pub fn accumulator_push(acc: AdaptiveAccumulator, g_norm: f64) -> AdaptiveAccumulator {
    let mut acc = acc;
    acc.push(g_norm);
    acc
}

/// `c / (w + sum_g_sq)^{1/3}`.
pub fn adaptive_eta(acc: &AdaptiveAccumulator, c: f64, w: f64) -> f64 {
    c / (w + acc.sum_g_sq).cbrt()
}

/// `D = 24K/5 + 16C⁶/(25K²)`.
pub fn theorem1_d(rate_c: f64, k: f64) -> f64 {
    24.0 * k / 5.0 + 16.0 * rate_c.powi(6) / (25.0 * k * k)
}

/// Upper bound on `(1/T) Σ E‖∇F(x_t)‖²` for the clipped method:
///
/// `(20CΔ + 96C²G²/K) / T^{2/3} + 20G²D (1 + ln T) / (C² T^{2/3})`.
pub fn theorem1_bound(rate_c: f64, k: f64, grad_bound: f64, delta: f64, horizon: usize) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid("theorem1_bound needs K > 0"));
    }
    if !(rate_c > 0.0) || horizon == 0 {
        return Err(Error::invalid("theorem1_bound needs C > 0 and T >= 1"));
    }
    let t = horizon as f64;
    let t23 = t.powf(2.0 / 3.0);
    let g2 = grad_bound * grad_bound;
    let d = theorem1_d(rate_c, k);
    Ok((20.0 * rate_c * delta + 96.0 * rate_c * rate_c * g2 / k) / t23
        + 20.0 * g2 * d * (1.0 + t.ln()) / (rate_c * rate_c * t23))
}

/// `M = (1/c) (20(Δ + 6σ_G² w^{1/3} / (5Kc)) + 96Kc² ln(T+1) + 64G⁴ ln T / (5K²c³))`.
pub fn theorem3_m(c: f64, w: f64, k: f64, grad_bound: f64, delta: f64, sigma_g: f64, horizon: usize) -> Result<f64> {
    if !(k > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("theorem3 constants need K > 0 and c > 0"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let t = horizon as f64;
    Ok((20.0 * (delta + 6.0 * sigma_g * sigma_g * w.cbrt() / (5.0 * k * c))
        + 96.0 * k * c * c * (t + 1.0).ln()
        + 64.0 * grad_bound.powi(4) * t.ln() / (5.0 * k * k * c.powi(3)))
        / c)
}

/// Upper bound on `E[(1/T) Σ ‖∇F(x_t)‖]` for the adaptive method:
///
/// `(w^{1/6} √(2M) + 2M^{3/4}) / √T + 2σ_G^{1/3} / T^{1/3}`.
pub fn theorem3_bound(
    c: f64,
    w: f64,
    k: f64,
    grad_bound: f64,
    delta: f64,
    sigma_g: f64,
    horizon: usize,
) -> Result<f64> {
    let m = theorem3_m(c, w, k, grad_bound, delta, sigma_g, horizon)?;
    let t = horizon as f64;
    Ok((w.powf(1.0 / 6.0) * (2.0 * m).sqrt() + 2.0 * m.powf(0.75)) / t.sqrt() + 2.0 * sigma_g.cbrt() / t.cbrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleVariant {
    Theorem1,
    Normalized,
    Adaptive,
    Manual,
}

/// Fully resolved schedule constants for one run.
///
/// Only the fields a variant uses are set; `clip_g = None` disables clipping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub variant: ScheduleVariant,
    /// `C` in `η_t = 1/(C t^{1/3})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Clipping threshold `G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_g: Option<f64>,
    /// `c` of the adaptive step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_c: Option<f64>,
    /// `w` of the adaptive step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub horizon: usize,
    /// Manual schedules only: multiply `η` by `decay_factor` every `decay_every` steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_factor: Option<f64>,
}

fn need(name: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::invalid(format!("{name} must be finite and > 0, got {v}"))),
        None => Err(Error::invalid(format!("{name} is required for this schedule"))),
    }
}

impl ScheduleParams {
    /// The clipped-method tuning: `K` from the constants, `C = max(√(2K), 4L)`.
    pub fn theorem1(consts: &AssumptionConstants, horizon: usize) -> Self {
        let k = compute_k(consts.grad_bound_g, consts.rho, consts.sigma_h);
        let rate_c = (2.0 * k).sqrt().max(4.0 * consts.lipschitz_l);
        ScheduleParams {
            variant: ScheduleVariant::Theorem1,
            rate_c: Some(rate_c),
            k: Some(k),
            clip_g: Some(consts.grad_bound_g),
            ..Self::empty(horizon)
        }
    }

    pub fn normalized(consts: &AssumptionConstants, horizon: usize) -> Result<Self> {
        let (alpha, eta) = tune_normalized(consts, horizon)?;
        Ok(ScheduleParams {
            variant: ScheduleVariant::Normalized,
            alpha: Some(alpha),
            eta: Some(eta),
            ..Self::empty(horizon)
        })
    }

    /// The adaptive tuning with the largest admissible `c = 2G^{2/3}/√K`
    /// and `w = max((4Lc)³, 3G²)`.
    pub fn adaptive(consts: &AssumptionConstants, horizon: usize) -> Self {
        let g = consts.grad_bound_g;
        let k = compute_k(g, consts.rho, consts.sigma_h);
        let c = 2.0 * g.powf(2.0 / 3.0) / k.sqrt();
        let w = (4.0 * consts.lipschitz_l * c).powi(3).max(3.0 * g * g);
        ScheduleParams {
            variant: ScheduleVariant::Adaptive,
            k: Some(k),
            clip_g: Some(g),
            adaptive_c: Some(c),
            adaptive_w: Some(w),
            ..Self::empty(horizon)
        }
    }

    pub fn manual(eta: f64, alpha: f64, horizon: usize) -> Self {
        ScheduleParams {
            variant: ScheduleVariant::Manual,
            eta: Some(eta),
            alpha: Some(alpha),
            ..Self::empty(horizon)
        }
    }

    fn empty(horizon: usize) -> Self {
        ScheduleParams {
            variant: ScheduleVariant::Manual,
            rate_c: None,
            k: None,
            clip_g: None,
            adaptive_c: None,
            adaptive_w: None,
            alpha: None,
            eta: None,
            horizon,
            decay_every: None,
            decay_factor: None,
        }
    }

    /// Clipping threshold, `+∞` when clipping is off.
    pub fn clip_threshold(&self) -> f64 {
        self.clip_g.unwrap_or(f64::INFINITY)
    }

    /// `η_t` for the non-adaptive variants. Call [`ScheduleParams::validate`] first.
    pub fn eta_at(&self, t: usize) -> f64 {
        match self.variant {
            ScheduleVariant::Theorem1 => eta_theorem1(self.rate_c.unwrap_or(f64::NAN), t),
            ScheduleVariant::Manual => {
                let eta = self.eta.unwrap_or(f64::NAN);
                match (self.decay_every, self.decay_factor) {
                    (Some(every), Some(f)) if every > 0 => eta * f.powi(((t - 1) / every) as i32),
                    _ => eta,
                }
            }
            ScheduleVariant::Normalized | ScheduleVariant::Adaptive => self.eta.unwrap_or(f64::NAN),
        }
    }

    /// Momentum weight applied at step `t ≥ 2`, i.e. `α_{t-1}`.
    pub fn alpha_before(&self, t: usize) -> f64 {
        debug_assert!(t >= 2);
        match self.variant {
            ScheduleVariant::Theorem1 => {
                alpha_from_etas(self.k.unwrap_or(f64::NAN), self.eta_at(t - 1), self.eta_at(t))
            }
            _ => self.alpha.unwrap_or(f64::NAN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if let Some(g) = self.clip_g {
            need("clip_g", Some(g))?;
        }
        match self.variant {
            ScheduleVariant::Theorem1 => {
                need("rate_c", self.rate_c)?;
                need("k", self.k)?;
            }
            ScheduleVariant::Adaptive => {
                need("adaptive_c", self.adaptive_c)?;
                need("adaptive_w", self.adaptive_w)?;
                need("k", self.k)?;
            }
            ScheduleVariant::Normalized | ScheduleVariant::Manual => {
                need("eta", self.eta)?;
                match self.alpha {
                    Some(a) if (0.0..=1.0).contains(&a) => {}
                    other => {
                        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {other:?}")))
                    }
                }
                if self.decay_every.is_some() {
                    need("decay_factor", self.decay_factor)?;
                }
            }
        }
        Ok(())
    }

    /// Conditions the guarantees assume but the harness does not enforce.
    pub fn compliance_warnings(&self, consts: &AssumptionConstants) -> Vec<String> {
        let slack = 1.0 + 1e-12;
        let mut w = Vec::new();
        let k_req = compute_k(consts.grad_bound_g, consts.rho, consts.sigma_h);
        let nan = f64::NAN;
        match self.variant {
            ScheduleVariant::Theorem1 => {
                let (k, c) = (self.k.unwrap_or(nan), self.rate_c.unwrap_or(nan));
                if !(k * slack >= k_req) {
                    w.push(format!("K = {k} is below the value {k_req} implied by (G, rho, sigma_H)"));
                }
                if !(c * slack >= (2.0 * k).sqrt()) {
                    w.push(format!("C = {c} < sqrt(2K) = {}", (2.0 * k).sqrt()));
                }
                if !(c * slack >= 4.0 * consts.lipschitz_l) {
                    w.push(format!("C = {c} < 4L = {}", 4.0 * consts.lipschitz_l));
                }
                if !(self.clip_threshold() * slack >= consts.grad_bound_g) {
                    w.push(format!("clip G = {} < declared G = {}", self.clip_threshold(), consts.grad_bound_g));
                }
            }
            ScheduleVariant::Adaptive => {
                let (k, c, ww) = (
                    self.k.unwrap_or(nan),
                    self.adaptive_c.unwrap_or(nan),
                    self.adaptive_w.unwrap_or(nan),
                );
                let c_max = 2.0 * consts.grad_bound_g.powf(2.0 / 3.0) / k.sqrt();
                if !(c <= c_max * slack) {
                    w.push(format!("c = {c} > 2 G^(2/3) / sqrt(K) = {c_max}"));
                }
                let w_min = (4.0 * consts.lipschitz_l * c).powi(3).max(3.0 * consts.grad_bound_g.powi(2));
                if !(ww * slack >= w_min) {
                    w.push(format!("w = {ww} < max((4Lc)^3, 3G^2) = {w_min}"));
                }
                if !(k * slack >= k_req) {
                    w.push(format!("K = {k} is below the value {k_req} implied by (G, rho, sigma_H)"));
                }
                if !(self.clip_threshold() * slack >= consts.grad_bound_g) {
                    w.push(format!("clip G = {} < declared G = {}", self.clip_threshold(), consts.grad_bound_g));
                }
            }
            ScheduleVariant::Normalized => {
                if let Ok((a, e)) = tune_normalized(consts, self.horizon) {
                    let (sa, se) = (self.alpha.unwrap_or(nan), self.eta.unwrap_or(nan));
                    if !((sa - a).abs() <= 1e-12 * a && (se - e).abs() <= 1e-12 * e) {
                        w.push(format!("(alpha, eta) = ({sa}, {se}) differs from the tuned ({a}, {e})"));
                    }
                }
            }
            ScheduleVariant::Manual => w.push("manual schedule: no guarantee applies".into()),
        }
        w
    }

    /// Whether [`ScheduleParams::compliance_warnings`] is empty.
    pub fn is_compliant(&self, consts: &AssumptionConstants) -> bool {
        self.compliance_warnings(consts).is_empty()
    }
}
