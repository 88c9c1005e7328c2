use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{run, RunSummary, TraceRecord};
use crate::error::{Error, Result};
use crate::oracle::AssumptionConstants;
use crate::schedules::{theorem1_bound, theorem3_bound, ScheduleParams, ScheduleVariant};

/// Least-squares line through `(ln T, ln metric)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points dropped because the metric was not positive and finite.
    pub rejected: Vec<(f64, f64)>,
}

/// Fits `ln(metric) = intercept + slope · ln(T)`.
///
/// Needs at least three distinct `T` among the accepted points.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let (ok, rejected): (Vec<_>, Vec<_>) = points
        .iter()
        .copied()
        .partition(|&(t, m)| t > 0.0 && m > 0.0 && m.is_finite() && t.is_finite());
    let mut distinct: Vec<f64> = ok.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid(format!(
            "fit_rate needs >= 3 distinct horizons with positive metrics, got {} (rejected {rejected:?})",
            distinct.len()
        )));
    }
    let n = ok.len() as f64;
    let xs: Vec<f64> = ok.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = ok.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        rejected,
    })
}

/// Paired comparison of time-averaged `‖ĝ_t − ∇F(x_t)‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Mean of `first - second`.
    pub mean_difference: f64,
    /// Seeds where `first < second`.
    pub first_wins: usize,
    pub second_wins: usize,
    pub ties: usize,
    /// Two-sided sign test, ties dropped.
    pub sign_test_p: f64,
}

/// Mean of `err_norm²` over rows with `t > burn_in`.
pub fn mean_sq_error(trace: &[TraceRecord], burn_in: usize) -> f64 {
    let rows: Vec<f64> = trace.iter().filter(|r| r.t > burn_in).map(|r| r.err_norm * r.err_norm).collect();
    rows.iter().sum::<f64>() / rows.len().max(1) as f64
}

/// Runs both configs on each seed (common random numbers) and compares
/// their mean squared estimator error.
pub fn compare_estimators(a: &RunConfig, b: &RunConfig, seeds: &[u64], burn_in: usize) -> Result<Comparison> {
    if a.problem != b.problem {
        return Err(Error::invalid("compare_estimators needs the same problem on both sides"));
    }
    if a.horizon != b.horizon {
        return Err(Error::invalid("compare_estimators needs the same horizon on both sides"));
    }
    if (a.optimizer.eta, a.optimizer.alpha) != (b.optimizer.eta, b.optimizer.alpha) {
        return Err(Error::invalid("compare_estimators needs matching eta and alpha"));
    }
    if a.trace_every != b.trace_every {
        return Err(Error::invalid("compare_estimators needs the same trace stride"));
    }
    let one = |cfg: &RunConfig, seed: u64| -> Result<f64> {
        let cfg = RunConfig { seed, ..cfg.clone() };
        Ok(mean_sq_error(&run(&cfg)?.trace, burn_in))
    };
    let mut first = Vec::with_capacity(seeds.len());
    let mut second = Vec::with_capacity(seeds.len());
    for &s in seeds {
        first.push(one(a, s)?);
        second.push(one(b, s)?);
    }
    let first_wins = first.iter().zip(&second).filter(|(x, y)| x < y).count();
    let second_wins = first.iter().zip(&second).filter(|(x, y)| x > y).count();
    let ties = seeds.len() - first_wins - second_wins;
    let mean_difference =
        first.iter().zip(&second).map(|(x, y)| x - y).sum::<f64>() / seeds.len().max(1) as f64;
    Ok(Comparison {
        seeds: seeds.to_vec(),
        first,
        second,
        mean_difference,
        first_wins,
        second_wins,
        ties,
        sign_test_p: sign_test(first_wins, second_wins),
    })
}

/// Two-sided exact binomial test of `wins` vs `losses` at `p = 1/2`.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.max(losses);
    // P(X >= k), X ~ Bin(n, 1/2), summed in log space
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            tail += (ln_choose + ln_half_n).exp();
        }
    }
    (2.0 * tail).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Average squared gradient norm against the clipped-method bound.
    Theorem1,
    /// Average gradient norm against the adaptive-method bound.
    Theorem3,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub horizon: usize,
    pub measured: f64,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub holds: Option<bool>,
    pub warnings: Vec<String>,
}

/// Measured average beside the matching theoretical bound.
pub fn bound_report(summary: &RunSummary, schedule: &ScheduleParams, consts: &AssumptionConstants) -> BoundReport {
    let mut warnings = schedule.compliance_warnings(consts);
    if !summary.constants_certified {
        warnings.push("constants are estimates; the bound is not certified".into());
    }
    if let Some(t) = summary.left_box_at {
        warnings.push(format!("iterate left the declared box at t={t}"));
    }
    let t = summary.horizon;
    let nan = f64::NAN;
    let (kind, measured, bound) = match schedule.variant {
        ScheduleVariant::Theorem1 => (
            BoundKind::Theorem1,
            summary.avg_sq_grad_norm,
            theorem1_bound(
                schedule.rate_c.unwrap_or(nan),
                schedule.k.unwrap_or(nan),
                consts.grad_bound_g,
                consts.delta,
                t,
            ),
        ),
        ScheduleVariant::Adaptive => (
            BoundKind::Theorem3,
            summary.avg_grad_norm,
            theorem3_bound(
                schedule.adaptive_c.unwrap_or(nan),
                schedule.adaptive_w.unwrap_or(nan),
                schedule.k.unwrap_or(nan),
                consts.grad_bound_g,
                consts.delta,
                consts.sigma_g,
                t,
            ),
        ),
        _ => (BoundKind::None, summary.avg_sq_grad_norm, Err(Error::invalid("no bound"))),
    };
    let bound = match bound {
        Ok(b) => Some(b),
        Err(e) => {
            if kind != BoundKind::None {
                warnings.push(format!("bound not evaluated: {e}"));
            }
            None
        }
    };
    BoundReport {
        kind,
        horizon: t,
        measured,
        bound,
        ratio: bound.map(|b| measured / b),
        holds: bound.map(|b| measured <= b),
        warnings,
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.warnings.is_empty() {
            writeln!(f, "!! WARNING: run is not theorem-compliant or constants are uncertified")?;
            for w in &self.warnings {
                writeln!(f, "!!   {w}")?;
            }
        }
        let metric = match self.kind {
            BoundKind::Theorem3 => "avg ||grad F||",
            _ => "avg ||grad F||^2",
        };
        match (self.bound, self.ratio, self.holds) {
            (Some(b), Some(r), Some(h)) => write!(
                f,
                "{:?} T={} {metric}: measured {:.6e} bound {:.6e} ratio {:.3e} [{}]",
                self.kind,
                self.horizon,
                self.measured,
                b,
                r,
                if h { "holds" } else { "VIOLATED" }
            ),
            _ => write!(f, "no bound, T={} {metric}: measured {:.6e}", self.horizon, self.measured),
        }
    }
}
