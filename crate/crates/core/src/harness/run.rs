use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{IterateMode, RunConfig};
use crate::error::{Error, Result};
use crate::optimizers::{
    adasgdhess_step, grad_diff_step, init_step, nsgdhess_step, sgd_momentum_step, sgdhess_step, AdaptiveConstants,
    Algorithm, OptimizerState, StepInfo,
};
use crate::oracle::{AssumptionConstants, CountingOracle, StochasticOracle};
use crate::rng::{RngStream, Stream};
use crate::schedules::{ScheduleParams, ScheduleVariant};
use crate::vector::ParamVector;

/// One traced iteration. `est_norm`, `err_norm` refer to `ĝ_t` as stored
/// after step `t` (clipped where the method clips).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub eta: f64,
    pub alpha: f64,
    pub loss: f64,
    pub true_grad_norm: f64,
    pub est_norm: f64,
    pub err_norm: f64,
    pub clipped: bool,
    pub step_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    /// Mean of `‖∇F(x_t)‖²` over traced rows.
    pub avg_sq_grad_norm: f64,
    pub avg_grad_norm: f64,
    /// Averages use every `trace_stride`-th iterate only.
    pub subsampled: bool,
    pub trace_stride: usize,
    /// `F(x_T)`.
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub selected_index: usize,
    pub selected_grad_norm: f64,
    pub selected_iterate: Vec<f64>,
    pub grad_calls: u64,
    pub hvp_calls: u64,
    pub clipped_steps: usize,
    pub zero_steps: usize,
    /// First `t` whose iterate left the problem's declared box.
    pub left_box_at: Option<usize>,
    pub constants_certified: bool,
    pub constants: AssumptionConstants,
    pub schedule: ScheduleParams,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
    /// `x_{T+1}`, the point after the last step.
    pub final_state: OptimizerState,
}

/// Everything the loop needs besides the oracle.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub schedule: ScheduleParams,
    pub seed: u64,
    pub trace_stride: usize,
    pub iterate_mode: IterateMode,
    /// Half-width of the `‖x‖∞` box the constants are valid on.
    pub feasible_box: Option<f64>,
}

/// Index in `1..=T` of the returned iterate.
pub fn select_index(horizon: usize, mode: IterateMode, rng: &mut RngStream) -> usize {
    match mode {
        IterateMode::Last => horizon,
        IterateMode::UniformRandom => 1 + rng.index(horizon),
    }
}

/// Picks `x̂` from `x_1, …, x_T`: uniformly, or the last one.
pub fn select_iterate<'a>(iterates: &'a [ParamVector], mode: IterateMode, rng: &mut RngStream) -> &'a ParamVector {
    assert!(!iterates.is_empty(), "select_iterate needs at least one iterate");
    &iterates[select_index(iterates.len(), mode, rng) - 1]
}

fn traced(t: usize, horizon: usize, stride: usize) -> bool {
    t == 1 || t == horizon || t.is_multiple_of(stride)
}

fn in_box(x: &ParamVector, half_width: Option<f64>) -> bool {
    half_width.is_none_or(|r| x.max_abs() <= r)
}

/// Runs `settings.schedule.horizon` steps from `x1`.
///
/// Exact gradients are evaluated at every traced `t`; the sampling stream is
/// untouched by tracing, so the trajectory does not depend on the stride.
pub fn run_oracle<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x1: &ParamVector,
    settings: &RunSettings,
) -> Result<(Vec<TraceRecord>, OptimizerState, RunStats)> {
    let sched = &settings.schedule;
    sched.validate()?;
    let horizon = sched.horizon;
    let stride = settings.trace_stride.max(1);
    let mut sampling = RngStream::new(settings.seed, Stream::Sampling);
    let mut selection = RngStream::new(settings.seed, Stream::Selection);
    let selected_index = select_index(horizon, settings.iterate_mode, &mut selection);

    let adaptive = if settings.algorithm == Algorithm::Adasgdhess {
        if sched.variant != ScheduleVariant::Adaptive {
            return Err(Error::invalid("adasgdhess needs an adaptive schedule"));
        }
        Some(AdaptiveConstants {
            c: sched.adaptive_c.unwrap_or(f64::NAN),
            w: sched.adaptive_w.unwrap_or(f64::NAN),
            k: sched.k.unwrap_or(f64::NAN),
            clip_g: sched.clip_threshold(),
        })
    } else {
        None
    };
    let clip_g = sched.clip_threshold();

    let mut state = OptimizerState::new(x1.clone());
    let mut trace = Vec::with_capacity(horizon / stride + 2);
    let mut stats = RunStats {
        selected_index,
        ..RunStats::default()
    };

    for t in 1..=horizon {
        let x_t = state.x.clone();
        if stats.left_box_at.is_none() && !in_box(&x_t, settings.feasible_box) {
            stats.left_box_at = Some(t);
        }
        let reference = if traced(t, horizon, stride) {
            Some((oracle.true_loss(&x_t)?, oracle.true_grad(&x_t)?))
        } else {
            None
        };

        let info: StepInfo = if t == 1 {
            let eta = match adaptive {
                Some(a) => a.initial_eta(),
                None => sched.eta_at(1),
            };
            init_step(&mut state, oracle, settings.algorithm, eta, clip_g, &mut sampling)?
        } else {
            let (eta, alpha) = (sched.eta_at(t), sched.alpha_before(t));
            match settings.algorithm {
                Algorithm::Sgdhess => sgdhess_step(&mut state, oracle, eta, alpha, clip_g, &mut sampling)?,
                Algorithm::Nsgdhess => nsgdhess_step(&mut state, oracle, eta, alpha, &mut sampling)?,
                Algorithm::Adasgdhess => adasgdhess_step(&mut state, oracle, adaptive.as_ref().unwrap(), &mut sampling)?,
                Algorithm::SgdMomentum => sgd_momentum_step(&mut state, oracle, eta, alpha, &mut sampling)?,
                Algorithm::GradDiff => grad_diff_step(&mut state, oracle, eta, alpha, &mut sampling)?,
            }
        };
        stats.clipped_steps += info.clipped as usize;
        stats.zero_steps += info.zero_step as usize;

        if let Some((loss, grad)) = reference {
            let gn = grad.norm();
            if !(loss.is_finite() && gn.is_finite()) {
                return Err(Error::NumericalAbort {
                    t,
                    what: "non-finite reference loss or gradient".into(),
                });
            }
            stats.sum_sq += gn * gn;
            stats.sum += gn;
            stats.rows += 1;
            trace.push(TraceRecord {
                t,
                eta: info.eta,
                alpha: info.alpha,
                loss,
                true_grad_norm: gn,
                est_norm: state.g_hat.norm(),
                err_norm: state.g_hat.distance(&grad),
                clipped: info.clipped,
                step_norm: info.step_norm,
            });
        }
        if t == selected_index {
            stats.selected = Some(x_t);
        }
    }
    if stats.left_box_at.is_none() && !in_box(&state.x, settings.feasible_box) {
        stats.left_box_at = Some(horizon + 1);
    }
    Ok((trace, state, stats))
}

/// Accumulators filled by [`run_oracle`].
#[derive(Clone, Debug, Default)]
pub struct RunStats {
    pub sum_sq: f64,
    pub sum: f64,
    pub rows: usize,
    pub clipped_steps: usize,
    pub zero_steps: usize,
    pub left_box_at: Option<usize>,
    pub selected_index: usize,
    pub selected: Option<ParamVector>,
}

/// Builds the problem, runs it and summarizes.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let problem = config.problem.build()?;
    let consts = problem.constants();
    let schedule = config.optimizer.resolve(&consts, config.horizon)?;
    let stride = config.trace_stride(problem.dim());
    let settings = RunSettings {
        algorithm: config.optimizer.algorithm,
        schedule,
        seed: config.seed,
        trace_stride: stride,
        iterate_mode: config.iterate_mode,
        feasible_box: problem.feasible_box(),
    };
    let x1 = problem.initial_point().clone();
    let counted = CountingOracle::new(problem);
    let (trace, state, stats) = run_oracle(&counted, &x1, &settings)?;
    let problem = counted.inner();

    let mut warnings = schedule.compliance_warnings(&consts);
    if !problem.certified() {
        warnings.push("problem constants are estimates, not certified bounds".into());
    }
    if let Some(t) = stats.left_box_at {
        warnings.push(format!(
            "iterate left the box ||x||_inf <= {} at t={t}; declared G may not hold",
            settings.feasible_box.unwrap_or(f64::INFINITY)
        ));
    }
    if stride > 1 {
        warnings.push(format!("averages subsampled every {stride} steps"));
    }

    let last = trace.last().copied().expect("trace always holds t = T");
    let selected = stats.selected.clone().expect("selected index lies in 1..=T");
    let selected_grad_norm = problem.true_grad(&selected)?.norm();
    let rows = stats.rows as f64;
    let summary = RunSummary {
        problem: problem.name().to_string(),
        algorithm: settings.algorithm,
        horizon: config.horizon,
        seed: config.seed,
        avg_sq_grad_norm: stats.sum_sq / rows,
        avg_grad_norm: stats.sum / rows,
        subsampled: stride > 1,
        trace_stride: stride,
        final_loss: last.loss,
        final_grad_norm: last.true_grad_norm,
        selected_index: stats.selected_index,
        selected_grad_norm,
        selected_iterate: selected.into_inner(),
        grad_calls: counted.grad_calls(),
        hvp_calls: counted.hvp_calls(),
        clipped_steps: stats.clipped_steps,
        zero_steps: stats.zero_steps,
        left_box_at: stats.left_box_at,
        constants_certified: problem.certified(),
        constants: consts,
        schedule,
        warnings,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        trace,
        summary,
        final_state: state,
    })
}
