use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{fit_rate, RateFit};
use super::config::RunConfig;
use super::run::{run, RunSummary};
use crate::error::Result;

/// Per-horizon seed statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub horizon: usize,
    pub seeds: usize,
    pub mean_sq_grad_norm: f64,
    pub stderr_sq_grad_norm: f64,
    pub mean_grad_norm: f64,
    pub stderr_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// One summary per `(T, seed)`, sorted by `(T, seed)`.
    pub runs: Vec<RunSummary>,
    pub per_horizon: Vec<HorizonStats>,
    /// Fit of the seed-averaged `(1/T) Σ ‖∇F(x_t)‖²`.
    pub sq_grad_fit: Option<RateFit>,
    /// Fit of the seed-averaged `(1/T) Σ ‖∇F(x_t)‖`.
    pub grad_fit: Option<RateFit>,
}

/// Seeds used for `n` replicates starting at `base`.
pub fn seed_list(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs `base` at every `(T, seed)` pair on the rayon pool.
///
/// Each run is single-threaded; results are sorted before aggregation so the
/// output does not depend on scheduling.
pub fn sweep(base: &RunConfig, horizons: &[usize], seeds: &[u64]) -> Result<SweepResult> {
    let jobs: Vec<(usize, u64)> = horizons.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let mut runs = jobs
        .par_iter()
        .map(|&(horizon, seed)| {
            let cfg = RunConfig {
                horizon,
                seed,
                ..base.clone()
            };
            run(&cfg).map(|o| o.summary)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|s| (s.horizon, s.seed));

    let mut hs: Vec<usize> = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let per_horizon: Vec<HorizonStats> = hs
        .iter()
        .map(|&t| {
            let at: Vec<&RunSummary> = runs.iter().filter(|r| r.horizon == t).collect();
            let sq: Vec<f64> = at.iter().map(|r| r.avg_sq_grad_norm).collect();
            let g: Vec<f64> = at.iter().map(|r| r.avg_grad_norm).collect();
            let (msq, esq) = mean_stderr(&sq);
            let (mg, eg) = mean_stderr(&g);
            HorizonStats {
                horizon: t,
                seeds: at.len(),
                mean_sq_grad_norm: msq,
                stderr_sq_grad_norm: esq,
                mean_grad_norm: mg,
                stderr_grad_norm: eg,
            }
        })
        .collect();
    let pts = |f: fn(&HorizonStats) -> f64| -> Vec<(f64, f64)> {
        per_horizon.iter().map(|h| (h.horizon as f64, f(h))).collect()
    };
    Ok(SweepResult {
        runs,
        sq_grad_fit: fit_rate(&pts(|h| h.mean_sq_grad_norm)).ok(),
        grad_fit: fit_rate(&pts(|h| h.mean_grad_norm)).ok(),
        per_horizon,
    })
}
