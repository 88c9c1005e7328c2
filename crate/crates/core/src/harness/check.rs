use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::oracle::{default_fd_eps, fd_check_grad, fd_check_hvp, fd_check_true_grad, StochasticOracle};
use crate::problems::ProblemSpec;
use crate::rng::{RngStream, Stream};
use crate::vector::ParamVector;

pub const GRAD_TOL: f64 = 1e-6;
pub const HVP_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub problem: String,
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "[{}] {}: {} ({})", if l.passed { "PASS" } else { "FAIL" }, self.problem, l.name, l.detail)?;
        }
        Ok(())
    }
}

/// `x_1` plus a standard normal perturbation, clamped to the problem's box.
pub fn random_point(problem: &ProblemSpec, rng: &mut RngStream) -> ParamVector {
    let mut x = problem.initial_point().add(&rng.normal_vec(problem.dim(), 1.0));
    if let Some(r) = problem.feasible_box() {
        x.iter_mut().for_each(|v| *v = v.clamp(-r, r));
    }
    x
}

/// Finite-difference and invariant suite at `points` random points.
///
/// Gradients of the sampled loss are checked at [`GRAD_TOL`], HVPs at
/// [`HVP_TOL`] on the structural part of each sample. The Hessian noise
/// channel is checked separately: it must be `s·v` with `|s| ≤ σ_H`.
pub fn check_problem(problem: &ProblemSpec, seed: u64, points: usize) -> Result<CheckReport> {
    let mut rng = RngStream::new(seed, Stream::Init);
    let mut sampling = RngStream::new(seed, Stream::Sampling);
    let consts = problem.constants();
    let d = problem.dim();

    let (mut worst_g, mut worst_h, mut worst_ref) = (0.0f64, 0.0f64, 0.0f64);
    let (mut ok_g, mut ok_h, mut ok_ref) = (true, true, true);
    let mut worst_shift = 0.0f64;
    let mut shift_ok = true;
    let mut bound_ratio = 0.0f64;
    for _ in 0..points {
        let x = random_point(problem, &mut rng);
        let v = ParamVector::from_raw(rng.normal_vec(d, 1.0));
        let z = problem.sample(&mut sampling);
        let eps = default_fd_eps(&x);

        let g = fd_check_grad(problem, &x, &z, eps, GRAD_TOL)?;
        worst_g = worst_g.max(g.max_rel_err);
        ok_g &= g.passed;

        let structural = z.structural();
        let h = fd_check_hvp(problem, &x, &structural, &v, eps, HVP_TOL)?;
        worst_h = worst_h.max(h.max_rel_err);
        ok_h &= h.passed;

        let r = fd_check_true_grad(problem, &x, eps, GRAD_TOL)?;
        worst_ref = worst_ref.max(r.max_rel_err);
        ok_ref &= r.passed;

        // noisy HVP = structural HVP + s·v
        let noisy = problem.hvp(&x, &z, &v)?;
        let plain = problem.hvp(&x, &structural, &v)?;
        let expected = plain.add(&v.scaled(z.hess_shift));
        shift_ok &= z.hess_shift.abs() <= consts.sigma_h
            && noisy.distance(&expected) <= 1e-12 * (1.0 + expected.norm());
        worst_shift = worst_shift.max(z.hess_shift.abs());

        let gs = problem.grad(&x, &structural)?.norm();
        bound_ratio = bound_ratio.max(gs / consts.grad_bound_g);
    }

    let mut lines = vec![
        CheckLine {
            name: "sampled gradient vs central differences".into(),
            passed: ok_g,
            detail: format!("max rel err {worst_g:.3e}, tol {GRAD_TOL:e}, {points} points"),
        },
        CheckLine {
            name: "sampled HVP vs central differences".into(),
            passed: ok_h,
            detail: format!("max rel err {worst_h:.3e}, tol {HVP_TOL:e}, {points} points"),
        },
        CheckLine {
            name: "exact gradient vs central differences".into(),
            passed: ok_ref,
            detail: format!("max rel err {worst_ref:.3e}, tol {GRAD_TOL:e}, {points} points"),
        },
        CheckLine {
            name: "Hessian noise is s·v with |s| <= sigma_H".into(),
            passed: shift_ok,
            detail: format!("max |s| {worst_shift:.3e}, sigma_H {:e}", consts.sigma_h),
        },
    ];
    if problem.certified() {
        lines.push(CheckLine {
            name: "noise-free sampled gradient norm <= G".into(),
            passed: bound_ratio <= 1.0 + 1e-12,
            detail: format!("max ||grad f|| / G = {bound_ratio:.3e}"),
        });
    } else {
        lines.push(CheckLine {
            name: "gradient bound G (estimated constants, informational)".into(),
            passed: true,
            detail: format!("max ||grad f|| / G = {bound_ratio:.3e}"),
        });
    }

    // unbiasedness at x_1: mean of n sampled gradients is within 6 standard errors
    let n = 2000;
    let x1 = problem.initial_point();
    let truth = problem.true_grad(x1)?;
    let mut mean = ParamVector::zeros(d);
    for _ in 0..n {
        let z = problem.sample(&mut sampling);
        mean.axpy(1.0 / n as f64, &problem.grad(x1, &z)?);
    }
    let dev = mean.distance(&truth);
    let allowed = 6.0 * consts.sigma_g / (n as f64).sqrt() + 1e-12 * (1.0 + truth.norm());
    lines.push(CheckLine {
        name: "sampled gradient is unbiased at x_1".into(),
        passed: dev <= allowed,
        detail: format!("||mean - grad F|| = {dev:.3e}, allowed {allowed:.3e}, n = {n}"),
    });

    lines.push(CheckLine {
        name: "wrong dimension rejected".into(),
        passed: problem.true_grad(&ParamVector::zeros(d + 1)).is_err(),
        detail: format!("dim {d}"),
    });

    Ok(CheckReport {
        problem: problem.name().to_string(),
        lines,
    })
}
