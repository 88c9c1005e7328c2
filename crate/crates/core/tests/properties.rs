use proptest::prelude::*;

use sgdhess::harness::{run_oracle, IterateMode, RunSettings};
use sgdhess::optimizers::{clip, grad_diff_step, init_step, nsgdhess_step, sgdhess_step, Algorithm, OptimizerState};
use sgdhess::oracle::{AssumptionConstants, StochasticOracle};
use sgdhess::problems::ProblemConfig;
use sgdhess::rng::{RngStream, Stream};
use sgdhess::schedules::{adaptive_eta, alpha_from_etas, AdaptiveAccumulator, ScheduleParams};
use sgdhess::ParamVector;

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..12)
}

fn noiseless_quadratic(dim: usize, data_seed: u64) -> sgdhess::problems::ProblemSpec {
    ProblemConfig::Quadratic {
        dim,
        condition_number: 10.0,
        sigma_g: 0.0,
        data_seed,
    }
    .build()
    .unwrap()
}

proptest! {
    #[test]
    fn clip_never_exceeds_threshold(v in vec_strategy(), g in 1e-3f64..1e3) {
        let x = ParamVector::new(v).unwrap();
        let (c, clipped) = clip(&x, g);
        prop_assert!(c.norm() <= g * (1.0 + 1e-12));
        prop_assert_eq!(clipped, x.norm() > g);
        if !clipped {
            prop_assert_eq!(c, x);
        } else {
            // same direction
            let cos = c.dot(&x) / (c.norm() * x.norm());
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_weights_stay_in_unit_interval(k in 1e-12f64..1e6, e1 in 1e-9f64..10.0, e2 in 1e-9f64..10.0) {
        let a = alpha_from_etas(k, e1, e2);
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn theorem1_schedule_is_valid(
        g in 1e-3f64..1e3, l in 1e-3f64..1e3, rho in 0.0f64..1e2, sh in 0.0f64..1e2, horizon in 2usize..100_000,
    ) {
        let c = AssumptionConstants { delta: 1.0, lipschitz_l: l, sigma_g: 1.0, sigma_h: sh, rho, grad_bound_g: g };
        let s = ScheduleParams::theorem1(&c, horizon);
        s.validate().unwrap();
        for t in [1, 2, horizon / 2 + 1, horizon] {
            prop_assert!(s.eta_at(t) > 0.0);
            prop_assert!(s.eta_at(t + 1) <= s.eta_at(t));
        }
        for t in [2, horizon] {
            let a = s.alpha_before(t);
            prop_assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn adaptive_step_size_never_grows(norms in prop::collection::vec(0.0f64..1e3, 1..50), c in 1e-3f64..10.0, w in 1e-3f64..1e3) {
        let mut acc = AdaptiveAccumulator::new();
        let mut prev = adaptive_eta(&acc, c, w);
        for n in norms {
            acc.push(n);
            let eta = adaptive_eta(&acc, c, w);
            prop_assert!(eta <= prev);
            prev = eta;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_steps_have_length_eta(seed in 0u64..1000, eta in 1e-4f64..1.0, alpha in 1e-3f64..1.0) {
        let p = ProblemConfig::by_name("separable").unwrap().build().unwrap();
        let mut rng = RngStream::new(seed, Stream::Sampling);
        let mut s = OptimizerState::new(p.initial_point().clone());
        init_step(&mut s, &p, Algorithm::Nsgdhess, eta, f64::INFINITY, &mut rng).unwrap();
        for _ in 0..50 {
            let before = s.x.clone();
            let info = nsgdhess_step(&mut s, &p, eta, alpha, &mut rng).unwrap();
            prop_assert!(!info.zero_step);
            prop_assert!((s.x.distance(&before) - eta).abs() <= 1e-12 * eta.max(1.0));
        }
    }

    #[test]
    fn correction_tracks_noiseless_quadratic(
        data_seed in 0u64..100, seed in 0u64..100, eta in 1e-3f64..0.09, alpha in 1e-3f64..1.0,
    ) {
        let p = noiseless_quadratic(6, data_seed);
        let mut rng = RngStream::new(seed, Stream::Sampling);
        let mut s = OptimizerState::new(p.initial_point().clone());
        let g1 = p.true_grad(&s.x).unwrap().norm();
        init_step(&mut s, &p, Algorithm::Sgdhess, eta, f64::INFINITY, &mut rng).unwrap();
        for _ in 0..200 {
            sgdhess_step(&mut s, &p, eta, alpha, f64::INFINITY, &mut rng).unwrap();
            let err = s.g_hat.distance(&p.true_grad(&s.x_prev).unwrap());
            prop_assert!(err <= 1e-12 * (1.0 + g1), "err {}", err);
        }
    }

    #[test]
    fn hvp_and_gradient_difference_agree_on_quadratics(
        data_seed in 0u64..100, eta in 1e-3f64..0.09, alpha in 1e-3f64..1.0,
    ) {
        let p = ProblemConfig::Quadratic { dim: 5, condition_number: 10.0, sigma_g: 1.0, data_seed }.build().unwrap();
        let mut ra = RngStream::new(7, Stream::Sampling);
        let mut rb = RngStream::new(7, Stream::Sampling);
        let mut a = OptimizerState::new(p.initial_point().clone());
        let mut b = a.clone();
        init_step(&mut a, &p, Algorithm::Sgdhess, eta, f64::INFINITY, &mut ra).unwrap();
        init_step(&mut b, &p, Algorithm::GradDiff, eta, f64::INFINITY, &mut rb).unwrap();
        for _ in 0..100 {
            sgdhess_step(&mut a, &p, eta, alpha, f64::INFINITY, &mut ra).unwrap();
            grad_diff_step(&mut b, &p, eta, alpha, &mut rb).unwrap();
            prop_assert!(a.x.distance(&b.x) <= 1e-9 * (1.0 + a.x.norm()));
        }
    }

    #[test]
    fn runs_are_reproducible(seed in 0u64..10_000) {
        let p = ProblemConfig::by_name("rosenbrock").unwrap().build().unwrap();
        let settings = RunSettings {
            algorithm: Algorithm::Sgdhess,
            schedule: ScheduleParams::theorem1(&p.constants(), 200),
            seed,
            trace_stride: 1,
            iterate_mode: IterateMode::UniformRandom,
            feasible_box: p.feasible_box(),
        };
        let (ta, sa, _) = run_oracle(&p, p.initial_point(), &settings).unwrap();
        let (tb, sb, _) = run_oracle(&p, p.initial_point(), &settings).unwrap();
        prop_assert_eq!(ta, tb);
        prop_assert_eq!(sa.x, sb.x);
    }
}
