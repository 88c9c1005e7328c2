use sgdhess::oracle::{power_iteration, OracleSample, StochasticOracle};
use sgdhess::problems::ProblemConfig;
use sgdhess::rng::{RngStream, Stream};
use sgdhess::ParamVector;

fn build(name: &str) -> sgdhess::problems::ProblemSpec {
    ProblemConfig::by_name(name).unwrap().build().unwrap()
}

#[test]
fn gradient_noise_budget_monte_carlo() {
    for name in ["quadratic", "separable", "rosenbrock"] {
        let p = build(name);
        let sigma_g = p.constants().sigma_g;
        let mut rng = RngStream::new(1, Stream::Init);
        let mut s = RngStream::new(1, Stream::Sampling);
        for _ in 0..10 {
            let x = ParamVector::new(rng.uniform_vec(p.dim(), -2.0, 2.0)).unwrap();
            let truth = p.true_grad(&x).unwrap();
            let n = 100_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let z = p.sample(&mut s);
                acc += p.grad(&x, &z).unwrap().distance(&truth).powi(2);
            }
            let est = acc / n as f64;
            assert!(est <= sigma_g * sigma_g * 1.05, "{name}: {est}");
        }
    }
}

#[test]
fn finite_sum_noise_budget() {
    let p = build("logistic");
    let sigma_g = p.constants().sigma_g;
    let mut rng = RngStream::new(2, Stream::Init);
    let mut s = RngStream::new(2, Stream::Sampling);
    for _ in 0..10 {
        let x = ParamVector::new(rng.uniform_vec(p.dim(), -1.0, 1.0)).unwrap();
        let truth = p.true_grad(&x).unwrap();
        let n = 100_000;
        let acc: f64 = (0..n).map(|_| p.grad(&x, &p.sample(&mut s)).unwrap().distance(&truth).powi(2)).sum();
        assert!(acc / n as f64 <= sigma_g * sigma_g * 1.05);
    }
}

#[test]
fn hessian_noise_is_deterministically_bounded() {
    let p = build("separable");
    let sigma_h = p.constants().sigma_h;
    let mut rng = RngStream::new(3, Stream::Init);
    let mut s = RngStream::new(3, Stream::Sampling);
    for _ in 0..10_000 {
        let x = ParamVector::new(rng.normal_vec(p.dim(), 2.0)).unwrap();
        let v = ParamVector::new(rng.normal_vec(p.dim(), 1.0)).unwrap();
        let z = p.sample(&mut s);
        let dev = p.hvp(&x, &z, &v).unwrap().distance(&p.true_hvp(&x, &v).unwrap());
        assert!(dev <= sigma_h * v.norm() * (1.0 + 1e-12));
    }
}

#[test]
fn quadratic_hvp_is_independent_of_x() {
    let p = build("quadratic");
    let mut rng = RngStream::new(4, Stream::Init);
    let mut s = RngStream::new(4, Stream::Sampling);
    for _ in 0..100 {
        let z = p.sample(&mut s);
        let v = ParamVector::new(rng.normal_vec(p.dim(), 1.0)).unwrap();
        let a = ParamVector::new(rng.normal_vec(p.dim(), 5.0)).unwrap();
        let b = ParamVector::new(rng.normal_vec(p.dim(), 5.0)).unwrap();
        assert_eq!(p.hvp(&a, &z, &v).unwrap(), p.hvp(&b, &z, &v).unwrap());
    }
}

#[test]
fn logistic_per_sample_gradient_bound_in_box() {
    let p = build("logistic");
    let g = p.constants().grad_bound_g;
    let mut rng = RngStream::new(5, Stream::Init);
    let mut s = RngStream::new(5, Stream::Sampling);
    for _ in 0..100_000 {
        let x = ParamVector::new(rng.uniform_vec(p.dim(), -10.0, 10.0)).unwrap();
        let z = p.sample(&mut s);
        assert!(p.grad(&x, &z).unwrap().norm() <= g * (1.0 + 1e-12));
    }
}

#[test]
fn datasets_regenerate_identically() {
    for name in ["quadratic", "logistic", "mlp"] {
        let a = build(name);
        let b = build(name);
        assert_eq!(a.constants(), b.constants(), "{name}");
        let x = a.initial_point().add(&vec![0.3; a.dim()]);
        let z = OracleSample::degenerate();
        assert_eq!(a.grad(&x, &z).unwrap(), b.grad(&x, &z).unwrap(), "{name}");
    }
}

#[test]
fn quadratic_top_eigenvalue_is_condition_number() {
    let p = ProblemConfig::Quadratic {
        dim: 10,
        condition_number: 10.0,
        sigma_g: 0.0,
        data_seed: 9,
    }
    .build()
    .unwrap();
    let mut rng = RngStream::new(0, Stream::Init);
    let lambda = power_iteration(&p, &ParamVector::zeros(10), 300, &mut rng).unwrap();
    assert!((lambda - 10.0).abs() <= 1e-6, "{lambda}");
    assert_eq!(p.constants().lipschitz_l, 10.0);
}

#[test]
fn separable_minimizer_is_stationary() {
    let p = build("separable");
    let x1 = p.initial_point();
    // F(x_1) = Δ and F ≥ 0 with F(x*) = 0
    assert!((p.true_loss(x1).unwrap() - p.constants().delta).abs() < 1e-12);
    let xstar: Vec<f64> = (0..p.dim()).map(|i| 1.5 * ((i + 1) as f64).sin()).collect();
    let xstar = ParamVector::new(xstar).unwrap();
    assert_eq!(p.true_grad(&xstar).unwrap().norm(), 0.0);
    assert_eq!(p.true_loss(&xstar).unwrap(), 0.0);
}
