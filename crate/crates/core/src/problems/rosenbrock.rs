use super::{Model, ProblemSpec, DEFAULT_BOX};
use crate::error::Result;
use crate::oracle::{AssumptionConstants, NoiseModel};
use crate::vector::ParamVector;

/// `F(x, y) = (1 - x)² + 100 (y - x²)²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rosenbrock;

const A: f64 = 1.0;
const B: f64 = 100.0;

impl Rosenbrock {
    pub fn hessian(p: &[f64]) -> [[f64; 2]; 2] {
        let (x, y) = (p[0], p[1]);
        let h11 = 2.0 - 4.0 * B * (y - x * x) + 8.0 * B * x * x;
        let h12 = -4.0 * B * x;
        [[h11, h12], [h12, 2.0 * B]]
    }
}

impl Model for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn components(&self) -> Option<usize> {
        None
    }

    fn loss(&self, p: &[f64], _: Option<usize>) -> f64 {
        let (x, y) = (p[0], p[1]);
        (A - x).powi(2) + B * (y - x * x).powi(2)
    }

    fn grad(&self, p: &[f64], _: Option<usize>) -> Vec<f64> {
        let (x, y) = (p[0], p[1]);
        let r = y - x * x;
        vec![-2.0 * (A - x) - 4.0 * B * x * r, 2.0 * B * r]
    }

    fn hvp(&self, p: &[f64], _: Option<usize>, v: &[f64]) -> Vec<f64> {
        let h = Rosenbrock::hessian(p);
        vec![h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
    }
}

pub fn make_rosenbrock(sigma_g: f64) -> Result<ProblemSpec> {
    make_rosenbrock_with_noise(sigma_g, 0.0)
}

/// Rosenbrock from `(-1.2, 1)`. Constants are bounds over the `‖x‖∞ ≤ 10` box:
/// gradient and Hessian entries are bounded termwise, the spectral norms by
/// Frobenius norms.
pub fn make_rosenbrock_with_noise(sigma_g: f64, sigma_h: f64) -> Result<ProblemSpec> {
    let noise = NoiseModel::new(sigma_g, sigma_h)?;
    let r = DEFAULT_BOX;
    let residual = r + r * r; // max |y - x²|
    let g1 = 2.0 * (A + r) + 4.0 * B * r * residual;
    let g2 = 2.0 * B * residual;
    let h11 = 2.0 + 4.0 * B * r + 12.0 * B * r * r;
    let h12 = 4.0 * B * r;
    let h22 = 2.0 * B;
    // third derivatives: F_xxx = 24 B x, F_xxy = -4 B
    let t111 = 24.0 * B * r;
    let t112 = 4.0 * B;
    let x1 = ParamVector::new(vec![-1.2, 1.0])?;
    let constants = AssumptionConstants {
        delta: Rosenbrock.loss(&x1, None),
        lipschitz_l: (h11 * h11 + 2.0 * h12 * h12 + h22 * h22).sqrt(),
        sigma_g,
        sigma_h,
        rho: (t111 * t111 + 3.0 * t112 * t112).sqrt(),
        grad_bound_g: (g1 * g1 + g2 * g2).sqrt() + noise.grad_noise_envelope(2),
    };
    Ok(ProblemSpec::new("rosenbrock", Box::new(Rosenbrock), noise, constants, x1).with_box(DEFAULT_BOX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::StochasticOracle;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn sym2_eigs(h: [[f64; 2]; 2]) -> (f64, f64) {
        let tr = h[0][0] + h[1][1];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let disc = (tr * tr / 4.0 - det).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    #[test]
    fn known_gradients() {
        let p = make_rosenbrock(0.0).unwrap();
        assert_eq!(p.true_grad(&pv(&[1.0, 1.0])).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(p.true_grad(&pv(&[0.0, 0.0])).unwrap().as_slice(), &[-2.0, 0.0]);
        assert!((p.constants().delta - 24.2).abs() < 1e-12);
    }

    #[test]
    fn hessian_eigenvalues_match_fd_hessian() {
        let p = make_rosenbrock(0.0).unwrap();
        let x = pv(&[1.0, 1.0]);
        let eps = 1e-5 * (1.0 + x.norm());
        let mut fd = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut e = [0.0; 2];
            e[j] = eps;
            let gp = p.true_grad(&x.add(&e)).unwrap();
            let gm = p.true_grad(&x.sub(&e)).unwrap();
            for i in 0..2 {
                fd[i][j] = (gp[i] - gm[i]) / (2.0 * eps);
            }
        }
        let (a0, a1) = sym2_eigs(Rosenbrock::hessian(&x));
        let (n0, n1) = sym2_eigs(fd);
        assert!(((a0 - n0) / a0).abs() < 1e-4);
        assert!(((a1 - n1) / a1).abs() < 1e-4);
    }
}
