//! Two-layer tanh network with squared loss and a hand-written R-operator.
//!
//! For one sample `(a, y)` and parameters `x = (W₁, b₁, w₂, b₂)`:
//!
//! ```text
//! z = W₁ a + b₁,   h = tanh(z),   ŷ = w₂ᵀh + b₂,   r = ŷ - y,   f = ½ r²
//! ```
//!
//! Backprop gives `∇f`:
//!
//! ```text
//! ∂w₂ = r h          ∂b₂ = r
//! δh  = r w₂         δz  = δh ⊙ (1 - h²)
//! ∂W₁ = δz aᵀ        ∂b₁ = δz
//! ```
//!
//! The HVP `∇²f · v` is the directional derivative `R{·}` of every backprop
//! quantity along `v = (V₁, c₁, v₂, c₂)` (forward-over-reverse):
//!
//! ```text
//! R{z}   = V₁ a + c₁                   R{h}  = (1 - h²) ⊙ R{z}
//! R{r}   = v₂ᵀh + w₂ᵀR{h} + c₂
//! R{∂w₂} = R{r} h + r R{h}             R{∂b₂} = R{r}
//! R{δh}  = R{r} w₂ + r v₂
//! R{δz}  = R{δh} ⊙ (1 - h²) - 2 δh ⊙ h ⊙ R{h}
//! R{∂W₁} = R{δz} aᵀ                    R{∂b₁} = R{δz}
//! ```
//!
//! Parameters are flattened as `[W₁ (row-major, hidden × input), b₁, w₂, b₂]`.

use super::{Model, ProblemSpec};
use crate::error::{Error, Result};
use crate::oracle::{AssumptionConstants, NoiseModel};
use crate::rng::RngStream;
use crate::vector::{dot, norm, ParamVector};

#[derive(Clone, Debug)]
pub struct Mlp {
    input_dim: usize,
    hidden: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

struct Forward {
    h: Vec<f64>,
    r: f64,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: usize, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid("mlp needs input_dim >= 1 and hidden_width >= 1"));
        }
        if inputs.is_empty() || inputs.len() != targets.len() || inputs.iter().any(|a| a.len() != input_dim) {
            return Err(Error::invalid("mlp dataset shape mismatch"));
        }
        Ok(Mlp {
            input_dim,
            hidden,
            inputs,
            targets,
        })
    }

    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        hidden * input_dim + 2 * hidden + 1
    }

    fn b1_off(&self) -> usize {
        self.hidden * self.input_dim
    }

    fn w2_off(&self) -> usize {
        self.b1_off() + self.hidden
    }

    fn b2_off(&self) -> usize {
        self.w2_off() + self.hidden
    }

    /// Network output for input `a`.
    pub fn predict(&self, x: &[f64], a: &[f64]) -> f64 {
        let (w2, b2) = (&x[self.w2_off()..self.b2_off()], x[self.b2_off()]);
        dot(w2, &self.hidden_act(x, a)) + b2
    }

    fn hidden_act(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        let n = self.input_dim;
        (0..self.hidden)
            .map(|j| (dot(&x[j * n..(j + 1) * n], a) + x[self.b1_off() + j]).tanh())
            .collect()
    }

    fn forward(&self, x: &[f64], i: usize) -> Forward {
        let h = self.hidden_act(x, &self.inputs[i]);
        let yhat = dot(&x[self.w2_off()..self.b2_off()], &h) + x[self.b2_off()];
        Forward {
            r: yhat - self.targets[i],
            h,
        }
    }

    fn sample_loss(&self, x: &[f64], i: usize) -> f64 {
        let r = self.forward(x, i).r;
        0.5 * r * r
    }

    fn add_sample_grad(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let n = self.input_dim;
        let a = &self.inputs[i];
        let Forward { h, r } = self.forward(x, i);
        let w2 = &x[self.w2_off()..self.b2_off()];
        for j in 0..self.hidden {
            let dz = r * w2[j] * (1.0 - h[j] * h[j]);
            for k in 0..n {
                out[j * n + k] += weight * dz * a[k];
            }
            out[self.b1_off() + j] += weight * dz;
            out[self.w2_off() + j] += weight * r * h[j];
        }
        out[self.b2_off()] += weight * r;
    }

    fn add_sample_hvp(&self, x: &[f64], i: usize, v: &[f64], weight: f64, out: &mut [f64]) {
        let n = self.input_dim;
        let a = &self.inputs[i];
        let Forward { h, r } = self.forward(x, i);
        let w2 = &x[self.w2_off()..self.b2_off()];
        let v2 = &v[self.w2_off()..self.b2_off()];
        let c2 = v[self.b2_off()];

        let rh: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let rz = dot(&v[j * n..(j + 1) * n], a) + v[self.b1_off() + j];
                (1.0 - h[j] * h[j]) * rz
            })
            .collect();
        let rr = dot(v2, &h) + dot(w2, &rh) + c2;

        for j in 0..self.hidden {
            let sech2 = 1.0 - h[j] * h[j];
            let dh = r * w2[j];
            let rdh = rr * w2[j] + r * v2[j];
            let rdz = rdh * sech2 - 2.0 * dh * h[j] * rh[j];
            for k in 0..n {
                out[j * n + k] += weight * rdz * a[k];
            }
            out[self.b1_off() + j] += weight * rdz;
            out[self.w2_off() + j] += weight * (rr * h[j] + r * rh[j]);
        }
        out[self.b2_off()] += weight * rr;
    }
}

impl Model for Mlp {
    fn dim(&self) -> usize {
        Mlp::param_count(self.input_dim, self.hidden)
    }

    fn components(&self) -> Option<usize> {
        Some(self.inputs.len())
    }

    fn loss(&self, x: &[f64], component: Option<usize>) -> f64 {
        match component {
            Some(i) => self.sample_loss(x, i),
            None => {
                let m = self.inputs.len();
                (0..m).map(|i| self.sample_loss(x, i)).sum::<f64>() / m as f64
            }
        }
    }

    fn grad(&self, x: &[f64], component: Option<usize>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        match component {
            Some(i) => self.add_sample_grad(x, i, 1.0, &mut out),
            None => {
                let w = 1.0 / self.inputs.len() as f64;
                (0..self.inputs.len()).for_each(|i| self.add_sample_grad(x, i, w, &mut out));
            }
        }
        out
    }

    fn hvp(&self, x: &[f64], component: Option<usize>, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        match component {
            Some(i) => self.add_sample_hvp(x, i, v, 1.0, &mut out),
            None => {
                let w = 1.0 / self.inputs.len() as f64;
                (0..self.inputs.len()).for_each(|i| self.add_sample_hvp(x, i, v, w, &mut out));
            }
        }
        out
    }
}

pub fn make_mlp(hidden_width: usize, n_samples: usize, rng: &mut RngStream) -> Result<ProblemSpec> {
    make_mlp_with_input(hidden_width, n_samples, 3, rng)
}

/// Student-teacher regression: targets come from a random network of the same
/// shape, so `inf F = 0`.
///
/// The student starts from a small random initialization. Only `Δ = F(x₁)` is
/// exact; `L`, `ρ`, `G`, `σ_H` are numerical estimates at `x₁` inflated by 2×
/// and the spec is marked [`ProblemSpec::estimated`].
pub fn make_mlp_with_input(
    hidden_width: usize,
    n_samples: usize,
    input_dim: usize,
    rng: &mut RngStream,
) -> Result<ProblemSpec> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let dim = Mlp::param_count(input_dim, hidden_width.max(1));
    if hidden_width == 0 || input_dim == 0 {
        return Err(Error::invalid("mlp needs input_dim >= 1 and hidden_width >= 1"));
    }
    let teacher_shape = Mlp::new(input_dim, hidden_width, vec![vec![0.0; input_dim]], vec![0.0])?;
    let teacher = init_params(input_dim, hidden_width, 1.0, rng);
    let inputs: Vec<Vec<f64>> = (0..n_samples).map(|_| rng.normal_vec(input_dim, 1.0)).collect();
    let targets: Vec<f64> = inputs.iter().map(|a| teacher_shape.predict(&teacher, a)).collect();
    let model = Mlp::new(input_dim, hidden_width, inputs, targets)?;
    let x1 = init_params(input_dim, hidden_width, 0.5, rng);

    let spectral = |v0: Vec<f64>, component: Option<usize>| {
        let mut v = v0;
        let mut lam = 0.0;
        for _ in 0..50 {
            let nv = norm(&v);
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|e| *e /= nv);
            let hv = model.hvp(&x1, component, &v);
            lam = norm(&hv);
            v = hv;
        }
        lam
    };
    let lipschitz_l = 2.0 * spectral(rng.normal_vec(dim, 1.0), None);
    let sigma_h = 2.0
        * (0..n_samples)
            .map(|i| spectral(rng.normal_vec(dim, 1.0), Some(i)))
            .fold(0.0, f64::max);
    let grad_bound_g = 2.0
        * (0..n_samples)
            .map(|i| norm(&model.grad(&x1, Some(i))))
            .fold(0.0, f64::max);
    let mut rho: f64 = 0.0;
    let step = 0.1;
    for _ in 0..8 {
        let mut u = rng.normal_vec(dim, 1.0);
        let mut v = rng.normal_vec(dim, 1.0);
        let (nu, nv) = (norm(&u), norm(&v));
        u.iter_mut().for_each(|e| *e *= step / nu);
        v.iter_mut().for_each(|e| *e /= nv);
        let moved: Vec<f64> = x1.iter().zip(&u).map(|(x, u)| x + u).collect();
        let diff: Vec<f64> = model
            .hvp(&moved, None, &v)
            .iter()
            .zip(model.hvp(&x1, None, &v))
            .map(|(a, b)| a - b)
            .collect();
        rho = rho.max(norm(&diff) / step);
    }
    let x1 = ParamVector::new(x1)?;
    let constants = AssumptionConstants {
        delta: model.loss(&x1, None),
        lipschitz_l: lipschitz_l.max(f64::MIN_POSITIVE),
        sigma_g: grad_bound_g,
        sigma_h,
        rho: 2.0 * rho,
        grad_bound_g: grad_bound_g.max(f64::MIN_POSITIVE),
    };
    Ok(ProblemSpec::new("mlp", Box::new(model), NoiseModel::NONE, constants, x1).estimated())
}

fn init_params(input_dim: usize, hidden: usize, scale: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut x = Vec::with_capacity(Mlp::param_count(input_dim, hidden));
    x.extend(rng.normal_vec(hidden * input_dim, scale / (input_dim as f64).sqrt()));
    x.extend(std::iter::repeat_n(0.0, hidden));
    x.extend(rng.normal_vec(hidden, scale / (hidden as f64).sqrt()));
    x.push(0.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{default_fd_eps, fd_check_grad, fd_check_hvp, max_relative_error, StochasticOracle};
    use crate::rng::Stream;

    #[test]
    fn zero_weights_zero_targets() {
        let m = Mlp::new(2, 3, vec![vec![1.0, -2.0], vec![0.5, 0.5]], vec![0.0, 0.0]).unwrap();
        let x = vec![0.0; m.dim()];
        let g = m.grad(&x, Some(0));
        assert!(g[m.w2_off()..m.b2_off()].iter().all(|v| *v == 0.0));
        // f = ½ (b₂ - y)² = 0 at the origin
        assert_eq!(m.loss(&x, None), 0.0);
        let mut x = x;
        x[m.b2_off()] = 0.7;
        assert!((m.loss(&x, Some(1)) - 0.5 * 0.49).abs() < 1e-15);
        assert!((m.grad(&x, Some(1))[m.b2_off()] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn r_op_matches_central_differences() {
        let mut rng = RngStream::new(11, Stream::Problem);
        let p = make_mlp(6, 32, &mut rng).unwrap();
        let mut s = RngStream::new(12, Stream::Init);
        for _ in 0..20 {
            let x = ParamVector::from_raw(s.normal_vec(p.dim(), 0.7));
            let v = ParamVector::from_raw(s.normal_vec(p.dim(), 1.0));
            let z = p.sample(&mut s);
            let eps = default_fd_eps(&x);
            let r = fd_check_hvp(&p, &x, &z, &v, eps, 1e-4).unwrap();
            assert!(r.passed, "{r:?}");
            let r = fd_check_grad(&p, &x, &z, eps, 1e-6).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn hvp_is_linear() {
        let mut rng = RngStream::new(2, Stream::Problem);
        let p = make_mlp(4, 8, &mut rng).unwrap();
        let mut s = RngStream::new(3, Stream::Init);
        let x = ParamVector::from_raw(s.normal_vec(p.dim(), 1.0));
        let u = ParamVector::from_raw(s.normal_vec(p.dim(), 1.0));
        let v = ParamVector::from_raw(s.normal_vec(p.dim(), 1.0));
        let z = p.sample(&mut s);
        let (a, b) = (1.7, -0.3);
        let combo = u.scaled(a).add(&v.scaled(b));
        let lhs = p.hvp(&x, &z, &combo).unwrap();
        let rhs = p.hvp(&x, &z, &u).unwrap().scaled(a).add(&p.hvp(&x, &z, &v).unwrap().scaled(b));
        assert!(max_relative_error(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn teacher_data_gives_low_floor() {
        let mut rng = RngStream::new(0, Stream::Problem);
        let p = make_mlp(8, 64, &mut rng).unwrap();
        assert!(!p.certified());
        assert!(p.constants().delta > 0.0);
    }
}
