use super::{Model, ProblemSpec};
use crate::error::{Error, Result};
use crate::oracle::{AssumptionConstants, NoiseModel};
use crate::rng::RngStream;
use crate::vector::{dot, norm, ParamVector};

/// Logistic regression over a fixed dataset, `f(x, (a, y)) = log(1 + exp(-y aᵀx))`.
///
/// Per sample, with `s = sigmoid(y aᵀx)`:
/// `∇f = -y (1 - s) a` and `∇²f v = s (1 - s) a (aᵀv)`.
#[derive(Clone, Debug)]
pub struct Logistic {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-m))` without overflow.
fn softplus_neg(m: f64) -> f64 {
    (-m).max(0.0) + (-m.abs()).exp().ln_1p()
}

impl Logistic {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::invalid("logistic needs one label per sample and >= 1 sample"));
        }
        let d = features[0].len();
        if features.iter().any(|a| a.len() != d) {
            return Err(Error::invalid("ragged feature matrix"));
        }
        Ok(Logistic { features, labels })
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.features.iter().map(|a| norm(a)).fold(0.0, f64::max)
    }

    fn sample_loss(&self, x: &[f64], i: usize) -> f64 {
        softplus_neg(self.labels[i] * dot(&self.features[i], x))
    }

    fn add_sample_grad(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let (a, y) = (&self.features[i], self.labels[i]);
        let s = sigmoid(y * dot(a, x));
        let c = -weight * y * (1.0 - s);
        out.iter_mut().zip(a).for_each(|(o, a)| *o += c * a);
    }

    fn add_sample_hvp(&self, x: &[f64], i: usize, v: &[f64], weight: f64, out: &mut [f64]) {
        let a = &self.features[i];
        let s = sigmoid(self.labels[i] * dot(a, x));
        let c = weight * s * (1.0 - s) * dot(a, v);
        out.iter_mut().zip(a).for_each(|(o, a)| *o += c * a);
    }
}

impl Model for Logistic {
    fn dim(&self) -> usize {
        self.features[0].len()
    }

    fn components(&self) -> Option<usize> {
        Some(self.features.len())
    }

    fn loss(&self, x: &[f64], component: Option<usize>) -> f64 {
        match component {
            Some(i) => self.sample_loss(x, i),
            None => {
                let n = self.features.len();
                (0..n).map(|i| self.sample_loss(x, i)).sum::<f64>() / n as f64
            }
        }
    }

    fn grad(&self, x: &[f64], component: Option<usize>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        match component {
            Some(i) => self.add_sample_grad(x, i, 1.0, &mut out),
            None => {
                let w = 1.0 / self.features.len() as f64;
                (0..self.features.len()).for_each(|i| self.add_sample_grad(x, i, w, &mut out));
            }
        }
        out
    }

    fn hvp(&self, x: &[f64], component: Option<usize>, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        match component {
            Some(i) => self.add_sample_hvp(x, i, v, 1.0, &mut out),
            None => {
                let w = 1.0 / self.features.len() as f64;
                (0..self.features.len()).for_each(|i| self.add_sample_hvp(x, i, v, w, &mut out));
            }
        }
        out
    }
}

/// Gaussian features, labels from a random teacher plus label noise, start at 0.
///
/// Declared constants with `A = max ‖a_i‖`: `G = A` (per-sample gradients have
/// norm `(1 - s)‖a‖ ≤ ‖a‖`), `L = A²/4`, `ρ = A³/(6√3)` (the third derivative
/// of the logistic loss is at most `1/(6√3)` in magnitude), `σ_G = G` and
/// `σ_H = A²/4`. `Δ` is `F(0) = ln 2`, an upper bound on `F(0) - inf F`.
pub fn make_logistic(dim: usize, n_samples: usize, rng: &mut RngStream) -> Result<ProblemSpec> {
    if dim == 0 || n_samples == 0 {
        return Err(Error::invalid("logistic needs dim >= 1 and n_samples >= 1"));
    }
    let teacher = rng.normal_vec(dim, 1.0);
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = rng.normal_vec(dim, 1.0);
        let margin = dot(&teacher, &a) + 0.5 * rng.normal();
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
        features.push(a);
    }
    let model = Logistic::new(features, labels)?;
    let a_max = model.max_feature_norm();
    let x1 = ParamVector::zeros(dim);
    let constants = AssumptionConstants {
        delta: model.loss(&x1, None),
        lipschitz_l: (a_max * a_max / 4.0).max(f64::MIN_POSITIVE),
        sigma_g: a_max,
        sigma_h: a_max * a_max / 4.0,
        rho: a_max.powi(3) / (6.0 * 3f64.sqrt()),
        grad_bound_g: a_max.max(f64::MIN_POSITIVE),
    };
    Ok(ProblemSpec::new("logistic", Box::new(model), NoiseModel::NONE, constants, x1))
}
