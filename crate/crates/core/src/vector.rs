//! Dense parameter vectors.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector of `f64` parameters, the iterate `x` of every optimizer.
///
/// Construction through [`ParamVector::new`] rejects NaN and infinite
/// entries. The arithmetic helpers never check; callers that need the
/// guarantee after an update call [`ParamVector::is_finite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(ParamVector(values))
        } else {
            Err(Error::NonFinite("ParamVector::new"))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    /// Wraps values produced by internal arithmetic without a finiteness check.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (s, o) in self.0.iter_mut().zip(other) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        ParamVector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        ParamVector(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[f64]) -> Self {
        ParamVector(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.0.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.0.len(),
            })
        }
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn basic_arithmetic() {
        let mut v = ParamVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.norm(), 5.0);
        v.axpy(2.0, &[1.0, -1.0]);
        assert_eq!(v.as_slice(), &[5.0, 2.0]);
        assert_eq!(v.sub(&[5.0, 2.0]).norm(), 0.0);
        assert_eq!(v.max_abs(), 5.0);
    }
}
