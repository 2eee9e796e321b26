//! Dense parameter vectors.
//!
//! Every reduction runs in ascending index order with a single accumulator so
//! results are bit-reproducible regardless of platform or thread count.

use serde::{Deserialize, Serialize};
use std::ops::Index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn check(&self, other: &ParamVector) {
        assert_eq!(
            self.len(),
            other.len(),
            "ParamVector dimension mismatch ({} vs {})",
            self.len(),
            other.len()
        );
    }

    /// `self += alpha * x`, elementwise as `self[i] + alpha * x[i]`.
    pub fn add_scaled(&mut self, alpha: f64, x: &ParamVector) {
        self.check(x);
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += alpha * b;
        }
    }

    /// `self -= x`.
    pub fn sub_assign(&mut self, x: &ParamVector) {
        self.check(x);
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a -= b;
        }
    }

    /// `self += x`.
    pub fn add_assign(&mut self, x: &ParamVector) {
        self.check(x);
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|a| alpha * a).collect())
    }

    pub fn sub(&self, x: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out.sub_assign(x);
        out
    }

    pub fn add(&self, x: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out.add_assign(x);
        out
    }

    pub fn dot(&self, x: &ParamVector) -> f64 {
        self.check(x);
        let mut acc = 0.0;
        for (a, b) in self.0.iter().zip(&x.0) {
            acc += a * b;
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.0 {
            acc += a * a;
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }

    /// Bit-level equality (distinguishes `0.0` from `-0.0`, equates NaN payloads).
    pub fn bit_eq(&self, other: &ParamVector) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Little-endian IEEE-754 bytes, used by the trace container.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Option<ParamVector> {
        if bytes.len() % 8 != 0 {
            return None;
        }
        Some(ParamVector(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}
