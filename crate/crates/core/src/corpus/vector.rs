use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VectorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
}

/// Dense embedding with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, VectorError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn zeros(dimension: usize) -> Self {
        Self {
            values: vec![T::zero(); dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dot(&self, other: &Self) -> Result<T, VectorError> {
        if self.dimension() != other.dimension() {
            return Err(VectorError::DimensionMismatch(
                self.dimension(),
                other.dimension(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b))
    }

    pub fn norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc + *v * *v)
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// Scales to unit length; zero vectors are returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if !n.is_zero() {
            for v in &mut self.values {
                *v = *v / n;
            }
        }
        self
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to [-1, 1] against rounding.
pub fn cosine<T: Scalar>(u: &EmbeddingVector<T>, v: &EmbeddingVector<T>) -> Result<T, VectorError> {
    let dot = u.dot(v)?;
    let (nu, nv) = (u.norm(), v.norm());
    if nu.is_zero() || nv.is_zero() {
        return Err(VectorError::ZeroVector);
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}
