//! Dense vectors, linear operators and operator-norm estimation.

mod norm;
mod operator;
pub mod ops;

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Result};

pub use norm::{adjoint_residual, estimate_norm, power_iteration, NORM_ITERATIONS};
pub use operator::{
    DiagonalOperator, IdentityOperator, LinearOperator, MatrixOperator, NegAdjoint, OperatorHandle,
    StackedOperator, ZeroOperator,
};

/// Owned real vector. Images are stored row-major: pixel `(r, c)` sits at `r * n2 + c`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self {
            data: vec![value; len],
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(ops::dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        ops::norm(&self.data)
    }

    pub fn norm_sq(&self) -> f64 {
        ops::norm_sq(&self.data)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &DenseVector) -> Result<()> {
        check_len(self.len(), x.len())?;
        ops::axpy(alpha, &x.data, &mut self.data);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        ops::scale(alpha, &mut self.data);
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        check_len(self.len(), other.len())?;
        Ok(Self::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn dist_sq(&self, other: &DenseVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(ops::dist_sq(&self.data, &other.data))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

pub fn dot(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    a.dot(b)
}

/// A primal-dual pair `u = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: DenseVector,
    pub y: DenseVector,
}

impl PrimalDualPoint {
    pub fn new(x: DenseVector, y: DenseVector) -> Self {
        Self { x, y }
    }

    pub fn zeros(primal_dim: usize, dual_dim: usize) -> Self {
        Self {
            x: DenseVector::zeros(primal_dim),
            y: DenseVector::zeros(dual_dim),
        }
    }

    /// Exchange the roles of the primal and dual components.
    pub fn swapped(self) -> Self {
        Self {
            x: self.y,
            y: self.x,
        }
    }

    pub fn dist_sq(&self, other: &PrimalDualPoint) -> Result<f64> {
        Ok(self.x.dist_sq(&other.x)? + self.y.dist_sq(&other.y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_rejects_mismatched_lengths() {
        let a = DenseVector::zeros(3);
        let b = DenseVector::zeros(4);
        assert!(a.dot(&b).is_err());
    }

    #[test]
    fn axpy_and_norms() {
        let mut a = DenseVector::from_vec(vec![1.0, 2.0, 2.0]);
        assert_eq!(a.norm(), 3.0);
        let b = DenseVector::from_vec(vec![1.0, 0.0, -1.0]);
        a.axpy(2.0, &b).unwrap();
        assert_eq!(a.as_slice(), &[3.0, 2.0, 0.0]);
        assert_eq!(a.dist_sq(&b).unwrap(), 4.0 + 4.0 + 1.0);
    }

    #[test]
    fn swap_is_an_involution() {
        let u = PrimalDualPoint::new(vec![1.0].into(), vec![2.0, 3.0].into());
        assert_eq!(u.clone().swapped().swapped(), u);
    }
}
