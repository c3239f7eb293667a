use std::fmt;
use std::sync::Arc;

use super::DenseVector;
use crate::error::{check_len, Error, Result};

/// A bounded linear map between flat real vector spaces together with its adjoint.
///
/// `apply_into` and `adjoint_into` overwrite `out` completely and may assume
/// correctly sized arguments; the checked wrappers validate lengths.
pub trait LinearOperator: Send + Sync {
    fn domain_dim(&self) -> usize;
    fn codomain_dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    /// An upper bound on the operator norm, when one is known analytically.
    fn norm_bound(&self) -> Option<f64> {
        None
    }

    fn apply(&self, x: &DenseVector) -> Result<DenseVector> {
        check_len(self.domain_dim(), x.len())?;
        let mut out = DenseVector::zeros(self.codomain_dim());
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &DenseVector) -> Result<DenseVector> {
        check_len(self.codomain_dim(), y.len())?;
        let mut out = DenseVector::zeros(self.domain_dim());
        self.adjoint_into(y, &mut out);
        Ok(out)
    }
}

pub type OperatorHandle = Arc<dyn LinearOperator>;

impl fmt::Debug for dyn LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LinearOperator({} -> {})",
            self.domain_dim(),
            self.codomain_dim()
        )
    }
}

#[derive(Clone, Debug)]
pub struct IdentityOperator {
    pub dim: usize,
}

impl LinearOperator for IdentityOperator {
    fn domain_dim(&self) -> usize {
        self.dim
    }
    fn codomain_dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct ZeroOperator {
    pub domain: usize,
    pub codomain: usize,
}

impl LinearOperator for ZeroOperator {
    fn domain_dim(&self) -> usize {
        self.domain
    }
    fn codomain_dim(&self) -> usize {
        self.codomain
    }
    fn apply_into(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn adjoint_into(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    pub diag: Vec<f64>,
}

impl LinearOperator for DiagonalOperator {
    fn domain_dim(&self) -> usize {
        self.diag.len()
    }
    fn codomain_dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out);
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs())))
    }
}

/// Dense row-major matrix with `rows` outputs and `cols` inputs.
#[derive(Clone, Debug)]
pub struct MatrixOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

impl LinearOperator for MatrixOperator {
    fn domain_dim(&self) -> usize {
        self.cols
    }
    fn codomain_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = super::ops::dot(row, x);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            super::ops::axpy(*yi, row, out);
        }
    }
    fn norm_bound(&self) -> Option<f64> {
        // Frobenius norm dominates the spectral norm.
        Some(super::ops::norm(&self.data))
    }
}

/// `-K*`, the operator of the role-swapped saddle problem.
#[derive(Clone)]
pub struct NegAdjoint {
    pub inner: OperatorHandle,
}

impl LinearOperator for NegAdjoint {
    fn domain_dim(&self) -> usize {
        self.inner.codomain_dim()
    }
    fn codomain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.adjoint_into(x, out);
        super::ops::scale(-1.0, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner.apply_into(y, out);
        super::ops::scale(-1.0, out);
    }
    fn norm_bound(&self) -> Option<f64> {
        self.inner.norm_bound()
    }
}

/// Vertical stack `[A; B]` sharing one domain; the codomain is `[A x | B x]`.
#[derive(Clone)]
pub struct StackedOperator {
    pub top: OperatorHandle,
    pub bottom: OperatorHandle,
}

impl StackedOperator {
    pub fn new(top: OperatorHandle, bottom: OperatorHandle) -> Result<Self> {
        if top.domain_dim() != bottom.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: top.domain_dim(),
                found: bottom.domain_dim(),
            });
        }
        Ok(Self { top, bottom })
    }

    pub fn split(&self) -> usize {
        self.top.codomain_dim()
    }
}

impl LinearOperator for StackedOperator {
    fn domain_dim(&self) -> usize {
        self.top.domain_dim()
    }
    fn codomain_dim(&self) -> usize {
        self.top.codomain_dim() + self.bottom.codomain_dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.split());
        self.top.apply_into(x, a);
        self.bottom.apply_into(x, b);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (a, b) = y.split_at(self.split());
        self.top.adjoint_into(a, out);
        let mut tmp = vec![0.0; out.len()];
        self.bottom.adjoint_into(b, &mut tmp);
        super::ops::axpy(1.0, &tmp, out);
    }
    fn norm_bound(&self) -> Option<f64> {
        let a = self.top.norm_bound()?;
        let b = self.bottom.norm_bound()?;
        Some((a * a + b * b).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_adjoint_is_transpose() {
        let m = MatrixOperator::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = DenseVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(m.adjoint(&y).unwrap().as_slice(), &[-3.0, -3.0, -3.0]);
        let x = DenseVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert_eq!(m.apply(&x).unwrap().as_slice(), &[4.0, 10.0]);
    }

    #[test]
    fn apply_checks_dimensions() {
        let id = IdentityOperator { dim: 3 };
        assert!(id.apply(&DenseVector::zeros(2)).is_err());
        assert!(id.adjoint(&DenseVector::zeros(4)).is_err());
    }

    #[test]
    fn neg_adjoint_twice_is_original() {
        let m: OperatorHandle =
            Arc::new(MatrixOperator::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let twice = NegAdjoint {
            inner: Arc::new(NegAdjoint { inner: m.clone() }),
        };
        let x = DenseVector::from_vec(vec![0.5, -2.0]);
        assert_eq!(twice.apply(&x).unwrap(), m.apply(&x).unwrap());
    }

    #[test]
    fn stacked_adjoint_sums_blocks() {
        let s = StackedOperator::new(
            Arc::new(IdentityOperator { dim: 2 }),
            Arc::new(DiagonalOperator {
                diag: vec![2.0, 3.0],
            }),
        )
        .unwrap();
        let y = DenseVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.adjoint(&y).unwrap().as_slice(), &[3.0, 4.0]);
    }
}
