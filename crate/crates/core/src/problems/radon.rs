use crate::linalg::LinearOperator;

/// Line sums of an `n1 x n2` image along four directions.
///
/// Measurement layout: `n1` row sums, then `n2` column sums, then
/// `n1 + n2 - 1` diagonal sums indexed by `c - r + n1 - 1`, then
/// `n1 + n2 - 1` anti-diagonal sums indexed by `r + c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Radon4 {
    pub n1: usize,
    pub n2: usize,
}

impl Radon4 {
    pub fn new(n1: usize, n2: usize) -> Self {
        Self { n1, n2 }
    }

    pub fn measurements(&self) -> usize {
        self.n1 + self.n2 + 2 * (self.n1 + self.n2 - 1)
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let diag = self.n1 + self.n2 - 1;
        let cols = self.n1;
        let diags = cols + self.n2;
        (cols, diags, diags + diag)
    }
}

impl LinearOperator for Radon4 {
    fn domain_dim(&self) -> usize {
        self.n1 * self.n2
    }

    fn codomain_dim(&self) -> usize {
        self.measurements()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (cols, diags, anti) = self.offsets();
        for r in 0..self.n1 {
            for c in 0..self.n2 {
                let v = x[r * self.n2 + c];
                out[r] += v;
                out[cols + c] += v;
                out[diags + c + self.n1 - 1 - r] += v;
                out[anti + r + c] += v;
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (cols, diags, anti) = self.offsets();
        for r in 0..self.n1 {
            for c in 0..self.n2 {
                out[r * self.n2 + c] =
                    y[r] + y[cols + c] + y[diags + c + self.n1 - 1 - r] + y[anti + r + c];
            }
        }
    }

    /// `|T|^2 <= |T|_1 |T|_inf = 4 max(n1, n2)`.
    fn norm_bound(&self) -> Option<f64> {
        Some((4.0 * self.n1.max(self.n2) as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{adjoint_residual, estimate_norm, DenseVector};

    #[test]
    fn two_by_two_ones() {
        let t = Radon4::new(2, 2);
        let s = t.apply(&DenseVector::filled(4, 1.0)).unwrap();
        assert_eq!(
            s.as_slice(),
            &[2.0, 2.0, 2.0, 2.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0]
        );
    }

    #[test]
    fn measurement_count() {
        assert_eq!(Radon4::new(256, 256).measurements(), 1534);
    }

    #[test]
    fn adjoint_and_bound() {
        let t = Radon4::new(7, 11);
        assert!(adjoint_residual(&t, 8, 1) < 1e-12);
        assert!(estimate_norm(&t, 200, 1) <= t.norm_bound().unwrap());
    }
}
