use crate::linalg::LinearOperator;

/// Forward differences with Neumann boundary on an `n1 x n2` image.
///
/// Output holds two interleaved channels per pixel: index `2p` is the vertical
/// difference `x[r+1, c] - x[r, c]`, index `2p + 1` the horizontal difference
/// `x[r, c+1] - x[r, c]`. Differences across the last row or column are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gradient2D {
    pub n1: usize,
    pub n2: usize,
}

impl Gradient2D {
    pub fn new(n1: usize, n2: usize) -> Self {
        Self { n1, n2 }
    }
}

impl LinearOperator for Gradient2D {
    fn domain_dim(&self) -> usize {
        self.n1 * self.n2
    }

    fn codomain_dim(&self) -> usize {
        2 * self.n1 * self.n2
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        for r in 0..n1 {
            let row = r * n2;
            for c in 0..n2 {
                let p = row + c;
                let v = x[p];
                out[2 * p] = if r + 1 < n1 { x[p + n2] - v } else { 0.0 };
                out[2 * p + 1] = if c + 1 < n2 { x[p + 1] - v } else { 0.0 };
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        for r in 0..n1 {
            let row = r * n2;
            for c in 0..n2 {
                let p = row + c;
                let mut acc = 0.0;
                if r + 1 < n1 {
                    acc -= y[2 * p];
                }
                if r > 0 {
                    acc += y[2 * (p - n2)];
                }
                if c + 1 < n2 {
                    acc -= y[2 * p + 1];
                }
                if c > 0 {
                    acc += y[2 * (p - 1) + 1];
                }
                out[p] = acc;
            }
        }
    }

    fn norm_bound(&self) -> Option<f64> {
        Some(8f64.sqrt())
    }
}
