//! Saddle-point problems `min_x max_y G(x) + <K x, y> - F*(y)` for the three
//! imaging tasks, and the role-swapping adapter.

mod gradient;
mod radon;

use std::sync::Arc;

pub use gradient::Gradient2D;
pub use radon::Radon4;

use crate::error::{check_len, Error, Result};
use crate::fourier::Mask;
use crate::linalg::{estimate_norm, NegAdjoint, OperatorHandle, StackedOperator, NORM_ITERATIONS};
use crate::prox::{
    Ball21Indicator, BoxIndicator, FourierFidelity, FunctionHandle, KlConjugate, QuadraticFidelity,
    Stacked,
};

/// `G` acts on the primal variable, `F*` on the dual one. `gamma` and `rho`
/// are the strong-convexity factors of `G` and `F*`.
#[derive(Clone)]
pub struct SaddleProblem {
    pub op: OperatorHandle,
    pub primal: FunctionHandle,
    pub dual: FunctionHandle,
    pub gamma: f64,
    pub rho: f64,
    /// An upper bound on `|K|`.
    pub norm_k: f64,
}

impl SaddleProblem {
    pub fn new(op: OperatorHandle, primal: FunctionHandle, dual: FunctionHandle) -> Result<Self> {
        check_len(op.domain_dim(), primal.dim())?;
        check_len(op.codomain_dim(), dual.dim())?;
        let norm_k = match op.norm_bound() {
            Some(b) => b,
            None => estimate_norm(op.as_ref(), NORM_ITERATIONS, 0) * (1.0 + 1e-6),
        };
        Ok(Self {
            gamma: primal.convexity_factor(),
            rho: dual.convexity_factor(),
            op,
            primal,
            dual,
            norm_k,
        })
    }

    pub fn primal_dim(&self) -> usize {
        self.op.domain_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.op.codomain_dim()
    }

    /// The equivalent problem in `(y, x)`: primal term `F*`, dual term `G`,
    /// operator `-K*`, factors exchanged. Swapping twice restores the problem.
    pub fn dual_swap(&self) -> SaddleProblem {
        SaddleProblem {
            op: Arc::new(NegAdjoint {
                inner: self.op.clone(),
            }),
            primal: self.dual.clone(),
            dual: self.primal.clone(),
            gamma: self.rho,
            rho: self.gamma,
            norm_k: self.norm_k,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "beta",
            format!("must be non-negative, got {beta}"),
        ))
    }
}

/// Total-variation denoising of `z` (`n1 x n2`, row-major):
/// `G = |x - z|^2 / 2`, `K = D`, `F* = indicator of the beta-ball`.
pub fn make_denoise_problem(z: &[f64], n1: usize, n2: usize, beta: f64) -> Result<SaddleProblem> {
    check_len(n1 * n2, z.len())?;
    check_beta(beta)?;
    SaddleProblem::new(
        Arc::new(Gradient2D::new(n1, n2)),
        Arc::new(QuadraticFidelity { z: z.to_vec() }),
        Arc::new(Ball21Indicator {
            radius: beta,
            pixels: n1 * n2,
        }),
    )
}

/// Total-variation regularised inversion of sub-sampled Fourier data.
/// `z_freq` is two-channel, full size, and is ignored off the mask.
pub fn make_fourier_problem(z_freq: &[f64], mask: &Mask, beta: f64) -> Result<SaddleProblem> {
    check_beta(beta)?;
    let (n1, n2) = mask.shape();
    check_len(2 * n1 * n2, z_freq.len())?;
    SaddleProblem::new(
        Arc::new(Gradient2D::new(n1, n2)),
        Arc::new(FourierFidelity::new(mask.clone(), z_freq)?),
        Arc::new(Ball21Indicator {
            radius: beta,
            pixels: n1 * n2,
        }),
    )
}

/// Poisson-noise tomography with total-variation regularisation and a `[0, 1]`
/// box constraint. `K = [T; D]`, dual layout `[phi (measurements) | y (2 n)]`.
pub fn make_pet_problem(
    b: &[f64],
    c: &[f64],
    n1: usize,
    n2: usize,
    beta: f64,
) -> Result<SaddleProblem> {
    check_beta(beta)?;
    let radon = Radon4::new(n1, n2);
    check_len(radon.measurements(), b.len())?;
    let t: OperatorHandle = Arc::new(radon);
    let d: OperatorHandle = Arc::new(Gradient2D::new(n1, n2));
    let op = StackedOperator::new(t.clone(), d)?;
    let mut problem = SaddleProblem::new(
        Arc::new(op),
        Arc::new(BoxIndicator {
            lo: 0.0,
            hi: 1.0,
            n: n1 * n2,
        }),
        Arc::new(Stacked {
            first: Arc::new(KlConjugate::new(b.to_vec(), c.to_vec())?),
            second: Arc::new(Ball21Indicator {
                radius: beta,
                pixels: n1 * n2,
            }),
        }),
    )?;
    // Power iteration on T is tighter than the row/column-sum bound.
    let t_norm = estimate_norm(t.as_ref(), 200, 1) * (1.0 + 1e-3);
    problem.norm_k = problem.norm_k.min((t_norm * t_norm + 8.0).sqrt());
    Ok(problem)
}
