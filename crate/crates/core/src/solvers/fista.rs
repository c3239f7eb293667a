use crate::error::{check_len, Error, Result};
use crate::linalg::{ops, DenseVector, OperatorHandle};
use crate::prox::{FunctionHandle, ProxOperator};
use crate::schedules::fista_lambda_next;

/// Convex function with an `L`-Lipschitz gradient.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
    fn lipschitz(&self) -> f64;
}

/// `|A x - b|^2 / 2`.
#[derive(Clone)]
pub struct LeastSquares {
    op: OperatorHandle,
    b: Vec<f64>,
    lipschitz: f64,
}

impl LeastSquares {
    /// `norm_a` must bound `|A|` from above.
    pub fn new(op: OperatorHandle, b: Vec<f64>, norm_a: f64) -> Result<Self> {
        check_len(op.codomain_dim(), b.len())?;
        Ok(Self {
            op,
            b,
            lipschitz: norm_a * norm_a,
        })
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.op.domain_dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.b.len()];
        self.op.apply_into(x, &mut r);
        0.5 * ops::dist_sq(&r, &self.b)
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let mut r = vec![0.0; self.b.len()];
        self.op.apply_into(x, &mut r);
        ops::axpy(-1.0, &self.b, &mut r);
        self.op.adjoint_into(&r, out);
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `y -> G*(-K* y)` for a `gamma`-strongly convex `G`; the smooth part of the
/// dual problem. Its gradient is `-K grad G*(-K* y)`.
#[derive(Clone)]
pub struct ConjugateComposite {
    g: FunctionHandle,
    op: OperatorHandle,
    lipschitz: f64,
}

impl ConjugateComposite {
    pub fn new(g: FunctionHandle, op: OperatorHandle, norm_k: f64) -> Result<Self> {
        let gamma = g.convexity_factor();
        if !(gamma > 0.0) || g.conjugate_gradient(&vec![0.0; g.dim()]).is_none() {
            return Err(Error::NotApplicable {
                solver: "fista".into(),
                reason:
                    "the primal term must be strongly convex with a computable conjugate gradient"
                        .into(),
            });
        }
        Ok(Self {
            lipschitz: norm_k * norm_k / gamma,
            g,
            op,
        })
    }

    /// Primal point `grad G*(-K* y)` associated with a dual iterate.
    pub fn primal(&self, y: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.op.domain_dim()];
        self.op.adjoint_into(y, &mut w);
        ops::scale(-1.0, &mut w);
        self.g
            .conjugate_gradient(&w)
            .expect("checked at construction")
    }
}

impl SmoothFunction for ConjugateComposite {
    fn dim(&self) -> usize {
        self.op.codomain_dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        let mut w = vec![0.0; self.op.domain_dim()];
        self.op.adjoint_into(y, &mut w);
        ops::scale(-1.0, &mut w);
        self.g.conjugate(&w)
    }
    fn gradient_into(&self, y: &[f64], out: &mut [f64]) {
        let x = self.primal(y);
        self.op.apply_into(&x, out);
        ops::scale(-1.0, out);
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FistaState {
    pub x: DenseVector,
    pub x_prev: DenseVector,
    pub x_bar: DenseVector,
    pub x_tilde: DenseVector,
    /// `lambda_i`
    pub lambda: f64,
    pub iteration: usize,
}

impl FistaState {
    pub fn new(x0: DenseVector) -> Self {
        Self {
            x_prev: x0.clone(),
            x_bar: x0.clone(),
            x_tilde: x0.clone(),
            x: x0,
            lambda: 1.0,
            iteration: 0,
        }
    }
}

/// `x+ = prox_{tau G}(x_bar - tau grad F(x_bar))`,
/// `x_bar+ = x+ + lambda_{i+1} (1/lambda_i - 1) (x+ - x)`.
pub fn fista_step(
    state: &FistaState,
    prox: &dyn ProxOperator,
    smooth: &dyn SmoothFunction,
    tau: f64,
    epsilon: f64,
) -> Result<FistaState> {
    check_len(smooth.dim(), state.x.len())?;
    check_len(prox.dim(), state.x.len())?;
    if !(tau > 0.0 && tau * smooth.lipschitz() <= 1.0 + 1e-12) {
        return Err(Error::param(
            "tau",
            format!("need 0 < tau <= 1/L, got {tau}"),
        ));
    }
    let lam = state.lambda;
    let lam_next = fista_lambda_next(lam, epsilon)?;
    let n = state.x.len();
    let mut g = vec![0.0; n];
    smooth.gradient_into(&state.x_bar, &mut g);
    let mut v = vec![0.0; n];
    ops::lincomb(1.0, &state.x_bar, -tau, &g, &mut v);
    let mut x_new = vec![0.0; n];
    prox.prox_into(&v, tau, &mut x_new);
    let mut x_bar = vec![0.0; n];
    ops::extrapolate(&x_new, &state.x, lam_next * (1.0 / lam - 1.0), &mut x_bar);
    let x_new = DenseVector::from_vec(x_new);
    Ok(FistaState {
        x_prev: state.x.clone(),
        x_tilde: x_bar.clone().into(),
        x_bar: x_bar.into(),
        x: x_new,
        lambda: lam_next,
        iteration: state.iteration + 1,
    })
}

/// Largest admissible constant inertia for the strongly convex variant:
/// `sqrt(gamma^2/L^2 + 2 gamma/L) - gamma/L`.
pub fn fista_sc_lambda_max(gamma: f64, lipschitz: f64) -> f64 {
    let q = gamma / lipschitz;
    (q * q + 2.0 * q).sqrt() - q
}

/// Strongly convex variant with constant `lambda`, `tau = lambda^2 / (2 gamma (1 - lambda))`
/// and the corrected step `tau_tilde = tau / (1 + (1/lambda - 1) gamma tau)`.
pub fn fista_sc_step(
    state: &FistaState,
    prox: &dyn ProxOperator,
    smooth: &dyn SmoothFunction,
    lambda: f64,
    gamma: f64,
) -> Result<FistaState> {
    check_len(smooth.dim(), state.x.len())?;
    check_len(prox.dim(), state.x.len())?;
    if !(gamma > 0.0 && gamma <= prox.convexity_factor() + 1e-15) {
        return Err(Error::param(
            "gamma",
            format!("must be positive and at most the prox term's modulus, got {gamma}"),
        ));
    }
    let lmax = fista_sc_lambda_max(gamma, smooth.lipschitz());
    if !(lambda > 0.0 && lambda <= lmax * (1.0 + 1e-12)) {
        return Err(Error::param(
            "lambda",
            format!("must lie in (0, {lmax}], got {lambda}"),
        ));
    }
    let tau = lambda * lambda / (2.0 * gamma * (1.0 - lambda));
    let a = gamma * tau * (1.0 / lambda - 1.0);
    let tt = tau / (1.0 + a);
    let n = state.x.len();
    let mut g = vec![0.0; n];
    smooth.gradient_into(&state.x_bar, &mut g);
    let mut v = vec![0.0; n];
    ops::lincomb(1.0, &state.x_tilde, -tt, &g, &mut v);
    let mut x_new = vec![0.0; n];
    prox.prox_into(&v, tt, &mut x_new);
    let mut x_bar = vec![0.0; n];
    ops::extrapolate(&x_new, &state.x, 1.0 - lambda, &mut x_bar);
    let x_tilde: Vec<f64> = x_bar
        .iter()
        .zip(&x_new)
        .map(|(b, x)| (b + a * x) / (1.0 + a))
        .collect();
    Ok(FistaState {
        x_prev: state.x.clone(),
        x: x_new.into(),
        x_bar: x_bar.into(),
        x_tilde: x_tilde.into(),
        lambda,
        iteration: state.iteration + 1,
    })
}
