//! Primal-dual iterations and the run loop.
//!
//! Every `*_step` function has value semantics: the input state is left
//! untouched and a new state is returned. Engines use the in-place `advance_*`
//! forms to avoid copying on long runs.

mod engine;
mod fista;

pub use engine::{
    build_engine, run, CertificateView, Engine, Inertia, IterationRecord, RunOutcome, SolverConfig,
    SolverKind,
};
pub use fista::{
    fista_sc_lambda_max, fista_sc_step, fista_step, ConjugateComposite, FistaState, LeastSquares,
    SmoothFunction,
};

use crate::error::{check_len, Error, Result};
use crate::linalg::{ops, DenseVector, PrimalDualPoint};
use crate::problems::SaddleProblem;
use crate::schedules::{accelerated_pdps_next, StepState};

/// Iterates of the primal-dual family. `x_bar`, `x_tilde` (and the dual
/// counterparts) are only meaningful for the inertial corrected method; the
/// relaxed method keeps its un-relaxed prox output in `x_bar`, `y_bar`, and the
/// other methods mirror `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: DenseVector,
    pub y: DenseVector,
    pub x_prev: DenseVector,
    pub y_prev: DenseVector,
    pub x_bar: DenseVector,
    pub y_bar: DenseVector,
    pub x_tilde: DenseVector,
    pub y_tilde: DenseVector,
    /// Auxiliary sequences `zeta^i`, `eta^i` of the certificate, when tracked.
    pub zeta: Option<DenseVector>,
    pub eta: Option<DenseVector>,
    pub step: StepState,
    pub prev_step: Option<StepState>,
    pub iteration: usize,
}

impl SolverState {
    /// Start at `u0` with every inertial and auxiliary copy equal to `u0`.
    pub fn new(u0: PrimalDualPoint, step: StepState, track_aux: bool) -> Self {
        let PrimalDualPoint { x, y } = u0;
        Self {
            x_prev: x.clone(),
            y_prev: y.clone(),
            x_bar: x.clone(),
            y_bar: y.clone(),
            x_tilde: x.clone(),
            y_tilde: y.clone(),
            zeta: track_aux.then(|| x.clone()),
            eta: track_aux.then(|| y.clone()),
            x,
            y,
            step,
            prev_step: None,
            iteration: 0,
        }
    }

    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.x.clone(), self.y.clone())
    }

    fn check_dims(&self, p: &SaddleProblem) -> Result<()> {
        check_len(p.primal_dim(), self.x.len())?;
        check_len(p.dual_dim(), self.y.len())
    }

    fn check_finite(&self) -> Result<()> {
        if self.x.is_finite() && self.y.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                iteration: self.iteration,
                what: "iterate contains NaN or infinity".into(),
            })
        }
    }
}

/// One primal-dual step from the base point `(xb, yb)` with steps `tau`,
/// `sigma` and over-relaxation `omega`.
fn pdps_from(
    p: &SaddleProblem,
    xb: &[f64],
    yb: &[f64],
    tau: f64,
    sigma: f64,
    omega: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut kty = vec![0.0; xb.len()];
    p.op.adjoint_into(yb, &mut kty);
    let mut v = vec![0.0; xb.len()];
    ops::lincomb(1.0, xb, -tau, &kty, &mut v);
    let mut x_new = vec![0.0; xb.len()];
    p.primal.prox_into(&v, tau, &mut x_new);

    ops::extrapolate(&x_new, xb, omega, &mut v);
    let mut kx = vec![0.0; yb.len()];
    p.op.apply_into(&v, &mut kx);
    let mut w = vec![0.0; yb.len()];
    ops::lincomb(1.0, yb, sigma, &kx, &mut w);
    let mut y_new = vec![0.0; yb.len()];
    p.dual.prox_into(&w, sigma, &mut y_new);
    (x_new, y_new)
}

fn commit(st: &mut SolverState, x_new: Vec<f64>, y_new: Vec<f64>) {
    let x_new = DenseVector::from_vec(x_new);
    let y_new = DenseVector::from_vec(y_new);
    st.x_prev = std::mem::replace(&mut st.x, x_new);
    st.y_prev = std::mem::replace(&mut st.y, y_new);
    st.x_bar.clone_from(&st.x);
    st.y_bar.clone_from(&st.y);
    st.x_tilde.clone_from(&st.x);
    st.y_tilde.clone_from(&st.y);
    st.iteration += 1;
}

/// Plain or accelerated primal-dual step. The over-relaxation and step update
/// come from `state.step`; with `gamma = 0` the steps stay constant.
pub fn advance_pdps(st: &mut SolverState, p: &SaddleProblem) -> Result<()> {
    st.check_dims(p)?;
    let s = st.step;
    let (x_new, y_new) = pdps_from(p, &st.x, &st.y, s.tau, s.sigma, s.omega);
    commit(st, x_new, y_new);
    st.prev_step = Some(s);
    st.step = accelerated_pdps_next(&s);
    st.check_finite()
}

/// Inertial step: rebase at `(1 + alpha) u - alpha u_prev`, then one plain step.
pub fn advance_i_pdps(st: &mut SolverState, p: &SaddleProblem, alpha: f64) -> Result<()> {
    if !(0.0..1.0 / 3.0).contains(&alpha) {
        return Err(Error::param(
            "alpha",
            format!("must lie in [0, 1/3), got {alpha}"),
        ));
    }
    advance_inertial_unchecked(st, p, alpha)
}

/// Inertial step with any weight, for rules outside the proven range.
pub(crate) fn advance_inertial_unchecked(
    st: &mut SolverState,
    p: &SaddleProblem,
    alpha: f64,
) -> Result<()> {
    st.check_dims(p)?;
    let s = st.step;
    let mut xb = vec![0.0; st.x.len()];
    let mut yb = vec![0.0; st.y.len()];
    ops::extrapolate(&st.x, &st.x_prev, alpha, &mut xb);
    ops::extrapolate(&st.y, &st.y_prev, alpha, &mut yb);
    let (x_new, y_new) = pdps_from(p, &xb, &yb, s.tau, s.sigma, 1.0);
    commit(st, x_new, y_new);
    st.prev_step = Some(s);
    st.step.i += 1;
    st.check_finite()
}

/// Relaxed step: `u+ = u + relax (T(u) - u)` for the plain step map `T`.
/// `T(u)` itself is left in `x_bar`, `y_bar`.
pub fn advance_r_pdps(st: &mut SolverState, p: &SaddleProblem, relax: f64) -> Result<()> {
    if !(relax > 0.0 && relax < 2.0) {
        return Err(Error::param(
            "relax",
            format!("must lie in (0, 2), got {relax}"),
        ));
    }
    st.check_dims(p)?;
    let s = st.step;
    let (xt, yt) = pdps_from(p, &st.x, &st.y, s.tau, s.sigma, 1.0);
    let mut x_new = vec![0.0; xt.len()];
    let mut y_new = vec![0.0; yt.len()];
    ops::lincomb(1.0 - relax, &st.x, relax, &xt, &mut x_new);
    ops::lincomb(1.0 - relax, &st.y, relax, &yt, &mut y_new);
    commit(st, x_new, y_new);
    // over-relaxation can leave the domains; keep the prox outputs for reporting
    st.x_bar = xt.into();
    st.y_bar = yt.into();
    st.prev_step = Some(s);
    st.step.i += 1;
    st.check_finite()
}

/// One step of the inertial, corrected primal-dual method. `next` is the
/// schedule state with index `i + 1`; it supplies `lambda_{i+1}` and `mu_{i+2}`.
pub fn advance_ic_pdps(st: &mut SolverState, p: &SaddleProblem, next: &StepState) -> Result<()> {
    st.check_dims(p)?;
    let s = st.step;
    if next.i != s.i + 1 {
        return Err(Error::param(
            "step_next",
            format!("expected schedule index {}, got {}", s.i + 1, next.i),
        ));
    }
    let (n, m) = (st.x.len(), st.y.len());
    let inv_l = 1.0 / s.lambda;
    let inv_m = 1.0 / s.mu;

    // Primal half.
    let a = s.gamma * s.tau * (inv_l - 1.0);
    let tt = s.tau_tilde();
    let mut kty = vec![0.0; n];
    p.op.adjoint_into(&st.y_tilde, &mut kty);
    let mut v = vec![0.0; n];
    for i in 0..n {
        v[i] = (st.x_bar[i] + a * st.x[i]) / (1.0 + a) - tt * kty[i];
    }
    let mut x_new = vec![0.0; n];
    p.primal.prox_into(&v, tt, &mut x_new);
    let mut x_bar = vec![0.0; n];
    ops::extrapolate(&x_new, &st.x, next.lambda * (inv_l - 1.0), &mut x_bar);
    let mut x_tilde = vec![0.0; n];
    ops::extrapolate(&x_new, &st.x, inv_l - 1.0, &mut x_tilde);

    // Dual half.
    ops::extrapolate(&x_tilde, &st.x_tilde, s.omega, &mut v);
    let mut kx = vec![0.0; m];
    p.op.apply_into(&v, &mut kx);
    let b = s.rho * s.sigma * (inv_m - 1.0);
    let mut w = vec![0.0; m];
    for j in 0..m {
        w[j] = (st.y_bar[j] + b * st.y[j]) / (1.0 + b) + s.sigma * kx[j];
    }
    let mut y_new = vec![0.0; m];
    p.dual.prox_into(&w, s.sigma_tilde(), &mut y_new);
    let mut y_bar = vec![0.0; m];
    ops::extrapolate(&y_new, &st.y, next.mu * (inv_m - 1.0), &mut y_bar);
    let mut y_tilde = vec![0.0; m];
    ops::extrapolate(&y_new, &st.y, inv_m - 1.0, &mut y_tilde);

    if let Some(z) = st.zeta.as_mut() {
        ops::lincomb(inv_l, &x_new, -(inv_l - 1.0), &st.x, z);
    }
    if let Some(e) = st.eta.as_mut() {
        ops::lincomb(inv_m, &y_new, -(inv_m - 1.0), &st.y, e);
    }

    st.x_prev = std::mem::replace(&mut st.x, x_new.into());
    st.y_prev = std::mem::replace(&mut st.y, y_new.into());
    st.x_bar = x_bar.into();
    st.y_bar = y_bar.into();
    st.x_tilde = x_tilde.into();
    st.y_tilde = y_tilde.into();
    st.prev_step = Some(s);
    st.step = *next;
    st.iteration += 1;
    st.check_finite()
}

pub fn pdps_step(state: &SolverState, problem: &SaddleProblem) -> Result<SolverState> {
    let mut s = state.clone();
    advance_pdps(&mut s, problem)?;
    Ok(s)
}

pub fn i_pdps_step(
    state: &SolverState,
    problem: &SaddleProblem,
    alpha: f64,
) -> Result<SolverState> {
    let mut s = state.clone();
    advance_i_pdps(&mut s, problem, alpha)?;
    Ok(s)
}

pub fn r_pdps_step(
    state: &SolverState,
    problem: &SaddleProblem,
    relax: f64,
) -> Result<SolverState> {
    let mut s = state.clone();
    advance_r_pdps(&mut s, problem, relax)?;
    Ok(s)
}

pub fn ic_pdps_step(
    state: &SolverState,
    problem: &SaddleProblem,
    next: &StepState,
) -> Result<SolverState> {
    let mut s = state.clone();
    advance_ic_pdps(&mut s, problem, next)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_denoise_problem;
    use crate::schedules::{
        accelerated_pdps_initial, generate, next_state, ScheduleMode, ScheduleParams,
    };

    fn small_problem() -> SaddleProblem {
        let z: Vec<f64> = (0..30).map(|i| ((i * 17) % 11) as f64 * 20.0).collect();
        make_denoise_problem(&z, 5, 6, 15.0).unwrap()
    }

    #[test]
    fn steps_leave_input_untouched() {
        let p = small_problem();
        let u0 = PrimalDualPoint::zeros(30, 60);
        let st = SolverState::new(u0, StepState::constant(3.0, 0.04), true);
        let copy = st.clone();
        let _ = pdps_step(&st, &p).unwrap();
        let _ = i_pdps_step(&st, &p, 0.3).unwrap();
        let _ = r_pdps_step(&st, &p, 1.5).unwrap();
        assert_eq!(st, copy);
    }

    #[test]
    fn corrected_method_with_unit_inertia_is_plain_pdps() {
        let p = small_problem();
        let u0 = PrimalDualPoint::zeros(30, 60);
        let s = StepState::constant(3.0, 0.04);
        let mut a = SolverState::new(u0.clone(), s, false);
        let mut b = SolverState::new(u0, s, false);
        for k in 0..50 {
            let mut next = s;
            next.i = k + 1;
            advance_ic_pdps(&mut a, &p, &next).unwrap();
            advance_pdps(&mut b, &p).unwrap();
            assert!(a.x.dist_sq(&b.x).unwrap().sqrt() <= 1e-12 * (1.0 + b.x.norm()));
            assert!(a.y.dist_sq(&b.y).unwrap().sqrt() <= 1e-12 * (1.0 + b.y.norm()));
        }
    }

    #[test]
    fn zero_alpha_and_unit_relax_reduce_to_plain() {
        let p = small_problem();
        let st = SolverState::new(
            PrimalDualPoint::zeros(30, 60),
            StepState::constant(3.0, 0.04),
            false,
        );
        let mut a = st.clone();
        let mut b = st.clone();
        let mut c = st;
        for _ in 0..20 {
            advance_pdps(&mut a, &p).unwrap();
            advance_i_pdps(&mut b, &p, 0.0).unwrap();
            advance_r_pdps(&mut c, &p, 1.0).unwrap();
        }
        assert_eq!(a.x, b.x);
        assert_eq!(a.x, c.x);
        assert_eq!(a.y, c.y);
    }

    #[test]
    fn relaxed_step_keeps_a_feasible_prox_output() {
        let p = small_problem();
        let mut st = SolverState::new(
            PrimalDualPoint::zeros(30, 60),
            StepState::constant(3.0, 0.04),
            false,
        );
        let mut left_ball = false;
        for _ in 0..30 {
            advance_r_pdps(&mut st, &p, 1.9).unwrap();
            left_ball |= p.dual.value(&st.y).is_infinite();
            assert!(p.dual.value(&st.y_bar).is_finite());
        }
        assert!(
            left_ball,
            "test should exercise an infeasible relaxed iterate"
        );
    }

    #[test]
    fn fixed_point_is_preserved() {
        // z constant: x = z, y = 0 is a saddle point.
        let p = make_denoise_problem(&[7.0; 12], 3, 4, 1.0).unwrap();
        let u = PrimalDualPoint::new(DenseVector::filled(12, 7.0), DenseVector::zeros(24));
        let sched = generate(ScheduleMode::Basic, &ScheduleParams::default(), 1).unwrap();
        let st = SolverState::new(u.clone(), sched[0], true);
        let out = ic_pdps_step(&st, &p, &sched[1]).unwrap();
        assert!(out.x.dist_sq(&u.x).unwrap() < 1e-24);
        assert!(out.y.norm() < 1e-12);
        let acc = SolverState::new(
            u.clone(),
            accelerated_pdps_initial(3.0, 0.04, 0.5).unwrap(),
            false,
        );
        let out = pdps_step(&acc, &p).unwrap();
        assert!(out.x.dist_sq(&u.x).unwrap() < 1e-24);
    }

    #[test]
    fn auxiliary_sequences_match_tilde_iterates() {
        let p = small_problem();
        let params = ScheduleParams {
            gamma: 0.5,
            ..ScheduleParams::default()
        };
        let mut s = generate(ScheduleMode::PrimalAccel, &params, 0).unwrap()[0];
        let mut st = SolverState::new(PrimalDualPoint::zeros(30, 60), s, true);
        for _ in 0..30 {
            let next = next_state(ScheduleMode::PrimalAccel, &s).unwrap();
            advance_ic_pdps(&mut st, &p, &next).unwrap();
            s = next;
            let z = st.zeta.as_ref().unwrap();
            assert!(z.dist_sq(&st.x_tilde).unwrap().sqrt() <= 1e-9 * (1.0 + z.norm()));
            let e = st.eta.as_ref().unwrap();
            assert!(e.dist_sq(&st.y_tilde).unwrap().sqrt() <= 1e-9 * (1.0 + e.norm()));
        }
    }

    #[test]
    fn wrong_successor_is_rejected() {
        let p = small_problem();
        let s = generate(ScheduleMode::Basic, &ScheduleParams::default(), 2).unwrap();
        let st = SolverState::new(PrimalDualPoint::zeros(30, 60), s[0], false);
        assert!(ic_pdps_step(&st, &p, &s[2]).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let p = small_problem();
        let st = SolverState::new(
            PrimalDualPoint::zeros(30, 60),
            StepState::constant(1.0, 0.1),
            false,
        );
        assert!(i_pdps_step(&st, &p, 0.34).is_err());
        assert!(r_pdps_step(&st, &p, 2.0).is_err());
        let bad = SolverState::new(
            PrimalDualPoint::zeros(29, 60),
            StepState::constant(1.0, 0.1),
            false,
        );
        assert!(pdps_step(&bad, &p).is_err());
    }
}
