//! Step-length, inertia and testing-parameter schedules.
//!
//! A [`StepState`] with index `i` carries everything one iteration consumes:
//! `tau_i`, the dual step `sigma_{i+1}`, the inertial parameters `lambda_i`
//! and `mu_{i+1}`, the over-relaxation `omega_i`, and the testing weights
//! `phi_i`, `psi_{i+1}`. It also keeps `sigma_i` and `psi_i` so that every
//! coupling condition can be checked on one state or on a consecutive pair.
//!
//! Testing weights are stored as logarithms: in the linear-rate mode `phi_i`
//! grows geometrically and overflows `f64` after a few thousand steps.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleMode {
    /// No strong convexity used: `gamma = rho = 0`, `omega = 1`.
    Basic,
    /// Primal acceleration: `gamma > 0`, `rho = 0`.
    PrimalAccel,
    /// Dual acceleration: `gamma = 0`, `rho > 0`, constant primal step.
    DualAccel,
    /// Both factors positive: constant steps and a linear rate.
    Linear,
}

impl ScheduleMode {
    pub const ALL: [ScheduleMode; 4] = [
        ScheduleMode::Basic,
        ScheduleMode::PrimalAccel,
        ScheduleMode::DualAccel,
        ScheduleMode::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleMode::Basic => "basic",
            ScheduleMode::PrimalAccel => "primal-accel",
            ScheduleMode::DualAccel => "dual-accel",
            ScheduleMode::Linear => "linear",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "mode",
                    format!("unknown schedule `{s}` (basic, primal-accel, dual-accel, linear)"),
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    pub tau0: f64,
    pub sigma0: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Constant inertial parameter of the linear mode.
    pub lambda: f64,
    /// Operator-norm bound used by the linear-mode admissibility check.
    pub norm_k: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        let l = 8f64.sqrt();
        Self {
            tau0: 9.9 / l,
            sigma0: 0.1 / l,
            epsilon: 0.7,
            gamma: 0.0,
            rho: 0.0,
            lambda: 0.3,
            norm_k: l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepState {
    pub i: usize,
    /// `tau_i`
    pub tau: f64,
    /// `sigma_{i+1}`, the dual step used by iteration `i`.
    pub sigma: f64,
    /// `sigma_i`
    pub sigma_prev: f64,
    /// `lambda_i`
    pub lambda: f64,
    /// `mu_{i+1}`
    pub mu: f64,
    /// `omega_i`
    pub omega: f64,
    /// `ln phi_i`
    pub ln_phi: f64,
    /// `ln psi_{i+1}`
    pub ln_psi: f64,
    /// `ln psi_i`
    pub ln_psi_prev: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub rho: f64,
}

impl StepState {
    /// Fixed steps with no inertia: the plain primal-dual iteration.
    pub fn constant(tau: f64, sigma: f64) -> Self {
        let ln = -(tau.ln() + sigma.ln());
        Self {
            i: 0,
            tau,
            sigma,
            sigma_prev: sigma,
            lambda: 1.0,
            mu: 1.0,
            omega: 1.0,
            ln_phi: -2.0 * tau.ln(),
            ln_psi: ln,
            ln_psi_prev: ln,
            epsilon: 0.0,
            gamma: 0.0,
            rho: 0.0,
        }
    }

    pub fn phi(&self) -> f64 {
        self.ln_phi.exp()
    }

    /// `psi_{i+1}`
    pub fn psi(&self) -> f64 {
        self.ln_psi.exp()
    }

    /// `psi_i`
    pub fn psi_prev(&self) -> f64 {
        self.ln_psi_prev.exp()
    }

    /// `tau_i / (1 + gamma tau_i (1/lambda_i - 1))`
    pub fn tau_tilde(&self) -> f64 {
        self.tau / (1.0 + self.gamma * self.tau * (1.0 / self.lambda - 1.0))
    }

    /// `sigma_{i+1} / (1 + rho sigma_{i+1} (1/mu_{i+1} - 1))`
    pub fn sigma_tilde(&self) -> f64 {
        self.sigma / (1.0 + self.rho * self.sigma * (1.0 / self.mu - 1.0))
    }
}

/// `lambda_{i+1} = 2 / (1 + sqrt(1 + 4 (lambda_i^-2 - eps lambda_i^-1)))`.
pub fn fista_lambda_next(lambda: f64, epsilon: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::param(
            "lambda",
            format!("must lie in (0, 1], got {lambda}"),
        ));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in [0, 1], got {epsilon}"),
        ));
    }
    let inv = 1.0 / lambda;
    Ok(2.0 / (1.0 + (1.0 + 4.0 * (inv * inv - epsilon * inv)).sqrt()))
}

fn check_epsilon(epsilon: f64, max: f64) -> Result<()> {
    if (0.0..=max).contains(&epsilon) && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "epsilon",
            format!("must lie in [0, {max}] and below 1, got {epsilon}"),
        ))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn basic_lambda_next(lambda: f64, epsilon: f64) -> f64 {
    lambda / (1.0 + (1.0 - epsilon) * lambda)
}

fn primal_accel_lambda_next(lambda: f64, tau: f64, gamma: f64, epsilon: f64) -> f64 {
    let r = (lambda * lambda + 2.0 * gamma * lambda * tau).sqrt();
    r / (1.0 - epsilon * lambda + r)
}

/// Supremum of admissible `lambda` in the linear mode for the given operator norm.
pub fn linear_lambda_limit(gamma: f64, rho: f64, norm_k: f64, epsilon: f64) -> f64 {
    let x = 0.5
        * ((1.0 + epsilon) + ((1.0 - epsilon).powi(2) + norm_k * norm_k / (gamma * rho)).sqrt());
    1.0 / x
}

pub fn initial_state(mode: ScheduleMode, p: &ScheduleParams) -> Result<StepState> {
    let eps = p.epsilon;
    match mode {
        ScheduleMode::Basic | ScheduleMode::PrimalAccel => {
            check_epsilon(eps, 1.0)?;
            check_positive("tau0", p.tau0)?;
            check_positive("sigma0", p.sigma0)?;
            if p.rho != 0.0 {
                return Err(Error::ModeMismatch(format!("{mode} requires rho = 0")));
            }
            let gamma = if mode == ScheduleMode::Basic {
                if p.gamma != 0.0 {
                    return Err(Error::ModeMismatch("basic requires gamma = 0".into()));
                }
                0.0
            } else {
                if !(p.gamma >= 0.0) {
                    return Err(Error::param("gamma", "must be non-negative"));
                }
                p.gamma
            };
            let (lambda, tau) = (1.0, p.tau0);
            let (mu, omega) = if mode == ScheduleMode::Basic {
                (basic_lambda_next(lambda, eps), 1.0)
            } else {
                let next = primal_accel_lambda_next(lambda, tau, gamma, eps);
                (next, (1.0 / next - 1.0) / (1.0 / lambda - eps))
            };
            let ln_ts = (p.tau0 * p.sigma0).ln();
            Ok(StepState {
                i: 0,
                tau,
                sigma: p.sigma0 * mu / (lambda * omega),
                sigma_prev: p.sigma0,
                lambda,
                mu,
                omega,
                ln_phi: -2.0 * tau.ln(),
                ln_psi: -2.0 * mu.ln() - ln_ts,
                ln_psi_prev: -2.0 * lambda.ln() - ln_ts,
                epsilon: eps,
                gamma,
                rho: 0.0,
            })
        }
        ScheduleMode::DualAccel => {
            check_epsilon(eps, 0.5)?;
            check_positive("tau0", p.tau0)?;
            check_positive("rho", p.rho)?;
            if p.gamma != 0.0 {
                return Err(Error::ModeMismatch("dual-accel requires gamma = 0".into()));
            }
            let lambda = 1.0;
            let mu = fista_lambda_next(lambda, eps)?;
            let c = (2.0 * p.rho * p.tau0).ln();
            Ok(StepState {
                i: 0,
                tau: p.tau0,
                sigma: lambda * lambda / (2.0 * p.rho),
                // lambda_{-1} = 1
                sigma_prev: 1.0 / (2.0 * p.rho),
                lambda,
                mu,
                omega: mu / lambda,
                ln_phi: -2.0 * lambda.ln(),
                ln_psi: c - 2.0 * lambda.ln() - 2.0 * mu.ln(),
                ln_psi_prev: c - 2.0 * lambda.ln(),
                epsilon: eps,
                gamma: 0.0,
                rho: p.rho,
            })
        }
        ScheduleMode::Linear => {
            check_epsilon(eps, 1.0)?;
            check_positive("gamma", p.gamma)?;
            check_positive("rho", p.rho)?;
            let l = p.lambda;
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::param(
                    "lambda",
                    format!("must lie in (0, 1), got {l}"),
                ));
            }
            let room = 4.0 * p.gamma * p.rho * (1.0 / l - eps) * (1.0 / l - 1.0);
            if !(p.norm_k * p.norm_k < room) {
                return Err(Error::param(
                    "lambda",
                    format!(
                        "needs |K|^2 = {} < {room}; choose lambda below {}",
                        p.norm_k * p.norm_k,
                        linear_lambda_limit(p.gamma, p.rho, p.norm_k, eps)
                    ),
                ));
            }
            let tau = l * l / (2.0 * p.gamma * (1.0 - l));
            let sigma = l * l / (2.0 * p.rho * (1.0 - l));
            let ln_c = ((1.0 - eps * l) / (1.0 - l)).ln();
            let ln_ratio = (p.rho / p.gamma).ln();
            Ok(StepState {
                i: 0,
                tau,
                sigma,
                sigma_prev: sigma,
                lambda: l,
                mu: l,
                omega: (1.0 / l - 1.0) / (1.0 / l - eps),
                ln_phi: 0.0,
                ln_psi: ln_c + ln_ratio,
                ln_psi_prev: ln_ratio,
                epsilon: eps,
                gamma: p.gamma,
                rho: p.rho,
            })
        }
    }
}

/// Advance a schedule state from index `i` to `i + 1`.
pub fn next_state(mode: ScheduleMode, s: &StepState) -> Result<StepState> {
    let eps = s.epsilon;
    let lam = s.mu;
    let mut t = *s;
    t.i = s.i + 1;
    t.lambda = lam;
    t.sigma_prev = s.sigma;
    t.ln_psi_prev = s.ln_psi;
    match mode {
        ScheduleMode::Basic => {
            t.tau = s.tau * lam / s.lambda;
            t.mu = basic_lambda_next(lam, eps);
            t.omega = 1.0;
            t.sigma = s.sigma * t.mu / lam;
            t.ln_phi = -2.0 * t.tau.ln();
            t.ln_psi = s.ln_psi + 2.0 * (lam.ln() - t.mu.ln());
        }
        ScheduleMode::PrimalAccel => {
            t.tau = s.tau * lam * s.omega / s.lambda;
            t.mu = primal_accel_lambda_next(lam, t.tau, s.gamma, eps);
            t.omega = (1.0 / t.mu - 1.0) / (1.0 / lam - eps);
            t.sigma = s.sigma * t.mu / (lam * t.omega);
            t.ln_phi = -2.0 * t.tau.ln();
            t.ln_psi = s.ln_psi + 2.0 * (lam.ln() - t.mu.ln());
        }
        ScheduleMode::DualAccel => {
            t.mu = fista_lambda_next(lam, eps)?;
            t.omega = t.mu / lam;
            t.sigma = lam * lam / (2.0 * s.rho);
            t.ln_phi = -2.0 * lam.ln();
            t.ln_psi = (2.0 * s.rho * s.tau).ln() - 2.0 * lam.ln() - 2.0 * t.mu.ln();
        }
        ScheduleMode::Linear => {
            let ln_c = ((1.0 - eps * lam) / (1.0 - lam)).ln();
            t.ln_phi = t.i as f64 * ln_c;
            t.ln_psi = (t.i + 1) as f64 * ln_c + (s.rho / s.gamma).ln();
        }
    }
    if !(t.tau.is_finite() && t.sigma.is_finite() && t.mu > 0.0) {
        return Err(Error::NonFinite {
            iteration: t.i,
            what: format!("{mode} schedule left the representable range"),
        });
    }
    Ok(t)
}

/// States with indices `0..=steps`.
pub fn generate(
    mode: ScheduleMode,
    params: &ScheduleParams,
    steps: usize,
) -> Result<Vec<StepState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial_state(mode, params)?);
    for _ in 0..steps {
        let next = next_state(mode, out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Accelerated primal-dual steps: `omega_i = 1/sqrt(1 + gamma tau_i)`,
/// `tau_{i+1} = omega_i tau_i`, `sigma_{i+1} = sigma_i / omega_i`.
pub fn accelerated_pdps_initial(tau0: f64, sigma0: f64, gamma: f64) -> Result<StepState> {
    check_positive("tau0", tau0)?;
    check_positive("sigma0", sigma0)?;
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be non-negative"));
    }
    let mut s = StepState::constant(tau0, sigma0);
    s.omega = 1.0 / (1.0 + gamma * tau0).sqrt();
    s.sigma = sigma0 / s.omega;
    s.gamma = gamma;
    Ok(s)
}

pub fn accelerated_pdps_next(s: &StepState) -> StepState {
    let mut t = *s;
    t.i += 1;
    t.tau = s.omega * s.tau;
    t.sigma_prev = s.sigma;
    t.omega = 1.0 / (1.0 + s.gamma * t.tau).sqrt();
    t.sigma = s.sigma / t.omega;
    t
}

/// `kappa` of the final-metric bound for a given mode and parameters.
pub fn kappa(mode: ScheduleMode, p: &ScheduleParams) -> f64 {
    let k2 = p.norm_k * p.norm_k;
    match mode {
        ScheduleMode::Basic | ScheduleMode::PrimalAccel => 1.0 - p.tau0 * p.sigma0 * k2,
        ScheduleMode::DualAccel => 1.0 - p.tau0 * k2 / (2.0 * p.rho),
        ScheduleMode::Linear => {
            let l = p.lambda;
            1.0 - l * l * k2 / (4.0 * p.gamma * p.rho * (1.0 - p.epsilon * l) * (1.0 - l))
        }
    }
}

/// `delta = 1 - sqrt(1 - kappa)`, the lower factor of the final metric.
pub fn delta_from_kappa(kappa: f64) -> f64 {
    1.0 - (1.0 - kappa).max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub worst_residual: f64,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    pub tolerance: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {:>4}  worst residual {:.3e} at i={}",
                c.name,
                if c.passed { "ok" } else { "FAIL" },
                c.worst_residual,
                c.worst_index
            )?;
        }
        Ok(())
    }
}

pub const CONDITION_TOL: f64 = 1e-9;

/// Names of the checked coupling conditions, in report order.
pub const CONDITIONS: [&str; 8] = [
    "kappa-range",
    "metric-alignment",
    "momentum-coupling",
    "primal-growth",
    "primal-step-lower",
    "primal-step-upper",
    "dual-growth",
    "operator-coupling",
];

fn rel_eq(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Residual of `a >= b`, zero when satisfied.
fn rel_ge(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 || a >= b {
        0.0
    } else {
        (b - a) / s
    }
}

/// Check the testing-parameter coupling conditions on a generated sequence.
/// Weights are rescaled by `phi_i` per check so that geometric growth cannot overflow.
pub fn verify_conditions(states: &[StepState], kappa: f64, norm_k: f64) -> ConditionReport {
    let tol = CONDITION_TOL;
    let mut worst = [(0.0_f64, 0_usize); 8];
    let mut note = |k: usize, r: f64, i: usize| {
        if r > worst[k].0 || r.is_nan() {
            worst[k] = (if r.is_nan() { f64::INFINITY } else { r }, i);
        }
    };
    if !(0.0..1.0).contains(&kappa) {
        note(
            0,
            if kappa < 0.0 {
                -kappa
            } else {
                kappa - 1.0 + f64::EPSILON
            },
            0,
        );
    }
    let k_eff = kappa.clamp(0.0, 1.0);
    let k2 = norm_k * norm_k;
    for s in states {
        let base = s.ln_phi;
        let psi = (s.ln_psi - base).exp();
        let psi_prev = (s.ln_psi_prev - base).exp();
        // phi_i normalised to one
        note(1, rel_eq(psi_prev * s.sigma_prev, s.tau), s.i);
        let lhs = s.lambda * s.lambda * psi_prev * (1.0 + 2.0 * s.rho * s.sigma_prev / s.lambda);
        note(6, rel_ge(lhs, s.mu * s.mu * psi), s.i);
        note(
            7,
            rel_ge((1.0 - k_eff) * s.mu * s.mu * psi, s.tau * s.tau * k2),
            s.i,
        );
    }
    for w in states.windows(2) {
        let (s, t) = (&w[0], &w[1]);
        let phi_t = (t.ln_phi - s.ln_phi).exp();
        note(
            2,
            rel_eq(s.omega * t.lambda * phi_t * t.tau, s.lambda * s.tau),
            s.i,
        );
        let growth = s.lambda * s.lambda * (1.0 + 2.0 * s.gamma * s.tau / s.lambda);
        note(3, rel_ge(growth, t.lambda * t.lambda * phi_t), s.i);
        note(4, rel_ge(s.tau, (1.0 - t.lambda) * phi_t * t.tau), s.i);
        note(5, rel_ge(phi_t * t.tau, s.tau), s.i);
    }
    let checks = CONDITIONS
        .iter()
        .zip(worst)
        .map(|(&name, (r, i))| ConditionCheck {
            name,
            worst_residual: r,
            worst_index: i,
            passed: r <= tol,
        })
        .collect();
    ConditionReport {
        checks,
        tolerance: tol,
    }
}
