use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::fista::{
    fista_sc_lambda_max, fista_sc_step, fista_step, ConjugateComposite, FistaState, SmoothFunction,
};
use super::{
    advance_i_pdps, advance_ic_pdps, advance_inertial_unchecked, advance_pdps, advance_r_pdps,
    SolverState,
};
use crate::error::{Error, Result};
use crate::linalg::{DenseVector, PrimalDualPoint};
use crate::problems::SaddleProblem;
use crate::prox::FunctionHandle;
use crate::schedules::{
    accelerated_pdps_initial, initial_state, next_state, ScheduleMode, ScheduleParams, StepState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Pdps,
    PdpsAccel,
    IPdps,
    RPdps,
    IcPdps,
    IcPdpsDual,
    Fista,
    FistaSc,
}

impl SolverKind {
    pub const ALL: [SolverKind; 8] = [
        SolverKind::Pdps,
        SolverKind::PdpsAccel,
        SolverKind::IPdps,
        SolverKind::RPdps,
        SolverKind::IcPdps,
        SolverKind::IcPdpsDual,
        SolverKind::Fista,
        SolverKind::FistaSc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Pdps => "pdps",
            SolverKind::PdpsAccel => "pdps-accel",
            SolverKind::IPdps => "i-pdps",
            SolverKind::RPdps => "r-pdps",
            SolverKind::IcPdps => "ic-pdps",
            SolverKind::IcPdpsDual => "ic-pdps-dual",
            SolverKind::Fista => "fista",
            SolverKind::FistaSc => "fista-sc",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("solver", format!("unknown solver `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub mode: ScheduleMode,
    /// Steps, inertia and the convexity factors the solver may exploit.
    pub params: ScheduleParams,
    /// Inertia of the rebased method.
    pub inertia: Inertia,
    /// Relaxation factor, in `(0, 2)`.
    pub relax: f64,
    /// Track the auxiliary certificate sequences.
    pub track_aux: bool,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, params: ScheduleParams) -> Self {
        Self {
            kind,
            mode: ScheduleMode::Basic,
            params,
            inertia: Inertia::Fixed(0.9 / 3.0),
            relax: 1.5,
            track_aux: false,
        }
    }
}

/// Data needed to evaluate the final-metric certificate at iterate `N`:
/// the auxiliary sequences and the schedule states `N - 1` and `N`.
pub struct CertificateView<'a> {
    pub zeta: &'a DenseVector,
    pub eta: &'a DenseVector,
    pub x: &'a DenseVector,
    pub y: &'a DenseVector,
    pub prev: &'a StepState,
    pub cur: &'a StepState,
}

pub trait Engine: Send {
    fn step(&mut self) -> Result<()>;
    /// Current iterate in the coordinates of the problem the engine was built for.
    fn point(&self) -> PrimalDualPoint;
    fn iteration(&self) -> usize;
    fn certificate(&self) -> Option<CertificateView<'_>> {
        None
    }
}

/// Extrapolation weight of the inertial method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inertia {
    /// Constant weight, in `[0, 1/3)`.
    Fixed(f64),
    /// `(t_i - 1) / t_{i+1}` with `t_{i+1} = (1 + sqrt(1 + 4 t_i^2)) / 2`, `t_0 = 1`.
    /// The weight tends to 1, far outside the range with a convergence
    /// guarantee, so this is opt-in only.
    FistaRule,
}

impl Inertia {
    pub fn validate(self) -> Result<()> {
        match self {
            Inertia::Fixed(a) if !(0.0..1.0 / 3.0).contains(&a) => Err(Error::param(
                "alpha",
                format!("must lie in [0, 1/3), got {a}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Inertia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inertia::Fixed(a) => write!(f, "{a}"),
            Inertia::FistaRule => f.write_str("fista"),
        }
    }
}

impl FromStr for Inertia {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fista" {
            return Ok(Inertia::FistaRule);
        }
        let a: f64 = s.parse().map_err(|_| {
            Error::param("alpha", format!("expected a number or `fista`, got `{s}`"))
        })?;
        let i = Inertia::Fixed(a);
        i.validate()?;
        Ok(i)
    }
}

enum Variant {
    Plain,
    Inertial(f64),
    /// Current `t_i` of the FISTA momentum sequence.
    InertialFista(f64),
    Relaxed(f64),
}

struct PrimalDualEngine {
    problem: SaddleProblem,
    state: SolverState,
    variant: Variant,
}

impl Engine for PrimalDualEngine {
    fn step(&mut self) -> Result<()> {
        match self.variant {
            Variant::Plain => advance_pdps(&mut self.state, &self.problem),
            Variant::Inertial(a) => advance_i_pdps(&mut self.state, &self.problem, a),
            Variant::InertialFista(ref mut t) => {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * *t * *t).sqrt());
                let alpha = (*t - 1.0) / t_next;
                *t = t_next;
                advance_inertial_unchecked(&mut self.state, &self.problem, alpha)
            }
            Variant::Relaxed(r) => advance_r_pdps(&mut self.state, &self.problem, r),
        }
    }
    /// For the relaxed variant this is the last prox output, which stays in
    /// the domains of `G` and `F*` where the relaxed iterate may not.
    fn point(&self) -> PrimalDualPoint {
        match self.variant {
            Variant::Relaxed(_) => {
                PrimalDualPoint::new(self.state.x_bar.clone(), self.state.y_bar.clone())
            }
            _ => self.state.point(),
        }
    }
    fn iteration(&self) -> usize {
        self.state.iteration
    }
}

struct CorrectedEngine {
    problem: SaddleProblem,
    state: SolverState,
    mode: ScheduleMode,
    swapped: bool,
}

impl Engine for CorrectedEngine {
    fn step(&mut self) -> Result<()> {
        let next = next_state(self.mode, &self.state.step)?;
        advance_ic_pdps(&mut self.state, &self.problem, &next)
    }
    fn point(&self) -> PrimalDualPoint {
        let u = self.state.point();
        if self.swapped {
            u.swapped()
        } else {
            u
        }
    }
    fn iteration(&self) -> usize {
        self.state.iteration
    }
    fn certificate(&self) -> Option<CertificateView<'_>> {
        if self.swapped {
            return None;
        }
        Some(CertificateView {
            zeta: self.state.zeta.as_ref()?,
            eta: self.state.eta.as_ref()?,
            x: &self.state.x,
            y: &self.state.y,
            prev: self.state.prev_step.as_ref()?,
            cur: &self.state.step,
        })
    }
}

/// FISTA on the dual problem `min_y G*(-K* y) + F*(y)`; the primal iterate is
/// recovered as `grad G*(-K* y)`.
struct DualFistaEngine {
    smooth: ConjugateComposite,
    prox: FunctionHandle,
    state: FistaState,
    tau: f64,
    epsilon: f64,
    strongly_convex: Option<(f64, f64)>,
}

impl Engine for DualFistaEngine {
    fn step(&mut self) -> Result<()> {
        self.state = match self.strongly_convex {
            None => fista_step(
                &self.state,
                self.prox.as_ref(),
                &self.smooth,
                self.tau,
                self.epsilon,
            )?,
            Some((lambda, gamma)) => {
                fista_sc_step(&self.state, self.prox.as_ref(), &self.smooth, lambda, gamma)?
            }
        };
        if !self.state.x.is_finite() {
            return Err(Error::NonFinite {
                iteration: self.state.iteration,
                what: "dual iterate contains NaN or infinity".into(),
            });
        }
        Ok(())
    }
    fn point(&self) -> PrimalDualPoint {
        let y = self.state.x.clone();
        PrimalDualPoint::new(self.smooth.primal(&y).into(), y)
    }
    fn iteration(&self) -> usize {
        self.state.iteration
    }
}

fn check_factor(name: &'static str, used: f64, available: f64) -> Result<()> {
    if used <= available + 1e-15 {
        Ok(())
    } else {
        Err(Error::ModeMismatch(format!(
            "{name} = {used} exceeds the problem's strong-convexity factor {available}"
        )))
    }
}

pub fn build_engine(
    problem: &SaddleProblem,
    cfg: &SolverConfig,
    u0: PrimalDualPoint,
) -> Result<Box<dyn Engine>> {
    let p = cfg.params;
    let plain = || -> Result<SolverState> {
        Ok(SolverState::new(
            u0.clone(),
            accelerated_pdps_initial(p.tau0, p.sigma0, 0.0)?,
            false,
        ))
    };
    let engine: Box<dyn Engine> = match cfg.kind {
        SolverKind::Pdps => Box::new(PrimalDualEngine {
            problem: problem.clone(),
            state: plain()?,
            variant: Variant::Plain,
        }),
        SolverKind::PdpsAccel => {
            if !(p.gamma > 0.0) {
                return Err(Error::ModeMismatch("pdps-accel needs gamma > 0".into()));
            }
            check_factor("gamma", p.gamma, problem.gamma)?;
            Box::new(PrimalDualEngine {
                problem: problem.clone(),
                state: SolverState::new(
                    u0,
                    accelerated_pdps_initial(p.tau0, p.sigma0, p.gamma)?,
                    false,
                ),
                variant: Variant::Plain,
            })
        }
        SolverKind::IPdps => Box::new(PrimalDualEngine {
            problem: problem.clone(),
            state: {
                cfg.inertia.validate()?;
                plain()?
            },
            variant: match cfg.inertia {
                Inertia::Fixed(a) => Variant::Inertial(a),
                Inertia::FistaRule => Variant::InertialFista(1.0),
            },
        }),
        SolverKind::RPdps => Box::new(PrimalDualEngine {
            problem: problem.clone(),
            state: plain()?,
            variant: Variant::Relaxed(cfg.relax),
        }),
        SolverKind::IcPdps => {
            check_factor("gamma", p.gamma, problem.gamma)?;
            check_factor("rho", p.rho, problem.rho)?;
            let params = ScheduleParams {
                norm_k: problem.norm_k,
                ..p
            };
            let s0 = initial_state(cfg.mode, &params)?;
            Box::new(CorrectedEngine {
                problem: problem.clone(),
                state: SolverState::new(u0, s0, cfg.track_aux),
                mode: cfg.mode,
                swapped: false,
            })
        }
        SolverKind::IcPdpsDual => {
            if cfg.mode != ScheduleMode::DualAccel {
                return Err(Error::ModeMismatch(format!(
                    "ic-pdps-dual runs the dual-accel schedule on the swapped problem, not {}",
                    cfg.mode
                )));
            }
            let swapped = problem.dual_swap();
            check_factor("rho", p.rho, swapped.rho)?;
            let params = ScheduleParams {
                norm_k: swapped.norm_k,
                ..p
            };
            let s0 = initial_state(ScheduleMode::DualAccel, &params)?;
            Box::new(CorrectedEngine {
                problem: swapped,
                state: SolverState::new(u0.swapped(), s0, cfg.track_aux),
                mode: ScheduleMode::DualAccel,
                swapped: true,
            })
        }
        SolverKind::Fista | SolverKind::FistaSc => {
            let smooth =
                ConjugateComposite::new(problem.primal.clone(), problem.op.clone(), problem.norm_k)
                    .map_err(|_| {
                        Error::NotApplicable {
                solver: cfg.kind.name().into(),
                reason:
                    "the primal term has no smooth conjugate, so the dual problem is not smooth"
                        .into(),
            }
                    })?;
            let strongly_convex = if cfg.kind == SolverKind::FistaSc {
                let rho = problem.rho;
                if !(rho > 0.0) {
                    return Err(Error::NotApplicable {
                        solver: cfg.kind.name().into(),
                        reason: "the dual-form prox term is not strongly convex".into(),
                    });
                }
                Some((fista_sc_lambda_max(rho, smooth.lipschitz()), rho))
            } else {
                None
            };
            Box::new(DualFistaEngine {
                tau: 1.0 / smooth.lipschitz(),
                smooth,
                prox: problem.dual.clone(),
                state: FistaState::new(u0.y),
                epsilon: p.epsilon,
                strongly_convex,
            })
        }
    };
    Ok(engine)
}

/// One trace row. Metrics that are not available are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub i: usize,
    pub elapsed_s: f64,
    pub gap_db: Option<f64>,
    pub target_db: Option<f64>,
    pub certificate_lhs: Option<f64>,
    pub c0: Option<f64>,
}

impl IterationRecord {
    pub fn empty(i: usize) -> Self {
        Self {
            i,
            elapsed_s: 0.0,
            gap_db: None,
            target_db: None,
            certificate_lhs: None,
            c0: None,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<IterationRecord>,
    /// Set when the run stopped on a numerical failure; `records` keeps the
    /// metrics up to the last finite iterate.
    pub failure: Option<Error>,
}

/// Run `max_iters` steps, evaluating `observe` every `stride` iterations.
/// Elapsed time counts only the solver steps, not metric evaluation.
/// The run stops early once a record's `gap_db` falls to `stop_below_db`.
pub fn run(
    engine: &mut dyn Engine,
    max_iters: usize,
    stride: usize,
    stop_below_db: Option<f64>,
    mut observe: impl FnMut(&dyn Engine) -> Result<IterationRecord>,
) -> Result<RunOutcome> {
    if stride == 0 {
        return Err(Error::param("stride", "must be positive"));
    }
    let mut records = Vec::with_capacity(max_iters / stride);
    let mut elapsed = 0.0;
    for i in 1..=max_iters {
        let t = Instant::now();
        let r = engine.step();
        elapsed += t.elapsed().as_secs_f64();
        if let Err(e) = r {
            return Ok(RunOutcome {
                records,
                failure: Some(e),
            });
        }
        if i % stride == 0 {
            let mut rec = observe(&*engine)?;
            rec.i = i;
            rec.elapsed_s = elapsed;
            let done = matches!((rec.gap_db, stop_below_db), (Some(g), Some(s)) if g <= s);
            records.push(rec);
            if done {
                break;
            }
        }
    }
    Ok(RunOutcome {
        records,
        failure: None,
    })
}
