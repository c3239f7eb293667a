//! Experiment setup shared by the command-line runner and the acceptance suite:
//! synthetic instances, default solver parameters, reference solutions, the
//! per-stride metric observer and threshold summaries.

use std::fmt;
use std::str::FromStr;

use crate::dataio::{add_gaussian_noise, poisson_measurements, shepp_logan, ImageBuffer, PetData};
use crate::error::{check_len, Error, Result};
use crate::fourier::{spiral_mask, zero_filling, Mask, MaskedFourier, SpiralParams};
use crate::linalg::{LinearOperator, PrimalDualPoint};
use crate::metrics::{
    certificate_lhs, compute_c0, gap_db, initial_dual_subgradient, lagrangian_gap, target_db,
    true_gap, CertificateContext,
};
use crate::problems::{
    make_denoise_problem, make_fourier_problem, make_pet_problem, Radon4, SaddleProblem,
};
use crate::schedules::{delta_from_kappa, initial_state, kappa, ScheduleMode, ScheduleParams};
use crate::solvers::{
    build_engine, run, Engine, IterationRecord, RunOutcome, SolverConfig, SolverKind,
};

/// Acceleration factor actually used when the problem allows more.
pub const DEFAULT_GAMMA_USED: f64 = 0.5;
/// Reference runs at desk scale.
pub const DEFAULT_REFERENCE_ITERS: usize = 100_000;
/// Gaussian noise level on the `[0, 255]` scale.
pub const DEFAULT_NOISE_STD: f64 = 51.0;
pub const DEFAULT_THRESHOLDS_DB: [f64; 3] = [-20.0, -40.0, -60.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Denoise,
    Fourier,
    Pet,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] =
        [ProblemKind::Denoise, ProblemKind::Fourier, ProblemKind::Pet];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Denoise => "denoise",
            ProblemKind::Fourier => "fourier",
            ProblemKind::Pet => "pet",
        }
    }

    pub fn default_beta(self) -> f64 {
        match self {
            ProblemKind::Denoise => 0.2,
            ProblemKind::Fourier => 0.1,
            ProblemKind::Pet => 0.1,
        }
    }

    pub fn default_epsilon(self) -> f64 {
        match self {
            ProblemKind::Pet => 0.9,
            _ => 0.7,
        }
    }

    /// Solver used for long reference runs.
    pub fn reference_solver(self) -> SolverKind {
        match self {
            // the plain method stalls on this problem
            ProblemKind::Fourier => SolverKind::IcPdps,
            _ => SolverKind::Pdps,
        }
    }

    /// The true gap is infinite for generic Fourier iterates, so that problem
    /// reports the Lagrangian gap against the reference.
    pub fn default_gap(self) -> GapKind {
        match self {
            ProblemKind::Fourier => GapKind::Lagrangian,
            _ => GapKind::True,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "problem",
                    format!("unknown problem `{s}` (denoise, fourier, pet)"),
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapKind {
    True,
    Lagrangian,
}

impl GapKind {
    pub fn name(self) -> &'static str {
        match self {
            GapKind::True => "true",
            GapKind::Lagrangian => "lagrangian",
        }
    }
}

impl FromStr for GapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(GapKind::True),
            "lagrangian" => Ok(GapKind::Lagrangian),
            _ => Err(Error::param(
                "gap",
                format!("unknown gap `{s}` (true, lagrangian)"),
            )),
        }
    }
}

/// How synthetic data is produced.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub problem: ProblemKind,
    pub n1: usize,
    pub n2: usize,
    pub beta: f64,
    /// Noise standard deviation on the `[0, 255]` scale.
    pub noise_std: f64,
    /// Peak of the clean intensity range for denoising and Fourier data; the
    /// regularisation weights are calibrated for 1. Noise is rescaled with
    /// it. PET always works on `[0, 1]`.
    pub intensity: f64,
    pub seed: u64,
    pub spiral: SpiralParams,
}

impl DataConfig {
    pub fn new(problem: ProblemKind, n1: usize, n2: usize) -> Self {
        Self {
            problem,
            n1,
            n2,
            beta: problem.default_beta(),
            noise_std: DEFAULT_NOISE_STD,
            intensity: 1.0,
            seed: 1,
            spiral: SpiralParams::default(),
        }
    }
}

impl fmt::Display for DataConfig {
    /// Stable text form; part of the reference-cache key.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "problem={} n1={} n2={} beta={} noise_std={} intensity={} seed={} spiral={},{},{}",
            self.problem,
            self.n1,
            self.n2,
            self.beta,
            self.noise_std,
            self.intensity,
            self.seed,
            self.spiral.turns,
            self.spiral.thickness,
            self.spiral.center_radius
        )
    }
}

/// A concrete problem together with the data it was built from.
#[derive(Clone)]
pub struct Instance {
    pub config: DataConfig,
    /// Ground truth in the problem's intensity units.
    pub clean: ImageBuffer,
    /// Noisy image (denoising), zero-filled inversion (Fourier); absent for PET.
    pub observed: Option<ImageBuffer>,
    pub mask: Option<Mask>,
    pub pet: Option<PetData>,
    pub problem: SaddleProblem,
}

impl Instance {
    pub fn u0(&self) -> PrimalDualPoint {
        PrimalDualPoint::zeros(self.problem.primal_dim(), self.problem.dual_dim())
    }

    /// Bytes that identify the instance: configuration text plus the data.
    pub fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = self.config.to_string().into_bytes();
        let mut push = |v: &[f64]| {
            v.iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes()))
        };
        push(&self.clean.data);
        if let Some(o) = &self.observed {
            push(&o.data);
        }
        if let Some(p) = &self.pet {
            push(&p.b);
            push(&p.c);
        }
        if let Some(m) = &self.mask {
            out.extend(m.as_slice().iter().map(|&b| b as u8));
        }
        out
    }
}

/// Build the instance described by `cfg`. Denoising and Fourier data use `image`
/// (intensities on `[0, 255]`) when given, otherwise the phantom.
pub fn build_instance(cfg: &DataConfig, image: Option<&ImageBuffer>) -> Result<Instance> {
    let (n1, n2) = (cfg.n1, cfg.n2);
    if !(cfg.intensity > 0.0 && cfg.intensity.is_finite()) {
        return Err(Error::param("intensity", "must be positive"));
    }
    let base = match image {
        Some(img) => {
            if (img.n1, img.n2) != (n1, n2) {
                return Err(Error::param(
                    "image",
                    format!(
                        "image is {}x{}, configuration asks for {n1}x{n2}",
                        img.n1, img.n2
                    ),
                ));
            }
            img.clone()
        }
        None => shepp_logan(n1, n2)?,
    };
    let noisy = |clean: &ImageBuffer| {
        add_gaussian_noise(clean, cfg.noise_std * cfg.intensity / 255.0, cfg.seed)
    };
    match cfg.problem {
        ProblemKind::Denoise => {
            let clean = base.scaled(cfg.intensity / 255.0);
            let z = noisy(&clean)?;
            let problem = make_denoise_problem(&z.data, n1, n2, cfg.beta)?;
            Ok(Instance {
                config: cfg.clone(),
                clean,
                observed: Some(z),
                mask: None,
                pet: None,
                problem,
            })
        }
        ProblemKind::Fourier => {
            let clean = base.scaled(cfg.intensity / 255.0);
            let z = noisy(&clean)?;
            let mask = spiral_mask(n1, n2, cfg.spiral)?;
            let op = MaskedFourier::new(mask.clone())?;
            let mut z_freq = vec![0.0; op.codomain_dim()];
            op.apply_into(&z.data, &mut z_freq);
            let zf = zero_filling(&z_freq, op.dft())?;
            let problem = make_fourier_problem(&z_freq, &mask, cfg.beta)?;
            Ok(Instance {
                config: cfg.clone(),
                clean,
                observed: Some(ImageBuffer::new(n1, n2, zf)?),
                mask: Some(mask),
                pet: None,
                problem,
            })
        }
        ProblemKind::Pet => {
            let clean = base.scaled(1.0 / 255.0);
            let radon = Radon4::new(n1, n2);
            let data = poisson_measurements(&clean, &radon, None, cfg.seed)?;
            let problem = make_pet_problem(&data.b, &data.c, n1, n2, cfg.beta)?;
            Ok(Instance {
                config: cfg.clone(),
                clean,
                observed: None,
                mask: None,
                pet: Some(data),
                problem,
            })
        }
    }
}

/// Default parameters for `kind` on `inst`. `mode` only applies to the
/// corrected inertial solvers; `gamma_used` is the acceleration factor handed
/// to whichever schedule exploits strong convexity.
pub fn solver_config(
    inst: &Instance,
    kind: SolverKind,
    mode: Option<ScheduleMode>,
    gamma_used: f64,
) -> Result<SolverConfig> {
    let norm_k = inst.problem.norm_k;
    let (tau0, sigma0) = match inst.config.problem {
        ProblemKind::Pet => (0.033 / norm_k, 30.0 / norm_k),
        _ => (9.9 / norm_k, 0.1 / norm_k),
    };
    let mut params = ScheduleParams {
        tau0,
        sigma0,
        epsilon: inst.config.problem.default_epsilon(),
        gamma: 0.0,
        rho: 0.0,
        lambda: ScheduleParams::default().lambda,
        norm_k,
    };
    let is_corrected = matches!(kind, SolverKind::IcPdps | SolverKind::IcPdpsDual);
    if !is_corrected && mode.is_some() {
        return Err(Error::ModeMismatch(format!(
            "{kind} has no schedule mode; modes apply to ic-pdps and ic-pdps-dual"
        )));
    }
    let mode = match kind {
        SolverKind::IcPdps => mode.unwrap_or(ScheduleMode::Basic),
        SolverKind::IcPdpsDual => mode.unwrap_or(ScheduleMode::DualAccel),
        _ => ScheduleMode::Basic,
    };
    match (kind, mode) {
        (SolverKind::PdpsAccel, _) => params.gamma = gamma_used,
        (SolverKind::IcPdps, ScheduleMode::Basic) => {}
        (SolverKind::IcPdps, ScheduleMode::PrimalAccel) => params.gamma = gamma_used,
        (SolverKind::IcPdps, ScheduleMode::DualAccel) => params.rho = gamma_used,
        (SolverKind::IcPdps, ScheduleMode::Linear) => {
            params.gamma = gamma_used;
            params.rho = gamma_used;
        }
        (SolverKind::IcPdpsDual, ScheduleMode::DualAccel) => {
            // roles exchange: the dual step becomes the constant primal one
            params.tau0 = sigma0;
            params.sigma0 = tau0;
            params.rho = gamma_used;
            params.epsilon = params.epsilon.min(0.5);
        }
        (SolverKind::IcPdpsDual, m) => {
            return Err(Error::ModeMismatch(format!(
                "ic-pdps-dual requires the dual-accel mode, not {m}"
            )));
        }
        _ => {}
    }
    let mut cfg = SolverConfig::new(kind, params);
    cfg.mode = mode;
    Ok(cfg)
}

/// Run the problem's reference solver for `iters` iterations from `u0`.
pub fn compute_reference(inst: &Instance, iters: usize) -> Result<PrimalDualPoint> {
    let kind = inst.config.problem.reference_solver();
    let cfg = solver_config(inst, kind, None, DEFAULT_GAMMA_USED)?;
    let mut engine = build_engine(&inst.problem, &cfg, inst.u0())?;
    let outcome = run(engine.as_mut(), iters, iters.max(1), None, |_| {
        Ok(IterationRecord::empty(0))
    })?;
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    Ok(engine.point())
}

/// Evaluates a trace row from the current engine state.
#[derive(Clone)]
pub struct Observer {
    problem: SaddleProblem,
    gap: GapKind,
    u_star: Option<PrimalDualPoint>,
    gap0: f64,
    certificate: Option<CertificateContext>,
}

impl Observer {
    pub fn new(inst: &Instance, gap: GapKind, u_star: Option<PrimalDualPoint>) -> Result<Self> {
        if let Some(u) = &u_star {
            check_len(inst.problem.primal_dim(), u.x.len())?;
            check_len(inst.problem.dual_dim(), u.y.len())?;
        }
        let mut obs = Self {
            problem: inst.problem.clone(),
            gap,
            u_star,
            gap0: 0.0,
            certificate: None,
        };
        obs.gap0 = obs.gap(&inst.u0())?;
        if !(obs.gap0 > 0.0 && obs.gap0.is_finite()) {
            return Err(Error::param(
                "u0",
                format!("initial gap must be positive and finite, got {}", obs.gap0),
            ));
        }
        Ok(obs)
    }

    pub fn gap(&self, u: &PrimalDualPoint) -> Result<f64> {
        match self.gap {
            GapKind::True => true_gap(u, &self.problem),
            GapKind::Lagrangian => {
                let us = self.u_star.as_ref().ok_or_else(|| {
                    Error::param("u_star", "the Lagrangian gap needs a reference solution")
                })?;
                lagrangian_gap(u, us, &self.problem)
            }
        }
    }

    pub fn initial_gap(&self) -> f64 {
        self.gap0
    }

    pub fn certificate_context(&self) -> Option<&CertificateContext> {
        self.certificate.as_ref()
    }

    /// Enable the final-metric certificate for a corrected inertial run.
    pub fn with_certificate(mut self, cfg: &SolverConfig, u0: &PrimalDualPoint) -> Result<Self> {
        if cfg.kind != SolverKind::IcPdps {
            return Err(Error::NotApplicable {
                solver: cfg.kind.name().into(),
                reason: "the certificate is defined for ic-pdps runs on the original problem"
                    .into(),
            });
        }
        let u_star = self
            .u_star
            .clone()
            .ok_or_else(|| Error::param("u_star", "the certificate needs a reference solution"))?;
        let params = ScheduleParams {
            norm_k: self.problem.norm_k,
            ..cfg.params
        };
        let s0 = initial_state(cfg.mode, &params)?;
        let w0 = initial_dual_subgradient(u0, &u_star, &self.problem, s0.rho)?;
        let c0 = compute_c0(u0, &u_star, &s0, &self.problem, &w0)?;
        let delta = delta_from_kappa(kappa(cfg.mode, &params).clamp(0.0, 1.0));
        self.certificate = Some(CertificateContext { u_star, c0, delta });
        Ok(self)
    }

    pub fn observe(&self, engine: &dyn Engine) -> Result<IterationRecord> {
        let u = engine.point();
        let mut rec = IterationRecord::empty(engine.iteration());
        rec.gap_db = Some(gap_db(self.gap0, self.gap(&u)?)?);
        if let Some(us) = &self.u_star {
            rec.target_db = Some(target_db(&u.x, &us.x)?);
        }
        if let (Some(ctx), Some(view)) = (&self.certificate, engine.certificate()) {
            rec.certificate_lhs = Some(certificate_lhs(&view, ctx, &self.problem)?);
            rec.c0 = Some(ctx.c0);
        }
        Ok(rec)
    }
}

/// Run `cfg` on `inst` from the zero initial point, recording every `stride` iterations.
pub fn run_experiment(
    inst: &Instance,
    cfg: &SolverConfig,
    observer: &Observer,
    max_iters: usize,
    stride: usize,
    stop_below_db: Option<f64>,
) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.track_aux |= observer.certificate.is_some();
    let mut engine = build_engine(&inst.problem, &cfg, inst.u0())?;
    run(engine.as_mut(), max_iters, stride, stop_below_db, |e| {
        observer.observe(e)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdHit {
    pub iterations: usize,
    pub seconds: f64,
}

/// First recorded row whose gap reaches `threshold_db`; resolution is the stride.
pub fn first_hit(records: &[IterationRecord], threshold_db: f64) -> Option<ThresholdHit> {
    records
        .iter()
        .find(|r| r.gap_db.is_some_and(|g| g <= threshold_db))
        .map(|r| ThresholdHit {
            iterations: r.i,
            seconds: r.elapsed_s,
        })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub hits: Vec<Option<ThresholdHit>>,
}

pub fn summarize(label: &str, records: &[IterationRecord], thresholds: &[f64]) -> SummaryRow {
    SummaryRow {
        label: label.to_string(),
        hits: thresholds.iter().map(|&t| first_hit(records, t)).collect(),
    }
}

/// Order rows by iterations to the deepest threshold, falling back to
/// shallower ones; rows that never reach a threshold sort after those that do.
pub fn rank(rows: &mut [SummaryRow]) {
    let key = |r: &SummaryRow| -> Vec<usize> {
        r.hits
            .iter()
            .rev()
            .map(|h| h.map_or(usize::MAX, |h| h.iterations))
            .collect()
    };
    rows.sort_by_key(key);
}

/// Plain-text table: one row per run, one `iterations (seconds)` cell per
/// threshold, `-` where the threshold was never reached.
pub fn format_summary(rows: &[SummaryRow], thresholds: &[f64]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}", "solver");
    for t in thresholds {
        out.push_str(&format!("  {:>20}", format!("gap <= {t} dB")));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:<width$}", r.label));
        for h in &r.hits {
            let cell = match h {
                Some(h) => format!("{} ({:.3}s)", h.iterations, h.seconds),
                None => "-".into(),
            };
            out.push_str(&format!("  {cell:>20}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, g: f64) -> IterationRecord {
        IterationRecord {
            gap_db: Some(g),
            elapsed_s: i as f64 * 1e-3,
            ..IterationRecord::empty(i)
        }
    }

    #[test]
    fn thresholds_and_ranking() {
        let fast = [rec(10, -10.0), rec(20, -45.0)];
        let slow = [rec(10, -5.0), rec(20, -25.0), rec(30, -41.0)];
        let never = [rec(10, -30.0)];
        let th = [-20.0, -40.0];
        let mut rows = vec![
            summarize("never", &never, &th),
            summarize("slow", &slow, &th),
            summarize("fast", &fast, &th),
        ];
        rank(&mut rows);
        let order: Vec<_> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(order, ["fast", "slow", "never"]);
        assert_eq!(rows[1].hits[0].unwrap().iterations, 20);
        let table = format_summary(&rows, &th);
        assert!(table.lines().nth(3).unwrap().trim_end().ends_with('-'));
    }

    #[test]
    fn instances_have_expected_shapes() {
        for kind in ProblemKind::ALL {
            let inst = build_instance(&DataConfig::new(kind, 16, 24), None).unwrap();
            assert_eq!(inst.problem.primal_dim(), 16 * 24);
            // at u0 = 0 every term of the true gap is finite, even for Fourier data
            let obs = Observer::new(&inst, GapKind::True, None).unwrap();
            assert!(obs.initial_gap() > 0.0);
        }
        let inst = build_instance(&DataConfig::new(ProblemKind::Pet, 16, 16), None).unwrap();
        assert!(inst.clean.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(inst.pet.as_ref().unwrap().b.len(), 16 + 16 + 2 * 31);
    }

    #[test]
    fn identical_configs_give_identical_instances() {
        let cfg = DataConfig::new(ProblemKind::Fourier, 16, 16);
        let a = build_instance(&cfg, None).unwrap();
        let b = build_instance(&cfg, None).unwrap();
        assert_eq!(a.fingerprint_bytes(), b.fingerprint_bytes());
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(
            build_instance(&other, None).unwrap().fingerprint_bytes(),
            a.fingerprint_bytes()
        );
    }

    #[test]
    fn mode_compatibility() {
        let inst = build_instance(&DataConfig::new(ProblemKind::Denoise, 16, 16), None).unwrap();
        assert!(solver_config(&inst, SolverKind::Pdps, Some(ScheduleMode::Basic), 0.5).is_err());
        assert!(solver_config(
            &inst,
            SolverKind::IcPdpsDual,
            Some(ScheduleMode::Basic),
            0.5
        )
        .is_err());
        let cfg = solver_config(&inst, SolverKind::IcPdpsDual, None, 0.5).unwrap();
        assert_eq!(cfg.mode, ScheduleMode::DualAccel);
        assert!(cfg.params.epsilon <= 0.5);
        let cfg = solver_config(
            &inst,
            SolverKind::IcPdps,
            Some(ScheduleMode::PrimalAccel),
            0.5,
        )
        .unwrap();
        assert_eq!(cfg.params.gamma, 0.5);
    }
}
