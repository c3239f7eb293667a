//! `icpdps`: run and compare the primal-dual solvers on the bundled imaging
//! problems, check step schedules and produce synthetic data.

mod cache;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use icpdps::dataio::{
    add_gaussian_noise, load_image, save_image, shepp_logan, write_combined_traces, write_trace,
    ImageBuffer, COLOUR_CONVERSION, GAUSSIAN_ALGORITHM,
};
use icpdps::fourier::{spiral_mask, SpiralParams};
use icpdps::harness::{
    build_instance, format_summary, rank, run_experiment, solver_config, summarize, GapKind,
    Instance, Observer, SummaryRow,
};
use icpdps::linalg::PrimalDualPoint;
use icpdps::schedules::{
    fista_lambda_next, generate, kappa, verify_conditions, ScheduleMode, ScheduleParams,
};
use icpdps::solvers::{RunOutcome, SolverConfig, SolverKind};

use settings::{ExperimentArgs, Settings};

#[derive(Parser)]
#[command(
    name = "icpdps",
    version,
    about = "Inertial corrected primal-dual solvers for imaging problems"
)]
struct Cli {
    /// Directory for traces, summaries, metadata and the reference cache.
    #[arg(long, global = true, env = "ICPDPS_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write its trace.
    Run(RunArgs),
    /// Run several solvers on the same instance and rank them.
    Compare(CompareArgs),
    /// Generate schedules and check their coupling conditions.
    ValidateSchedules(ValidateArgs),
    /// Write the modified Shepp-Logan phantom.
    Phantom(PhantomArgs),
    /// Add Gaussian noise to an image.
    Noise(NoiseArgs),
    /// Write a spiral frequency-sampling mask.
    Mask(MaskArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// pdps, pdps-accel, i-pdps, r-pdps, ic-pdps, ic-pdps-dual, fista or fista-sc.
    #[arg(long)]
    solver: Option<String>,
    /// Schedule of the corrected inertial solvers: basic, primal-accel, dual-accel or linear.
    #[arg(long)]
    mode: Option<String>,
    /// Record the final-metric certificate (ic-pdps only; needs the reference).
    #[arg(long)]
    certificate: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated `solver` or `solver:mode` entries.
    #[arg(long)]
    solvers: Option<String>,
    /// Run the solvers on separate threads. Wall-clock columns then include contention.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// One mode, or all of them when omitted.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated inertia parameters.
    #[arg(long, default_value = "0,0.5,0.7,0.9")]
    epsilon: String,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 256)]
    n1: usize,
    #[arg(long, default_value_t = 256)]
    n2: usize,
    /// Output image (.pgm or .f64).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Standard deviation in the image's own units.
    #[arg(long)]
    std: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    turns: Option<f64>,
    #[arg(long)]
    thickness: Option<f64>,
    #[arg(long)]
    center_radius: Option<f64>,
    /// Output image; sampled frequencies are 255, in unshifted DFT order.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(&cli.out_dir, a),
        Command::Compare(a) => cmd_compare(&cli.out_dir, a),
        Command::ValidateSchedules(a) => cmd_validate(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Mask(a) => cmd_mask(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[derive(Clone, Copy)]
struct RunSpec {
    kind: SolverKind,
    mode: Option<ScheduleMode>,
}

impl RunSpec {
    fn parse(s: &str) -> Result<Self> {
        let (k, m) = match s.split_once(':') {
            Some((k, m)) => (k, Some(m.trim().parse()?)),
            None => (s, None),
        };
        Ok(Self {
            kind: k.trim().parse()?,
            mode: m,
        })
    }

    fn label(&self) -> String {
        match self.mode {
            Some(m) => format!("{}-{m}", self.kind),
            None => self.kind.name().to_string(),
        }
    }
}

struct Prepared {
    settings: Settings,
    inst: Instance,
    u_star: Option<PrimalDualPoint>,
    reference_note: String,
}

fn prepare(exp: &ExperimentArgs, out_dir: &Path, need_reference: bool) -> Result<Prepared> {
    let mut settings = exp.resolve()?;
    let image = match &settings.image {
        Some(p) => {
            let img = load_image(p).with_context(|| format!("loading {}", p.display()))?;
            settings.data.n1 = img.n1;
            settings.data.n2 = img.n2;
            Some(img)
        }
        None => None,
    };
    let inst = build_instance(&settings.data, image.as_ref())?;
    let want = need_reference || settings.gap == GapKind::Lagrangian;
    if want && settings.reference_iters == 0 {
        bail!(
            "the {} gap and the certificate need a reference; reference-iters is 0",
            settings.gap.name()
        );
    }
    let (u_star, reference_note) = if settings.reference_iters > 0 {
        let started = std::time::Instant::now();
        let (u, src, key) =
            cache::reference(&inst, settings.reference_iters, &out_dir.join("cache"))?;
        let note = format!(
            "{} {} iterations, key {key}, {:?} in {:.2}s",
            inst.config.problem.reference_solver(),
            settings.reference_iters,
            src,
            started.elapsed().as_secs_f64()
        );
        (Some(u), note)
    } else {
        (None, "none".to_string())
    };
    Ok(Prepared {
        settings,
        inst,
        u_star,
        reference_note,
    })
}

fn make_config(p: &Prepared, spec: RunSpec) -> Result<SolverConfig> {
    let mut cfg = solver_config(&p.inst, spec.kind, spec.mode, p.settings.gamma_used)?;
    if let Some(t) = p.settings.tau0 {
        cfg.params.tau0 = t;
    }
    if let Some(s) = p.settings.sigma0 {
        cfg.params.sigma0 = s;
    }
    if let Some(e) = p.settings.epsilon {
        cfg.params.epsilon = e;
    }
    if let Some(i) = p.settings.alpha {
        cfg.inertia = i;
    }
    if let Some(r) = p.settings.relax {
        cfg.relax = r;
    }
    Ok(cfg)
}

fn execute(p: &Prepared, cfg: &SolverConfig, certificate: bool) -> Result<RunOutcome> {
    let mut obs = Observer::new(&p.inst, p.settings.gap, p.u_star.clone())?;
    if certificate {
        obs = obs.with_certificate(cfg, &p.inst.u0())?;
    }
    let s = &p.settings;
    Ok(run_experiment(
        &p.inst, cfg, &obs, s.iters, s.stride, s.stop_db,
    )?)
}

fn write_metadata(path: &Path, p: &Prepared, extra: &[(&str, String)]) -> Result<()> {
    let mut t = toml::Table::new();
    let d = &p.inst.config;
    let mut put = |k: &str, v: toml::Value| {
        t.insert(k.to_string(), v);
    };
    put("problem", d.problem.name().into());
    put("n1", (d.n1 as i64).into());
    put("n2", (d.n2 as i64).into());
    put("beta", d.beta.into());
    put("noise_std", d.noise_std.into());
    put("intensity", d.intensity.into());
    put("seed", (d.seed as i64).into());
    put("gaussian_algorithm", GAUSSIAN_ALGORITHM.into());
    if let Some(img) = &p.settings.image {
        put("image", img.display().to_string().into());
        put("colour_conversion", COLOUR_CONVERSION.into());
    }
    if let Some(m) = &p.inst.mask {
        put("mask_fraction", m.fraction().into());
        put(
            "spiral",
            format!(
                "turns={} thickness={} center_radius={}",
                d.spiral.turns, d.spiral.thickness, d.spiral.center_radius
            )
            .into(),
        );
    }
    put("gap", p.settings.gap.name().into());
    put("reference", p.reference_note.clone().into());
    put("gamma_used", p.settings.gamma_used.into());
    for (k, v) in extra {
        put(k, v.clone().into());
    }
    std::fs::write(path, toml::to_string(&t)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn describe(cfg: &SolverConfig) -> String {
    let p = &cfg.params;
    format!(
        "mode={} tau0={} sigma0={} epsilon={} gamma={} rho={} lambda={} alpha={} relax={}",
        cfg.mode, p.tau0, p.sigma0, p.epsilon, p.gamma, p.rho, p.lambda, cfg.inertia, cfg.relax
    )
}

/// Write the trace and metadata of one finished run; returns its summary row
/// and whether it completed without a numerical failure.
fn record_run(
    out_dir: &Path,
    p: &Prepared,
    label: &str,
    cfg: &SolverConfig,
    out: &RunOutcome,
) -> Result<(SummaryRow, bool)> {
    let stem = format!("{}-{label}", p.inst.config.problem);
    let trace = out_dir.join(format!("{stem}.csv"));
    write_trace(&trace, &out.records)?;
    let last = out.records.last();
    let mut extra = vec![
        ("solver", cfg.kind.name().to_string()),
        ("parameters", describe(cfg)),
        ("iterations", last.map_or(0, |r| r.i).to_string()),
        ("trace", trace.display().to_string()),
    ];
    if let Some(e) = &out.failure {
        extra.push(("failure", e.to_string()));
        eprintln!("warning: {label} stopped: {e}");
    }
    write_metadata(&out_dir.join(format!("{stem}.meta.toml")), p, &extra)?;
    Ok((
        summarize(label, &out.records, &p.settings.thresholds),
        out.failure.is_none(),
    ))
}

fn cmd_run(out_dir: &Path, a: &RunArgs) -> Result<bool> {
    std::fs::create_dir_all(out_dir)?;
    let p = prepare(&a.exp, out_dir, a.certificate)?;
    let solver = a
        .solver
        .clone()
        .or_else(|| p.settings.file_solver.clone())
        .context("no solver given (use --solver or `solver` in the config file)")?;
    let mode = match &a.mode {
        Some(m) => Some(m.parse()?),
        None => p.settings.file_mode,
    };
    let spec = RunSpec {
        kind: solver.parse()?,
        mode,
    };
    let mut cfg = make_config(&p, spec)?;
    cfg.track_aux = a.certificate;
    let out = execute(&p, &cfg, a.certificate)?;
    let (row, ok) = record_run(out_dir, &p, &spec.label(), &cfg, &out)?;
    print!("{}", format_summary(&[row], &p.settings.thresholds));
    if a.certificate {
        let worst = out
            .records
            .iter()
            .filter_map(|r| Some(r.certificate_lhs? / r.c0?))
            .fold(0.0_f64, f64::max);
        println!("certificate: worst lhs/C0 = {worst:.6}");
    }
    Ok(ok)
}

fn cmd_compare(out_dir: &Path, a: &CompareArgs) -> Result<bool> {
    std::fs::create_dir_all(out_dir)?;
    let p = prepare(&a.exp, out_dir, false)?;
    let list: Vec<String> = match (&a.solvers, &p.settings.file_solvers) {
        (Some(s), _) => s.split(',').map(|x| x.trim().to_string()).collect(),
        (None, Some(v)) => v.clone(),
        (None, None) => [
            "pdps",
            "pdps-accel",
            "i-pdps",
            "r-pdps",
            "ic-pdps",
            "ic-pdps:primal-accel",
            "ic-pdps-dual",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    };
    let specs = list
        .iter()
        .map(|s| RunSpec::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for spec in &specs {
        match make_config(&p, *spec) {
            Ok(cfg) => jobs.push((*spec, cfg)),
            Err(e) => eprintln!("skipping {}: {e}", spec.label()),
        }
    }
    let results: Vec<(RunSpec, SolverConfig, Result<RunOutcome>)> = if a.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(spec, cfg)| {
                    let p = &p;
                    s.spawn(move || (*spec, cfg.clone(), execute(p, cfg, false)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        })
    } else {
        jobs.into_iter()
            .map(|(spec, cfg)| {
                let r = execute(&p, &cfg, false);
                (spec, cfg, r)
            })
            .collect()
    };
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut all_ok = true;
    for (spec, cfg, r) in results {
        match r {
            Ok(out) => {
                let (row, ok) = record_run(out_dir, &p, &spec.label(), &cfg, &out)?;
                all_ok &= ok;
                rows.push(row);
                traces.push((spec.label(), out.records));
            }
            // a solver that does not apply to the problem is reported, not fatal
            Err(e) => eprintln!("skipping {}: {e}", spec.label()),
        }
    }
    write_combined_traces(
        out_dir.join(format!("{}-compare.csv", p.inst.config.problem)),
        &traces,
    )?;
    rank(&mut rows);
    let table = format_summary(&rows, &p.settings.thresholds);
    let summary = out_dir.join(format!("{}-summary.txt", p.inst.config.problem));
    std::fs::write(&summary, &table)?;
    write_metadata(
        &out_dir.join(format!("{}-summary.meta.toml", p.inst.config.problem)),
        &p,
        &[
            ("solvers", list.join(",")),
            ("parallel", a.parallel.to_string()),
        ],
    )?;
    print!("{table}");
    Ok(all_ok)
}

/// Parameters that make each mode admissible: the default steps, acceleration
/// factor 0.5 where a factor is used, and for the dual mode the small step on
/// the constant (primal) side.
fn validation_params(mode: ScheduleMode, epsilon: f64) -> ScheduleParams {
    let base = ScheduleParams {
        epsilon,
        ..ScheduleParams::default()
    };
    match mode {
        ScheduleMode::Basic => base,
        ScheduleMode::PrimalAccel => ScheduleParams { gamma: 0.5, ..base },
        ScheduleMode::DualAccel => ScheduleParams {
            tau0: base.sigma0,
            sigma0: base.tau0,
            rho: 0.5,
            ..base
        },
        ScheduleMode::Linear => ScheduleParams {
            gamma: 1.0,
            rho: 1.0,
            ..base
        },
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let modes = match &a.mode {
        Some(m) => vec![m.parse::<ScheduleMode>()?],
        None => ScheduleMode::ALL.to_vec(),
    };
    let eps: Vec<f64> = a
        .epsilon
        .split(',')
        .map(|e| {
            e.trim()
                .parse()
                .with_context(|| format!("bad epsilon `{e}`"))
        })
        .collect::<Result<_>>()?;
    let mut ok = true;
    for mode in modes {
        for &e in &eps {
            let p = validation_params(mode, e);
            let states = match generate(mode, &p, a.steps) {
                Ok(s) => s,
                Err(err) => {
                    // the dual mode only admits small inertia; anything else is a failure
                    let expected = mode == ScheduleMode::DualAccel && e > 0.5;
                    println!(
                        "{mode} eps={e}: rejected ({err}){}",
                        if expected { "" } else { " FAIL" }
                    );
                    ok &= expected;
                    continue;
                }
            };
            let rep = verify_conditions(&states, kappa(mode, &p), p.norm_k);
            let mut bound_ok = true;
            if mode == ScheduleMode::Basic {
                // the momentum recurrence and the basic inertia both satisfy
                // 1 / lambda_N >= 1 + (1 - eps) N / 2
                let mut lam = 1.0;
                for s in &states[1..] {
                    lam = fista_lambda_next(lam, e)?;
                    let floor = 1.0 + (1.0 - e) * s.i as f64 / 2.0 - 1e-9 * s.i as f64;
                    bound_ok &= 1.0 / s.lambda >= floor && 1.0 / lam >= floor;
                }
            }
            let pass = rep.passed() && bound_ok;
            ok &= pass;
            println!(
                "{mode} eps={e}: {} ({} steps, kappa {:.4})",
                if pass { "ok" } else { "FAIL" },
                a.steps,
                kappa(mode, &p)
            );
            if !pass {
                print!("{rep}");
                if !bound_ok {
                    println!("inertia violates the momentum bound");
                }
            }
        }
    }
    Ok(ok)
}

fn cmd_phantom(a: &PhantomArgs) -> Result<bool> {
    let img = shepp_logan(a.n1, a.n2)?;
    save_image(&a.out, &img)?;
    println!("wrote {} ({}x{})", a.out.display(), a.n1, a.n2);
    Ok(true)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

fn cmd_noise(a: &NoiseArgs) -> Result<bool> {
    let img = load_image(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let noisy = add_gaussian_noise(&img, a.std, a.seed)?;
    let rep = save_image(&a.out, &noisy)?;
    let mut t = toml::Table::new();
    t.insert("input".into(), a.input.display().to_string().into());
    t.insert("std".into(), a.std.into());
    t.insert("seed".into(), (a.seed as i64).into());
    t.insert("gaussian_algorithm".into(), GAUSSIAN_ALGORITHM.into());
    t.insert("clipped_pixels".into(), (rep.clipped as i64).into());
    std::fs::write(sidecar(&a.out), toml::to_string(&t)?)?;
    if rep.clipped > 0 {
        eprintln!(
            "note: {} pixels clipped to [0, 255]; use .f64 output to keep them",
            rep.clipped
        );
    }
    println!("wrote {}", a.out.display());
    Ok(true)
}

fn cmd_mask(a: &MaskArgs) -> Result<bool> {
    let d = SpiralParams::default();
    let params = SpiralParams {
        turns: a.turns.unwrap_or(d.turns),
        thickness: a.thickness.unwrap_or(d.thickness),
        center_radius: a.center_radius.unwrap_or(d.center_radius),
    };
    let mask = spiral_mask(a.n1, a.n2, params)?;
    let data = mask
        .as_slice()
        .iter()
        .map(|&m| if m { 255.0 } else { 0.0 })
        .collect();
    save_image(&a.out, &ImageBuffer::new(a.n1, a.n2, data)?)?;
    let mut t = toml::Table::new();
    t.insert("n1".into(), (a.n1 as i64).into());
    t.insert("n2".into(), (a.n2 as i64).into());
    t.insert("turns".into(), params.turns.into());
    t.insert("thickness".into(), params.thickness.into());
    t.insert("center_radius".into(), params.center_radius.into());
    t.insert("sampled".into(), (mask.count() as i64).into());
    t.insert("fraction".into(), mask.fraction().into());
    std::fs::write(sidecar(&a.out), toml::to_string(&t)?)?;
    println!(
        "wrote {}: {} of {} frequencies sampled ({:.2}%)",
        a.out.display(),
        mask.count(),
        a.n1 * a.n2,
        100.0 * mask.fraction()
    );
    Ok(true)
}
