//! Experiment settings merged from command-line flags and an optional TOML
//! file. Flags win over the file, the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use icpdps::fourier::SpiralParams;
use icpdps::harness::{
    DataConfig, GapKind, ProblemKind, DEFAULT_GAMMA_USED, DEFAULT_REFERENCE_ITERS,
};
use icpdps::schedules::ScheduleMode;
use icpdps::solvers::Inertia;
use serde::Deserialize;

/// Options shared by `run` and `compare`. Every field may also be set in the
/// configuration file under the same name.
#[derive(Args, Clone, Debug, Default)]
pub struct ExperimentArgs {
    /// TOML file with defaults for any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// denoise, fourier or pet.
    #[arg(long)]
    pub problem: Option<String>,
    /// Input image (.pgm, .ppm, .pnm or .f64) on the [0, 255] scale; defaults to the phantom.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gaussian noise level on the [0, 255] scale.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Peak clean intensity the problem works with.
    #[arg(long)]
    pub intensity: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub spiral_turns: Option<f64>,
    #[arg(long)]
    pub spiral_thickness: Option<f64>,
    #[arg(long)]
    pub spiral_center: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Stop once the gap falls to this many dB.
    #[arg(long, allow_hyphen_values = true)]
    pub stop_db: Option<f64>,
    /// true or lagrangian; defaults per problem.
    #[arg(long)]
    pub gap: Option<String>,
    /// Iterations of the reference solver; 0 disables the reference.
    #[arg(long)]
    pub reference_iters: Option<usize>,
    /// Strong-convexity factor handed to accelerated schedules.
    #[arg(long)]
    pub gamma_used: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Inertia of i-pdps: a number in [0, 1/3) or `fista` for the FISTA momentum rule.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Relaxation factor of r-pdps, in (0, 2).
    #[arg(long)]
    pub relax: Option<f64>,
    /// Comma-separated gap thresholds in dB for the summary table.
    #[arg(long, allow_hyphen_values = true)]
    pub thresholds: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileSettings {
    problem: Option<String>,
    image: Option<PathBuf>,
    n1: Option<usize>,
    n2: Option<usize>,
    beta: Option<f64>,
    noise_std: Option<f64>,
    intensity: Option<f64>,
    seed: Option<u64>,
    spiral_turns: Option<f64>,
    spiral_thickness: Option<f64>,
    spiral_center: Option<f64>,
    iters: Option<usize>,
    stride: Option<usize>,
    stop_db: Option<f64>,
    gap: Option<String>,
    reference_iters: Option<usize>,
    gamma_used: Option<f64>,
    tau0: Option<f64>,
    sigma0: Option<f64>,
    epsilon: Option<f64>,
    alpha: Option<toml::Value>,
    relax: Option<f64>,
    thresholds: Option<Vec<f64>>,
    solver: Option<String>,
    mode: Option<String>,
    solvers: Option<Vec<String>>,
}

/// Fully resolved settings.
#[derive(Clone, Debug)]
pub struct Settings {
    pub data: DataConfig,
    pub image: Option<PathBuf>,
    pub iters: usize,
    pub stride: usize,
    pub stop_db: Option<f64>,
    pub gap: GapKind,
    pub reference_iters: usize,
    pub gamma_used: f64,
    pub tau0: Option<f64>,
    pub sigma0: Option<f64>,
    pub epsilon: Option<f64>,
    pub alpha: Option<Inertia>,
    pub relax: Option<f64>,
    pub thresholds: Vec<f64>,
    /// Solver choices from the file, for subcommands that did not get them as flags.
    pub file_solver: Option<String>,
    pub file_mode: Option<ScheduleMode>,
    pub file_solvers: Option<Vec<String>>,
}

fn load_file(path: &Path) -> Result<FileSettings> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_thresholds(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad threshold `{t}`"))
        })
        .collect()
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => FileSettings::default(),
        };
        let problem: ProblemKind = self
            .problem
            .clone()
            .or(file.problem)
            .context("no problem given (use --problem or `problem` in the config file)")?
            .parse()?;
        // relative paths in the file are relative to the file itself
        let image = self.image.clone().or_else(|| {
            let base = self
                .config
                .as_ref()
                .and_then(|c| c.parent())
                .unwrap_or(Path::new(""));
            file.image.map(|p| base.join(p))
        });
        let (default_n1, default_n2) = if problem == ProblemKind::Pet {
            (128, 128)
        } else {
            (96, 64)
        };
        let mut data = DataConfig::new(
            problem,
            self.n1.or(file.n1).unwrap_or(default_n1),
            self.n2.or(file.n2).unwrap_or(default_n2),
        );
        if let Some(b) = self.beta.or(file.beta) {
            data.beta = b;
        }
        if let Some(s) = self.noise_std.or(file.noise_std) {
            data.noise_std = s;
        }
        if let Some(i) = self.intensity.or(file.intensity) {
            data.intensity = i;
        }
        if let Some(s) = self.seed.or(file.seed) {
            data.seed = s;
        }
        let d = SpiralParams::default();
        data.spiral = SpiralParams {
            turns: self.spiral_turns.or(file.spiral_turns).unwrap_or(d.turns),
            thickness: self
                .spiral_thickness
                .or(file.spiral_thickness)
                .unwrap_or(d.thickness),
            center_radius: self
                .spiral_center
                .or(file.spiral_center)
                .unwrap_or(d.center_radius),
        };
        let gap = match self.gap.clone().or(file.gap) {
            Some(g) => g.parse()?,
            None => problem.default_gap(),
        };
        let thresholds = match (&self.thresholds, file.thresholds) {
            (Some(s), _) => parse_thresholds(s)?,
            (None, Some(v)) => v,
            (None, None) => icpdps::harness::DEFAULT_THRESHOLDS_DB.to_vec(),
        };
        let stride = self.stride.or(file.stride).unwrap_or(10);
        if stride == 0 {
            bail!("stride must be positive");
        }
        Ok(Settings {
            data,
            image,
            iters: self.iters.or(file.iters).unwrap_or(2000),
            stride,
            stop_db: self.stop_db.or(file.stop_db),
            gap,
            reference_iters: self
                .reference_iters
                .or(file.reference_iters)
                .unwrap_or(DEFAULT_REFERENCE_ITERS),
            gamma_used: self
                .gamma_used
                .or(file.gamma_used)
                .unwrap_or(DEFAULT_GAMMA_USED),
            tau0: self.tau0.or(file.tau0),
            sigma0: self.sigma0.or(file.sigma0),
            epsilon: self.epsilon.or(file.epsilon),
            alpha: match (&self.alpha, file.alpha) {
                (Some(a), _) => Some(a.parse()?),
                (None, Some(toml::Value::String(a))) => Some(a.parse()?),
                (None, Some(toml::Value::Float(a))) => Some(a.to_string().parse()?),
                (None, Some(toml::Value::Integer(a))) => Some(a.to_string().parse()?),
                (None, Some(v)) => bail!("alpha must be a number or \"fista\", got {v}"),
                (None, None) => None,
            },
            relax: self.relax.or(file.relax),
            thresholds,
            file_solver: file.solver,
            file_mode: file.mode.map(|m| m.parse()).transpose()?,
            file_solvers: file.solvers,
        })
    }
}
