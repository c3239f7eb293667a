use std::path::Path;
use std::process::{Command, Output};

use icpdps::dataio::{load_image, read_trace};

fn icpdps(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icpdps"))
        .args(args)
        .env("ICPDPS_OUT_DIR", out_dir)
        .current_dir(out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn data_commands_write_images_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = icpdps(
        d,
        &["phantom", "--n1", "48", "--n2", "32", "--out", "ph.pgm"],
    );
    assert!(o.status.success());
    let ph = load_image(d.join("ph.pgm")).unwrap();
    assert_eq!((ph.n1, ph.n2), (48, 32));

    let o = icpdps(
        d,
        &[
            "noise",
            "--input",
            "ph.pgm",
            "--std",
            "51",
            "--seed",
            "4",
            "--out",
            "noisy.f64",
        ],
    );
    assert!(o.status.success());
    let noisy = load_image(d.join("noisy.f64")).unwrap();
    assert_ne!(noisy.data, ph.data);
    let meta = std::fs::read_to_string(d.join("noisy.f64.meta.toml")).unwrap();
    assert!(meta.contains("gaussian_algorithm") && meta.contains("seed = 4"));

    let o = icpdps(d, &["mask", "--n1", "32", "--n2", "32", "--out", "m.pgm"]);
    assert!(o.status.success());
    let meta = std::fs::read_to_string(d.join("m.pgm.meta.toml")).unwrap();
    let frac: f64 = meta
        .lines()
        .find_map(|l| l.strip_prefix("fraction = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(frac > 0.05 && frac < 0.5);
    let m = load_image(d.join("m.pgm")).unwrap();
    let on = m.data.iter().filter(|&&v| v == 255.0).count();
    assert_eq!(on as f64 / 1024.0, frac);
}

#[test]
fn run_writes_trace_and_reuses_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "run",
        "--problem",
        "denoise",
        "--solver",
        "ic-pdps",
        "--n1",
        "24",
        "--n2",
        "16",
        "--iters",
        "200",
        "--stride",
        "10",
        "--reference-iters",
        "500",
        "--certificate",
    ];
    let o = icpdps(d, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("certificate: worst lhs/C0"));
    let rows = read_trace(d.join("denoise-ic-pdps.csv")).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0].i, 10);
    assert!(rows
        .iter()
        .all(|r| r.gap_db.is_some() && r.certificate_lhs.is_some() && r.c0.is_some()));
    let meta = std::fs::read_to_string(d.join("denoise-ic-pdps.meta.toml")).unwrap();
    assert!(meta.contains("Computed"), "{meta}");

    let o = icpdps(d, &args);
    assert!(o.status.success());
    let meta = std::fs::read_to_string(d.join("denoise-ic-pdps.meta.toml")).unwrap();
    assert!(meta.contains("Cached"), "{meta}");
    assert_eq!(std::fs::read_dir(d.join("cache")).unwrap().count(), 2);
}

#[test]
fn compare_ranks_and_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        "problem = \"denoise\"\nn1 = 32\nn2 = 24\nbeta = 0.25\niters = 1500\nstop-db = -45.0\nreference-iters = 0\nthresholds = [-20.0, -40.0]\nsolvers = [\"pdps\", \"ic-pdps:primal-accel\", \"fista-sc\"]\n",
    )
    .unwrap();
    let o = icpdps(d, &["compare", "--config", "exp.toml", "--parallel"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // fista-sc does not apply to denoising and is skipped with a note
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipping fista-sc"));
    let table = std::fs::read_to_string(d.join("denoise-summary.txt")).unwrap();
    assert_eq!(table, stdout(&o));
    let labels: Vec<_> = table
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(labels, ["ic-pdps-primal-accel", "pdps"]);
    assert!(d.join("denoise-pdps.csv").exists());
    let combined = std::fs::read_to_string(d.join("denoise-compare.csv")).unwrap();
    assert!(combined.starts_with("solver,i,") && combined.contains("\nic-pdps-primal-accel,"));
}

#[test]
fn validation_and_usage_errors_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = icpdps(d, &["validate-schedules", "--steps", "500"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.ends_with(")") && l.contains(": ok"))
            .count(),
        14
    );

    let o = icpdps(d, &["validate-schedules", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));

    // modes belong to the corrected solvers only
    let o = icpdps(
        d,
        &[
            "run",
            "--problem",
            "denoise",
            "--solver",
            "pdps",
            "--mode",
            "basic",
            "--reference-iters",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode"));

    // the Fourier gap defaults to the Lagrangian form, which needs a reference
    let o = icpdps(
        d,
        &[
            "run",
            "--problem",
            "fourier",
            "--solver",
            "pdps",
            "--reference-iters",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}
