use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::IterationRecord;

use super::image::write_atomic;

pub const TRACE_HEADER: [&str; 6] = [
    "i",
    "elapsed_s",
    "gap_db",
    "target_db",
    "certificate_lhs",
    "C0",
];

// Display for f64 prints the shortest string that parses back to the same bits.
fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if !x.is_nan() => x.to_string(),
        _ => "nan".into(),
    }
}

fn parse_cell(path: &Path, line: usize, s: &str) -> Result<Option<f64>> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: bad number `{s}`")))?;
    Ok((!v.is_nan()).then_some(v))
}

pub fn write_trace(path: impl AsRef<Path>, rows: &[IterationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    let mut last = None;
    for r in rows {
        if last.is_some_and(|l| r.i <= l) {
            return Err(Error::param(
                "rows",
                "iteration indices must be strictly increasing",
            ));
        }
        last = Some(r.i);
        w.write_record([
            r.i.to_string(),
            cell(Some(r.elapsed_s)),
            cell(r.gap_db),
            cell(r.target_db),
            cell(r.certificate_lhs),
            cell(r.c0),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Several labelled traces in one long-format table with a leading `solver`
/// column. Rows keep the order of `runs`.
pub fn write_combined_traces(
    path: impl AsRef<Path>,
    runs: &[(String, Vec<IterationRecord>)],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("solver").chain(TRACE_HEADER))?;
    for (label, rows) in runs {
        for r in rows {
            w.write_record([
                label.clone(),
                r.i.to_string(),
                cell(Some(r.elapsed_s)),
                cell(r.gap_db),
                cell(r.target_db),
                cell(r.certificate_lhs),
                cell(r.c0),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().ne(TRACE_HEADER) {
        return Err(Error::format(path, "unexpected trace header"));
    }
    let mut out: Vec<IterationRecord> = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != TRACE_HEADER.len() {
            return Err(Error::format(
                path,
                format!("line {line}: expected 6 fields"),
            ));
        }
        let i: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad iteration index")))?;
        if out.last().is_some_and(|l| i <= l.i) {
            return Err(Error::format(
                path,
                format!("line {line}: iteration indices must increase"),
            ));
        }
        out.push(IterationRecord {
            i,
            elapsed_s: parse_cell(path, line, &rec[1])?.unwrap_or(f64::NAN),
            gap_db: parse_cell(path, line, &rec[2])?,
            target_db: parse_cell(path, line, &rec[3])?,
            certificate_lhs: parse_cell(path, line, &rec[4])?,
            c0: parse_cell(path, line, &rec[5])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace(&p, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "i,elapsed_s,gap_db,target_db,certificate_lhs,C0\n"
        );
        assert!(read_trace(&p).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<_> = (0..1000)
            .map(|k| IterationRecord {
                i: 10 * k,
                elapsed_s: rng.gen::<f64>() * 3.0,
                gap_db: Some(-rng.gen::<f64>() * 120.0),
                target_db: (k % 3 != 0).then(|| rng.gen::<f64>() * -1e-7),
                certificate_lhs: (k % 2 == 0).then(|| rng.gen::<f64>() * 1e12),
                c0: Some(if k == 7 {
                    f64::INFINITY
                } else {
                    1.0 / (k as f64 + 1.0)
                }),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace(&p, &rows).unwrap();
        assert_eq!(read_trace(&p).unwrap(), rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",nan,"));
    }

    #[test]
    fn combined_traces_carry_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let mut r = IterationRecord::empty(10);
        r.gap_db = Some(-3.5);
        write_combined_traces(
            &p,
            &[("pdps".into(), vec![r.clone()]), ("a,b".into(), vec![r])],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "solver,i,elapsed_s,gap_db,target_db,certificate_lhs,C0"
        );
        assert!(lines[1].starts_with("pdps,10,") && lines[1].contains(",-3.5,"));
        assert!(lines[2].starts_with("\"a,b\",10,"));
    }

    #[test]
    fn non_increasing_indices_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = [IterationRecord::empty(3), IterationRecord::empty(3)];
        assert!(write_trace(&p, &rows).is_err());
        std::fs::write(&p, "i,elapsed_s,gap_db,target_db,certificate_lhs,C0\n2,0,nan,nan,nan,nan\n1,0,nan,nan,nan,nan\n")
            .unwrap();
        assert!(read_trace(&p).is_err());
    }
}
