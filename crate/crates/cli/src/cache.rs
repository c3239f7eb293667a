//! On-disk cache of reference solutions. Entries are keyed by a SHA-256 of
//! the instance fingerprint, the reference solver and its iteration count, so
//! any change to data or settings misses the cache.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};
use icpdps::dataio::{load_image, save_image, ImageBuffer};
use icpdps::harness::{compute_reference, Instance};
use icpdps::linalg::{DenseVector, PrimalDualPoint};
use sha2::{Digest, Sha256};

pub fn cache_key(inst: &Instance, iters: usize) -> String {
    let mut h = Sha256::new();
    h.update(inst.fingerprint_bytes());
    h.update(inst.config.problem.reference_solver().name().as_bytes());
    h.update((iters as u64).to_le_bytes());
    h.finalize()
        .iter()
        .take(12)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("ref-{key}.x.f64")),
        dir.join(format!("ref-{key}.y.f64")),
    )
}

/// Whether the reference came from disk or was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Cached,
    Computed,
}

pub fn reference(
    inst: &Instance,
    iters: usize,
    dir: &Path,
) -> Result<(PrimalDualPoint, Source, String)> {
    let key = cache_key(inst, iters);
    let (px, py) = paths(dir, &key);
    if px.exists() && py.exists() {
        let (x, y) = (load_image(&px)?, load_image(&py)?);
        ensure!(
            x.data.len() == inst.problem.primal_dim() && y.data.len() == inst.problem.dual_dim(),
            "cached reference {} has the wrong size",
            px.display()
        );
        return Ok((
            PrimalDualPoint::new(x.data.into(), y.data.into()),
            Source::Cached,
            key,
        ));
    }
    let u = compute_reference(inst, iters)?;
    std::fs::create_dir_all(dir)?;
    save_image(
        &px,
        &ImageBuffer::new(inst.config.n1, inst.config.n2, to_vec(&u.x))?,
    )?;
    save_image(&py, &ImageBuffer::new(1, u.y.len(), to_vec(&u.y))?)?;
    Ok((u, Source::Computed, key))
}

fn to_vec(v: &DenseVector) -> Vec<f64> {
    v.as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use icpdps::harness::{build_instance, DataConfig, ProblemKind};

    #[test]
    fn second_lookup_hits_the_cache_and_matches() {
        let inst = build_instance(&DataConfig::new(ProblemKind::Denoise, 16, 16), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, s1, k1) = reference(&inst, 50, dir.path()).unwrap();
        let (b, s2, k2) = reference(&inst, 50, dir.path()).unwrap();
        assert_eq!((s1, s2), (Source::Computed, Source::Cached));
        assert_eq!(k1, k2);
        assert_eq!(a, b);
        assert_ne!(cache_key(&inst, 51), k1);
        let mut other = inst.config.clone();
        other.seed = 2;
        assert_ne!(cache_key(&build_instance(&other, None).unwrap(), 50), k1);
    }
}
