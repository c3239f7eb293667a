//! Unitary 2-D DFT on row-major images, spiral sampling masks and the masked
//! Fourier operator.
//!
//! Complex spectra are carried as real vectors with two channels per frequency:
//! entry `2k` is the real part and `2k + 1` the imaginary part of frequency `k`,
//! frequencies ordered row-major like pixels.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::linalg::LinearOperator;

#[derive(Clone)]
pub struct Dft2 {
    n1: usize,
    n2: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dft2({}x{})", self.n1, self.n2)
    }
}

impl Dft2 {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::param("n1,n2", "image dimensions must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n1,
            n2,
            row_fwd: planner.plan_fft_forward(n2),
            row_inv: planner.plan_fft_inverse(n2),
            col_fwd: planner.plan_fft_forward(n1),
            col_inv: planner.plan_fft_inverse(n1),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (n1, n2) = (self.n1, self.n2);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut t = vec![Complex64::default(); n1 * n2];
        for r in 0..n1 {
            for c in 0..n2 {
                t[c * n1 + r] = buf[r * n2 + c];
            }
        }
        col.process(&mut t);
        let s = 1.0 / ((n1 * n2) as f64).sqrt();
        for r in 0..n1 {
            for c in 0..n2 {
                buf[r * n2 + c] = t[c * n1 + r] * s;
            }
        }
    }

    /// In-place unitary forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.transform(buf, false);
    }

    /// In-place unitary inverse transform.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.transform(buf, true);
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Real part of the inverse transform, written into `out`.
    pub fn inverse_real_into(&self, mut buf: Vec<Complex64>, out: &mut [f64]) {
        self.inverse_in_place(&mut buf);
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re;
        }
    }
}

pub fn to_channels(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_channels(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

/// The unitary DFT as a real operator `R^n -> R^{2n}`; its adjoint is the real
/// part of the inverse transform.
impl LinearOperator for Dft2 {
    fn domain_dim(&self) -> usize {
        self.len()
    }
    fn codomain_dim(&self) -> usize {
        2 * self.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let z = self.forward_real(x);
        for (o, c) in out.chunks_exact_mut(2).zip(&z) {
            o[0] = c.re;
            o[1] = c.im;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inverse_real_into(from_channels(y), out);
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Binary frequency sampling pattern over an `n1 x n2` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    n1: usize,
    n2: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(n1: usize, n2: usize, data: Vec<bool>) -> Result<Self> {
        check_len(n1 * n2, data.len())?;
        Ok(Self { n1, n2, data })
    }

    pub fn full(n1: usize, n2: usize) -> Self {
        Self {
            n1,
            n2,
            data: vec![true; n1 * n2],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    fn mirror(&self, idx: usize) -> usize {
        let (k1, k2) = (idx / self.n2, idx % self.n2);
        ((self.n1 - k1) % self.n1) * self.n2 + (self.n2 - k2) % self.n2
    }

    /// `m(k) = m(-k mod n)` for every frequency.
    pub fn is_hermitian(&self) -> bool {
        (0..self.data.len()).all(|i| self.data[i] == self.data[self.mirror(i)])
    }

    fn symmetrize(&mut self) {
        for i in 0..self.data.len() {
            if self.data[i] {
                let j = self.mirror(i);
                self.data[j] = true;
            }
        }
    }
}

/// Archimedean spiral `r = theta / (2 pi turns)` in frequency coordinates
/// normalised to `[-1, 1)` per axis, clipped to the unit disc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpiralParams {
    pub turns: f64,
    /// Full radial width of the sampled band, in normalised units.
    pub thickness: f64,
    /// Every frequency within this normalised radius is sampled.
    pub center_radius: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        Self {
            turns: 4.0,
            thickness: 0.04,
            center_radius: 0.08,
        }
    }
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

pub fn spiral_mask(n1: usize, n2: usize, params: SpiralParams) -> Result<Mask> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::param("n1,n2", "image dimensions must be positive"));
    }
    if !(params.turns > 0.0) {
        return Err(Error::param("turns", "must be positive"));
    }
    if !(params.thickness >= 0.0) || !(params.center_radius >= 0.0) {
        return Err(Error::param(
            "thickness",
            "thickness and radius must be non-negative",
        ));
    }
    let (h1, h2) = ((n1 as f64 / 2.0).max(1.0), (n2 as f64 / 2.0).max(1.0));
    let pitch = 2.0 * PI * params.turns;
    let mut data = vec![false; n1 * n2];
    for k1 in 0..n1 {
        let u = signed_freq(k1, n1) / h1;
        for k2 in 0..n2 {
            let v = signed_freq(k2, n2) / h2;
            let r = u.hypot(v);
            let hit = if r <= params.center_radius {
                true
            } else if r > 1.0 {
                false
            } else {
                let phi = v.atan2(u).rem_euclid(2.0 * PI);
                let j = ((r * pitch - phi) / (2.0 * PI)).round().max(0.0);
                [j - 1.0, j, j + 1.0]
                    .iter()
                    .filter(|&&j| j >= 0.0)
                    .map(|&j| (r - (phi + 2.0 * PI * j) / pitch).abs())
                    .fold(f64::INFINITY, f64::min)
                    <= params.thickness / 2.0
            };
            data[k1 * n2 + k2] = hit;
        }
    }
    let mut mask = Mask { n1, n2, data };
    mask.symmetrize();
    Ok(mask)
}

/// `T = S F`: the unitary DFT followed by zeroing of unsampled frequencies.
/// Measurements keep the full two-channel layout with zeros off the mask.
#[derive(Clone, Debug)]
pub struct MaskedFourier {
    dft: Dft2,
    mask: Mask,
}

impl MaskedFourier {
    pub fn new(mask: Mask) -> Result<Self> {
        if !mask.is_hermitian() {
            return Err(Error::NonHermitianMask);
        }
        let (n1, n2) = mask.shape();
        Ok(Self {
            dft: Dft2::new(n1, n2)?,
            mask,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn dft(&self) -> &Dft2 {
        &self.dft
    }
}

impl LinearOperator for MaskedFourier {
    fn domain_dim(&self) -> usize {
        self.dft.len()
    }
    fn codomain_dim(&self) -> usize {
        2 * self.dft.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let z = self.dft.forward_real(x);
        for ((o, c), &m) in out.chunks_exact_mut(2).zip(&z).zip(self.mask.as_slice()) {
            if m {
                o[0] = c.re;
                o[1] = c.im;
            } else {
                o[0] = 0.0;
                o[1] = 0.0;
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let buf = y
            .chunks_exact(2)
            .zip(self.mask.as_slice())
            .map(|(p, &m)| {
                if m {
                    Complex64::new(p[0], p[1])
                } else {
                    Complex64::default()
                }
            })
            .collect();
        self.dft.inverse_real_into(buf, out);
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Zero-filled reconstruction `Re F^{-1} z` of masked measurements.
pub fn zero_filling(z_freq: &[f64], dft: &Dft2) -> Result<Vec<f64>> {
    check_len(2 * dft.len(), z_freq.len())?;
    let mut out = vec![0.0; dft.len()];
    dft.inverse_real_into(from_channels(z_freq), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::adjoint_residual;

    fn naive_dft(x: &[f64], n1: usize, n2: usize) -> Vec<Complex64> {
        let s = 1.0 / ((n1 * n2) as f64).sqrt();
        let mut out = vec![Complex64::default(); n1 * n2];
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let mut acc = Complex64::default();
                for r in 0..n1 {
                    for c in 0..n2 {
                        let a =
                            -2.0 * PI * ((k1 * r) as f64 / n1 as f64 + (k2 * c) as f64 / n2 as f64);
                        acc += Complex64::from_polar(x[r * n2 + c], a);
                    }
                }
                out[k1 * n2 + k2] = acc * s;
            }
        }
        out
    }

    #[test]
    fn matches_direct_summation() {
        let (n1, n2) = (5, 6);
        let x: Vec<f64> = (0..n1 * n2).map(|i| ((i * 7) % 11) as f64 - 4.0).collect();
        let fast = Dft2::new(n1, n2).unwrap().forward_real(&x);
        let slow = naive_dft(&x, n1, n2);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_round_trip() {
        let dft = Dft2::new(8, 4).unwrap();
        let x: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let z = dft.forward_real(&x);
        let energy: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let xe: f64 = x.iter().map(|v| v * v).sum();
        assert!((energy - xe).abs() < 1e-12 * xe);
        let mut back = vec![0.0; 32];
        dft.inverse_real_into(z, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn spiral_is_hermitian_and_sparse() {
        for (n1, n2) in [(32, 32), (96, 64), (31, 17)] {
            let m = spiral_mask(n1, n2, SpiralParams::default()).unwrap();
            assert!(m.is_hermitian());
            assert!(
                m.fraction() > 0.05 && m.fraction() < 0.4,
                "{}",
                m.fraction()
            );
            assert!(m.as_slice()[0], "DC is always sampled");
        }
    }

    #[test]
    fn thick_spiral_covers_the_disc() {
        let p = SpiralParams {
            turns: 4.0,
            thickness: 0.5 + 1e-9,
            center_radius: 0.0,
        };
        let (n1, n2) = (16, 12);
        let m = spiral_mask(n1, n2, p).unwrap();
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let r = (signed_freq(k1, n1) / 8.0).hypot(signed_freq(k2, n2) / 6.0);
                if r <= 1.0 {
                    assert!(m.as_slice()[k1 * n2 + k2]);
                }
            }
        }
    }

    #[test]
    fn non_hermitian_mask_is_rejected() {
        let mut data = vec![false; 16];
        data[1] = true;
        let m = Mask::new(4, 4, data).unwrap();
        assert!(matches!(
            MaskedFourier::new(m),
            Err(Error::NonHermitianMask)
        ));
    }

    #[test]
    fn masked_fourier_adjoint() {
        let m = spiral_mask(12, 10, SpiralParams::default()).unwrap();
        let t = MaskedFourier::new(m).unwrap();
        assert!(adjoint_residual(&t, 10, 4) < 1e-12);
        let f = Dft2::new(12, 10).unwrap();
        assert!(adjoint_residual(&f, 10, 5) < 1e-12);
    }
}
