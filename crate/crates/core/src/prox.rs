//! Proximal maps of the data terms and regularisers, with function values,
//! convex conjugates and minimal-norm subgradients for gap evaluation.
//!
//! Values outside a function's domain are `f64::INFINITY`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::fourier::{from_channels, Mask, MaskedFourier};
use crate::linalg::{ops, DenseVector, LinearOperator};

/// Relative slack for indicator-membership tests after a projection.
const FEASIBILITY_TOL: f64 = 1e-9;

pub trait ProxOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// `out = argmin_u f(u) + |u - v|^2 / (2 step)`.
    fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]);

    /// Strong-convexity modulus of the function.
    fn convexity_factor(&self) -> f64 {
        0.0
    }

    fn evaluate(&self, v: &DenseVector, step: f64) -> Result<DenseVector> {
        check_len(self.dim(), v.len())?;
        check_step(step)?;
        let mut out = DenseVector::zeros(v.len());
        self.prox_into(v, step, &mut out);
        Ok(out)
    }
}

pub trait ConvexFunction: ProxOperator {
    fn value(&self, x: &[f64]) -> f64;

    /// Fenchel conjugate `f*(w) = sup_x <w, x> - f(x)`.
    fn conjugate(&self, w: &[f64]) -> f64;

    /// Minimal-norm element of the subdifferential, `None` off the domain.
    fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>>;

    /// Gradient of the conjugate, when the conjugate is differentiable.
    fn conjugate_gradient(&self, _w: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

pub type FunctionHandle = Arc<dyn ConvexFunction>;

fn check_step(step: f64) -> Result<()> {
    if step >= 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "step",
            format!("must be finite and non-negative, got {step}"),
        ))
    }
}

/// `G(x) = |x - z|^2 / 2`.
#[derive(Clone, Debug)]
pub struct QuadraticFidelity {
    pub z: Vec<f64>,
}

impl ProxOperator for QuadraticFidelity {
    fn dim(&self) -> usize {
        self.z.len()
    }
    fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        let d = 1.0 / (1.0 + step);
        for ((o, vi), zi) in out.iter_mut().zip(v).zip(&self.z) {
            *o = (vi + step * zi) * d;
        }
    }
    fn convexity_factor(&self) -> f64 {
        1.0
    }
}

impl ConvexFunction for QuadraticFidelity {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * ops::dist_sq(x, &self.z)
    }
    fn conjugate(&self, w: &[f64]) -> f64 {
        0.5 * ops::norm_sq(w) + ops::dot(w, &self.z)
    }
    fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.z).map(|(a, b)| a - b).collect())
    }
    fn conjugate_gradient(&self, w: &[f64]) -> Option<Vec<f64>> {
        Some(w.iter().zip(&self.z).map(|(a, b)| a + b).collect())
    }
}

/// `G(x) = |z - S F x|^2 / 2` for a Hermitian-symmetric sampling mask `S`.
/// `z_freq` is stored in two-channel layout with zeros off the mask.
#[derive(Clone, Debug)]
pub struct FourierFidelity {
    op: MaskedFourier,
    z: Vec<Complex64>,
    z_image: Vec<f64>,
}

impl FourierFidelity {
    pub fn new(mask: Mask, z_freq: &[f64]) -> Result<Self> {
        let op = MaskedFourier::new(mask)?;
        check_len(op.codomain_dim(), z_freq.len())?;
        let z: Vec<Complex64> = from_channels(z_freq)
            .into_iter()
            .zip(op.mask().as_slice())
            .map(|(c, &m)| if m { c } else { Complex64::default() })
            .collect();
        let mut z_image = vec![0.0; op.domain_dim()];
        op.dft().inverse_real_into(z.clone(), &mut z_image);
        Ok(Self { op, z, z_image })
    }

    pub fn operator(&self) -> &MaskedFourier {
        &self.op
    }
}

impl ProxOperator for FourierFidelity {
    fn dim(&self) -> usize {
        self.op.domain_dim()
    }
    fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        let dft = self.op.dft();
        let mut vh = dft.forward_real(v);
        let d = 1.0 / (1.0 + step);
        for ((c, zk), &m) in vh.iter_mut().zip(&self.z).zip(self.op.mask().as_slice()) {
            if m {
                *c = (*c + zk * step) * d;
            }
        }
        dft.inverse_real_into(vh, out);
    }
}

impl ConvexFunction for FourierFidelity {
    fn value(&self, x: &[f64]) -> f64 {
        let xh = self.op.dft().forward_real(x);
        0.5 * xh
            .iter()
            .zip(&self.z)
            .zip(self.op.mask().as_slice())
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| (a - b).norm_sqr())
            .sum::<f64>()
    }

    /// Finite only when `w` has no energy at unsampled frequencies.
    fn conjugate(&self, w: &[f64]) -> f64 {
        let wh = self.op.dft().forward_real(w);
        let (mut on, mut off) = (0.0, 0.0);
        for (c, &m) in wh.iter().zip(self.op.mask().as_slice()) {
            if m {
                on += c.norm_sqr();
            } else {
                off += c.norm_sqr();
            }
        }
        if off.sqrt() > FEASIBILITY_TOL * (on + off).sqrt().max(f64::MIN_POSITIVE) {
            return f64::INFINITY;
        }
        0.5 * on + ops::dot(w, &self.z_image)
    }

    fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut r = vec![0.0; self.op.codomain_dim()];
        self.op.apply_into(x, &mut r);
        for (ri, zk) in r.chunks_exact_mut(2).zip(&self.z) {
            ri[0] -= zk.re;
            ri[1] -= zk.im;
        }
        let mut g = vec![0.0; self.dim()];
        self.op.adjoint_into(&r, &mut g);
        Some(g)
    }
}

/// Indicator of `{y : |y_p|_2 <= radius for every pixel p}` with two interleaved
/// channels per pixel. Its conjugate is `radius * |.|_{2,1}`.
#[derive(Clone, Debug)]
pub struct Ball21Indicator {
    pub radius: f64,
    pub pixels: usize,
}

impl ProxOperator for Ball21Indicator {
    fn dim(&self) -> usize {
        2 * self.pixels
    }
    fn prox_into(&self, v: &[f64], _step: f64, out: &mut [f64]) {
        for (o, p) in out.chunks_exact_mut(2).zip(v.chunks_exact(2)) {
            let n = p[0].hypot(p[1]);
            let s = if n > self.radius {
                self.radius / n
            } else {
                1.0
            };
            o[0] = p[0] * s;
            o[1] = p[1] * s;
        }
    }
}

impl ConvexFunction for Ball21Indicator {
    fn value(&self, y: &[f64]) -> f64 {
        let limit = self.radius * (1.0 + FEASIBILITY_TOL) + f64::MIN_POSITIVE;
        if y.chunks_exact(2).all(|p| p[0].hypot(p[1]) <= limit) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn conjugate(&self, g: &[f64]) -> f64 {
        self.radius * g.chunks_exact(2).map(|p| p[0].hypot(p[1])).sum::<f64>()
    }
    fn subgradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        (self.value(y) == 0.0).then(|| vec![0.0; y.len()])
    }
}

/// Indicator of the box `[lo, hi]^n`.
#[derive(Clone, Debug)]
pub struct BoxIndicator {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl ProxOperator for BoxIndicator {
    fn dim(&self) -> usize {
        self.n
    }
    fn prox_into(&self, v: &[f64], _step: f64, out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi.clamp(self.lo, self.hi);
        }
    }
}

impl ConvexFunction for BoxIndicator {
    fn value(&self, x: &[f64]) -> f64 {
        let slack = FEASIBILITY_TOL * (self.hi - self.lo).abs().max(1.0);
        if x.iter()
            .all(|&v| v >= self.lo - slack && v <= self.hi + slack)
        {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn conjugate(&self, w: &[f64]) -> f64 {
        w.iter().map(|&wi| (self.lo * wi).max(self.hi * wi)).sum()
    }
    fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (self.value(x) == 0.0).then(|| vec![0.0; x.len()])
    }
}

/// Conjugate of the Poisson log-likelihood `g(t) = t - b log(t + c)`:
/// `g*(p) = -b + c (1 - p) + b log(b / (1 - p))` for `p < 1`, summed over entries.
#[derive(Clone, Debug)]
pub struct KlConjugate {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl KlConjugate {
    pub fn new(b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        check_len(b.len(), c.len())?;
        if b.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::param("b", "counts must be non-negative"));
        }
        if c.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::param("c", "background must be positive"));
        }
        Ok(Self { b, c })
    }
}

/// Positive root of `t^2 - a t - s b = 0` evaluated without cancellation.
#[inline]
fn kl_root(a: f64, sb: f64) -> f64 {
    let disc = (a * a + 4.0 * sb).sqrt();
    if a >= 0.0 {
        0.5 * (a + disc)
    } else {
        2.0 * sb / (disc - a)
    }
}

impl ProxOperator for KlConjugate {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        for (((o, &p), &b), &c) in out.iter_mut().zip(v).zip(&self.b).zip(&self.c) {
            *o = 1.0 - kl_root(1.0 - p - step * c, step * b);
        }
    }
}

impl ConvexFunction for KlConjugate {
    fn value(&self, p: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&p, &b), &c) in p.iter().zip(&self.b).zip(&self.c) {
            let t = 1.0 - p;
            if b == 0.0 {
                if t < 0.0 {
                    return f64::INFINITY;
                }
                acc += c * t;
            } else {
                if t <= 0.0 {
                    return f64::INFINITY;
                }
                acc += -b + c * t + b * (b / t).ln();
            }
        }
        acc
    }
    fn conjugate(&self, t: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&t, &b), &c) in t.iter().zip(&self.b).zip(&self.c) {
            let s = t + c;
            if b == 0.0 {
                if s < 0.0 {
                    return f64::INFINITY;
                }
                acc += t;
            } else {
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                acc += t - b * s.ln();
            }
        }
        acc
    }
    fn subgradient(&self, p: &[f64]) -> Option<Vec<f64>> {
        let mut g = Vec::with_capacity(p.len());
        for ((&p, &b), &c) in p.iter().zip(&self.b).zip(&self.c) {
            let t = 1.0 - p;
            if t <= 0.0 {
                return None;
            }
            g.push(-c + b / t);
        }
        Some(g)
    }
}

/// Separable sum `f(u) = first(u[..split]) + second(u[split..])`.
#[derive(Clone)]
pub struct Stacked {
    pub first: FunctionHandle,
    pub second: FunctionHandle,
}

impl Stacked {
    fn split(&self) -> usize {
        self.first.dim()
    }
}

impl ProxOperator for Stacked {
    fn dim(&self) -> usize {
        self.first.dim() + self.second.dim()
    }
    fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        let k = self.split();
        let (o1, o2) = out.split_at_mut(k);
        self.first.prox_into(&v[..k], step, o1);
        self.second.prox_into(&v[k..], step, o2);
    }
    fn convexity_factor(&self) -> f64 {
        self.first
            .convexity_factor()
            .min(self.second.convexity_factor())
    }
}

impl ConvexFunction for Stacked {
    fn value(&self, u: &[f64]) -> f64 {
        let k = self.split();
        self.first.value(&u[..k]) + self.second.value(&u[k..])
    }
    fn conjugate(&self, w: &[f64]) -> f64 {
        let k = self.split();
        self.first.conjugate(&w[..k]) + self.second.conjugate(&w[k..])
    }
    fn subgradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        let k = self.split();
        let mut g = self.first.subgradient(&u[..k])?;
        g.extend(self.second.subgradient(&u[k..])?);
        Some(g)
    }
}

pub fn prox_quadratic_identity(v: &DenseVector, tau: f64, z: &DenseVector) -> Result<DenseVector> {
    QuadraticFidelity { z: z.to_vec() }.evaluate(v, tau)
}

pub fn prox_quadratic_fourier(
    v: &DenseVector,
    tau: f64,
    mask: &Mask,
    z_freq: &DenseVector,
) -> Result<DenseVector> {
    FourierFidelity::new(mask.clone(), z_freq)?.evaluate(v, tau)
}

pub fn project_dual_ball21(y: &DenseVector, beta: f64) -> Result<DenseVector> {
    if !(beta >= 0.0) {
        return Err(Error::param("beta", "radius must be non-negative"));
    }
    if !y.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: y.len() + 1,
            found: y.len(),
        });
    }
    Ball21Indicator {
        radius: beta,
        pixels: y.len() / 2,
    }
    .evaluate(y, 0.0)
}

pub fn project_box(v: &DenseVector, lo: f64, hi: f64) -> Result<DenseVector> {
    if !(lo <= hi) {
        return Err(Error::param("lo,hi", "empty box"));
    }
    BoxIndicator { lo, hi, n: v.len() }.evaluate(v, 0.0)
}

pub fn prox_kl_conjugate(
    phi: &DenseVector,
    sigma: f64,
    b: &DenseVector,
    c: &DenseVector,
) -> Result<DenseVector> {
    KlConjugate::new(b.to_vec(), c.to_vec())?.evaluate(phi, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{spiral_mask, Dft2, SpiralParams};
    use proptest::prelude::*;

    /// Golden-section minimiser of a unimodal function on `[lo, hi]`.
    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quadratic_prox_zero_step_is_identity() {
        let v = DenseVector::from_vec(vec![1.0, -2.0]);
        let z = DenseVector::from_vec(vec![5.0, 5.0]);
        assert_eq!(prox_quadratic_identity(&v, 0.0, &z).unwrap(), v);
        let p = prox_quadratic_identity(&v, 1.0, &z).unwrap();
        assert_eq!(p.as_slice(), &[3.0, 1.5]);
    }

    #[test]
    fn negative_step_is_rejected() {
        let v = DenseVector::zeros(2);
        assert!(prox_quadratic_identity(&v, -1.0, &v).is_err());
    }

    #[test]
    fn ball_projection_examples() {
        let y = DenseVector::from_vec(vec![3.0, 4.0, 0.1, 0.0]);
        let p = project_dual_ball21(&y, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(&p[2..], &[0.1, 0.0]);
        let z = project_dual_ball21(&y, 0.0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_projection_clamps() {
        let v = DenseVector::from_vec(vec![-1.0, 0.5, 2.0]);
        assert_eq!(
            project_box(&v, 0.0, 1.0).unwrap().as_slice(),
            &[0.0, 0.5, 1.0]
        );
        assert!(project_box(&v, 1.0, 0.0).is_err());
    }

    #[test]
    fn kl_prox_matches_golden_section() {
        let kl = KlConjugate::new(vec![0.0, 1.0, 7.5, 1e3], vec![1.0, 1.0, 0.5, 2.0]).unwrap();
        for &sigma in &[1e-3, 0.1, 1.0, 30.0] {
            for &phi in &[-50.0, -1.0, 0.0, 0.5, 0.99, 3.0] {
                let v = vec![phi; 4];
                let mut out = vec![0.0; 4];
                kl.prox_into(&v, sigma, &mut out);
                for (&o, (&b, &c)) in out.iter().zip(kl.b.iter().zip(&kl.c)) {
                    let obj = |p: f64| {
                        let g = if b == 0.0 {
                            c * (1.0 - p)
                        } else {
                            -b + c * (1.0 - p) + b * (b / (1.0 - p)).ln()
                        };
                        sigma * g + 0.5 * (p - phi) * (p - phi)
                    };
                    let a = 1.0 - phi - sigma * c;
                    let lo = -(2.0 * a.abs() + 2.0 * (sigma * b).sqrt() + 1.0);
                    let hi = if b == 0.0 { 1.0 } else { 1.0 - 1e-14 };
                    let oracle = golden(obj, lo, hi);
                    assert!(
                        (o - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
                        "b={b} c={c} sigma={sigma} phi={phi}: {o} vs {oracle}"
                    );
                    assert!(o < 1.0 || b == 0.0);
                }
            }
        }
    }

    #[test]
    fn kl_conjugate_pair_satisfies_fenchel_young() {
        let kl = KlConjugate::new(vec![2.0, 0.5], vec![1.0, 1.0]).unwrap();
        let p = [0.3, -2.0];
        let g = kl.subgradient(&p).unwrap();
        let lhs = kl.value(&p) + kl.conjugate(&g);
        let rhs = ops::dot(&p, &g);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn fourier_prox_full_mask_matches_identity_case() {
        let (n1, n2) = (6, 4);
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).cos() * 10.0).collect();
        let dft = Dft2::new(n1, n2).unwrap();
        let z = crate::fourier::to_channels(&dft.forward_real(&x));
        let v = DenseVector::from_vec((0..24).map(|i| i as f64).collect());
        let a = prox_quadratic_fourier(&v, 0.7, &Mask::full(n1, n2), &z.into()).unwrap();
        let b = prox_quadratic_identity(&v, 0.7, &x.into()).unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_prox_output_is_real_and_optimal() {
        let (n1, n2) = (10, 8);
        let mask = spiral_mask(n1, n2, SpiralParams::default()).unwrap();
        let x: Vec<f64> = (0..80).map(|i| ((i * 13) % 7) as f64).collect();
        let dft = Dft2::new(n1, n2).unwrap();
        let mut z = crate::fourier::to_channels(&dft.forward_real(&x));
        for (k, &m) in mask.as_slice().iter().enumerate() {
            if !m {
                z[2 * k] = 0.0;
                z[2 * k + 1] = 0.0;
            }
        }
        let g = FourierFidelity::new(mask, &z).unwrap();
        let v: Vec<f64> = (0..80).map(|i| (i as f64).sin()).collect();
        let tau = 0.8;
        let mut p = vec![0.0; 80];
        g.prox_into(&v, tau, &mut p);
        // Optimality: (p - v) / tau + grad G(p) = 0.
        let grad = g.subgradient(&p).unwrap();
        for i in 0..80 {
            assert!(((p[i] - v[i]) / tau + grad[i]).abs() < 1e-11);
        }
        // The imaginary residue of the inverse transform is negligible.
        let mut vh = dft.forward_real(&p);
        dft.inverse_in_place(&mut vh);
        assert!(vh.iter().all(|c| c.im.abs() < 1e-10));
    }

    #[test]
    fn fourier_conjugate_off_mask_is_infinite() {
        let (n1, n2) = (8, 8);
        let mask = spiral_mask(n1, n2, SpiralParams::default()).unwrap();
        assert!(mask.fraction() < 1.0);
        let g = FourierFidelity::new(mask.clone(), &vec![0.0; 128]).unwrap();
        let w: Vec<f64> = (0..64).map(|i| ((i * 5) % 3) as f64).collect();
        assert_eq!(g.conjugate(&w), f64::INFINITY);
        // Band-limited w gives the finite closed form |w|^2 / 2 when z = 0.
        let t = MaskedFourier::new(mask).unwrap();
        let wb = t.adjoint(&t.apply(&w.into()).unwrap()).unwrap();
        let val = g.conjugate(&wb);
        assert!((val - 0.5 * wb.norm_sq()).abs() < 1e-10 * wb.norm_sq());
    }

    proptest! {
        #[test]
        fn ball_projection_is_idempotent_and_nonexpansive(
            a in prop::collection::vec(-10.0f64..10.0, 8),
            b in prop::collection::vec(-10.0f64..10.0, 8),
            beta in 0.0f64..3.0,
        ) {
            let a = DenseVector::from_vec(a);
            let b = DenseVector::from_vec(b);
            let pa = project_dual_ball21(&a, beta).unwrap();
            let pb = project_dual_ball21(&b, beta).unwrap();
            let ppa = project_dual_ball21(&pa, beta).unwrap();
            for (u, v) in pa.iter().zip(ppa.iter()) {
                prop_assert!((u - v).abs() <= 1e-15 * (1.0 + u.abs()));
            }
            for p in pa.chunks_exact(2) {
                prop_assert!(p[0].hypot(p[1]) <= beta * (1.0 + 1e-12));
            }
            prop_assert!(pa.dist_sq(&pb).unwrap() <= a.dist_sq(&b).unwrap() * (1.0 + 1e-12) + 1e-24);
        }

        #[test]
        fn prox_is_firmly_nonexpansive(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            tau in 0.0f64..10.0,
        ) {
            let f = QuadraticFidelity { z: vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0] };
            let kl = KlConjugate::new(vec![1.0, 0.0, 3.0, 2.0, 5.0, 0.1], vec![1.0; 6]).unwrap();
            for op in [&f as &dyn ProxOperator, &kl] {
                let mut pa = vec![0.0; 6];
                let mut pb = vec![0.0; 6];
                op.prox_into(&a, tau, &mut pa);
                op.prox_into(&b, tau, &mut pb);
                let d: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
                let e: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                prop_assert!(ops::norm_sq(&d) <= ops::dot(&d, &e) + 1e-9);
            }
        }

        #[test]
        fn box_projection_stays_inside(v in prop::collection::vec(-3.0f64..3.0, 5)) {
            let p = project_box(&DenseVector::from_vec(v), 0.0, 1.0).unwrap();
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
