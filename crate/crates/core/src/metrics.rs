//! Duality gaps, the final-metric certificate and decibel reporting.

use crate::error::{check_len, Error, Result};
use crate::linalg::{ops, DenseVector, PrimalDualPoint};
use crate::problems::SaddleProblem;
use crate::schedules::StepState;
use crate::solvers::CertificateView;

/// Lowest reported decibel value; exact zeros map here.
pub const DB_FLOOR: f64 = -300.0;

fn check_point(u: &PrimalDualPoint, p: &SaddleProblem) -> Result<()> {
    check_len(p.primal_dim(), u.x.len())?;
    check_len(p.dual_dim(), u.y.len())
}

fn apply(p: &SaddleProblem, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.dual_dim()];
    p.op.apply_into(x, &mut out);
    out
}

fn adjoint(p: &SaddleProblem, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.primal_dim()];
    p.op.adjoint_into(y, &mut out);
    out
}

/// `[G(x) + <y*, K x> - F*(y*)] - [G(x*) + <y, K x*> - F*(y)]`.
/// Non-negative whenever `u*` is a saddle point.
pub fn lagrangian_gap(
    u: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    p: &SaddleProblem,
) -> Result<f64> {
    check_point(u, p)?;
    check_point(u_star, p)?;
    let kx = apply(p, &u.x);
    let kxs = apply(p, &u_star.x);
    let a = p.primal.value(&u.x) + ops::dot(&u_star.y, &kx) - p.dual.value(&u_star.y);
    let b = p.primal.value(&u_star.x) + ops::dot(&u.y, &kxs) - p.dual.value(&u.y);
    Ok(a - b)
}

/// Lagrangian gap with `G` and `F*` reduced by `gamma/2 |x - x*|^2` and
/// `rho/2 |y - y*|^2`.
pub fn adjusted_gap(
    u: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    p: &SaddleProblem,
    gamma: f64,
    rho: f64,
) -> Result<f64> {
    let gap = lagrangian_gap(u, u_star, p)?;
    Ok(gap - 0.5 * gamma * u.x.dist_sq(&u_star.x)? - 0.5 * rho * u.y.dist_sq(&u_star.y)?)
}

/// `G(x) + F(K x) + G*(-K* y) + F*(y)`; `+inf` outside the domains.
pub fn true_gap(u: &PrimalDualPoint, p: &SaddleProblem) -> Result<f64> {
    check_point(u, p)?;
    let kx = apply(p, &u.x);
    let mut kty = adjoint(p, &u.y);
    ops::scale(-1.0, &mut kty);
    Ok(
        p.primal.value(&u.x)
            + p.dual.conjugate(&kx)
            + p.primal.conjugate(&kty)
            + p.dual.value(&u.y),
    )
}

/// `w0 = s + rho (y* - y0)` with `s` the minimal-norm subgradient of `F*` at `y0`:
/// an element of the subdifferential of the `rho`-reduced dual term at `y0`.
pub fn initial_dual_subgradient(
    u0: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    p: &SaddleProblem,
    rho: f64,
) -> Result<DenseVector> {
    check_point(u0, p)?;
    let mut s = p.dual.subgradient(&u0.y).ok_or_else(|| {
        Error::param("u0", "the initial dual point lies outside the domain of F*")
    })?;
    for ((si, ys), y0) in s.iter_mut().zip(u_star.y.iter()).zip(u0.y.iter()) {
        *si += rho * (ys - y0);
    }
    Ok(s.into())
}

/// `1/2 |z0 - u*|^2` in the initial weighted metric, with the off-diagonal block
/// symmetrised: `lambda0^2 phi0 |xi|^2 + mu1^2 psi1 |v|^2 - 2 lambda0 phi0 tau0 <K xi, v>`, halved.
pub fn initial_metric_form(
    u0: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    s0: &StepState,
    p: &SaddleProblem,
) -> Result<f64> {
    let (xi, v, kxi) = initial_offsets(u0, u_star, p)?;
    let (phi, psi) = (s0.phi(), s0.psi());
    let cross = ops::dot(&kxi, &v);
    Ok(0.5
        * (s0.lambda * s0.lambda * phi * ops::norm_sq(&xi)
            + s0.mu * s0.mu * psi * ops::norm_sq(&v)
            - 2.0 * s0.lambda * phi * s0.tau * cross))
}

/// The same quadratic form expanded block by block from the un-symmetrised
/// metric; equal to [`initial_metric_form`] when the schedule is consistent.
pub fn initial_metric_form_entrywise(
    u0: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    s0: &StepState,
    p: &SaddleProblem,
) -> Result<f64> {
    let (xi, v, kxi) = initial_offsets(u0, u_star, p)?;
    let (phi, psi) = (s0.phi(), s0.psi());
    let cross = ops::dot(&kxi, &v);
    // upper block: lambda0 phi0 (-tau0 / mu1) K* mu1; lower block: mu1 psi1 (-sigma1 omega0 / lambda0) K lambda0
    let upper = -s0.lambda * phi * s0.tau / s0.mu * s0.mu;
    let lower = -s0.mu * psi * s0.sigma * s0.omega / s0.lambda * s0.lambda;
    Ok(0.5
        * (s0.lambda * s0.lambda * phi * ops::norm_sq(&xi)
            + s0.mu * s0.mu * psi * ops::norm_sq(&v)
            + (upper + lower) * cross))
}

fn initial_offsets(
    u0: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    p: &SaddleProblem,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_point(u0, p)?;
    check_point(u_star, p)?;
    let xi: Vec<f64> =
        u0.x.iter()
            .zip(u_star.x.iter())
            .map(|(a, b)| a - b)
            .collect();
    let v: Vec<f64> =
        u0.y.iter()
            .zip(u_star.y.iter())
            .map(|(a, b)| a - b)
            .collect();
    let kxi = apply(p, &xi);
    Ok((xi, v, kxi))
}

/// Right-hand side of the final-metric bound:
/// the initial metric form plus `psi0 sigma0 <w0 - K x*, y0 - y*>`.
pub fn compute_c0(
    u0: &PrimalDualPoint,
    u_star: &PrimalDualPoint,
    s0: &StepState,
    p: &SaddleProblem,
    w0: &DenseVector,
) -> Result<f64> {
    check_len(p.dual_dim(), w0.len())?;
    let q = initial_metric_form(u0, u_star, s0, p)?;
    let kxs = apply(p, &u_star.x);
    let lin: f64 = w0
        .iter()
        .zip(&kxs)
        .zip(u0.y.iter().zip(u_star.y.iter()))
        .map(|((w, k), (a, b))| (w - k) * (a - b))
        .sum();
    Ok(q + s0.psi_prev() * s0.sigma_prev * lin)
}

/// Everything fixed at the start of a run that the certificate needs.
#[derive(Clone, Debug)]
pub struct CertificateContext {
    pub u_star: PrimalDualPoint,
    pub c0: f64,
    pub delta: f64,
}

/// `delta phi_N lambda_N^2 / 2 |zeta - x*|^2 + delta psi_{N+1} mu_{N+1}^2 / 2 |eta - y*|^2
///  + phi_{N-1} tau_{N-1} * adjusted_gap(u^N)`; bounded by `C0`.
pub fn certificate_lhs(
    view: &CertificateView<'_>,
    ctx: &CertificateContext,
    p: &SaddleProblem,
) -> Result<f64> {
    let (cur, prev) = (view.cur, view.prev);
    let u = PrimalDualPoint::new(view.x.clone(), view.y.clone());
    let gap = adjusted_gap(&u, &ctx.u_star, p, cur.gamma, cur.rho)?;
    let dz = view.zeta.dist_sq(&ctx.u_star.x)?;
    let de = view.eta.dist_sq(&ctx.u_star.y)?;
    Ok(0.5 * ctx.delta * cur.phi() * cur.lambda * cur.lambda * dz
        + 0.5 * ctx.delta * cur.psi() * cur.mu * cur.mu * de
        + prev.phi() * prev.tau * gap)
}

pub fn to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        DB_FLOOR
    } else {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbMetrics {
    /// `10 log10(|x - x*|^2 / |x*|^2)`
    pub target_db: f64,
    /// `10 log10(gap^2 / gap0^2)`
    pub gap_db: f64,
}

pub fn gap_db(gap0: f64, gap: f64) -> Result<f64> {
    if gap0 == 0.0 || !gap0.is_finite() {
        return Err(Error::param(
            "gap0",
            format!("initial gap must be finite and non-zero, got {gap0}"),
        ));
    }
    if gap.is_nan() {
        return Err(Error::param("gap", "gap is NaN"));
    }
    Ok(to_db((gap / gap0) * (gap / gap0)))
}

pub fn target_db(x: &DenseVector, x_star: &DenseVector) -> Result<f64> {
    let denom = x_star.norm_sq();
    if denom == 0.0 {
        return Err(Error::param("x_star", "reference solution is zero"));
    }
    Ok(to_db(x.dist_sq(x_star)? / denom))
}

pub fn db_metrics(x: &DenseVector, x_star: &DenseVector, gap0: f64, gap: f64) -> Result<DbMetrics> {
    Ok(DbMetrics {
        target_db: target_db(x, x_star)?,
        gap_db: gap_db(gap0, gap)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_denoise_problem;

    #[test]
    fn db_values() {
        assert!((gap_db(2.0, 0.2).unwrap() + 20.0).abs() < 1e-12);
        assert_eq!(gap_db(2.0, 0.0).unwrap(), DB_FLOOR);
        assert!(gap_db(0.0, 1.0).is_err());
        let xs = DenseVector::from_vec(vec![3.0, 4.0]);
        let x = DenseVector::from_vec(vec![3.0, 4.5]);
        assert!((target_db(&x, &xs).unwrap() - 10.0 * (0.25f64 / 25.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn gaps_vanish_at_a_saddle_point() {
        let p = make_denoise_problem(&[5.0; 12], 3, 4, 1.0).unwrap();
        let u = PrimalDualPoint::new(DenseVector::filled(12, 5.0), DenseVector::zeros(24));
        assert!(true_gap(&u, &p).unwrap().abs() < 1e-12);
        assert!(lagrangian_gap(&u, &u, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn true_gap_dominates_lagrangian_gap() {
        let z: Vec<f64> = (0..12).map(|i| (i * i % 7) as f64).collect();
        let p = make_denoise_problem(&z, 3, 4, 0.3).unwrap();
        let u = PrimalDualPoint::new(DenseVector::filled(12, 1.0), DenseVector::filled(24, 0.1));
        let v = PrimalDualPoint::new(
            DenseVector::from_vec(z.clone()),
            DenseVector::filled(24, -0.05),
        );
        assert!(true_gap(&u, &p).unwrap() >= lagrangian_gap(&u, &v, &p).unwrap() - 1e-12);
        let adj = adjusted_gap(&u, &v, &p, 1.0, 0.0).unwrap();
        let lag = lagrangian_gap(&u, &v, &p).unwrap();
        assert!((lag - adj - 0.5 * u.x.dist_sq(&v.x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_dual_gives_infinite_gap() {
        let p = make_denoise_problem(&[0.0; 4], 2, 2, 0.1).unwrap();
        let u = PrimalDualPoint::new(DenseVector::zeros(4), DenseVector::filled(8, 1.0));
        assert_eq!(true_gap(&u, &p).unwrap(), f64::INFINITY);
    }
}
