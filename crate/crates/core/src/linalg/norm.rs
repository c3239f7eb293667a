use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ops, LinearOperator};

pub const NORM_ITERATIONS: usize = 100;

fn random_unit(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = ops::norm(&v);
    if n > 0.0 {
        ops::scale(1.0 / n, &mut v);
    }
    v
}

/// Power iteration on `K*K`. Returns the estimate `‖K v_k‖` after every iteration;
/// the sequence is non-decreasing and bounded by `‖K‖`.
pub fn power_iteration(op: &dyn LinearOperator, iters: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(op.domain_dim(), &mut rng);
    let mut w = vec![0.0; op.codomain_dim()];
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        op.apply_into(&v, &mut w);
        let est = ops::norm(&w);
        trace.push(est);
        if est == 0.0 {
            break;
        }
        op.adjoint_into(&w, &mut v);
        let n = ops::norm(&v);
        if n == 0.0 {
            break;
        }
        ops::scale(1.0 / n, &mut v);
    }
    trace
}

/// Lower estimate of the operator norm by power iteration; exactly `0` for the zero map.
pub fn estimate_norm(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    power_iteration(op, iters.max(1), seed)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Largest relative violation of `<K x, y> = <x, K* y>` over random trial pairs,
/// normalised by `‖x‖ ‖y‖ ‖K‖`.
pub fn adjoint_residual(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let norm = op
        .norm_bound()
        .unwrap_or_else(|| estimate_norm(op, NORM_ITERATIONS, seed ^ 0x9e37_79b9));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kx = vec![0.0; op.codomain_dim()];
    let mut kty = vec![0.0; op.domain_dim()];
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x = random_unit(op.domain_dim(), &mut rng);
        let y = random_unit(op.codomain_dim(), &mut rng);
        op.apply_into(&x, &mut kx);
        op.adjoint_into(&y, &mut kty);
        let lhs = ops::dot(&kx, &y);
        let rhs = ops::dot(&x, &kty);
        let scale = ops::norm(&x) * ops::norm(&y) * norm;
        let r = if scale > 0.0 {
            (lhs - rhs).abs() / scale
        } else {
            (lhs - rhs).abs()
        };
        worst = worst.max(r);
    }
    worst
}
