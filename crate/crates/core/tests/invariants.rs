use icpdps::dataio::{load_image, read_trace, save_image, write_trace, ImageBuffer};
use icpdps::linalg::{adjoint_residual, DenseVector};
use icpdps::problems::{Gradient2D, Radon4};
use icpdps::prox::{project_box, project_dual_ball21, prox_kl_conjugate, prox_quadratic_identity};
use icpdps::schedules::{generate, kappa, verify_conditions, ScheduleMode, ScheduleParams};
use icpdps::solvers::IterationRecord;
use proptest::prelude::*;

fn vec_of(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_projection_is_feasible_idempotent_and_nonexpansive(
        a in vec_of(12, -5.0, 5.0),
        b in vec_of(12, -5.0, 5.0),
        beta in 0.0..3.0f64,
    ) {
        let pa = project_dual_ball21(&a.clone().into(), beta).unwrap();
        let pb = project_dual_ball21(&b.clone().into(), beta).unwrap();
        for p in pa.as_slice().chunks_exact(2) {
            prop_assert!(p[0].hypot(p[1]) <= beta * (1.0 + 1e-12) + 1e-300);
        }
        let again = project_dual_ball21(&pa, beta).unwrap();
        prop_assert!(dist(again.as_slice(), pa.as_slice()) <= 1e-12);
        prop_assert!(dist(pa.as_slice(), pb.as_slice()) <= dist(&a, &b) + 1e-12);
    }

    #[test]
    fn box_projection_is_nonexpansive(a in vec_of(9, -4.0, 4.0), b in vec_of(9, -4.0, 4.0), lo in -2.0..0.0f64, w in 0.0..3.0f64) {
        let pa = project_box(&a.clone().into(), lo, lo + w).unwrap();
        let pb = project_box(&b.clone().into(), lo, lo + w).unwrap();
        prop_assert!(pa.as_slice().iter().all(|&v| v >= lo && v <= lo + w));
        prop_assert!(dist(pa.as_slice(), pb.as_slice()) <= dist(&a, &b) + 1e-12);
    }

    #[test]
    fn quadratic_prox_interpolates(v in vec_of(6, -5.0, 5.0), z in vec_of(6, -5.0, 5.0), tau in 1e-3..1e3f64) {
        let p = prox_quadratic_identity(&v.clone().into(), tau, &z.clone().into()).unwrap();
        for ((pi, vi), zi) in p.as_slice().iter().zip(&v).zip(&z) {
            prop_assert!(*pi >= vi.min(*zi) - 1e-12 && *pi <= vi.max(*zi) + 1e-12);
        }
    }

    #[test]
    fn kl_conjugate_prox_stays_in_domain(
        v in vec_of(7, -50.0, 50.0),
        b in vec_of(7, 0.0, 100.0),
        c in vec_of(7, 1e-3, 10.0),
        sigma in 1e-4..1e4f64,
    ) {
        let p = prox_kl_conjugate(&v.clone().into(), sigma, &b.clone().into(), &c.into()).unwrap();
        for (k, &pk) in p.as_slice().iter().enumerate() {
            prop_assert!(pk.is_finite());
            if b[k] > 0.0 {
                prop_assert!(pk < 1.0);
            } else {
                prop_assert!(pk <= 1.0);
            }
        }
    }

    #[test]
    fn operators_are_adjoint(n1 in 2usize..20, n2 in 2usize..20, seed in any::<u64>()) {
        prop_assert!(adjoint_residual(&Gradient2D::new(n1, n2), 3, seed) <= 1e-12);
        prop_assert!(adjoint_residual(&Radon4::new(n1, n2), 3, seed) <= 1e-12);
    }

    #[test]
    fn basic_schedules_satisfy_conditions(eps in 0.0..0.95f64, share in 0.05..0.999f64) {
        // any split of tau0 sigma0 |K|^2 < 1 is admissible
        let l = 8f64.sqrt();
        let p = ScheduleParams { tau0: share.sqrt() * 3.0 / l, sigma0: share.sqrt() / (3.0 * l), epsilon: eps, ..ScheduleParams::default() };
        let states = generate(ScheduleMode::Basic, &p, 500).unwrap();
        prop_assert!(states.windows(2).all(|w| w[1].lambda <= w[0].lambda));
        let rep = verify_conditions(&states, kappa(ScheduleMode::Basic, &p), p.norm_k);
        prop_assert!(rep.passed(), "{}", rep);
    }

    #[test]
    fn primal_accel_steps_shrink(eps in 0.0..0.9f64, gamma in 0.01..1.0f64) {
        let p = ScheduleParams { gamma, epsilon: eps, ..ScheduleParams::default() };
        let states = generate(ScheduleMode::PrimalAccel, &p, 300).unwrap();
        prop_assert!(states.windows(2).all(|w| w[1].tau <= w[0].tau * (1.0 + 1e-12)));
        let rep = verify_conditions(&states, kappa(ScheduleMode::PrimalAccel, &p), p.norm_k);
        prop_assert!(rep.passed(), "{}", rep);
    }

    #[test]
    fn raw_images_round_trip(n1 in 1usize..12, n2 in 1usize..12, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n1 * n2).map(|_| rng.gen::<f64>() * 1e3 - 500.0).collect();
        let img = ImageBuffer::new(n1, n2, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f64");
        save_image(&p, &img).unwrap();
        prop_assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn traces_round_trip(gaps in prop::collection::vec(prop::option::of(-300.0..10.0f64), 0..40)) {
        let rows: Vec<_> = gaps
            .iter()
            .enumerate()
            .map(|(k, g)| IterationRecord { gap_db: *g, elapsed_s: k as f64 * 0.25, ..IterationRecord::empty(3 * k + 1) })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace(&p, &rows).unwrap();
        prop_assert_eq!(read_trace(&p).unwrap(), rows);
    }
}

#[test]
fn projection_of_zero_radius_is_zero() {
    let y = DenseVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
    assert_eq!(project_dual_ball21(&y, 0.0).unwrap().as_slice(), &[0.0; 4]);
}
