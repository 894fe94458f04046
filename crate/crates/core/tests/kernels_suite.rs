use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schottkydim::hyperbolic::{dist, HPoint};
use schottkydim::isometry::{LorentzIsometry, TOL_ISO};
use schottkydim::kernels::*;
use schottkydim::sampling::{random_isometry, random_point};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// `m` points in `H^n` with `m ≤ 10`, `n ≤ 5`.
fn configuration() -> impl Strategy<Value = (Vec<HPoint>, ChaCha8Rng)> {
    (1usize..=5, 2usize..=10, any::<u64>()).prop_map(|(n, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..m).map(|_| random_point(&mut rng, n, 3.0)).collect();
        (pts, rng)
    })
}

/// Largest `s` keeping the realized points within `e^6` of the origin, where
/// coordinates still resolve close pairs.
fn representable(d: &DMatrix<f64>, s: f64) -> f64 {
    let far = d.row(0).iter().copied().fold(0.0, f64::max);
    s.min(6.0 / far.max(1e-300))
}

/// Random weighted tree on `k` vertices; returns all vertex distances.
fn random_tree_metric(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k, k);
    for v in 1..k {
        let parent = rng.random_range(0..v);
        let len: f64 = rng.random_range(0.02..2.0);
        for u in 0..v {
            let x = d[(parent, u)] + len;
            d[(v, u)] = x;
            d[(u, v)] = x;
        }
    }
    d
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn gram_round_trip((pts, _) in configuration()) {
        let c = cosh_distance_matrix(&pts);
        let k = KernelMatrix::new(c.clone(), KernelSource::Raw).unwrap();
        let real = gram_realize(&k).unwrap();
        prop_assert!(real.residual <= 1e-10, "residual {}", real.residual);
        let back = cosh_distance_matrix(&real.points);
        prop_assert!((back - c).amax() <= 1e-10);
        let n = pts[0].dim();
        prop_assert_eq!(real.rank, n.min(pts.len() - 1));
        prop_assert_eq!(real.points[0].clone(), HPoint::origin(real.points[0].dim()));
    }

    #[test]
    fn powers_are_realizable_and_of_hyperbolic_type((pts, mut rng) in configuration(), t in 1e-3f64..=1.0) {
        let c = cosh_distance_matrix(&pts);
        let k = kernel_power(&c, t).unwrap();
        let real = gram_realize(&k).unwrap();
        prop_assert!(real.residual <= 1e-9 * k.k.amax());
        for _ in 0..4 {
            let coef: Vec<f64> = (0..pts.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale: f64 = coef.iter().map(|x| x.abs()).sum::<f64>().powi(2) * k.k.amax();
            prop_assert!(hyperbolic_type_margin(&k, &coef) >= -1e-12 * scale);
        }
    }

    #[test]
    fn power_kernel_quasi_isometry_bounds((pts, _) in configuration(), t in 1e-3f64..=1.0) {
        let d = distance_matrix(&pts);
        let k = kernel_power(&cosh_distance_matrix(&pts), t).unwrap();
        let real = gram_realize(&k).unwrap();
        let rep = qi_bounds_check(&d, &real, QiMode::Power { t });
        prop_assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn tree_kernel_long_range_bounds(seed in any::<u64>(), k in 2usize..=10, s in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_tree_metric(&mut rng, k);
        let s = representable(&d, s);
        let kern = kernel_tree(&d, s).unwrap();
        let real = gram_realize(&kern).unwrap();
        let rep = qi_bounds_check(&d, &real, QiMode::TreeExp { s });
        let long: Vec<_> = rep.violations.iter().filter(|v| v.bound != QiBound::Short).collect();
        prop_assert!(long.is_empty(), "{long:?}");
        // the exact relation cosh d' = e^{sd} gives d' ≤ sqrt(2(e^{sd} − 1))
        for i in 0..k {
            for j in i + 1..k {
                let di = dist(&real.points[i], &real.points[j]);
                prop_assert!(di <= (2.0 * (s * d[(i, j)]).exp_m1()).sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn match_recovers_lorentz_maps(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = n + 1 + rng.random_range(0..3);
        let u: Vec<HPoint> = (0..m).map(|_| random_point(&mut rng, n, 2.0)).collect();
        let g = random_isometry(&mut rng, n, 2.0);
        let v: Vec<HPoint> = u.iter().map(|p| g.apply(p)).collect();
        let (f, worst) = match_isometry(&u, &v, 1e-9).unwrap();
        prop_assert!(worst <= 1e-8, "worst {worst}");
        prop_assert!((f.matrix() - g.matrix()).amax() <= 1e-8 * g.matrix().amax());
        prop_assert!(LorentzIsometry::defect(f.matrix()) <= TOL_ISO);
        prop_assert!(dist(&f.apply(&u[0]), &v[0]) <= 1e-12);
    }
}

#[test]
fn tree_kernel_points_sit_at_exact_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let d = random_tree_metric(&mut rng, 8);
        let s = representable(&d, rng.random_range(0.2..2.0));
        let real = gram_realize(&kernel_tree(&d, s).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = (s * d[(i, j)]).exp();
                assert!((dist(&real.points[i], &real.points[j]).cosh() - want).abs() <= 1e-9 * want);
            }
        }
    }
}

/// Achieved alignment error grows with the size of the perturbation of the
/// target configuration.
#[test]
fn match_error_tracks_perturbation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 3;
    let etas = [1e-8, 1e-6, 1e-4, 1e-2];
    let mut mean = vec![0.0; etas.len()];
    for _ in 0..50 {
        let u: Vec<HPoint> = (0..6).map(|_| random_point(&mut rng, n, 2.0)).collect();
        let g = random_isometry(&mut rng, n, 2.0);
        for (k, &eta) in etas.iter().enumerate() {
            let v: Vec<HPoint> = u
                .iter()
                .map(|p| {
                    let q = g.apply(p);
                    let x: Vec<f64> = q.spatial().iter().map(|c| c + eta * rng.random_range(-1.0..1.0)).collect();
                    HPoint::from_spatial(&x)
                })
                .collect();
            let (_, worst) = match_isometry(&u, &v, 1e-12).unwrap();
            mean[k] += worst / 50.0;
        }
    }
    assert!(mean.windows(2).all(|w| w[0] < w[1]), "{mean:?}");
    assert!(mean[0] < 1e-6);
}

#[test]
fn non_tree_metrics_and_bad_parameters_are_rejected() {
    let square = DMatrix::from_row_slice(4, 4, &[0., 1., 2., 1., 1., 0., 1., 2., 2., 1., 0., 1., 1., 2., 1., 0.]);
    assert!(matches!(kernel_tree(&square, 1.0), Err(KernelError::NotTreeMetric(_))));
    assert!(matches!(kernel_tree(&square, 0.0), Err(KernelError::BadS(_))));
    let c = DMatrix::from_element(2, 2, 1.0);
    assert!(matches!(kernel_power(&c, 0.0), Err(KernelError::BadT(_))));
    assert!(matches!(kernel_power(&c, 1.5), Err(KernelError::BadT(_))));
}
