use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schottkydim::hyperbolic::*;
use schottkydim::isometry::LorentzIsometry;
use schottkydim::sampling::{random_boundary, random_isometry, random_point};

const TRIALS: u32 = 10_000;

fn seeded() -> impl Strategy<Value = (usize, ChaCha8Rng)> {
    (2usize..=5, any::<u64>()).prop_map(|(n, s)| (n, ChaCha8Rng::seed_from_u64(s)))
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: TRIALS, failure_persistence: None, ..ProptestConfig::default() }
}

fn gp(x: &HPoint, y: &HPoint, w: &HPoint) -> f64 {
    gromov_product(&x.clone().into(), &y.clone().into(), w).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn busemann_cocycle((n, mut rng) in seeded()) {
        let (x, y, z) = (random_point(&mut rng, n, 4.0), random_point(&mut rng, n, 4.0), random_point(&mut rng, n, 4.0));
        let xi = random_boundary(&mut rng, n);
        let c = busemann(&x, &y, &xi) - busemann(&x, &z, &xi) - busemann(&z, &y, &xi);
        prop_assert!(c.abs() <= 1e-9, "cocycle defect {c}");
    }

    #[test]
    fn busemann_isometry_invariant((n, mut rng) in seeded()) {
        let (x, y) = (random_point(&mut rng, n, 4.0), random_point(&mut rng, n, 4.0));
        let xi = random_boundary(&mut rng, n);
        let g = random_isometry(&mut rng, n, 3.0);
        let a = busemann(&x, &y, &xi);
        let b = busemann(&g.apply(&x), &g.apply(&y), &g.apply_boundary(&xi));
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        prop_assert!(a.abs() <= dist(&x, &y) + 1e-9);
    }

    #[test]
    fn strong_triangle_inequality((n, mut rng) in seeded()) {
        let p: Vec<HPoint> = (0..4).map(|_| random_point(&mut rng, n, 3.0)).collect();
        let (x, y, z, w) = (&p[0], &p[1], &p[2], &p[3]);
        let lhs = (-gp(x, z, w)).exp();
        let rhs = (-gp(x, y, w)).exp() + (-gp(y, z, w)).exp();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn busemann_matches_ray_limit((n, mut rng) in seeded()) {
        let (x, y) = (random_point(&mut rng, n, 3.0), random_point(&mut rng, n, 3.0));
        let xi = random_boundary(&mut rng, n);
        // d(x, z) − d(y, z) for z far out along the ray from x
        let z = geodesic_ray(&x, &xi, 30.0);
        let oracle = dist(&x, &z) - dist(&y, &z);
        let closed = busemann(&x, &y, &xi);
        prop_assert!((closed - oracle).abs() <= 1e-6, "{closed} vs {oracle}");
    }

    #[test]
    fn boundary_gromov_product_matches_ray_limit((n, mut rng) in seeded()) {
        let o = random_point(&mut rng, n, 2.0);
        let (xi, zeta) = (random_boundary(&mut rng, n), random_boundary(&mut rng, n));
        let closed = gromov_product(&xi.clone().into(), &zeta.clone().into(), &o).unwrap();
        prop_assume!(closed < 8.0);
        let limit = gromov_product_ray_limit(&xi, &zeta, &o);
        let t = 25.0;
        let direct = 0.5 * (2.0 * t - dist(&geodesic_ray(&o, &xi, t), &geodesic_ray(&o, &zeta, t)));
        prop_assert!((closed - limit).abs() <= 1e-6, "{closed} vs {limit}");
        prop_assert!((closed - direct).abs() <= 1e-6, "{closed} vs {direct}");
        prop_assert!((visual_dist(&xi, &zeta, &o) - (-closed).exp()).abs() <= 1e-12);
    }

    #[test]
    fn lorentz_round_trip((n, mut rng) in seeded()) {
        let g = random_isometry(&mut rng, n, 4.0);
        let p = random_point(&mut rng, n, 4.0);
        let e = g.compose(&g.inverse());
        let id = LorentzIsometry::identity(n);
        prop_assert!((e.matrix() - id.matrix()).amax() <= 1e-10);
        prop_assert!(LorentzIsometry::defect(g.matrix()) <= 1e-10);
        let back = g.inverse().apply(&g.apply(&p));
        prop_assert!(dist(&back, &p) <= 1e-10);
        let xi = random_boundary(&mut rng, n);
        let bk = g.inverse().apply_boundary(&g.apply_boundary(&xi));
        prop_assert!((bk.coords() - xi.coords()).amax() <= 1e-10);
    }

    #[test]
    fn gromov_product_interior_identity((n, mut rng) in seeded()) {
        let p: Vec<HPoint> = (0..3).map(|_| random_point(&mut rng, n, 4.0)).collect();
        let g = gp(&p[0], &p[1], &p[2]);
        let exact = 0.5 * (dist(&p[0], &p[2]) + dist(&p[1], &p[2]) - dist(&p[0], &p[1]));
        prop_assert!(g >= 0.0);
        prop_assert_eq!(g, gp(&p[1], &p[0], &p[2]));
        prop_assert!((g - exact.max(0.0)).abs() <= 1e-15);
    }

    #[test]
    fn visual_metric_change_of_origin((n, mut rng) in seeded()) {
        let (o, o2) = (random_point(&mut rng, n, 2.0), random_point(&mut rng, n, 2.0));
        let (xi, zeta) = (random_boundary(&mut rng, n), random_boundary(&mut rng, n));
        let ratio = visual_dist(&xi, &zeta, &o) / visual_dist(&xi, &zeta, &o2);
        let bound = dist(&o, &o2).exp() * (1.0 + 1e-12);
        prop_assert!(ratio <= bound && 1.0 / ratio <= bound, "ratio {ratio}, bound {bound}");
    }
}
