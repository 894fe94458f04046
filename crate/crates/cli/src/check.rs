//! Seeded invariant suite behind `schottkydim check`: geometry identities on
//! random points of `H^n` and kernel realization checks on random
//! configurations. Every trial draws from its own ChaCha stream, so results
//! do not depend on the thread count.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use schottkydim::hyperbolic::*;
use schottkydim::isometry::{LorentzIsometry, TOL_ISO};
use schottkydim::kernels::*;
use schottkydim::sampling::{random_boundary, random_isometry, random_point};

use crate::config::CheckConfig;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub trials: usize,
    /// Trials where the check does not apply.
    pub skipped: usize,
    pub failures: usize,
    /// Largest error over all trials, in the units of `tol`.
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub geometry: Vec<CheckRow>,
    pub kernels: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.geometry.iter().chain(&self.kernels).all(|r| r.passed)
    }
}

/// Outcome of one trial: `None` when skipped, otherwise the error measure.
type Trial = Option<f64>;

fn run(name: &'static str, stream: u64, seed: u64, trials: usize, tol: f64, f: impl Fn(&mut ChaCha8Rng) -> Trial + Sync) -> CheckRow {
    let errs: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | i as u64);
            f(&mut rng)
        })
        .collect();
    let skipped = errs.iter().filter(|e| e.is_none()).count();
    let vals: Vec<f64> = errs.into_iter().flatten().collect();
    // NaN counts as a failure
    let failures = vals.iter().filter(|e| !(**e <= tol)).count();
    let worst = vals.iter().copied().fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    CheckRow { name, trials, skipped, failures, worst, tol, passed: failures == 0 }
}

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(2..=5)
}

fn gp(x: &HPoint, y: &HPoint, w: &HPoint) -> f64 {
    gromov_product(&x.clone().into(), &y.clone().into(), w).unwrap_or(f64::NAN)
}

fn geometry(seed: u64, n: usize) -> Vec<CheckRow> {
    vec![
        run("busemann_cocycle", 1, seed, n, 1e-9, |rng| {
            let d = dim(rng);
            let (x, y, z) = (random_point(rng, d, 4.0), random_point(rng, d, 4.0), random_point(rng, d, 4.0));
            let xi = random_boundary(rng, d);
            Some((busemann(&x, &y, &xi) - busemann(&x, &z, &xi) - busemann(&z, &y, &xi)).abs())
        }),
        run("busemann_isometry_invariance", 2, seed, n, 1e-9, |rng| {
            let d = dim(rng);
            let (x, y) = (random_point(rng, d, 4.0), random_point(rng, d, 4.0));
            let xi = random_boundary(rng, d);
            let g = random_isometry(rng, d, 3.0);
            Some((busemann(&x, &y, &xi) - busemann(&g.apply(&x), &g.apply(&y), &g.apply_boundary(&xi))).abs())
        }),
        // excess of e^{−(x|z)_w} over e^{−(x|y)_w} + e^{−(y|z)_w}
        run("strong_triangle_inequality", 3, seed, n, 1e-12, |rng| {
            let d = dim(rng);
            let p: Vec<HPoint> = (0..4).map(|_| random_point(rng, d, 3.0)).collect();
            let lhs = (-gp(&p[0], &p[2], &p[3])).exp();
            let rhs = (-gp(&p[0], &p[1], &p[3])).exp() + (-gp(&p[1], &p[2], &p[3])).exp();
            Some((lhs - rhs).max(0.0))
        }),
        run("busemann_ray_limit", 4, seed, n, 1e-6, |rng| {
            let d = dim(rng);
            let (x, y) = (random_point(rng, d, 3.0), random_point(rng, d, 3.0));
            let xi = random_boundary(rng, d);
            let z = geodesic_ray(&x, &xi, 30.0);
            Some((busemann(&x, &y, &xi) - (dist(&x, &z) - dist(&y, &z))).abs())
        }),
        // skipped when the rays stay within e^{-8} of each other past t = 25
        run("gromov_product_ray_limit", 5, seed, n, 1e-6, |rng| {
            let d = dim(rng);
            let o = random_point(rng, d, 2.0);
            let (xi, zeta) = (random_boundary(rng, d), random_boundary(rng, d));
            let closed = gromov_product(&xi.clone().into(), &zeta.clone().into(), &o).ok()?;
            if closed >= 8.0 {
                return None;
            }
            let t = 25.0;
            let direct = 0.5 * (2.0 * t - dist(&geodesic_ray(&o, &xi, t), &geodesic_ray(&o, &zeta, t)));
            Some((closed - gromov_product_ray_limit(&xi, &zeta, &o)).abs().max((closed - direct).abs()))
        }),
        run("lorentz_round_trip", 6, seed, n, 1e-10, |rng| {
            let d = dim(rng);
            let g = random_isometry(rng, d, 4.0);
            let p = random_point(rng, d, 4.0);
            let xi = random_boundary(rng, d);
            let id = (g.compose(&g.inverse()).matrix() - LorentzIsometry::identity(d).matrix()).amax();
            let back = dist(&g.inverse().apply(&g.apply(&p)), &p);
            let bk = (g.inverse().apply_boundary(&g.apply_boundary(&xi)).coords() - xi.coords()).amax();
            Some(id.max(back).max(bk).max(LorentzIsometry::defect(g.matrix())))
        }),
    ]
}

/// `m ≤ 10` points in `H^n`, `n ≤ 5`.
fn configuration(rng: &mut ChaCha8Rng) -> Vec<HPoint> {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(2..=10);
    (0..m).map(|_| random_point(rng, n, 3.0)).collect()
}

/// Random weighted tree on `k` vertices, scaled so that `s·d(0, j) ≤ 6`.
fn tree_metric(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, f64) {
    let k = rng.random_range(2..=10);
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
    let s: f64 = rng.random_range(0.1..3.0);
    let far = d.row(0).iter().copied().fold(0.0, f64::max);
    (d, s.min(6.0 / far))
}

fn worst_slack(rep: &QiReport, keep: impl Fn(QiBound) -> bool) -> f64 {
    rep.violations.iter().filter(|v| keep(v.bound)).map(|v| -v.slack).fold(0.0, f64::max)
}

fn kernels(seed: u64, n: usize) -> Vec<CheckRow> {
    let slack = 1e-9;
    vec![
        run("gram_round_trip", 11, seed, n, 1e-10, |rng| {
            let pts = configuration(rng);
            let c = cosh_distance_matrix(&pts);
            let real = KernelMatrix::new(c.clone(), KernelSource::Raw).and_then(|k| gram_realize(&k)).ok()?;
            Some(real.residual.max((cosh_distance_matrix(&real.points) - c).amax()))
        }),
        // residual relative to the largest kernel entry
        run("kernel_power_realizable", 12, seed, n, 1e-9, |rng| {
            let pts = configuration(rng);
            let t: f64 = rng.random_range(1e-3..=1.0);
            let k = kernel_power(&cosh_distance_matrix(&pts), t).ok();
            let r = k.as_ref().map(gram_realize);
            match (k, r) {
                (Some(k), Some(Ok(real))) => Some(real.residual / k.k.amax()),
                _ => Some(f64::INFINITY),
            }
        }),
        run("qi_power_bounds", 13, seed, n, slack, |rng| {
            let pts = configuration(rng);
            let t: f64 = rng.random_range(1e-3..=1.0);
            let k = kernel_power(&cosh_distance_matrix(&pts), t).ok()?;
            let real = gram_realize(&k).ok()?;
            Some(worst_slack(&qi_bounds_check(&distance_matrix(&pts), &real, QiMode::Power { t }), |_| true))
        }),
        run("qi_tree_bounds", 14, seed, n, slack, |rng| {
            let (d, s) = tree_metric(rng);
            let real = gram_realize(&kernel_tree(&d, s).ok()?).ok()?;
            Some(worst_slack(&qi_bounds_check(&d, &real, QiMode::TreeExp { s }), |b| b != QiBound::Short))
        }),
        run("qi_tree_short_pairs", 15, seed, n, slack, |rng| {
            let (d, s) = tree_metric(rng);
            let real = gram_realize(&kernel_tree(&d, s).ok()?).ok()?;
            Some(worst_slack(&qi_bounds_check(&d, &real, QiMode::TreeExp { s }), |b| b == QiBound::Short))
        }),
        run("match_isometry_recovery", 16, seed, n, 1e-8, |rng| {
            let d = rng.random_range(1..=5);
            let m = d + 1 + rng.random_range(0..3);
            let u: Vec<HPoint> = (0..m).map(|_| random_point(rng, d, 2.0)).collect();
            let g = random_isometry(rng, d, 2.0);
            let v: Vec<HPoint> = u.iter().map(|p| g.apply(p)).collect();
            let Ok((f, worst)) = match_isometry(&u, &v, 1e-9) else { return Some(f64::INFINITY) };
            let rel = (f.matrix() - g.matrix()).amax() / g.matrix().amax();
            let lorentz_ok = LorentzIsometry::defect(f.matrix()) <= TOL_ISO;
            Some(if lorentz_ok { worst.max(rel) } else { f64::INFINITY })
        }),
    ]
}

pub fn check(cfg: &CheckConfig, seed: u64) -> CheckReport {
    CheckReport { geometry: geometry(seed, cfg.geometry_trials), kernels: kernels(seed, cfg.kernel_trials) }
}
