//! Kernels of hyperbolic type on finite sets: the power kernels `(cosh d)^t`,
//! the tree kernels `e^{s d}`, realization of a kernel matrix as a point
//! configuration with `cosh d(u_i, u_j) = K_ij`, and matching of two
//! configurations with nearly equal Gram matrices by a Lorentz isometry.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{dist, minkowski, HPoint, Vector};
use crate::isometry::{IsometryError, LorentzIsometry};

pub const TOL_REALIZE: f64 = 1e-10;
/// Relative tolerance for negative eigenvalues of the spatial Gram.
pub const TOL_PSD: f64 = 1e-9;
/// Pivot cutoff of the pivoted Cholesky factorization, relative to `K_0i²`.
pub const RANK_CUTOFF: f64 = 1e-12;
pub const QI_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("t = {0} is outside (0, 1]")]
    BadT(f64),
    #[error("s = {0} must be positive")]
    BadS(f64),
    #[error("bad kernel matrix: {0}")]
    BadKernel(String),
    #[error("distance matrix is not a tree metric (four-point defect {0:.3e})")]
    NotTreeMetric(f64),
    #[error("kernel is not of hyperbolic type: {0}")]
    NotHyperbolicType(String),
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("point count mismatch: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("degenerate frame: pivot {pivot:.3e} at point {index}")]
    DegenerateFrame { index: usize, pivot: f64 },
    #[error(transparent)]
    Isometry(#[from] IsometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSource {
    Power { t: f64 },
    TreeExp { s: f64 },
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub k: DMatrix<f64>,
    pub source: KernelSource,
}

impl KernelMatrix {
    /// Checks squareness, symmetry and a unit diagonal. Entries below 1 are
    /// allowed here and rejected by [`gram_realize`].
    pub fn new(k: DMatrix<f64>, source: KernelSource) -> Result<Self, KernelError> {
        let m = k.nrows();
        if k.ncols() != m || m == 0 {
            return Err(KernelError::BadKernel(format!("shape {}x{}", m, k.ncols())));
        }
        let scale = k.amax().max(1.0);
        for i in 0..m {
            if !k[(i, i)].is_finite() || (k[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(KernelError::BadKernel(format!("diagonal entry {i} is {}", k[(i, i)])));
            }
            for j in 0..i {
                if !k[(i, j)].is_finite() || (k[(i, j)] - k[(j, i)]).abs() > 1e-12 * scale {
                    return Err(KernelError::BadKernel(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { k, source })
    }

    pub fn size(&self) -> usize {
        self.k.nrows()
    }
}

/// `cosh d(x_i, x_j) = B(x_i, x_j)`.
pub fn cosh_distance_matrix(points: &[HPoint]) -> DMatrix<f64> {
    let m = points.len();
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { minkowski(points[i].coords(), points[j].coords()).max(1.0) })
}

pub fn distance_matrix(points: &[HPoint]) -> DMatrix<f64> {
    let m = points.len();
    DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { dist(&points[i], &points[j]) })
}

pub fn kernel_power(d: &DMatrix<f64>, t: f64) -> Result<KernelMatrix, KernelError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(KernelError::BadT(t));
    }
    if d.iter().any(|&x| !(x >= 1.0 - 1e-12)) {
        return Err(KernelError::BadKernel("cosh-distance entries must be at least 1".into()));
    }
    KernelMatrix::new(d.map(|x| x.max(1.0).powf(t)), KernelSource::Power { t })
}

/// Largest violation of `(x|y)_0 ≥ min((x|z)_0, (y|z)_0)` over all triples,
/// which for a base point characterizes 0-hyperbolicity.
pub fn four_point_defect(d: &DMatrix<f64>) -> f64 {
    let m = d.nrows();
    let gp = |i: usize, j: usize| 0.5 * (d[(0, i)] + d[(0, j)] - d[(i, j)]);
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let xy = gp(i, j);
            for k in 0..m {
                worst = worst.max(gp(i, k).min(gp(j, k)) - xy);
            }
        }
    }
    worst
}

pub fn kernel_tree(dtree: &DMatrix<f64>, s: f64) -> Result<KernelMatrix, KernelError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(KernelError::BadS(s));
    }
    let m = dtree.nrows();
    if dtree.ncols() != m {
        return Err(KernelError::BadKernel("distance matrix is not square".into()));
    }
    let scale = dtree.amax().max(1.0);
    for i in 0..m {
        if dtree[(i, i)].abs() > 1e-12 * scale {
            return Err(KernelError::BadKernel(format!("nonzero self-distance at {i}")));
        }
        for j in 0..i {
            if dtree[(i, j)] < 0.0 || (dtree[(i, j)] - dtree[(j, i)]).abs() > 1e-12 * scale {
                return Err(KernelError::BadKernel(format!("not a distance at ({i}, {j})")));
            }
        }
    }
    let defect = four_point_defect(dtree);
    if defect > 1e-9 * scale {
        return Err(KernelError::NotTreeMetric(defect));
    }
    KernelMatrix::new(dtree.map(|x| (s * x).exp()), KernelSource::TreeExp { s })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// Points in `H^n` with `n = max(rank, 1)`; the first is the origin.
    pub points: Vec<HPoint>,
    /// Rank of the spatial Gram, i.e. the dimension of the spanned subspace.
    pub rank: usize,
    /// `max |B(u_i, u_j) − K_ij|`.
    pub residual: f64,
}

/// `G = L Lᵀ` with symmetric pivoting on the largest remaining diagonal.
/// A row stops being a pivot candidate once its remaining diagonal falls below
/// `rel·(G_ii + 1) = rel·K_0i²`, the scale of the rounding error in its
/// entries, so that points far from the origin do not mask directions spanned
/// by nearer ones. Columns of `L` follow the pivot
/// order.
fn pivoted_cholesky(g: &DMatrix<f64>, rel: f64) -> (DMatrix<f64>, usize) {
    let n = g.nrows();
    let mut a = g.clone();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut done = vec![false; n];
    let mut rank = 0;
    for col in 0..n {
        let mut p = None;
        let mut best = 0.0;
        for i in 0..n {
            if !done[i] && a[(i, i)] > rel * (g[(i, i)] + 1.0) && a[(i, i)] > best {
                best = a[(i, i)];
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        done[p] = true;
        let piv = a[(p, p)].sqrt();
        for i in 0..n {
            if !done[i] || i == p {
                l[(i, col)] = a[(i, p)] / piv;
            }
        }
        l[(p, col)] = piv;
        for i in 0..n {
            if done[i] {
                continue;
            }
            for j in 0..n {
                if !done[j] {
                    a[(i, j)] -= l[(i, col)] * l[(j, col)];
                }
            }
        }
        rank += 1;
    }
    (l.columns(0, rank).into_owned(), rank)
}

pub fn gram_realize(k: &KernelMatrix) -> Result<Realization, KernelError> {
    let kk = &k.k;
    let m = k.size();
    if let Some(x) = kk.iter().find(|&&x| x < 1.0 - 1e-12) {
        return Err(KernelError::NotHyperbolicType(format!("entry {x} is below 1")));
    }
    if m == 1 {
        return Ok(Realization { points: vec![HPoint::origin(1)], rank: 0, residual: 0.0 });
    }
    let g = DMatrix::from_fn(m - 1, m - 1, |i, j| kk[(0, i + 1)] * kk[(0, j + 1)] - kk[(i + 1, j + 1)]);
    let eig = g.clone().symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -TOL_PSD * norm.max(f64::MIN_POSITIVE) {
        return Err(KernelError::NotHyperbolicType(format!("spatial Gram has eigenvalue {min_eig:.3e} (norm {norm:.3e})")));
    }
    let (l, rank) = pivoted_cholesky(&g, RANK_CUTOFF);
    let n = rank.max(1);
    let mut points = vec![HPoint::origin(n)];
    for i in 0..m - 1 {
        let mut x = vec![0.0; n];
        for c in 0..rank {
            x[c] = l[(i, c)];
        }
        points.push(HPoint::from_spatial(&x));
    }
    let mut residual = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            residual = residual.max((minkowski(points[i].coords(), points[j].coords()) - kk[(i, j)]).abs());
        }
    }
    Ok(Realization { points, rank, residual })
}

/// Gram–Schmidt over the given vectors. Returns the orthonormal frame and the
/// indices that contributed a pivot above `cutoff`.
fn gram_schmidt(xs: &[Vector], cutoff: f64) -> (Vec<Vector>, Vec<usize>) {
    let mut frame: Vec<Vector> = Vec::new();
    let mut used = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let mut v = x.clone();
        for _ in 0..2 {
            for e in &frame {
                let c = e.dot(&v);
                v -= e * c;
            }
        }
        let p = v.norm();
        if p > cutoff {
            frame.push(v / p);
            used.push(i);
        }
    }
    (frame, used)
}

/// Orthonormal basis of the complement of `frame`, built from `seeds` first
/// and the standard basis after.
fn complete_frame(frame: &[Vector], seeds: &[Vector], n: usize) -> Vec<Vector> {
    let mut all: Vec<Vector> = frame.to_vec();
    let mut extra = Vec::new();
    let candidates = seeds.iter().cloned().chain((0..n).map(|i| {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        e
    }));
    for c in candidates {
        if all.len() == n {
            break;
        }
        let mut v = c;
        for _ in 0..2 {
            for e in &all {
                let d = e.dot(&v);
                v -= e * d;
            }
        }
        let p = v.norm();
        if p > 1e-6 {
            let u = v / p;
            all.push(u.clone());
            extra.push(u);
        }
    }
    extra
}

fn spatial_vectors(points: &[HPoint], n: usize, center: &LorentzIsometry) -> Vec<Vector> {
    points.iter().map(|p| center.apply(&p.padded(n)).coords().rows(1, n).into_owned()).collect()
}

/// Lorentz map `F` with `F u_0 = v_0` sending the frame of the `u_i` to that
/// of the `v_i`, identity on the complement; returns `F` and
/// `max_i d(F u_i, v_i)`.
pub fn match_isometry(u: &[HPoint], v: &[HPoint], tol: f64) -> Result<(LorentzIsometry, f64), KernelError> {
    if u.len() != v.len() || u.is_empty() {
        return Err(KernelError::CountMismatch(u.len(), v.len()));
    }
    let n = u.iter().chain(v).map(|p| p.dim()).max().unwrap_or(1);
    let tu = LorentzIsometry::translation_to(&u[0].padded(n));
    let tv = LorentzIsometry::translation_to(&v[0].padded(n));
    let xs = spatial_vectors(&u[1..], n, &tu.inverse());
    let ys = spatial_vectors(&v[1..], n, &tv.inverse());
    let sx = xs.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let sy = ys.iter().map(|y| y.norm()).fold(1.0, f64::max);
    let (ex, used) = gram_schmidt(&xs, tol * sx);
    let (_, used_y) = gram_schmidt(&ys, tol * sy);
    if used.len() != used_y.len() {
        return Err(KernelError::RankMismatch(used.len(), used_y.len()));
    }
    // the frame on the image side follows the same pivot indices
    let mut fy: Vec<Vector> = Vec::new();
    for &i in &used {
        let mut w = ys[i].clone();
        for _ in 0..2 {
            for f in &fy {
                let c = f.dot(&w);
                w -= f * c;
            }
        }
        let p = w.norm();
        if p < tol * sy {
            return Err(KernelError::DegenerateFrame { index: i + 1, pivot: p });
        }
        fy.push(w / p);
    }
    let cx = complete_frame(&ex, &[], n);
    let cy = complete_frame(&fy, &cx, n);
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (e, f) in ex.iter().chain(&cx).zip(fy.iter().chain(&cy)) {
        q += f * e.transpose();
    }
    let mut block = DMatrix::<f64>::identity(n + 1, n + 1);
    block.view_mut((1, 1), (n, n)).copy_from(&q);
    let m = tv.matrix() * block * tu.inverse().matrix();
    let f = LorentzIsometry::new(m)?;
    let worst = u.iter().zip(v).map(|(a, b)| dist(&f.apply(&a.padded(n)), &b.padded(n))).fold(0.0, f64::max);
    Ok((f, worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QiMode {
    Power { t: f64 },
    TreeExp { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QiBound {
    /// `t d ≤ d'` or `s d ≤ d'`.
    Lower,
    /// `d' ≤ min(t d + ln 2, d)` or `d' ≤ s d + ln 2`.
    Upper,
    /// `d' ≤ (2 s d)^{1/2}` when `d ≤ ln 2 / s`.
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QiViolation {
    pub i: usize,
    pub j: usize,
    pub bound: QiBound,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiReport {
    pub pairs: usize,
    pub min_slack: f64,
    pub violations: Vec<QiViolation>,
}

impl QiReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the quasi-isometry bounds between source distances and the
/// distances of the realized points, flagging slack below `−1e−9`.
pub fn qi_bounds_check(d_src: &DMatrix<f64>, img: &Realization, mode: QiMode) -> QiReport {
    let m = img.points.len();
    let ln2 = std::f64::consts::LN_2;
    let mut report = QiReport { pairs: 0, min_slack: f64::INFINITY, violations: Vec::new() };
    let record = |i: usize, j: usize, bound: QiBound, slack: f64, r: &mut QiReport| {
        r.min_slack = r.min_slack.min(slack);
        if slack < -QI_SLACK {
            r.violations.push(QiViolation { i, j, bound, slack });
        }
    };
    for i in 0..m {
        for j in i + 1..m {
            let d = d_src[(i, j)];
            let di = dist(&img.points[i], &img.points[j]);
            report.pairs += 1;
            match mode {
                QiMode::Power { t } => {
                    record(i, j, QiBound::Lower, di - t * d, &mut report);
                    record(i, j, QiBound::Upper, (t * d + ln2).min(d) - di, &mut report);
                }
                QiMode::TreeExp { s } => {
                    record(i, j, QiBound::Lower, di - s * d, &mut report);
                    record(i, j, QiBound::Upper, s * d + ln2 - di, &mut report);
                    if d <= ln2 / s {
                        record(i, j, QiBound::Short, (2.0 * s * d).sqrt() - di, &mut report);
                    }
                }
            }
        }
    }
    report
}

/// `(Σ_k c_k K_0k)² − Σ_ij c_i c_j K_ij`, nonnegative for kernels of
/// hyperbolic type based at the first point.
pub fn hyperbolic_type_margin(k: &KernelMatrix, c: &[f64]) -> f64 {
    let kk = &k.k;
    let m = k.size();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for i in 0..m {
        lin += c[i] * kk[(0, i)];
        for j in 0..m {
            quad += c[i] * c[j] * kk[(i, j)];
        }
    }
    lin * lin - quad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_isometry, random_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points_at_distance_one() {
        let c = 1f64.cosh();
        let k = KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0]), KernelSource::Raw).unwrap();
        let r = gram_realize(&k).unwrap();
        assert!(r.residual <= 1e-14);
        assert!((dist(&r.points[0], &r.points[1]) - 1.0).abs() < 1e-14);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn entry_below_one_rejected() {
        let k = KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]), KernelSource::Raw).unwrap();
        assert!(matches!(gram_realize(&k), Err(KernelError::NotHyperbolicType(_))));
    }

    #[test]
    fn round_trip_six_points_in_h3() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<HPoint> = (0..6).map(|_| random_point(&mut rng, 3, 2.0)).collect();
        let k = KernelMatrix::new(cosh_distance_matrix(&pts), KernelSource::Raw).unwrap();
        let r = gram_realize(&k).unwrap();
        assert_eq!(r.rank, 3);
        for i in 0..6 {
            for j in 0..6 {
                assert!((dist(&r.points[i], &r.points[j]) - dist(&pts[i], &pts[j])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn power_kernel_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<HPoint> = (0..5).map(|_| random_point(&mut rng, 3, 2.0)).collect();
        let d = cosh_distance_matrix(&pts);
        assert_eq!(kernel_power(&d, 1.0).unwrap().k, d);
        let k = kernel_power(&d, 1e-12).unwrap();
        assert!(k.k.iter().all(|&x| (x - 1.0).abs() < 1e-10));
        assert!(matches!(kernel_power(&d, 0.0), Err(KernelError::BadT(_))));
        assert!(matches!(kernel_power(&d, 1.5), Err(KernelError::BadT(_))));
    }

    #[test]
    fn square_is_not_a_tree() {
        let d = DMatrix::from_row_slice(4, 4, &[0., 1., 2., 1., 1., 0., 1., 2., 2., 1., 0., 1., 1., 2., 1., 0.]);
        assert!(matches!(kernel_tree(&d, 1.0), Err(KernelError::NotTreeMetric(_))));
    }

    #[test]
    fn star_realization_obeys_linear_bounds() {
        let d = DMatrix::from_row_slice(4, 4, &[0., 1., 1., 1., 1., 0., 2., 2., 1., 2., 0., 2., 1., 2., 2., 0.]);
        let k = kernel_tree(&d, 1.0).unwrap();
        let r = gram_realize(&k).unwrap();
        let rep = qi_bounds_check(&d, &r, QiMode::TreeExp { s: 1.0 });
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.pairs, 6);
    }

    #[test]
    fn short_pairs_follow_exact_relation() {
        // cosh d' = e^{s d} exactly, so d' = acosh(e^{s d}); compare with the
        // quadratic bound d'² ≤ 2 (e^{s d} − 1) from cosh x − 1 ≥ x²/2
        let d = DMatrix::from_row_slice(3, 3, &[0., 0.1, 0.1, 0.1, 0., 0.2, 0.1, 0.2, 0.]);
        let s = 2.0;
        let r = gram_realize(&kernel_tree(&d, s).unwrap()).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let di = dist(&r.points[i], &r.points[j]);
            assert!((di - (s * d[(i, j)]).exp().acosh()).abs() < 1e-9);
            assert!(di <= (2.0 * ((s * d[(i, j)]).exp() - 1.0)).sqrt() + 1e-12);
        }
    }

    #[test]
    fn match_recovers_random_lorentz_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<HPoint> = (0..6).map(|_| random_point(&mut rng, 3, 1.5)).collect();
        let l = random_isometry(&mut rng, 3, 1.5);
        let v: Vec<HPoint> = u.iter().map(|p| l.apply(p)).collect();
        let (f, worst) = match_isometry(&u, &v, 1e-8).unwrap();
        assert!(worst <= 1e-8, "{worst}");
        assert!((f.matrix() - l.matrix()).amax() < 1e-6);
        let (g, w0) = match_isometry(&u, &u, 1e-8).unwrap();
        assert!(w0 < 1e-12);
        assert!((g.matrix() - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn match_flags_rank_mismatch() {
        let u = vec![HPoint::origin(2), HPoint::from_spatial(&[0.5, 0.0]), HPoint::from_spatial(&[0.0, 0.5])];
        let v = vec![HPoint::origin(2), HPoint::from_spatial(&[0.5, 0.0]), HPoint::from_spatial(&[-0.5, 0.0])];
        assert!(matches!(match_isometry(&u, &v, 1e-8), Err(KernelError::RankMismatch(2, 1))));
    }
}
