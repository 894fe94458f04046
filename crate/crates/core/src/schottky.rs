//! Representations of F_r into Isom H^n: orbit maps, limit points, ping-pong
//! certificates, joint displacement and quasi-isometry constants.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{rngs::StdRng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::WordGeometry;
use crate::hyperbolic::{
    dist, exp_map, minkowski, segment_distance_from_lengths, spatial_norm, unit_tangent, visual_dist, BoundaryPoint,
    HPoint, HyperbolicError, Vector,
};
use crate::isometry::{IsometryError, LorentzIsometry};
use crate::numeric::golden_section;
use crate::words::{enumerate_ball, letter_index, InfiniteWord, Letter, ReducedWord, WordError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchottkyError {
    #[error("representation has no Schottky diagnostics")]
    NotSchottky,
    #[error("ping-pong disks {0} and {1} overlap")]
    DisjointnessViolated(usize, usize),
    #[error("invalid ping-pong disks: {0}")]
    BadDisks(String),
    #[error("displacement minimization diverged")]
    Diverged,
    #[error("theta = {0} outside (0, 2π/3)")]
    ThetaOutOfRange(f64),
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("representation needs at least one generator")]
    Empty,
    #[error(transparent)]
    Isometry(#[from] IsometryError),
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
    #[error(transparent)]
    Word(#[from] WordError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QiConstants {
    pub k: f64,
    pub c_k: f64,
    pub ball_radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub k: f64,
    pub c_k: f64,
    pub ball_radius: usize,
    pub r_joint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyRep {
    gens: Vec<LorentzIsometry>,
    /// Generators and inverses in the order of `letter_index`.
    letters: Vec<LorentzIsometry>,
    o: HPoint,
    /// `T⁻¹ g T` with `T` the translation taking the origin to `o`.
    centered: Vec<DMatrix<f64>>,
    to_model: LorentzIsometry,
    diagnostics: Option<Diagnostics>,
}

impl SchottkyRep {
    pub fn new(gens: Vec<LorentzIsometry>, o: HPoint) -> Result<Self, SchottkyError> {
        if gens.is_empty() {
            return Err(SchottkyError::Empty);
        }
        let n = gens[0].dim();
        for g in &gens {
            if g.dim() != n {
                return Err(IsometryError::DimensionMismatch(g.dim(), n).into());
            }
            LorentzIsometry::new(g.matrix().clone())?;
        }
        if o.dim() != n {
            return Err(HyperbolicError::DimensionMismatch { expected: n + 1, got: o.dim() + 1 }.into());
        }
        let mut letters = Vec::with_capacity(2 * gens.len());
        for g in &gens {
            letters.push(g.clone());
            letters.push(g.inverse());
        }
        let to_model = LorentzIsometry::translation_to(&o);
        let from_model = to_model.inverse();
        let centered = letters.iter().map(|g| from_model.compose(g).compose(&to_model).matrix().clone()).collect();
        Ok(Self { gens, letters, o, centered, to_model, diagnostics: None })
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn dim(&self) -> usize {
        self.o.dim()
    }

    pub fn base_point(&self) -> &HPoint {
        &self.o
    }

    pub fn generators(&self) -> &[LorentzIsometry] {
        &self.gens
    }

    pub fn letter(&self, a: Letter) -> &LorentzIsometry {
        &self.letters[letter_index(a)]
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn with_base_point(&self, o: HPoint) -> Result<Self, SchottkyError> {
        Self::new(self.gens.clone(), o)
    }

    /// Moves the base point to the joint-displacement minimizer and records the
    /// quasi-isometry constants over the ball of the given radius.
    pub fn with_diagnostics(&self, ball_radius: usize, tol: f64) -> Result<Self, SchottkyError> {
        let (r_joint, x_star) = joint_displacement(&self.gens, &self.o, tol)?;
        let mut rep = self.with_base_point(x_star)?;
        let qi = estimate_qi_constants(&rep, ball_radius);
        rep.diagnostics = Some(Diagnostics { k: qi.k, c_k: qi.c_k, ball_radius, r_joint });
        Ok(rep)
    }

    /// Keeps the base point and computes only the QI constants; `r_joint` is
    /// the supplied value.
    pub fn with_fixed_diagnostics(mut self, ball_radius: usize, r_joint: f64) -> Self {
        let qi = estimate_qi_constants(&self, ball_radius);
        self.diagnostics = Some(Diagnostics { k: qi.k, c_k: qi.c_k, ball_radius, r_joint });
        self
    }

    /// `h ρ h⁻¹` with base point `h·o`. Diagnostics are carried over unchanged.
    pub fn conjugate(&self, h: &LorentzIsometry) -> Result<Self, SchottkyError> {
        let hi = h.inverse();
        let gens = self.gens.iter().map(|g| h.compose(g).compose(&hi)).collect();
        let mut rep = Self::new(gens, h.apply(&self.o))?;
        rep.diagnostics = self.diagnostics;
        Ok(rep)
    }

    pub fn element(&self, w: &ReducedWord) -> LorentzIsometry {
        let mut g = LorentzIsometry::identity(self.dim());
        for &a in w.letters() {
            g = g.compose(self.letter(a));
        }
        g
    }

    /// `ρ(w)·o` in recentered coordinates (base point at the origin).
    pub fn centered_orbit_vector(&self, w: &ReducedWord) -> Vector {
        self.word_state(w)
    }

    pub fn orbit_point(&self, w: &ReducedWord) -> HPoint {
        let v = self.word_state(w);
        self.to_model.apply(&HPoint::renormalized(v))
    }

    /// `d(o, ρ(w)·o)`.
    pub fn orbit_distance(&self, w: &ReducedWord) -> f64 {
        self.word_distance(w)
    }

    /// `ρ(w)·v` for a point `v` in recentered coordinates, applying one
    /// letter at a time.
    pub fn centered_apply(&self, w: &ReducedWord, v: &Vector) -> Vector {
        let mut s = v.clone();
        for &a in w.letters().iter().rev() {
            s = self.extend_left(a, &s);
        }
        s
    }

    /// `ℓ(ρ(w))` as the limit of `d(o, g^{k+1} o) − d(o, g^k o)` for the
    /// cyclic reduction `g` of `w`. Orbit vectors stay well scaled where the
    /// matrix of a long product does not.
    pub fn translation_length(&self, w: &ReducedWord) -> f64 {
        let (g, _) = w.cyclic_reduction();
        if g.is_empty() {
            return 0.0;
        }
        let mut s = self.root();
        let mut prev_d = 0.0;
        let mut prev_step = f64::NAN;
        for _ in 0..200 {
            for &a in g.letters().iter().rev() {
                s = self.extend_left(a, &s);
            }
            let d = self.distance(&s);
            let step = d - prev_d;
            if (step - prev_step).abs() <= 1e-13 * step.abs().max(1.0) {
                return step;
            }
            prev_d = d;
            prev_step = step;
        }
        prev_step
    }

    /// Direction from the base point of `τ_ρ(ζ)`, in recentered coordinates,
    /// from the first `depth` letters of `ζ`.
    pub(crate) fn centered_limit_point(&self, zeta: &InfiniteWord, depth: usize) -> BoundaryPoint {
        let n = self.dim();
        let mut v = Vector::zeros(n + 1);
        v[0] = 1.0;
        for i in (0..depth).rev() {
            let w = &self.centered[letter_index(zeta.letter(i))] * &v;
            v = &w / w[0];
        }
        // Endpoint of the ray from the origin through v.
        v[0] = 0.0;
        let nrm = spatial_norm(&v);
        v /= nrm;
        v[0] = 1.0;
        BoundaryPoint::normalized(v)
    }

    /// `τ_ρ(ζ)` approximated by the ray from `o` through `ρ(g_depth(ζ))·o`.
    pub fn limit_point(&self, zeta: &InfiniteWord, depth: usize) -> Result<BoundaryPoint, SchottkyError> {
        if self.diagnostics.is_none() {
            return Err(SchottkyError::NotSchottky);
        }
        Ok(self.to_model.apply_boundary(&self.centered_limit_point(zeta, depth)))
    }

    pub(crate) fn centered_letter(&self, a: Letter) -> &DMatrix<f64> {
        &self.centered[letter_index(a)]
    }

    /// The translation taking the model origin to the base point.
    pub fn to_model(&self) -> &LorentzIsometry {
        &self.to_model
    }
}

impl WordGeometry for SchottkyRep {
    type State = Vector;

    fn rank(&self) -> usize {
        self.gens.len()
    }

    fn root(&self) -> Vector {
        let mut v = Vector::zeros(self.dim() + 1);
        v[0] = 1.0;
        v
    }

    fn extend_left(&self, a: Letter, s: &Vector) -> Vector {
        let mut v = self.centered_letter(a) * s;
        v[0] = spatial_norm(&v).hypot(1.0);
        v
    }

    fn distance(&self, s: &Vector) -> f64 {
        spatial_norm(s).asinh()
    }
}

/// `(1/K)|w| − K ≤ d(o, w·o) ≤ K|w| + K` over the ball, and the largest distance
/// from an intermediate orbit point `u·o` to the geodesic `[o, uv·o]`.
pub fn estimate_qi_constants<G: WordGeometry>(g: &G, ball_radius: usize) -> QiConstants {
    let r = g.rank();
    let mut table: HashMap<ReducedWord, f64> = HashMap::new();
    let mut k = 1.0f64;
    for w in enumerate_ball(r, ball_radius) {
        let d = g.word_distance(&w);
        let n = w.len() as f64;
        k = k.max(d / (n + 1.0));
        k = k.max(0.5 * (-d + (d * d + 4.0 * n).sqrt()));
        table.insert(w, d);
    }
    let mut c_k = 0.0f64;
    for (w, &l) in &table {
        for split in 1..w.len() {
            let u = w.prefix(split);
            let v = ReducedWord::reduce(&w.letters()[split..]);
            let a = table[&u];
            let b = table[&v];
            c_k = c_k.max(segment_distance_from_lengths(a, b, l));
        }
    }
    QiConstants { k, c_k, ball_radius }
}

/// `max_j d(x, g_j x)` and the individual displacements.
fn displacements(gens: &[LorentzIsometry], x: &HPoint) -> Vec<f64> {
    gens.iter().map(|g| dist(x, &g.apply(x))).collect()
}

fn max_displacement(gens: &[LorentzIsometry], x: &HPoint) -> f64 {
    displacements(gens, x).into_iter().fold(0.0, f64::max)
}

/// Gradient of `x ↦ d(x, g x)`: minus the sum of the unit tangents toward
/// `g x` and `g⁻¹ x`.
fn displacement_gradient(g: &LorentzIsometry, x: &HPoint) -> Vector {
    let gi = g.inverse();
    let mut v = Vector::zeros(x.dim() + 1);
    if let Ok(t) = unit_tangent(x, &g.apply(x)) {
        v -= t;
    }
    if let Ok(t) = unit_tangent(x, &gi.apply(x)) {
        v -= t;
    }
    v
}

/// Tangent frame coordinates `c_i = −B(v, T e_i)`.
fn tangent_coords(frame: &LorentzIsometry, v: &Vector) -> Vec<f64> {
    let n = frame.dim();
    (1..=n).map(|i| -minkowski(v, &frame.matrix().column(i).into_owned())).collect()
}

/// Minimum-norm point of the convex hull of `vs` (Frank–Wolfe with exact line
/// search; exact for one or two vectors).
fn min_norm_hull(vs: &[Vec<f64>]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    if vs.len() == 1 {
        return vs[0].clone();
    }
    if vs.len() == 2 {
        let d: Vec<f64> = vs[0].iter().zip(&vs[1]).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        let t = if dd > 0.0 { (dot(&vs[0], &d) / dd).clamp(0.0, 1.0) } else { 0.0 };
        return vs[0].iter().zip(&vs[1]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    }
    let mut p = vs[0].clone();
    for _ in 0..500 {
        let (j, _) = vs
            .iter()
            .enumerate()
            .map(|(j, v)| (j, dot(v, &p)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let d: Vec<f64> = vs[j].iter().zip(&p).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        if dd == 0.0 {
            break;
        }
        let t = (-dot(&p, &d) / dd).clamp(0.0, 1.0);
        if t == 0.0 {
            break;
        }
        for (pi, di) in p.iter_mut().zip(&d) {
            *pi += t * di;
        }
    }
    p
}

/// Norm of the minimum-norm element of the ε-subdifferential of
/// `x ↦ max_j d(x, g_j x)` at `x`.
pub fn displacement_subgradient_norm(gens: &[LorentzIsometry], x: &HPoint, eps: f64) -> f64 {
    let frame = LorentzIsometry::translation_to(x);
    let ds = displacements(gens, x);
    let f = ds.iter().copied().fold(0.0, f64::max);
    let active: Vec<Vec<f64>> = gens
        .iter()
        .zip(&ds)
        .filter(|(_, &d)| d >= f - eps)
        .map(|(g, _)| tangent_coords(&frame, &displacement_gradient(g, x)))
        .collect();
    let p = min_norm_hull(&active);
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Minimizes `x ↦ max_j d(x, g_j x)` by golden-section line searches along the
/// coordinate geodesics at the current point and along the minimum-norm
/// ε-subgradient direction. Returns `(r_joint, x_star)`.
pub fn joint_displacement(gens: &[LorentzIsometry], start: &HPoint, tol: f64) -> Result<(f64, HPoint), SchottkyError> {
    if gens.is_empty() {
        return Err(SchottkyError::Empty);
    }
    let n = start.dim();
    let tol = tol.max(1e-14);
    let mut x = start.clone();
    let mut fx = max_displacement(gens, &x);
    let mut h = 1.0f64;
    let mut eps = 1e-2 * (1.0 + fx);
    let max_drift = 50.0 + 10.0 * fx;
    for _ in 0..20_000 {
        if !fx.is_finite() {
            return Err(SchottkyError::Diverged);
        }
        let frame = LorentzIsometry::translation_to(&x);
        let ds = displacements(gens, &x);
        let active: Vec<Vec<f64>> = gens
            .iter()
            .zip(&ds)
            .filter(|(_, &d)| d >= fx - eps)
            .map(|(g, _)| tangent_coords(&frame, &displacement_gradient(g, &x)))
            .collect();
        let p = min_norm_hull(&active);
        let pn = p.iter().map(|c| c * c).sum::<f64>().sqrt();

        let mut dirs: Vec<(Vector, f64, f64)> = Vec::with_capacity(n + 1);
        if pn > 0.0 {
            let mut u = Vector::zeros(n + 1);
            for (i, c) in p.iter().enumerate() {
                u -= frame.matrix().column(i + 1) * (c / pn);
            }
            dirs.push((u, 0.0, 2.0 * h));
        }
        for i in 1..=n {
            dirs.push((frame.matrix().column(i).into_owned(), -h, h));
        }
        let mut best = (fx, x.clone());
        for (u, a, b) in &dirs {
            let (t, ft) = golden_section(|t| max_displacement(gens, &exp_map(&x, u, t)), *a, *b, 1e-3 * tol, 200);
            if ft < best.0 {
                best = (ft, exp_map(&x, u, t));
            }
        }
        let gain = fx - best.0;
        if gain > 1e-15 * (1.0 + fx) {
            let step = dist(&x, &best.1);
            x = best.1;
            fx = best.0;
            h = (2.0 * step).clamp(tol, 4.0);
        } else {
            h *= 0.5;
            eps *= 0.5;
        }
        if dist(start, &x) > max_drift {
            return Err(SchottkyError::Diverged);
        }
        if h < tol && eps < tol {
            break;
        }
    }
    Ok((fx, x))
}

/// A visual-metric ball in `∂H^n` assigned to a letter: the attracting region
/// of that letter.
#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyDisk {
    pub letter: Letter,
    pub center: BoundaryPoint,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyDisks {
    /// Base point of the visual metric in which the radii are measured.
    pub reference: HPoint,
    pub disks: Vec<SchottkyDisk>,
}

const DISK_MARGIN: f64 = 1e-12;

impl SchottkyDisks {
    /// Checks that each letter of rank `r` has one disk and that closures are
    /// pairwise disjoint.
    pub fn new(reference: HPoint, disks: Vec<SchottkyDisk>, r: usize) -> Result<Self, SchottkyError> {
        if disks.len() != 2 * r {
            return Err(SchottkyError::BadDisks(format!("expected {} disks, got {}", 2 * r, disks.len())));
        }
        let mut seen = vec![false; 2 * r];
        for d in &disks {
            if d.letter == 0 || d.letter.unsigned_abs() as usize > r {
                return Err(SchottkyError::BadDisks(format!("letter {} out of range", d.letter)));
            }
            let i = letter_index(d.letter);
            if seen[i] {
                return Err(SchottkyError::BadDisks(format!("letter {} repeated", d.letter)));
            }
            seen[i] = true;
            if !(d.radius > 0.0 && d.radius < 1.0) {
                return Err(SchottkyError::BadDisks(format!("radius {} not in (0, 1)", d.radius)));
            }
        }
        for i in 0..disks.len() {
            for j in (i + 1)..disks.len() {
                let sep = visual_dist(&disks[i].center, &disks[j].center, &reference);
                if sep <= disks[i].radius + disks[j].radius + DISK_MARGIN {
                    return Err(SchottkyError::DisjointnessViolated(i, j));
                }
            }
        }
        Ok(Self { reference, disks })
    }

    pub fn disk(&self, a: Letter) -> &SchottkyDisk {
        self.disks.iter().find(|d| d.letter == a).expect("validated disks cover the alphabet")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingPongCertificate {
    pub passed: bool,
    /// Smallest `radius − d(image, center)` over all samples and letters.
    pub worst_margin: f64,
    pub samples: usize,
}

/// Samples the complement of the disk of `a⁻¹` (including its rim) and checks
/// that `ρ(a)` maps every sample into the disk of `a`.
pub fn ping_pong_check(rep: &SchottkyRep, disks: &SchottkyDisks, n_samples: usize) -> Result<PingPongCertificate, SchottkyError> {
    let r = rep.rank();
    let check = SchottkyDisks::new(disks.reference.clone(), disks.disks.clone(), r)?;
    let o = &check.reference;
    let n = o.dim();
    let t = LorentzIsometry::translation_to(o);
    let to_boundary = |u: &[f64]| t.apply_boundary(&BoundaryPoint::from_direction(u).expect("nonzero"));
    let mut sphere: Vec<BoundaryPoint> = Vec::with_capacity(n_samples);
    if n == 2 {
        for k in 0..n_samples {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
            sphere.push(to_boundary(&[phi.cos(), phi.sin()]));
        }
    } else {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..n_samples {
            let b = crate::sampling::random_boundary(&mut rng, n);
            sphere.push(to_boundary(b.direction()));
        }
    }
    let ti = t.inverse();
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for disk in &check.disks {
        let a = disk.letter;
        let src = check.disk(-a);
        let g = rep.letter(a);
        let mut samples: Vec<BoundaryPoint> =
            sphere.iter().filter(|z| visual_dist(z, &src.center, o) >= src.radius).cloned().collect();
        // Rim of the source disk: directions at chord distance 2R from its center.
        let c = ti.apply_boundary(&src.center);
        let alpha = 2.0 * src.radius.asin();
        let cdir: Vec<f64> = c.direction().to_vec();
        let rim_dirs = rim_directions(&cdir, alpha, if n == 2 { 2 } else { 32.max(n_samples / 16) });
        for d in rim_dirs {
            samples.push(to_boundary(&d));
        }
        for z in &samples {
            let img = g.apply_boundary(z);
            let m = disk.radius - visual_dist(&img, &disk.center, o);
            worst = worst.min(m);
            count += 1;
        }
    }
    Ok(PingPongCertificate { passed: worst > 0.0, worst_margin: worst, samples: count })
}

/// Unit vectors at angle `alpha` from the unit vector `c`.
fn rim_directions(c: &[f64], alpha: f64, k: usize) -> Vec<Vec<f64>> {
    let n = c.len();
    // Orthonormal complement of c by Gram–Schmidt on the standard basis.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let proj: f64 = e.iter().zip(c).map(|(a, b)| a * b).sum();
        for (ej, cj) in e.iter_mut().zip(c) {
            *ej -= proj * cj;
        }
        for b in &basis {
            let p: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= p * bj;
            }
        }
        let nrm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            basis.push(e.iter().map(|x| x / nrm).collect());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    let mut out = Vec::new();
    for j in 0..k {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
        let w: Vec<f64> = if basis.len() == 1 {
            basis[0].iter().map(|x| x * phi.cos().signum()).collect()
        } else {
            basis[0].iter().zip(&basis[1]).map(|(a, b)| a * phi.cos() + b * phi.sin()).collect()
        };
        out.push(c.iter().zip(&w).map(|(ci, wi)| alpha.cos() * ci + alpha.sin() * wi).collect());
    }
    out
}
