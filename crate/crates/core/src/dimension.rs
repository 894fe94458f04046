//! Hausdorff dimension of limit sets: the Busemann potential and its Birkhoff
//! sums, the critical exponent of word sums, and a box-counting cross-check.

use std::collections::HashSet;

use rayon::prelude::*;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance_table, DistanceTable, MetricStub, WordGeometry};
use crate::hyperbolic::{minkowski, BoundaryPoint, Vector};
use crate::isometry::{IsometryError, LorentzIsometry};
use crate::numeric::{aitken, brent, linear_fit, log_sum_exp};
use crate::schottky::{estimate_qi_constants, SchottkyError, SchottkyRep};
use crate::words::{enumerate_reduced, index_letter, InfiniteWord, Letter, ReducedWord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("max_depth = {0} is below the minimum of 4")]
    DepthTooSmall(usize),
    #[error("no sign change of the word-sum ratio at depth {0}")]
    NoBracket(usize),
    #[error("need at least 4 scales spanning 1.5 decades")]
    InsufficientScales,
    #[error("sample depth {0} is below the minimum of 8")]
    SampleDepthTooSmall(usize),
    #[error("perturbation at eps = {0} leaves the Schottky regime")]
    LeftSchottkyRegime(f64),
    #[error("perturbation has {0} directions for {1} generators")]
    BadPerturbation(usize, usize),
    #[error(transparent)]
    Schottky(#[from] SchottkyError),
    #[error(transparent)]
    Isometry(#[from] IsometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub n: usize,
    pub delta_n: f64,
    /// `|δ_n − δ_{n−1}|` (NaN at n = 1).
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureResult {
    pub delta: f64,
    pub depth_used: usize,
    pub bracket: (f64, f64),
    pub table: Vec<DepthRow>,
    pub accelerated: bool,
}

impl PressureResult {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// `ln Z_n(δ) − ln Z_{n−1}(δ)` with `Z_n(δ) = Σ_{|w|=n} e^{−δ d(o, w·o)}`.
fn log_ratio(table: &DistanceTable, n: usize, delta: f64) -> f64 {
    let a: Vec<f64> = table.levels[n].iter().map(|d| -delta * d).collect();
    let b: Vec<f64> = table.levels[n - 1].iter().map(|d| -delta * d).collect();
    log_sum_exp(&a) - log_sum_exp(&b)
}

/// Mean of `d` at depth `n` under the weights `e^{−δ d}`.
fn gibbs_mean(table: &DistanceTable, n: usize, delta: f64) -> f64 {
    let ds = &table.levels[n];
    let m = ds.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = ds.iter().map(|d| (-delta * (d - m)).exp()).collect();
    let wd: Vec<f64> = ds.iter().zip(&w).map(|(d, w)| d * w).collect();
    crate::numeric::pairwise_sum(&wd) / crate::numeric::pairwise_sum(&w)
}

/// Critical exponent from the roots `δ_n` of `Z_n(δ) = Z_{n−1}(δ)`, Aitken
/// accelerated, with a bracket widened by `2 C_K δ / ⟨d⟩_n`, the shift produced
/// by a bounded `2 C_K` error in the exponent spread over the mean orbit length.
pub fn hdim_pressure_from_table(table: &DistanceTable, c_k: f64, tol: f64) -> Result<PressureResult, DimensionError> {
    let max_depth = table.depth();
    if max_depth < 4 {
        return Err(DimensionError::DepthTooSmall(max_depth));
    }
    let r = table.rank as f64;
    let xtol = (1e-3 * tol).max(1e-15);
    let mut rows: Vec<DepthRow> = Vec::with_capacity(max_depth);
    for n in 1..=max_depth {
        let f = |d: f64| log_ratio(table, n, d);
        let lo = 1e-6;
        if !(f(lo) > 0.0) {
            return Err(DimensionError::NoBracket(n));
        }
        let dmin = table.min_at(n).max(1e-300);
        let mut hi = ((n as f64) * (2.0 * r - 1.0).ln() + (2.0 * r).ln()) / dmin;
        let mut ok = false;
        for _ in 0..80 {
            if f(hi) < 0.0 {
                ok = true;
                break;
            }
            hi *= 2.0;
        }
        if !ok {
            return Err(DimensionError::NoBracket(n));
        }
        let root = brent(f, lo, hi, xtol, 300).ok_or(DimensionError::NoBracket(n))?;
        let gap = rows.last().map_or(f64::NAN, |p: &DepthRow| (root.x - p.delta_n).abs());
        rows.push(DepthRow { n, delta_n: root.x, gap });
    }
    let k = rows.len();
    let (d0, d1, d2) = (rows[k - 3].delta_n, rows[k - 2].delta_n, rows[k - 1].delta_n);
    let acc = aitken(d0, d1, d2);
    let delta = acc.unwrap_or(d2);
    let width = 2.0 * c_k * d2 / gibbs_mean(table, max_depth, d2).max(1e-300);
    let lo = d1.min(d2).min(delta) - width;
    let hi = d1.max(d2).max(delta) + width;
    Ok(PressureResult { delta, depth_used: max_depth, bracket: (lo, hi), table: rows, accelerated: acc.is_some() })
}

/// Critical exponent of a Schottky representation at its base point.
pub fn hdim_pressure(rep: &SchottkyRep, max_depth: usize, tol: f64) -> Result<PressureResult, DimensionError> {
    let diag = rep.diagnostics().ok_or(SchottkyError::NotSchottky)?;
    if max_depth < 4 {
        return Err(DimensionError::DepthTooSmall(max_depth));
    }
    let table = distance_table(rep, max_depth);
    hdim_pressure_from_table(&table, diag.c_k, tol)
}

/// Critical exponent for any word geometry, with `C_K` estimated over a ball
/// of radius `min(max_depth, 8)`.
pub fn hdim_pressure_geometry<G: WordGeometry>(g: &G, max_depth: usize, tol: f64) -> Result<PressureResult, DimensionError> {
    if max_depth < 4 {
        return Err(DimensionError::DepthTooSmall(max_depth));
    }
    let qi = estimate_qi_constants(g, max_depth.min(8));
    let table = distance_table(g, max_depth);
    hdim_pressure_from_table(&table, qi.c_k, tol)
}

/// The potential `f_ρ(ζ) = B(ρ(ζ₁)o, o, τ_ρ ζ)`, with limit points evaluated
/// from `depth` letters.
#[derive(Debug, Clone, Copy)]
pub struct Potential<'a> {
    pub rep: &'a SchottkyRep,
    pub depth: usize,
}

impl<'a> Potential<'a> {
    pub fn new(rep: &'a SchottkyRep, depth: usize) -> Result<Self, DimensionError> {
        rep.diagnostics().ok_or(SchottkyError::NotSchottky)?;
        Ok(Self { rep, depth })
    }
}

pub fn potential_eval(p: &Potential<'_>, zeta: &InfiniteWord) -> f64 {
    birkhoff_sum(p, zeta, 1)
}

/// `S_n f(ζ) = B(ρ(g_n)o, o, τζ)`, evaluated after moving by `ρ(g_n)⁻¹`:
/// `−ln B(ρ(g_n⁻¹)o, τ(Sⁿζ))` in coordinates centered at `o`. This avoids the
/// cancellation of forming `B(ρ(g_n)o, τζ)` directly.
pub fn birkhoff_sum(p: &Potential<'_>, zeta: &InfiniteWord, n: usize) -> f64 {
    let eta = p.rep.centered_limit_point(&zeta.shift(n), p.depth);
    let g_inv = zeta.truncate(n).inverse();
    let v = p.rep.centered_orbit_vector(&g_inv);
    // B(o, η) = 1 for the origin and v0(η) = 1
    -minkowski(&v, eta.coords()).ln()
}

/// Sum of `f ∘ S^k` for `k < n`, one potential evaluation per shift.
pub fn birkhoff_sum_by_shifts(p: &Potential<'_>, zeta: &InfiniteWord, n: usize) -> f64 {
    (0..n).map(|k| potential_eval(p, &zeta.shift(k))).sum()
}

/// Limit point of `ζ` in coordinates centered at the base point, exposed for
/// cylinder and ball comparisons.
pub fn centered_limit_point(rep: &SchottkyRep, zeta: &InfiniteWord, depth: usize) -> BoundaryPoint {
    rep.centered_limit_point(zeta, depth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub delta: f64,
    pub fit_r2: f64,
    pub counts: Vec<(f64, usize)>,
}

fn check_scales(scales: &[f64]) -> Result<(), DimensionError> {
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(0.0, f64::max);
    if scales.len() < 4 || !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(DimensionError::InsufficientScales);
    }
    Ok(())
}

fn fit_counts(counts: Vec<(f64, usize)>) -> BoxCount {
    let xs: Vec<f64> = counts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).ln()).collect();
    match linear_fit(&xs, &ys) {
        Some(f) => BoxCount { delta: f.slope, fit_r2: f.r2, counts },
        None => BoxCount { delta: 0.0, fit_r2: 0.0, counts },
    }
}

/// Letters used to approximate the limit point of a repeated tail.
const TAIL_LETTERS: usize = 40;

/// Limit points of all cylinders of one depth, arranged as the cylinder tree.
/// Visual distances are evaluated from the longest common prefix `u` as
/// `d_q(ξ', ζ')` with `q = ρ(u)⁻¹o` and `ξ', ζ'` the tails, which stays exact
/// far below the resolution of boundary coordinates at the base point.
struct CylinderTree {
    depth: usize,
    width: usize,
    leaves: Vec<Vec<Letter>>,
    /// `tails[(i·depth + k)·width ..]`: the tail of leaf `i` after `k` letters.
    tails: Vec<f64>,
    /// `ancestors[i·(depth + 1) + k]`: node of the length-`k` prefix of leaf `i`.
    ancestors: Vec<usize>,
    nodes: Vec<CylinderNode>,
}

struct CylinderNode {
    first: usize,
    children: Vec<usize>,
    /// `ρ(u)⁻¹o` in centered coordinates.
    q: Vector,
    /// Bound on the distance from the first leaf to any leaf below.
    radius: f64,
}

impl CylinderTree {
    fn new(rep: &SchottkyRep, depth: usize) -> Self {
        let width = rep.dim() + 1;
        let leaves: Vec<Vec<Letter>> = enumerate_reduced(rep.rank(), depth).map(|w| w.letters().to_vec()).collect();
        let tails_per_leaf: Vec<Vec<f64>> = leaves
            .par_iter()
            .map(|w| {
                let z = InfiniteWord::repeat_last(&ReducedWord::reduce(w)).expect("nonempty word");
                let mut v = rep.centered_limit_point(&z.shift(depth), TAIL_LETTERS).coords().clone();
                let mut out = vec![0.0; depth * width];
                for k in (0..depth).rev() {
                    v = rep.centered_letter(w[k]) * &v;
                    v /= v[0];
                    out[k * width..(k + 1) * width].copy_from_slice(v.as_slice());
                }
                out
            })
            .collect();
        let tails = tails_per_leaf.concat();

        let mut nodes = Vec::new();
        let mut ancestors = vec![0; leaves.len() * (depth + 1)];
        // leaves are in lexicographic order, so every prefix spans a contiguous range
        let mut stack: Vec<usize> = Vec::new();
        for (i, w) in leaves.iter().enumerate() {
            let keep = if i == 0 { 0 } else { 1 + (0..depth).take_while(|&k| leaves[i - 1][k] == w[k]).count() };
            stack.truncate(keep);
            for k in keep..=depth {
                let id = nodes.len();
                let u = ReducedWord::reduce(&w[..k]);
                nodes.push(CylinderNode { first: i, children: Vec::new(), q: rep.centered_orbit_vector(&u.inverse()), radius: 0.0 });
                if let Some(&parent) = stack.last() {
                    nodes[parent].children.push(id);
                }
                stack.push(id);
            }
            for k in 0..=depth {
                ancestors[i * (depth + 1) + k] = stack[k];
            }
        }
        let mut tree = Self { depth, width, leaves, tails, ancestors, nodes };
        for id in (0..tree.nodes.len()).rev() {
            let first = tree.nodes[id].first;
            let r = tree.nodes[id]
                .children
                .iter()
                .map(|&c| tree.leaf_dist(first, tree.nodes[c].first) + tree.nodes[c].radius)
                .fold(0.0, f64::max);
            tree.nodes[id].radius = r;
        }
        tree
    }

    fn tail(&self, i: usize, k: usize) -> &[f64] {
        let at = (i * self.depth + k) * self.width;
        &self.tails[at..at + self.width]
    }

    /// `d_q(ξ, ζ)² = B(ξ, ζ) / (2 B(q, ξ) B(q, ζ))`.
    fn leaf_dist(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let k = (0..self.depth).take_while(|&k| self.leaves[a][k] == self.leaves[b][k]).count();
        let q = &self.nodes[self.ancestors[a * (self.depth + 1) + k]].q;
        let (x, y) = (self.tail(a, k), self.tail(b, k));
        let form = |u: &[f64], v: &[f64]| u[0] * v[0] - u[1..].iter().zip(&v[1..]).map(|(p, r)| p * r).sum::<f64>();
        let qs = q.as_slice();
        (form(x, y) / (2.0 * form(qs, x) * form(qs, y))).max(0.0).sqrt()
    }

    fn covered(&self, node: usize, p: usize, eps: f64, centers: &[u32]) -> bool {
        if centers[node] == 0 {
            return false;
        }
        let n = &self.nodes[node];
        let d = self.leaf_dist(p, n.first);
        if n.children.is_empty() {
            return d <= eps;
        }
        if d - n.radius > eps {
            return false;
        }
        n.children.iter().any(|&c| self.covered(c, p, eps, centers))
    }

    /// Greedy cover in lexicographic order by visual balls of radius `eps`.
    fn greedy_cover(&self, eps: f64) -> usize {
        let mut centers = vec![0u32; self.nodes.len()];
        let mut count = 0;
        for i in 0..self.leaves.len() {
            if !self.covered(0, i, eps, &centers) {
                count += 1;
                for k in 0..=self.depth {
                    centers[self.ancestors[i * (self.depth + 1) + k]] += 1;
                }
            }
        }
        count
    }
}

/// Box-counting dimension of the limit set from the limit points of every
/// cylinder of length `sample_depth`.
pub fn hdim_boxcount(rep: &SchottkyRep, sample_depth: usize, scales: &[f64]) -> Result<BoxCount, DimensionError> {
    rep.diagnostics().ok_or(SchottkyError::NotSchottky)?;
    if sample_depth < 8 {
        return Err(DimensionError::SampleDepthTooSmall(sample_depth));
    }
    check_scales(scales)?;
    let tree = CylinderTree::new(rep, sample_depth);
    let counts = scales.par_iter().map(|&e| (e, tree.greedy_cover(e))).collect();
    Ok(fit_counts(counts))
}

/// Scales `2^{−k}` between the sizes of cylinders of length 1 and
/// `sample_depth − 3`, estimated from the mean generator displacement.
pub fn boxcount_scales(rep: &SchottkyRep, sample_depth: usize, count: usize) -> Vec<f64> {
    let r = rep.rank();
    let mean = (0..2 * r).map(|i| rep.orbit_distance(&ReducedWord::reduce(&[index_letter(i)]))).sum::<f64>() / (2 * r) as f64;
    let to_k = |levels: f64| levels * mean / std::f64::consts::LN_2;
    let (k0, k1) = (to_k(1.0), to_k(sample_depth.saturating_sub(3).max(2) as f64));
    let count = count.max(4);
    (0..count).map(|j| 2f64.powf(-(k0 + (k1 - k0) * j as f64 / (count - 1) as f64).round())).collect()
}

/// Box counting for the metric stub, whose boundary carries the ultrametric
/// `e^{−c·(common prefix length)}`: balls of radius ε are the cylinders of
/// length `⌈ln(1/ε)/c⌉`.
pub fn hdim_boxcount_stub(stub: &MetricStub, sample_depth: usize, scales: &[f64]) -> Result<BoxCount, DimensionError> {
    if sample_depth < 8 {
        return Err(DimensionError::SampleDepthTooSmall(sample_depth));
    }
    check_scales(scales)?;
    let words: Vec<ReducedWord> = enumerate_reduced(stub.rank, sample_depth).collect();
    let counts = scales
        .iter()
        .map(|&e| {
            let k = (((1.0 / e).ln() / stub.c).ceil().max(0.0) as usize).min(sample_depth);
            let prefixes: HashSet<ReducedWord> = words.iter().map(|w| w.prefix(k)).collect();
            (e, prefixes.len())
        })
        .collect();
    Ok(fit_counts(counts))
}

/// Direction of a one-parameter deformation.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// `ρ_ε(s_j) = T exp(ε X_j) T⁻¹ ρ(s_j)`, one Lie algebra element per
    /// generator, with `T` the translation taking the origin to the base point.
    /// Elements given at the origin would be amplified by the distance to `o`.
    Generators(Vec<DMatrix<f64>>),
    /// `ρ_ε = h_ε ρ h_ε⁻¹`, `h_ε = exp(ε Y)`.
    Conjugation(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenRow {
    pub eps: f64,
    pub delta: f64,
    pub bracket_width: f64,
}

pub fn perturbed(rep0: &SchottkyRep, dir: &Perturbation, eps: f64, tol: f64) -> Result<SchottkyRep, DimensionError> {
    let diag = rep0.diagnostics().ok_or(SchottkyError::NotSchottky)?;
    match dir {
        Perturbation::Generators(xs) => {
            if xs.len() != rep0.rank() {
                return Err(DimensionError::BadPerturbation(xs.len(), rep0.rank()));
            }
            let gens: Result<Vec<LorentzIsometry>, IsometryError> = xs
                .iter()
                .zip(rep0.generators())
                .map(|(x, g)| {
                    let t = rep0.to_model();
                    Ok(t.compose(&LorentzIsometry::exp_algebra(&(x * eps))?).compose(&t.inverse()).compose(g))
                })
                .collect();
            let rep = SchottkyRep::new(gens?, rep0.base_point().clone())?;
            rep.with_diagnostics(diag.ball_radius, tol).map_err(|_| DimensionError::LeftSchottkyRegime(eps))
        }
        Perturbation::Conjugation(y) => {
            let h = LorentzIsometry::exp_algebra(&(y * eps))?;
            Ok(rep0.conjugate(&h)?)
        }
    }
}

/// `δ(ε)` along a deformation. `ε = 0` returns the unperturbed value.
pub fn bowen_continuity_probe(
    rep0: &SchottkyRep,
    dir: &Perturbation,
    eps_list: &[f64],
    max_depth: usize,
    tol: f64,
) -> Result<Vec<BowenRow>, DimensionError> {
    let k0 = rep0.diagnostics().ok_or(SchottkyError::NotSchottky)?.k;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let rep = if eps == 0.0 { rep0.clone() } else { perturbed(rep0, dir, eps, tol)? };
        let k = rep.diagnostics().map_or(f64::INFINITY, |d| d.k);
        if !(k <= 2.0 * k0 + 1.0) {
            return Err(DimensionError::LeftSchottkyRegime(eps));
        }
        let res = hdim_pressure(&rep, max_depth, tol).map_err(|e| match e {
            DimensionError::NoBracket(_) => DimensionError::LeftSchottkyRegime(eps),
            other => other,
        })?;
        rows.push(BowenRow { eps, delta: res.delta, bracket_width: res.bracket_width() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_closed_form() {
        for &(r, c) in &[(2usize, 1.0f64), (2, 0.5), (3, 2.0)] {
            let res = hdim_pressure_geometry(&MetricStub { rank: r, c }, 8, 1e-10).unwrap();
            let exact = ((2 * r - 1) as f64).ln() / c;
            assert!((res.delta - exact).abs() < 1e-9, "r={r} c={c}: {} vs {exact}", res.delta);
            assert!(res.bracket.0 <= res.delta && res.delta <= res.bracket.1);
        }
    }

    #[test]
    fn depth_too_small() {
        let e = hdim_pressure_geometry(&MetricStub { rank: 2, c: 1.0 }, 3, 1e-8);
        assert_eq!(e, Err(DimensionError::DepthTooSmall(3)));
    }

    #[test]
    fn stub_boxcount_slope() {
        let stub = MetricStub { rank: 2, c: 1.0 };
        let scales: Vec<f64> = (1..=8).map(|k| (-(k as f64) + 0.5).exp()).collect();
        let b = hdim_boxcount_stub(&stub, 8, &scales).unwrap();
        assert!((b.delta - 3f64.ln()).abs() < 0.05, "{}", b.delta);
        assert!(hdim_boxcount_stub(&stub, 8, &scales[..3]).is_err());
    }

    #[test]
    fn cylinder_distances_match_direct_chords() {
        let m = crate::mcmullen::mcmullen_family(1.0).unwrap();
        let tree = CylinderTree::new(&m.rep, 3);
        for a in 0..tree.leaves.len() {
            for b in 0..tree.leaves.len() {
                let za = InfiniteWord::repeat_last(&ReducedWord::reduce(&tree.leaves[a])).unwrap();
                let zb = InfiniteWord::repeat_last(&ReducedWord::reduce(&tree.leaves[b])).unwrap();
                let (pa, pb) = (m.rep.centered_limit_point(&za, 60), m.rep.centered_limit_point(&zb, 60));
                let chord: f64 = pa.direction().iter().zip(pb.direction()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                assert!((tree.leaf_dist(a, b) - 0.5 * chord).abs() < 1e-9, "{a} {b}");
            }
        }
        assert_eq!(tree.greedy_cover(1.0), 1);
        assert_eq!(tree.greedy_cover(1e-300), tree.leaves.len());
    }
}
