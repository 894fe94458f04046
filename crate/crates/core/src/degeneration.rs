//! Degenerating families against their limit tree: lifts of finite subtrees
//! into `H^N`, the gap between the rescaled power kernel and the tree kernel,
//! alignment of the two realizations, and the headline sweep of the
//! three-circle family.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::{hdim_pressure, DimensionError};
use crate::geometry::WordGeometry;
use crate::hyperbolic::{dist, geodesic_point, HPoint, HyperbolicError};
use crate::kernels::{gram_realize, kernel_power, kernel_tree, match_isometry, KernelError};
use crate::mcmullen::mcmullen_family;
use crate::numeric::{linear_fit, ln_cosh};
use crate::schottky::{SchottkyError, SchottkyRep};
use crate::tree::{MetricGraph, Step, TreeAction};
use crate::words::{alphabet, enumerate_ball, Letter, ReducedWord};

/// Cap on the radius of `Γ_l`.
pub const GAMMA_CAP: usize = 4;
pub const DEFAULT_SUBDIVISION: usize = 2;
pub const DEFAULT_S: f64 = 1.0;
/// Pivot tolerance used when matching realizations.
pub const ALIGN_PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegenerationError {
    #[error("tree action has rank {tree} but the representation has rank {rep}")]
    RankMismatch { tree: usize, rep: usize },
    #[error("t = s / r_joint = {0} exceeds 1")]
    TOutOfRange(f64),
    #[error("representation carries no joint displacement")]
    MissingDiagnostics,
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Schottky(#[from] SchottkyError),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
}

/// A point of the tree: a reduced edge path from `o`, possibly ending part
/// way along one more edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePoint {
    pub steps: Vec<Step>,
    pub partial: Option<(Step, f64)>,
}

impl TreePoint {
    fn len(&self, g: &MetricGraph) -> f64 {
        g.path_len(&self.steps) + self.partial.map_or(0.0, |(_, x)| x)
    }
}

pub fn tree_point_dist(g: &MetricGraph, p: &TreePoint, q: &TreePoint) -> f64 {
    let k = p.steps.iter().zip(&q.steps).take_while(|(a, b)| a == b).count();
    let mut common = g.path_len(&p.steps[..k]);
    // the next pieces either share an edge direction or diverge
    let next = |x: &TreePoint| -> Option<(Step, f64)> {
        if k < x.steps.len() {
            Some((x.steps[k], g.step_len(x.steps[k])))
        } else {
            x.partial
        }
    };
    if let (Some((a, la)), Some((b, lb))) = (next(p), next(q)) {
        if a == b {
            common += la.min(lb);
        }
    }
    (p.len(g) + q.len(g) - 2.0 * common).max(0.0)
}

/// Tree point at arclength `tau` along the loop of `a` starting from `w·o`.
fn tree_point_on_edge(action: &TreeAction, w: &ReducedWord, a: Letter, tau: f64) -> TreePoint {
    let g = &action.graph;
    let mut path = action.word_path(w);
    let mut left = tau;
    for &s in action.letter_loop(a) {
        let l = g.step_len(s);
        if left >= l - 1e-15 * l.max(1.0) {
            if path.last() == Some(&-s) {
                path.pop();
            } else {
                path.push(s);
            }
            left -= l;
            if left.abs() <= 1e-15 {
                return TreePoint { steps: path, partial: None };
            }
            continue;
        }
        if left <= 0.0 {
            return TreePoint { steps: path, partial: None };
        }
        if path.last() == Some(&-s) {
            let back = path.pop().unwrap();
            return TreePoint { steps: path, partial: Some((back, l - left)) };
        }
        return TreePoint { steps: path, partial: Some((s, left)) };
    }
    TreePoint { steps: path, partial: None }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointLabel {
    Vertex(String),
    /// `k`-th of the subdivision points on the edge from `w·o` to `wa·o`.
    Edge { word: String, letter: Letter, k: usize },
}

/// A lifted point `ρ(word)·local` with `local` in recentered coordinates
/// near the base point. Distances between anchored points are computed as
/// `d(y, ρ(g⁻¹h)·z)`, which avoids the cancellation in `B(x, y)` for points
/// far from the base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchored {
    pub word: ReducedWord,
    pub local: HPoint,
}

pub fn anchored_dist(rep: &SchottkyRep, p: &Anchored, q: &Anchored) -> f64 {
    let k = p.word.inverse().mul(&q.word);
    let v = rep.centered_apply(&k, q.local.coords());
    dist(&p.local, &HPoint::renormalized(v))
}

#[derive(Debug, Clone)]
pub struct LiftPlan {
    pub action: TreeAction,
    pub rep: SchottkyRep,
    pub theta: Option<f64>,
    pub l: usize,
    pub subdivision: usize,
    pub labels: Vec<PointLabel>,
    pub tree_points: Vec<TreePoint>,
    /// Lifted points in model coordinates.
    pub lift: Vec<HPoint>,
    pub anchors: Vec<Anchored>,
    pub gamma: Vec<ReducedWord>,
}

struct PointSet {
    labels: Vec<PointLabel>,
    tree: Vec<TreePoint>,
    anchors: Vec<Anchored>,
}

fn model_point(rep: &SchottkyRep, p: &Anchored) -> HPoint {
    rep.to_model().apply(&HPoint::renormalized(rep.centered_apply(&p.word, p.local.coords())))
}

/// Orbit vertices of word length `≤ radius` and `subdivision` points on each
/// edge between them, on both sides. Edge points are anchored at the nearer
/// endpoint.
fn point_set(action: &TreeAction, rep: &SchottkyRep, radius: usize, subdivision: usize) -> Result<PointSet, DegenerationError> {
    let mut set = PointSet { labels: Vec::new(), tree: Vec::new(), anchors: Vec::new() };
    let letters = alphabet(action.rank());
    let origin = HPoint::origin(rep.dim());
    for w in enumerate_ball(action.rank(), radius) {
        set.labels.push(PointLabel::Vertex(w.to_string()));
        set.tree.push(TreePoint { steps: action.word_path(&w), partial: None });
        set.anchors.push(Anchored { word: w, local: origin.clone() });
    }
    if subdivision == 0 || radius == 0 {
        return Ok(set);
    }
    for w in enumerate_ball(action.rank(), radius - 1) {
        for &a in &letters {
            if w.letters().last() == Some(&-a) {
                continue;
            }
            let la = ReducedWord::reduce(&[a]);
            let wa = w.mul(&la);
            let dt: f64 = action.graph.path_len(action.letter_loop(a));
            for k in 1..=subdivision {
                let f = k as f64 / (subdivision + 1) as f64;
                set.labels.push(PointLabel::Edge { word: w.to_string(), letter: a, k });
                set.tree.push(tree_point_on_edge(action, &w, a, f * dt));
                let (anchor, step, frac) = if f <= 0.5 { (w.clone(), la.clone(), f) } else { (wa.clone(), la.inverse(), 1.0 - f) };
                let end = HPoint::renormalized(rep.centered_orbit_vector(&step));
                let local = geodesic_point(&origin, &end, frac * end.dist_origin())?;
                set.anchors.push(Anchored { word: anchor, local });
            }
        }
    }
    Ok(set)
}

/// Lift of the word ball of radius `l`, with `subdivision` points per edge,
/// into `H^N` by the orbit map of `rep` at its base point.
pub fn build_lift(action: &TreeAction, rep: &SchottkyRep, l: usize, subdivision: usize) -> Result<LiftPlan, DegenerationError> {
    if action.rank() != rep.rank() {
        return Err(DegenerationError::RankMismatch { tree: action.rank(), rep: rep.rank() });
    }
    let set = point_set(action, rep, l, subdivision)?;
    let gamma = enumerate_ball(rep.rank(), l.min(GAMMA_CAP)).collect();
    Ok(LiftPlan {
        action: action.clone(),
        rep: rep.clone(),
        theta: None,
        l,
        subdivision,
        labels: set.labels,
        tree_points: set.tree,
        lift: set.anchors.iter().map(|p| model_point(rep, p)).collect(),
        anchors: set.anchors,
        gamma,
    })
}

impl LiftPlan {
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn r_joint(&self) -> Result<f64, DegenerationError> {
        self.rep.diagnostics().map(|d| d.r_joint).ok_or(DegenerationError::MissingDiagnostics)
    }

    fn t_for(&self, s: f64) -> Result<f64, DegenerationError> {
        let t = s / self.r_joint()?;
        if !(t > 0.0 && t <= 1.0) {
            return Err(DegenerationError::TOutOfRange(t));
        }
        Ok(t)
    }

    /// Index of the vertex with the given word, if it lies in the plan.
    pub fn vertex_index(&self, w: &ReducedWord) -> Option<usize> {
        let key = PointLabel::Vertex(w.to_string());
        self.labels.iter().position(|l| *l == key)
    }

    /// `(d_H / r, d_T)` for every pair of orbit vertices.
    pub fn rescaled_vertex_distances(&self) -> Result<Vec<VertexPair>, DegenerationError> {
        let r = self.r_joint()?;
        let verts: Vec<usize> = (0..self.labels.len()).filter(|&i| matches!(self.labels[i], PointLabel::Vertex(_))).collect();
        let mut rows = Vec::new();
        for (a, &i) in verts.iter().enumerate() {
            for &j in &verts[a + 1..] {
                let dh = anchored_dist(&self.rep, &self.anchors[i], &self.anchors[j]);
                let dt = tree_point_dist(&self.action.graph, &self.tree_points[i], &self.tree_points[j]);
                rows.push(VertexPair { i, j, rescaled: dh / r, tree: dt });
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexPair {
    pub i: usize,
    pub j: usize,
    pub rescaled: f64,
    pub tree: f64,
}

/// `(cosh d)^t` evaluated as `exp(t ln cosh d)`.
fn power_entry(d: f64, t: f64) -> f64 {
    (t * ln_cosh(d)).exp()
}

/// `max |(cosh d_H)^t − e^{s d_T}|` over pairs in `Γ_l·E_l` with `t = s/r`.
pub fn kernel_gap(plan: &LiftPlan, s: f64) -> Result<f64, DegenerationError> {
    let t = plan.t_for(s)?;
    let radius = plan.l + plan.l.min(GAMMA_CAP);
    let set = point_set(&plan.action, &plan.rep, radius, plan.subdivision)?;
    let g = &plan.action.graph;
    let m = set.tree.len();
    let mut gap = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            let dh = anchored_dist(&plan.rep, &set.anchors[i], &set.anchors[j]);
            let dt = tree_point_dist(g, &set.tree[i], &set.tree[j]);
            gap = gap.max((power_entry(dh, t) - (s * dt).exp()).abs());
        }
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub theta: Option<f64>,
    pub l: usize,
    pub s: f64,
    pub t: f64,
    pub points: usize,
    pub kernel_gap: Option<f64>,
    pub alignment_error: f64,
    /// `ε_l` of the schedule, when one was supplied.
    pub eps: Option<f64>,
    pub passed: Option<bool>,
}

fn align_with_gap(plan: &LiftPlan, s: f64, gap: Option<f64>) -> Result<AlignmentReport, DegenerationError> {
    let t = plan.t_for(s)?;
    let m = plan.tree_points.len();
    let g = &plan.action.graph;
    let mut report = AlignmentReport { theta: plan.theta, l: plan.l, s, t, points: m, kernel_gap: gap, alignment_error: 0.0, eps: None, passed: None };
    if m == 1 {
        return Ok(report);
    }
    let mut dt = DMatrix::<f64>::zeros(m, m);
    let mut ch = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let a = tree_point_dist(g, &plan.tree_points[i], &plan.tree_points[j]);
            let b = ln_cosh(anchored_dist(&plan.rep, &plan.anchors[i], &plan.anchors[j])).exp();
            dt[(i, j)] = a;
            dt[(j, i)] = a;
            ch[(i, j)] = b;
            ch[(j, i)] = b;
        }
    }
    let tree_side = gram_realize(&kernel_tree(&dt, s)?)?;
    let hyp_side = gram_realize(&kernel_power(&ch, t)?)?;
    let (_, worst) = match_isometry(&hyp_side.points, &tree_side.points, ALIGN_PIVOT_TOL)?;
    report.alignment_error = worst;
    Ok(report)
}

/// Realizes both kernels on `E_l` and reports the worst point mismatch after
/// matching the hyperbolic side onto the tree side.
pub fn align(plan: &LiftPlan, s: f64) -> Result<AlignmentReport, DegenerationError> {
    let gap = kernel_gap(plan, s)?;
    align_with_gap(plan, s, Some(gap))
}

/// `ε_l = eps0 · 2^{−l}`.
pub fn default_eps_schedule(eps0: f64, l_max: usize) -> Vec<f64> {
    (0..=l_max).map(|l| eps0 * 0.5f64.powi(l as i32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllRow {
    pub theta: f64,
    pub r_theta: f64,
    /// Largest `l ≤ l_max` whose alignment error is at most `ε_l`.
    pub ell: usize,
    pub reports: Vec<AlignmentReport>,
}

/// `ℓ(θ)` for each `θ`: the largest `l ≤ l_max` with alignment error at
/// most `ε_l`. Kernel gaps are left out since `Γ_l·E_l` grows too fast
/// for large `l`.
pub fn ell_schedule<F>(family: F, action: &TreeAction, thetas: &[f64], eps: &[f64], l_max: usize, s: f64, subdivision: usize) -> Result<Vec<EllRow>, DegenerationError>
where
    F: Fn(f64) -> Result<SchottkyRep, SchottkyError> + Sync,
{
    if eps.len() < l_max + 1 {
        return Err(DegenerationError::BadSchedule(format!("need {} tolerances, got {}", l_max + 1, eps.len())));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(DegenerationError::BadSchedule("tolerances must be positive and strictly decreasing".into()));
    }
    thetas
        .par_iter()
        .map(|&theta| {
            let rep = family(theta)?;
            let r = rep.diagnostics().ok_or(DegenerationError::MissingDiagnostics)?.r_joint;
            let mut ell = 0;
            let mut reports = Vec::with_capacity(l_max + 1);
            for l in 0..=l_max {
                let plan = build_lift(action, &rep, l, subdivision)?.with_theta(theta);
                let mut rep_l = align_with_gap(&plan, s, None)?;
                let pass = rep_l.alignment_error <= eps[l];
                rep_l.eps = Some(eps[l]);
                rep_l.passed = Some(pass);
                if pass {
                    ell = l;
                }
                reports.push(rep_l);
            }
            Ok(EllRow { theta, r_theta: r, ell, reports })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadlineRow {
    pub theta: f64,
    pub r_theta: f64,
    pub delta: f64,
    pub r_delta: f64,
    /// `|r_θ δ_θ − 2 log 2|`.
    pub deviation: f64,
    /// `δ_θ · 2|log θ|`.
    pub delta_two_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub rows: Vec<HeadlineRow>,
    /// Linear fit of `δ_θ |log θ|` against `1/|log θ|`.
    pub intercept: f64,
    pub slope: f64,
    pub fit_r2: f64,
}

impl Headline {
    /// `(1/|log θ|, δ_θ |log θ|)`.
    pub fn plot_data(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (1.0 / r.theta.ln().abs(), 0.5 * r.delta_two_log)).collect()
    }
}

/// Three-circle family along `thetas`: joint displacement, critical exponent
/// at depth `depth`, and the extrapolated intercept.
pub fn headline_experiment(thetas: &[f64], depth: usize, tol: f64) -> Result<Headline, DegenerationError> {
    if thetas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(DegenerationError::BadSchedule("theta list must be decreasing".into()));
    }
    let two_log2 = 2.0 * std::f64::consts::LN_2;
    let rows: Vec<HeadlineRow> = thetas
        .par_iter()
        .map(|&theta| {
            let fam = mcmullen_family(theta)?;
            let r = fam.rep.diagnostics().ok_or(DegenerationError::MissingDiagnostics)?.r_joint;
            let delta = hdim_pressure(&fam.rep, depth, tol)?.delta;
            let lt = theta.ln().abs();
            Ok(HeadlineRow { theta, r_theta: r, delta, r_delta: r * delta, deviation: (r * delta - two_log2).abs(), delta_two_log: 2.0 * lt * delta })
        })
        .collect::<Result<_, DegenerationError>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.theta.ln().abs()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| 0.5 * r.delta_two_log).collect();
    let (intercept, slope, fit_r2) = match linear_fit(&xs, &ys) {
        Some(f) => (f.intercept, f.slope, f.r2),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(Headline { rows, intercept, slope, fit_r2 })
}

/// Largest mismatch `|lift(a·x) − ρ(a)·lift(x)|_∞` relative to
/// `|ρ(a)|_∞ |lift(x)|_∞`, over orbit vertices `x` and letters `a` with both
/// sides in the plan.
pub fn equivariance_defect(plan: &LiftPlan) -> f64 {
    let mut worst = 0.0f64;
    for &a in &alphabet(plan.rep.rank()) {
        let g = plan.rep.letter(a);
        for x in enumerate_ball(plan.rep.rank(), plan.l) {
            let ax = ReducedWord::reduce(&[a]).mul(&x);
            if let (Some(i), Some(j)) = (plan.vertex_index(&x), plan.vertex_index(&ax)) {
                let p = plan.lift[j].coords();
                let q = g.apply(&plan.lift[i]).into_coords();
                worst = worst.max((p - q).amax() / (g.matrix().amax() * plan.lift[i].coords().amax()));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmullen::mcmullen_family;
    use crate::tree::{mcmullen_limit_tree, tree_orbit_dist};

    #[test]
    fn l_zero_is_base_point() {
        let m = mcmullen_family(0.2).unwrap();
        let plan = build_lift(&mcmullen_limit_tree(), &m.rep, 0, 2).unwrap();
        assert_eq!(plan.lift.len(), 1);
        assert!(dist(&plan.lift[0], m.rep.base_point()) < 1e-12);
        let rep = align(&plan, 1.0).unwrap();
        assert_eq!(rep.alignment_error, 0.0);
    }

    #[test]
    fn l_one_vertices_and_equivariance() {
        let m = mcmullen_family(0.2).unwrap();
        let plan = build_lift(&mcmullen_limit_tree(), &m.rep, 1, 2).unwrap();
        let verts = plan.labels.iter().filter(|l| matches!(l, PointLabel::Vertex(_))).count();
        assert_eq!(verts, 5);
        let e = equivariance_defect(&plan);
        assert!(e < 1e-13, "{e}");
    }

    #[test]
    fn tree_point_distances_match_orbit_distances() {
        let t = mcmullen_limit_tree();
        let g = &t.graph;
        for w in enumerate_ball(2, 4) {
            let p = TreePoint { steps: t.word_path(&w), partial: None };
            let o = TreePoint { steps: vec![], partial: None };
            assert_eq!(tree_point_dist(g, &o, &p), tree_orbit_dist(&t, &w));
        }
        // midpoint of the edge from o to a·o sits at distance ½ from both ends
        let a = ReducedWord::parse("a", 2).unwrap();
        let mid = tree_point_on_edge(&t, &ReducedWord::empty(), 1, 0.5);
        let pa = TreePoint { steps: t.word_path(&a), partial: None };
        let o = TreePoint { steps: vec![], partial: None };
        assert!((tree_point_dist(g, &o, &mid) - 0.5).abs() < 1e-15);
        assert!((tree_point_dist(g, &pa, &mid) - 0.5).abs() < 1e-15);
        // a quarter along A from o and a quarter along a from o share no edge
        let q1 = tree_point_on_edge(&t, &ReducedWord::empty(), 1, 0.25);
        let q2 = tree_point_on_edge(&t, &ReducedWord::empty(), -1, 0.25);
        assert!((tree_point_dist(g, &q1, &q2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn t_out_of_range() {
        let m = mcmullen_family(0.2).unwrap();
        let plan = build_lift(&mcmullen_limit_tree(), &m.rep, 1, 0).unwrap();
        assert!(matches!(kernel_gap(&plan, 100.0), Err(DegenerationError::TOutOfRange(_))));
    }
}
