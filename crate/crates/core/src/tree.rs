//! Free-group actions on metric trees given as universal covers of finite
//! metric graphs. Orbit distances come from free reduction of edge paths.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::{hdim_pressure_from_table, DimensionError, PressureResult};
use crate::geometry::{distance_table, WordGeometry};
use crate::numeric::pairwise_sum;
use crate::schottky::{SchottkyError, SchottkyRep};
use crate::words::{enumerate_ball, InfiniteWord, Letter, ReducedWord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("bad graph: {0}")]
    BadGraph(String),
    #[error("graph is not connected")]
    NotConnected,
    #[error("first Betti number {betti} does not match {loops} generator loops")]
    BettiMismatch { betti: usize, loops: usize },
    #[error("loop {0}: {1}")]
    BadLoop(usize, String),
    #[error("action is not Schottky on the tree: {0}")]
    NotTreeSchottky(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Schottky(#[from] SchottkyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub u: String,
    pub v: String,
    pub len: f64,
    pub label: String,
}

/// The JSON form of a graph with generator loops. Loop steps are edge labels
/// prefixed by `+` (traversed from `u` to `v`) or `-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDescriptor {
    pub vertices: Vec<String>,
    pub edges: Vec<GraphEdge>,
    pub loops: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    pub labels: Vec<String>,
    pub base_vertex: usize,
}

/// Oriented edge: `+(e+1)` runs `u → v` along edge `e`, `−(e+1)` runs back.
pub type Step = i32;

fn step_edge(s: Step) -> usize {
    (s.unsigned_abs() - 1) as usize
}

impl MetricGraph {
    pub fn new(vertices: Vec<String>, edges: Vec<Edge>, labels: Vec<String>, base_vertex: usize) -> Result<Self, TreeError> {
        let nv = vertices.len();
        if nv == 0 {
            return Err(TreeError::BadGraph("no vertices".into()));
        }
        if base_vertex >= nv {
            return Err(TreeError::BadGraph(format!("base vertex {base_vertex} out of range")));
        }
        if labels.len() != edges.len() {
            return Err(TreeError::BadGraph("one label per edge required".into()));
        }
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if seen.insert(l.as_str(), i).is_some() {
                return Err(TreeError::BadGraph(format!("duplicate edge label {l:?}")));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if e.u >= nv || e.v >= nv {
                return Err(TreeError::BadGraph(format!("edge {i} has an endpoint out of range")));
            }
            if !(e.len > 0.0 && e.len.is_finite()) {
                return Err(TreeError::BadGraph(format!("edge {i} has non-positive length {}", e.len)));
            }
        }
        let g = Self { vertices, edges, labels, base_vertex };
        if !g.connected() {
            return Err(TreeError::NotConnected);
        }
        Ok(g)
    }

    fn connected(&self) -> bool {
        let nv = self.vertices.len();
        let mut adj = vec![Vec::new(); nv];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([self.base_vertex]);
        seen[self.base_vertex] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `|E| − |V| + 1`.
    pub fn betti(&self) -> usize {
        self.edges.len() + 1 - self.vertices.len()
    }

    pub fn step_len(&self, s: Step) -> f64 {
        self.edges[step_edge(s)].len
    }

    fn tail(&self, s: Step) -> usize {
        let e = self.edges[step_edge(s)];
        if s > 0 { e.u } else { e.v }
    }

    fn head(&self, s: Step) -> usize {
        let e = self.edges[step_edge(s)];
        if s > 0 { e.v } else { e.u }
    }

    pub fn path_len(&self, path: &[Step]) -> f64 {
        let ls: Vec<f64> = path.iter().map(|&s| self.step_len(s)).collect();
        pairwise_sum(&ls)
    }
}

/// Free reduction of an edge path.
pub fn reduce_path(path: &[Step]) -> Vec<Step> {
    let mut out: Vec<Step> = Vec::with_capacity(path.len());
    for &s in path {
        if out.last() == Some(&-s) {
            out.pop();
        } else {
            out.push(s);
        }
    }
    out
}

/// Strip matching inverse steps from both ends of a reduced closed path.
pub fn cyclic_reduce_path(path: &[Step]) -> &[Step] {
    let mut p = path;
    while p.len() >= 2 && p[0] == -p[p.len() - 1] {
        p = &p[1..p.len() - 1];
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeAction {
    pub graph: MetricGraph,
    pub generator_loops: Vec<Vec<Step>>,
    inverse_loops: Vec<Vec<Step>>,
    pub convention: Option<String>,
}

/// Reduced edge path from `o` to `w·o`, stored back to front so that
/// left multiplication works on the tail of the vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeState {
    rev: Vec<Step>,
}

impl TreeState {
    pub fn path(&self) -> Vec<Step> {
        self.rev.iter().rev().copied().collect()
    }
}

impl TreeAction {
    pub fn new(graph: MetricGraph, loops: Vec<Vec<Step>>) -> Result<Self, TreeError> {
        let betti = graph.betti();
        if betti != loops.len() || loops.is_empty() {
            return Err(TreeError::BettiMismatch { betti, loops: loops.len() });
        }
        let mut reduced = Vec::with_capacity(loops.len());
        for (i, l) in loops.iter().enumerate() {
            if l.is_empty() {
                return Err(TreeError::BadLoop(i, "empty path".into()));
            }
            for &s in l {
                if s == 0 || step_edge(s) >= graph.edges.len() {
                    return Err(TreeError::BadLoop(i, format!("unknown step {s}")));
                }
            }
            if graph.tail(l[0]) != graph.base_vertex || graph.head(l[l.len() - 1]) != graph.base_vertex {
                return Err(TreeError::BadLoop(i, "not based at the base vertex".into()));
            }
            for w in l.windows(2) {
                if graph.head(w[0]) != graph.tail(w[1]) {
                    return Err(TreeError::BadLoop(i, "consecutive steps do not meet".into()));
                }
            }
            let r = reduce_path(l);
            if r.is_empty() {
                return Err(TreeError::BadLoop(i, "null-homotopic".into()));
            }
            reduced.push(r);
        }
        let inverse_loops = reduced.iter().map(|l| l.iter().rev().map(|s| -s).collect()).collect();
        Ok(Self { graph, generator_loops: reduced, inverse_loops, convention: None })
    }

    pub fn from_descriptor(d: &GraphDescriptor) -> Result<Self, TreeError> {
        let index: HashMap<&str, usize> = d.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        if index.len() != d.vertices.len() {
            return Err(TreeError::BadGraph("duplicate vertex name".into()));
        }
        let vid = |name: &str| index.get(name).copied().ok_or_else(|| TreeError::BadGraph(format!("unknown vertex {name:?}")));
        let mut edges = Vec::with_capacity(d.edges.len());
        for e in &d.edges {
            edges.push(Edge { u: vid(&e.u)?, v: vid(&e.v)?, len: e.len });
        }
        let labels: Vec<String> = d.edges.iter().map(|e| e.label.clone()).collect();
        let base = match &d.base {
            Some(b) => vid(b)?,
            None => 0,
        };
        let graph = MetricGraph::new(d.vertices.clone(), edges, labels, base)?;
        let lab: HashMap<&str, usize> = graph.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut loops = Vec::with_capacity(d.loops.len());
        for (i, l) in d.loops.iter().enumerate() {
            let mut path = Vec::with_capacity(l.len());
            for tok in l {
                let (sign, name) = if let Some(rest) = tok.strip_prefix('+') {
                    (1, rest)
                } else if let Some(rest) = tok.strip_prefix('-').or_else(|| tok.strip_prefix('−')) {
                    (-1, rest)
                } else {
                    (1, tok.as_str())
                };
                let e = lab.get(name).ok_or_else(|| TreeError::BadLoop(i, format!("unknown edge label {name:?}")))?;
                path.push(sign * (*e as i32 + 1));
            }
            loops.push(path);
        }
        let mut a = Self::new(graph, loops)?;
        a.convention = d.convention.clone();
        Ok(a)
    }

    pub fn descriptor(&self) -> GraphDescriptor {
        let g = &self.graph;
        let edges = g
            .edges
            .iter()
            .zip(&g.labels)
            .map(|(e, l)| GraphEdge { u: g.vertices[e.u].clone(), v: g.vertices[e.v].clone(), len: e.len, label: l.clone() })
            .collect();
        let loops = self
            .generator_loops
            .iter()
            .map(|l| l.iter().map(|&s| format!("{}{}", if s > 0 { '+' } else { '-' }, g.labels[step_edge(s)])).collect())
            .collect();
        GraphDescriptor {
            vertices: g.vertices.clone(),
            edges,
            loops,
            base: Some(g.vertices[g.base_vertex].clone()),
            convention: self.convention.clone(),
        }
    }

    pub fn letter_loop(&self, a: Letter) -> &[Step] {
        let i = (a.unsigned_abs() - 1) as usize;
        if a > 0 { &self.generator_loops[i] } else { &self.inverse_loops[i] }
    }

    /// Reduced edge path of `w`, i.e. the tight path from `o` to `w·o`.
    pub fn word_path(&self, w: &ReducedWord) -> Vec<Step> {
        let mut p = Vec::new();
        for &a in w.letters() {
            p.extend_from_slice(self.letter_loop(a));
        }
        reduce_path(&p)
    }

    /// Same action with every edge length multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> Result<Self, TreeError> {
        let mut g = self.graph.clone();
        for e in &mut g.edges {
            e.len *= c;
        }
        let mut a = Self::new(MetricGraph::new(g.vertices, g.edges, g.labels, g.base_vertex)?, self.generator_loops.clone())?;
        a.convention = self.convention.clone();
        Ok(a)
    }
}

impl WordGeometry for TreeAction {
    type State = TreeState;

    fn rank(&self) -> usize {
        self.generator_loops.len()
    }

    fn root(&self) -> TreeState {
        TreeState { rev: Vec::new() }
    }

    fn extend_left(&self, a: Letter, s: &TreeState) -> TreeState {
        let mut rev = s.rev.clone();
        for &x in self.letter_loop(a).iter().rev() {
            if rev.last() == Some(&-x) {
                rev.pop();
            } else {
                rev.push(x);
            }
        }
        TreeState { rev }
    }

    fn distance(&self, s: &TreeState) -> f64 {
        self.graph.path_len(&s.rev)
    }
}

pub fn tree_orbit_dist(a: &TreeAction, w: &ReducedWord) -> f64 {
    a.graph.path_len(&a.word_path(w))
}

/// `d_T(u·o, v·o) = d_T(o, u⁻¹v·o)`.
pub fn tree_dist(a: &TreeAction, u: &ReducedWord, v: &ReducedWord) -> f64 {
    tree_orbit_dist(a, &u.inverse().mul(v))
}

pub fn tree_translation_length(a: &TreeAction, w: &ReducedWord) -> f64 {
    let p = a.word_path(w);
    a.graph.path_len(cyclic_reduce_path(&p))
}

/// `⟨ξ, ζ⟩_o` for boundary points given by infinite words: the length of the
/// common initial segment of their rays from `o`.
pub fn tree_gromov_boundary(a: &TreeAction, xi: &InfiniteWord, zeta: &InfiniteWord, cap: usize) -> f64 {
    let k = xi.common_prefix(zeta, cap);
    if k >= cap {
        return f64::INFINITY;
    }
    // loops past the branch letter can cancel at most one loop back
    let n = k + 3;
    let p = a.word_path(&xi.truncate(n));
    let q = a.word_path(&zeta.truncate(n));
    let m = p.iter().zip(&q).take_while(|(x, y)| x == y).count();
    a.graph.path_len(&p[..m])
}

/// Visual distance `e^{−⟨ξ,ζ⟩_o}` on the tree boundary.
pub fn tree_visual_dist(a: &TreeAction, xi: &InfiniteWord, zeta: &InfiniteWord, cap: usize) -> f64 {
    (-tree_gromov_boundary(a, xi, zeta, cap)).exp()
}

/// Smallest `K ≥ 1` with `|w|/K − K ≤ d_T(o, w·o)` given the minimum
/// distance `m` at word length `n`.
fn lower_qi_constant(n: f64, m: f64) -> f64 {
    1f64.max(0.5 * (-m + (m * m + 4.0 * n).sqrt()))
}

/// Fits `K` on a ball and checks that the lower bound `|w|/K − K` is
/// nonvacuous at the ball radius, i.e. `K² < R`. A word fixing `o` fails at once.
pub fn check_tree_schottky(a: &TreeAction, ball_radius: usize) -> Result<f64, TreeError> {
    let radius = ball_radius.max(4);
    let table = distance_table(a, radius);
    let mins: Vec<f64> = (0..=radius).map(|n| table.min_at(n)).collect();
    if let Some(n) = (1..=radius).find(|&n| mins[n] <= 0.0) {
        return Err(TreeError::NotTreeSchottky(format!("a word of length {n} fixes the base point")));
    }
    let k = (1..=radius).map(|n| lower_qi_constant(n as f64, mins[n])).fold(1.0, f64::max);
    if k * k >= radius as f64 {
        return Err(TreeError::NotTreeSchottky(format!("orbit growth too slow: K = {k} on a ball of radius {radius}")));
    }
    Ok(k)
}

/// Geodesic stability constant on a tree: the largest distance from `u·o` to
/// the segment `[o, uv·o]`, which is the exact Gromov product
/// `(d(o,uo) + d(o,vo) − d(o,uvo))/2`.
pub fn tree_stability_constant(a: &TreeAction, ball_radius: usize) -> f64 {
    let mut table: HashMap<ReducedWord, f64> = HashMap::new();
    for w in enumerate_ball(a.rank(), ball_radius) {
        let d = tree_orbit_dist(a, &w);
        table.insert(w, d);
    }
    let mut c = 0.0f64;
    for (w, &l) in &table {
        for split in 1..w.len() {
            let u = w.prefix(split);
            let v = ReducedWord::reduce(&w.letters()[split..]);
            c = c.max(0.5 * (table[&u] + table[&v] - l));
        }
    }
    c
}

pub fn hdim_tree_boundary(a: &TreeAction, max_depth: usize, tol: f64) -> Result<PressureResult, TreeError> {
    if max_depth < 4 {
        return Err(DimensionError::DepthTooSmall(max_depth).into());
    }
    check_tree_schottky(a, max_depth.min(10))?;
    let c_k = tree_stability_constant(a, max_depth.min(8));
    let table = distance_table(a, max_depth);
    Ok(hdim_pressure_from_table(&table, c_k, tol)?)
}

/// Two vertices `u, v` joined by edges `α, β, γ` of length ½, with
/// generator loops `a = γ·α⁻¹` and `b = γ·β⁻¹` based at `u`.
pub fn mcmullen_limit_tree() -> TreeAction {
    let d = GraphDescriptor {
        vertices: vec!["u".into(), "v".into()],
        edges: ["α", "β", "γ"].iter().map(|l| GraphEdge { u: "u".into(), v: "v".into(), len: 0.5, label: (*l).into() }).collect(),
        loops: vec![vec!["+γ".into(), "-α".into()], vec!["+γ".into(), "-β".into()]],
        base: Some("u".into()),
        convention: Some(
            "edges run u→v; a loop lists steps in travel order; the word a·b follows the loop of a, then the loop of b".into(),
        ),
    };
    TreeAction::from_descriptor(&d).expect("preset is valid")
}

/// The same tree based at the midpoint `m` of `γ`: `γ` is split into
/// `γ₁: u → m` and `γ₂: m → v`, and the loops become `γ₂·α⁻¹·γ₁` and
/// `γ₂·β⁻¹·γ₁`. Orbit maps at the joint-displacement minimizer of the
/// three-circle family converge to this based tree.
pub fn mcmullen_limit_tree_recentered() -> TreeAction {
    let e = |u: &str, v: &str, len: f64, l: &str| GraphEdge { u: u.into(), v: v.into(), len, label: l.into() };
    let d = GraphDescriptor {
        vertices: vec!["m".into(), "u".into(), "v".into()],
        edges: vec![e("u", "v", 0.5, "α"), e("u", "v", 0.5, "β"), e("u", "m", 0.25, "γ1"), e("m", "v", 0.25, "γ2")],
        loops: vec![
            vec!["+γ2".into(), "-α".into(), "+γ1".into()],
            vec!["+γ2".into(), "-β".into(), "+γ1".into()],
        ],
        base: Some("m".into()),
        convention: Some("γ = γ1·γ2 split at its midpoint m; loops conjugated from u to m by γ1".into()),
    };
    TreeAction::from_descriptor(&d).expect("preset is valid")
}

/// Named presets without parameters.
pub fn preset(name: &str) -> Result<TreeAction, TreeError> {
    match name {
        "mcmullen_limit_tree" => Ok(mcmullen_limit_tree()),
        "mcmullen_limit_tree_recentered" => Ok(mcmullen_limit_tree_recentered()),
        _ => Err(TreeError::UnknownPreset(name.into())),
    }
}

/// One vertex with `lengths.len()` petals.
pub fn rose(lengths: &[f64]) -> Result<TreeAction, TreeError> {
    let d = GraphDescriptor {
        vertices: vec!["o".into()],
        edges: lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| GraphEdge { u: "o".into(), v: "o".into(), len, label: format!("p{}", i + 1) })
            .collect(),
        loops: (1..=lengths.len()).map(|i| vec![format!("+p{i}")]).collect(),
        base: None,
        convention: None,
    };
    TreeAction::from_descriptor(&d)
}

/// One row of the rescaled translation-length comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledRow {
    pub theta: f64,
    pub word: String,
    pub r_theta: f64,
    pub rescaled_length: f64,
    pub tree_length: f64,
    pub gap: f64,
}

/// `ℓ(ρ_θ(w))/r_θ` against `ℓ_T(w)` for each `θ` and word.
pub fn rescaled_length_convergence<F>(family: F, a: &TreeAction, words: &[ReducedWord], thetas: &[f64]) -> Result<Vec<RescaledRow>, TreeError>
where
    F: Fn(f64) -> Result<SchottkyRep, SchottkyError>,
{
    let mut rows = Vec::new();
    for &theta in thetas {
        let rep = family(theta)?;
        let r = rep.diagnostics().ok_or(SchottkyError::NotSchottky)?.r_joint;
        for w in words {
            let l = rep.translation_length(w);
            let lt = tree_translation_length(a, w);
            rows.push(RescaledRow { theta, word: w.to_string(), r_theta: r, rescaled_length: l / r, tree_length: lt, gap: (l / r - lt).abs() });
        }
    }
    Ok(rows)
}
