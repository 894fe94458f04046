//! JSON descriptors for each subcommand. Every struct rejects unknown fields.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use schottkydim::hyperbolic::HPoint;
use schottkydim::isometry::LorentzIsometry;
use schottkydim::mcmullen::mcmullen_family_with;
use schottkydim::schottky::SchottkyRep;
use schottkydim::tree::{preset, rose, GraphDescriptor, TreeAction};

use crate::error::CliError;

pub type Matrix = Vec<Vec<f64>>;

pub const DEFAULT_DEPTH: usize = 12;
pub const DEFAULT_TOL: f64 = 1e-10;
const THETA_MAX: f64 = 2.0 * std::f64::consts::PI / 3.0;

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

pub fn matrix(rows: &Matrix, what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return invalid(format!("{what}: empty matrix"));
    }
    if rows.iter().any(|r| r.len() != m) {
        return invalid(format!("{what}: ragged rows"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return invalid(format!("{what}: non-finite entry"));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

fn square(rows: &Matrix, what: &str) -> Result<DMatrix<f64>, CliError> {
    let m = matrix(rows, what)?;
    if m.nrows() != m.ncols() {
        return invalid(format!("{what}: expected a square matrix, got {}×{}", m.nrows(), m.ncols()));
    }
    Ok(m)
}

fn positive(x: f64, what: &str) -> Result<f64, CliError> {
    if !(x > 0.0 && x.is_finite()) {
        return invalid(format!("{what} must be positive, got {x}"));
    }
    Ok(x)
}

fn check_theta(theta: f64) -> Result<f64, CliError> {
    if !(theta > 0.0 && theta < THETA_MAX) {
        return invalid(format!("theta = {theta} outside (0, 2π/3)"));
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Three-circle reflection family, parameter `theta`.
    Mcmullen,
    /// Explicit generator matrices.
    Matrices,
}

/// Fields shared by every command that takes a representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFields {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Matrix>>,
    /// Spatial coordinates of the starting base point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<Vec<f64>>,
    #[serde(default = "default_ball_radius")]
    pub ball_radius: usize,
}

fn default_ball_radius() -> usize {
    schottkydim::mcmullen::DEFAULT_BALL_RADIUS
}

impl GroupFields {
    pub fn validate(&self) -> Result<(), CliError> {
        match self.family {
            Family::Mcmullen => {
                check_theta(self.theta.ok_or_else(|| CliError::Config("family \"mcmullen\" needs theta".into()))?)?;
                if self.generators.is_some() || self.base_point.is_some() {
                    return invalid("family \"mcmullen\" takes no generators or base_point");
                }
            }
            Family::Matrices => {
                if self.theta.is_some() {
                    return invalid("family \"matrices\" takes no theta");
                }
                let gens = self.generators.as_ref().ok_or_else(|| CliError::Config("family \"matrices\" needs generators".into()))?;
                if gens.is_empty() {
                    return invalid("generators: need at least one");
                }
                let n = square(&gens[0], "generator 1")?.nrows();
                if n < 3 {
                    return invalid("generators: need (n+1)×(n+1) matrices with n ≥ 2");
                }
                for (i, g) in gens.iter().enumerate() {
                    let m = square(g, &format!("generator {}", i + 1))?;
                    if m.nrows() != n {
                        return invalid(format!("generator {}: size {} differs from {}", i + 1, m.nrows(), n));
                    }
                    LorentzIsometry::new(m).map_err(|e| CliError::Config(format!("generator {}: {e}", i + 1)))?;
                }
                if let Some(p) = &self.base_point {
                    if p.len() != n - 1 || p.iter().any(|x| !x.is_finite()) {
                        return invalid(format!("base_point: expected {} finite coordinates", n - 1));
                    }
                }
            }
        }
        if self.ball_radius < 2 {
            return invalid("ball_radius must be at least 2");
        }
        Ok(())
    }

    pub fn build(&self, tol: f64) -> Result<SchottkyRep, CliError> {
        match self.family {
            Family::Mcmullen => Ok(mcmullen_family_with(self.theta.unwrap_or_default(), self.ball_radius, tol).map_err(CliError::schottky)?.rep),
            Family::Matrices => {
                let gens = self.generators.as_deref().unwrap_or_default();
                let gens: Vec<LorentzIsometry> = gens
                    .iter()
                    .map(|g| LorentzIsometry::new(matrix(g, "generator")?).map_err(|e| CliError::Config(e.to_string())))
                    .collect::<Result<_, _>>()?;
                let n = gens[0].dim();
                let o = match &self.base_point {
                    Some(p) => HPoint::from_spatial(p),
                    None => HPoint::origin(n),
                };
                SchottkyRep::new(gens, o).and_then(|r| r.with_diagnostics(self.ball_radius, tol)).map_err(CliError::schottky)
            }
        }
    }
}

/// A tree action given by preset name, petal lengths of a rose, or a full
/// graph descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDescriptor>,
}

impl TreeFields {
    pub fn build(&self) -> Result<TreeAction, CliError> {
        let cfg = |e: schottkydim::tree::TreeError| CliError::Config(e.to_string());
        match (self.preset.as_deref(), &self.graph) {
            (Some("rose"), None) => {
                let l = self.lengths.as_ref().ok_or_else(|| CliError::Config("preset \"rose\" needs lengths".into()))?;
                for &x in l {
                    positive(x, "petal length")?;
                }
                rose(l).map_err(cfg)
            }
            (Some(name), None) => {
                if self.lengths.is_some() {
                    return invalid(format!("preset {name:?} takes no lengths"));
                }
                preset(name).map_err(cfg)
            }
            (None, Some(g)) => {
                if self.lengths.is_some() {
                    return invalid("graph takes no lengths");
                }
                TreeAction::from_descriptor(g).map_err(cfg)
            }
            (None, None) => invalid("need a tree preset or graph"),
            (Some(_), Some(_)) => invalid("give either a preset or a graph, not both"),
        }
    }
}

/// Group fields repeated inline, since `deny_unknown_fields` does not
/// combine with `flatten`.
macro_rules! group_config {
    ($(#[$meta:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $f:ident: $t:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            pub family: Family,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub theta: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub generators: Option<Vec<Matrix>>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub base_point: Option<Vec<f64>>,
            #[serde(default = "default_ball_radius")]
            pub ball_radius: usize,
            $($(#[$fm])* pub $f: $t,)*
        }

        impl $name {
            pub fn group(&self) -> GroupFields {
                GroupFields {
                    family: self.family,
                    theta: self.theta,
                    generators: self.generators.clone(),
                    base_point: self.base_point.clone(),
                    ball_radius: self.ball_radius,
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimMethod {
    #[default]
    Pressure,
    Boxcount,
}

group_config! {
    pub struct DimConfig {
        #[serde(default)]
        pub method: DimMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub depth: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub tol: Option<f64>,
        /// Box counting: word length of the sampled limit points.
        #[serde(default = "default_sample_depth")]
        pub sample_depth: usize,
        /// Box counting: number of dyadic scales.
        #[serde(default = "default_scale_count")]
        pub scales: usize,
    }
}

fn default_sample_depth() -> usize {
    10
}

fn default_scale_count() -> usize {
    16
}

group_config! {
    pub struct AlignConfig {
        pub tree: TreeFields,
        pub l: usize,
        #[serde(default = "default_s")]
        pub s: f64,
        #[serde(default = "default_subdivision")]
        pub subdivision: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub tol: Option<f64>,
    }
}

fn default_s() -> f64 {
    schottkydim::degeneration::DEFAULT_S
}

fn default_subdivision() -> usize {
    schottkydim::degeneration::DEFAULT_SUBDIVISION
}

/// Direction of the deformation probed by `probe-continuity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// One Lie algebra element per generator, in the frame of the base point.
    Generators { matrices: Vec<Matrix> },
    Conjugation { matrix: Matrix },
    /// Random generator directions drawn from the seed, entries of size `scale`.
    Random { scale: f64 },
}

group_config! {
    pub struct ProbeConfig {
        pub perturbation: PerturbationSpec,
        pub eps: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub depth: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub tol: Option<f64>,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl TreeDimConfig {
    pub fn tree(&self) -> TreeFields {
        TreeFields { preset: self.preset.clone(), lengths: self.lengths.clone(), graph: self.graph.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: Family,
    pub theta_list: Vec<f64>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "default_subdivision")]
    pub subdivision: usize,
    /// Word-ball radius at which kernel gaps are reported.
    #[serde(default = "default_gap_l")]
    pub gap_l: usize,
    #[serde(default = "default_sweep_tree")]
    pub tree: TreeFields,
}

fn default_l_max() -> usize {
    4
}

fn default_eps0() -> f64 {
    0.5
}

fn default_gap_l() -> usize {
    2
}

fn default_sweep_tree() -> TreeFields {
    TreeFields { preset: Some("mcmullen_limit_tree_recentered".into()), lengths: None, graph: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Tree distances `d`, kernel `e^{s d}`.
    Tree,
    /// `cosh` of hyperbolic distances, kernel `(cosh d)^t`.
    Power,
    /// A kernel matrix taken as is.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub kernel: KernelKind,
    pub matrix: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_geometry_trials")]
    pub geometry_trials: usize,
    #[serde(default = "default_kernel_trials")]
    pub kernel_trials: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { geometry_trials: default_geometry_trials(), kernel_trials: default_kernel_trials() }
    }
}

fn default_geometry_trials() -> usize {
    10_000
}

fn default_kernel_trials() -> usize {
    1000
}

impl DimConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.group().validate()?;
        if self.method == DimMethod::Boxcount && self.scales < 4 {
            return invalid("scales: need at least 4");
        }
        Ok(())
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.group().validate()?;
        positive(self.s, "s")?;
        Ok(())
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let g = self.group();
        g.validate()?;
        if self.eps.is_empty() || self.eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return invalid("eps: need a non-empty list of non-negative values");
        }
        let n = match (&g.generators, g.theta) {
            (Some(gens), _) => gens[0].len(),
            _ => 3,
        };
        let check = |m: &Matrix, what: &str| -> Result<(), CliError> {
            let x = square(m, what)?;
            if x.nrows() != n {
                return invalid(format!("{what}: expected {n}×{n}"));
            }
            Ok(())
        };
        match &self.perturbation {
            PerturbationSpec::Generators { matrices } => {
                for (i, m) in matrices.iter().enumerate() {
                    check(m, &format!("perturbation matrix {}", i + 1))?;
                }
            }
            PerturbationSpec::Conjugation { matrix } => check(matrix, "conjugation matrix")?,
            PerturbationSpec::Random { scale } => {
                positive(*scale, "scale")?;
            }
        }
        Ok(())
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.family != Family::Mcmullen {
            return invalid("mcmullen-sweep needs family \"mcmullen\"");
        }
        if self.theta_list.is_empty() {
            return invalid("theta_list is empty");
        }
        for &t in &self.theta_list {
            check_theta(t)?;
        }
        if self.theta_list.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("theta_list must be strictly decreasing");
        }
        positive(self.s, "s")?;
        positive(self.eps0, "eps0")?;
        Ok(())
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<DMatrix<f64>, CliError> {
        let m = square(&self.matrix, "matrix")?;
        match self.kernel {
            KernelKind::Tree => {
                positive(self.s.ok_or_else(|| CliError::Config("tree kernel needs s".into()))?, "s")?;
            }
            KernelKind::Power => {
                let t = self.t.ok_or_else(|| CliError::Config("power kernel needs t".into()))?;
                if !(t > 0.0 && t <= 1.0) {
                    return invalid(format!("t = {t} outside (0, 1]"));
                }
            }
            KernelKind::Raw => {}
        }
        Ok(m)
    }
}

pub fn algebra_matrix(m: &Matrix) -> Result<DMatrix<f64>, CliError> {
    square(m, "algebra element")
}
