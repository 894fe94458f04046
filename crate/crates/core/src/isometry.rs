//! Lorentz transformations preserving the upper sheet.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{minkowski, BoundaryPoint, HPoint, MinkowskiForm, Vector};

pub const TOL_ISO: f64 = 1e-10;
const TOL_HYPERBOLIC: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsometryError {
    #[error("matrix is not a Lorentz transformation (defect {defect:.3e})")]
    NotLorentz { defect: f64 },
    #[error("matrix does not preserve the upper sheet")]
    Orientation,
    #[error("isometry is not hyperbolic (spectral radius {radius})")]
    NotHyperbolic { radius: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzIsometry {
    m: DMatrix<f64>,
}

/// Hyperbolic isometry data: attracting and repelling fixed points and the
/// translation length.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub attracting: BoundaryPoint,
    pub repelling: BoundaryPoint,
    pub translation_length: f64,
}

impl LorentzIsometry {
    /// Checks `MᵀJM = J` relative to the size of the entries, and `M₀₀ > 0`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, IsometryError> {
        let d = Self::defect(&m);
        if !(d <= TOL_ISO) {
            return Err(IsometryError::NotLorentz { defect: d });
        }
        if !(m[(0, 0)] > 0.0) {
            return Err(IsometryError::Orientation);
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    /// `max |MᵀJM − J| / max(1, max|M|²)`.
    pub fn defect(m: &DMatrix<f64>) -> f64 {
        if !m.is_square() || m.nrows() < 2 {
            return f64::INFINITY;
        }
        let j = MinkowskiForm::new(m.nrows() - 1).gram();
        let r = m.transpose() * &j * m - &j;
        let s = m.amax().powi(2).max(1.0);
        r.amax() / s
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n + 1, n + 1) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn apply(&self, p: &HPoint) -> HPoint {
        HPoint::renormalized(&self.m * p.coords())
    }

    pub fn apply_boundary(&self, xi: &BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::normalized(&self.m * xi.coords())
    }

    pub fn apply_vec(&self, v: &Vector) -> Vector {
        &self.m * v
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m }
    }

    /// `J Mᵀ J`.
    pub fn inverse(&self) -> Self {
        let n = self.m.nrows();
        let mut inv = self.m.transpose();
        for i in 0..n {
            for j in 0..n {
                if (i == 0) != (j == 0) {
                    inv[(i, j)] = -inv[(i, j)];
                }
            }
        }
        Self { m: inv }
    }

    /// Hyperbolic translation of length `l` along the geodesic through the origin
    /// in spatial direction `axis` (1-based coordinate index).
    pub fn boost(n: usize, axis: usize, l: f64) -> Self {
        assert!((1..=n).contains(&axis));
        let mut m = DMatrix::identity(n + 1, n + 1);
        m[(0, 0)] = l.cosh();
        m[(axis, axis)] = l.cosh();
        m[(0, axis)] = l.sinh();
        m[(axis, 0)] = l.sinh();
        Self { m }
    }

    /// Rotation by `angle` in the spatial `(i, j)` plane (1-based indices).
    pub fn rotation(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut m = DMatrix::identity(n + 1, n + 1);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Self { m }
    }

    /// The transvection taking the origin to `p` along the geodesic joining them.
    pub fn translation_to(p: &HPoint) -> Self {
        let n = p.dim();
        let v = p.coords();
        let p0 = v[0];
        let mut m = DMatrix::identity(n + 1, n + 1);
        m[(0, 0)] = p0;
        for i in 1..=n {
            m[(0, i)] = v[i];
            m[(i, 0)] = v[i];
            for j in 1..=n {
                m[(i, j)] += v[i] * v[j] / (1.0 + p0);
            }
        }
        Self { m }
    }

    /// Exponential of an element of so(1, n), i.e. `XᵀJ + JX = 0`.
    pub fn exp_algebra(x: &DMatrix<f64>) -> Result<Self, IsometryError> {
        let m = x.clone().exp();
        Self::new(m)
    }

    /// The Lie algebra element generating a boost in direction `axis` and a
    /// rotation in the plane `(i, j)`, with weights `b` and `w`.
    pub fn algebra_element(n: usize, boosts: &[f64], rotations: &[((usize, usize), f64)]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n + 1, n + 1);
        for (k, &b) in boosts.iter().enumerate().take(n) {
            x[(0, k + 1)] += b;
            x[(k + 1, 0)] += b;
        }
        for &((i, j), w) in rotations {
            x[(i, j)] -= w;
            x[(j, i)] += w;
        }
        x
    }

    /// Spectral radius of `M`. Power iteration from the origin handles the
    /// badly scaled matrices of long words; the Schur form covers the rest.
    pub fn spectral_radius(&self) -> f64 {
        match power_dominant(&self.m) {
            Some((lam, _)) => lam,
            None => self.m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    /// Attracting/repelling fixed points and translation length `log λ`.
    pub fn axis_endpoints(&self) -> Result<Axis, IsometryError> {
        let (lam_plus, attracting) = dominant_null_eigvec(&self.m)?;
        let (_, repelling) = dominant_null_eigvec(&self.inverse().m)?;
        Ok(Axis { attracting, repelling, translation_length: lam_plus.ln() })
    }

    /// Displacement of the origin, `d(o, M o)`.
    pub fn displacement_origin(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0f64;
        for i in 1..=n {
            s = s.hypot(self.m[(i, 0)]);
        }
        s.asinh()
    }
}

/// Iterates `v ↦ M v / (M v)₀` from the origin; returns the eigenvalue
/// and isotropic eigenvector once the ratio settles.
fn power_dominant(m: &DMatrix<f64>) -> Option<(f64, Vector)> {
    let n = m.nrows();
    let mut v = Vector::zeros(n);
    v[0] = 1.0;
    let mut lam = f64::NAN;
    for _ in 0..64 {
        let w = m * &v;
        let next = w[0];
        v = &w / next;
        if (next - lam).abs() <= 1e-14 * next {
            return Some((next, v));
        }
        lam = next;
    }
    None
}

fn dominant_null_eigvec(m: &DMatrix<f64>) -> Result<(f64, BoundaryPoint), IsometryError> {
    if let Some((lam, v)) = power_dominant(m) {
        if lam > 1.0 + TOL_HYPERBOLIC && minkowski(&v, &v).abs() <= 1e-6 * v[0] * v[0] {
            return Ok((lam, BoundaryPoint::normalized(v)));
        }
    }
    let eig = m.complex_eigenvalues();
    let mut best = 0.0f64;
    for z in eig.iter() {
        if z.im.abs() <= 1e-9 * z.norm().max(1.0) && z.re > best {
            best = z.re;
        }
    }
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(best > 1.0 + TOL_HYPERBOLIC) || best < radius * (1.0 - 1e-9) {
        return Err(IsometryError::NotHyperbolic { radius });
    }
    let n = m.nrows();
    let a = m - DMatrix::identity(n, n) * best;
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    let mut v: Vector = vt.row(k).transpose();
    if v[0] < 0.0 {
        v = -v;
    }
    // Polish with a few power steps, which converge quickly at this point.
    for _ in 0..3 {
        let w = m * &v;
        v = &w / w[0];
    }
    if minkowski(&v, &v).abs() > 1e-6 * v[0] * v[0] {
        return Err(IsometryError::NotHyperbolic { radius });
    }
    Ok((best, BoundaryPoint::normalized(v)))
}
