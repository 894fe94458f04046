//! Hyperboloid model of H^n.
//!
//! Vectors carry `n + 1` coordinates `(v0, x)` and the form is
//! `B(v, w) = v0·w0 − ⟨x, y⟩`. Points of H^n satisfy `B(v, v) = 1`, `v0 > 0`;
//! boundary points are null vectors scaled to `v0 = 1`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{acosh_clamped, golden_section, ln_cosh, ln_cosh_inv};

pub type Vector = DVector<f64>;

pub const TOL_MODEL: f64 = 1e-12;
/// Slack accepted on user-supplied coordinates before they are projected.
pub const TOL_INPUT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperbolicError {
    #[error("vector is not on the upper sheet (B(v,v) = {form}, v0 = {v0})")]
    NotOnSheet { form: f64, v0: f64 },
    #[error("vector is not a light-cone point (B(v,v)/v0^2 = {form})")]
    NotOnLightCone { form: f64 },
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("geodesic endpoints coincide")]
    DegenerateEndpoints,
    #[error("boundary points coincide; Gromov product is infinite")]
    CoincidentBoundaryPoints,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}

/// The form `s·s' − ⟨x, x'⟩` on R^{1+n}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinkowskiForm {
    pub n: usize,
}

impl MinkowskiForm {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn eval(&self, a: &Vector, b: &Vector) -> f64 {
        debug_assert_eq!(a.len(), self.n + 1);
        minkowski(a, b)
    }

    /// Diagonal Gram matrix `J = diag(1, −1, …, −1)`.
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let mut j = nalgebra::DMatrix::identity(self.n + 1, self.n + 1);
        for i in 1..=self.n {
            j[(i, i)] = -1.0;
        }
        j
    }
}

#[inline]
pub fn minkowski(a: &Vector, b: &Vector) -> f64 {
    let mut s = a[0] * b[0];
    for i in 1..a.len() {
        s -= a[i] * b[i];
    }
    s
}

/// Euclidean norm of the spatial part, scaled to avoid overflow.
pub fn spatial_norm(v: &Vector) -> f64 {
    let m = v.iter().skip(1).fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().skip(1).map(|x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    v: Vector,
}

impl HPoint {
    pub fn origin(n: usize) -> Self {
        let mut v = Vector::zeros(n + 1);
        v[0] = 1.0;
        Self { v }
    }

    /// Validates a raw vector and projects it exactly onto the sheet.
    pub fn new(v: Vector) -> Result<Self, HyperbolicError> {
        let form = minkowski(&v, &v);
        let scale = v[0] * v[0];
        if !(v[0] > 0.0) || !((form - 1.0).abs() <= TOL_INPUT * scale.max(1.0)) {
            return Err(HyperbolicError::NotOnSheet { form, v0: v[0] });
        }
        Ok(Self::renormalized(v))
    }

    /// Lifts the spatial part to the sheet: `v0 = sqrt(1 + |x|²)`.
    pub fn from_spatial(x: &[f64]) -> Self {
        let mut v = Vector::zeros(x.len() + 1);
        for (i, &xi) in x.iter().enumerate() {
            v[i + 1] = xi;
        }
        Self::renormalized(v)
    }

    /// Recomputes `v0` from the spatial coordinates. This keeps the point on the
    /// sheet to working precision even when coordinates are large.
    pub fn renormalized(mut v: Vector) -> Self {
        v[0] = spatial_norm(&v).hypot(1.0);
        Self { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len() - 1
    }

    pub fn coords(&self) -> &Vector {
        &self.v
    }

    pub fn into_coords(self) -> Vector {
        self.v
    }

    pub fn spatial(&self) -> &[f64] {
        &self.v.as_slice()[1..]
    }

    pub fn is_valid(&self) -> bool {
        let f = minkowski(&self.v, &self.v);
        self.v[0] > 0.0 && (f - 1.0).abs() <= TOL_MODEL * (self.v[0] * self.v[0]).max(1.0)
    }

    /// Distance to the model origin, `asinh |x|`.
    pub fn dist_origin(&self) -> f64 {
        spatial_norm(&self.v).asinh()
    }

    /// Embeds into H^m, m ≥ n, by padding zeros.
    pub fn padded(&self, m: usize) -> Self {
        let mut v = Vector::zeros(m + 1);
        v.rows_mut(0, self.v.len()).copy_from(&self.v);
        Self { v }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    v: Vector,
}

impl BoundaryPoint {
    /// Validates a light-cone vector and rescales it to `v0 = 1`.
    pub fn new(v: Vector) -> Result<Self, HyperbolicError> {
        if !(v[0] > 0.0) {
            return Err(HyperbolicError::NotOnLightCone { form: f64::NAN });
        }
        let form = minkowski(&v, &v) / (v[0] * v[0]);
        if !(form.abs() <= TOL_INPUT) {
            return Err(HyperbolicError::NotOnLightCone { form });
        }
        Ok(Self::normalized(v))
    }

    /// The boundary point `(1, u/|u|)`.
    pub fn from_direction(u: &[f64]) -> Result<Self, HyperbolicError> {
        let mut v = Vector::zeros(u.len() + 1);
        for (i, &ui) in u.iter().enumerate() {
            v[i + 1] = ui;
        }
        let nrm = spatial_norm(&v);
        if !(nrm > 0.0) {
            return Err(HyperbolicError::NotOnLightCone { form: f64::NAN });
        }
        v /= nrm;
        v[0] = 1.0;
        Ok(Self { v })
    }

    /// Projects any vector with a nonzero future-pointing spatial direction:
    /// keeps the unit spatial direction and sets `v0 = 1`.
    pub(crate) fn normalized(mut v: Vector) -> Self {
        let nrm = spatial_norm(&v);
        v /= nrm;
        v[0] = 1.0;
        Self { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len() - 1
    }

    pub fn coords(&self) -> &Vector {
        &self.v
    }

    pub fn direction(&self) -> &[f64] {
        &self.v.as_slice()[1..]
    }

    pub fn padded(&self, m: usize) -> Self {
        let mut v = Vector::zeros(m + 1);
        v.rows_mut(0, self.v.len()).copy_from(&self.v);
        Self { v }
    }
}

/// A point of `H^n ∪ ∂H^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Interior(HPoint),
    Boundary(BoundaryPoint),
}

impl From<HPoint> for Point {
    fn from(p: HPoint) -> Self {
        Point::Interior(p)
    }
}

impl From<BoundaryPoint> for Point {
    fn from(p: BoundaryPoint) -> Self {
        Point::Boundary(p)
    }
}

/// `B(a − b, a − b)` evaluated termwise to avoid forming the difference twice.
fn form_of_difference(a: &Vector, b: &Vector) -> f64 {
    let d0 = a[0] - b[0];
    let mut s = d0 * d0;
    for i in 1..a.len() {
        let di = a[i] - b[i];
        s -= di * di;
    }
    s
}

/// Hyperbolic distance. Uses the chord form `2 asinh(|x − y|_B / 2)` for nearby
/// points and `acosh B(x, y)` otherwise.
pub fn dist(x: &HPoint, y: &HPoint) -> f64 {
    let b = minkowski(&x.v, &y.v);
    if b < 2.0 {
        let q = -form_of_difference(&x.v, &y.v);
        2.0 * (q.max(0.0).sqrt() * 0.5).asinh()
    } else {
        acosh_clamped(b)
    }
}

/// Point at arclength `t` from `x` toward `y`.
pub fn geodesic_point(x: &HPoint, y: &HPoint, t: f64) -> Result<HPoint, HyperbolicError> {
    let d = dist(x, y);
    if d <= 1e-14 {
        return Err(HyperbolicError::DegenerateEndpoints);
    }
    let sd = d.sinh();
    let a = (d - t).sinh() / sd;
    let b = t.sinh() / sd;
    Ok(HPoint::renormalized(&x.v * a + &y.v * b))
}

/// Unit tangent at `x` pointing to `y`, as an ambient vector B-orthogonal to `x`.
pub fn unit_tangent(x: &HPoint, y: &HPoint) -> Result<Vector, HyperbolicError> {
    let b = minkowski(&x.v, &y.v);
    let w = &y.v - &x.v * b;
    let nrm2 = -minkowski(&w, &w);
    if !(nrm2 > 0.0) {
        return Err(HyperbolicError::DegenerateEndpoints);
    }
    Ok(w / nrm2.sqrt())
}

/// Point at arclength `t` along the unit tangent `u` at `x`.
pub fn exp_map(x: &HPoint, u: &Vector, t: f64) -> HPoint {
    HPoint::renormalized(&x.v * t.cosh() + u * t.sinh())
}

/// Unit tangent at `o` pointing to the boundary point `xi`.
pub fn ray_direction(o: &HPoint, xi: &BoundaryPoint) -> Vector {
    let b = minkowski(&o.v, &xi.v);
    (&xi.v - &o.v * b) / b
}

/// Unit-speed ray from `o` toward `xi`.
pub fn geodesic_ray(o: &HPoint, xi: &BoundaryPoint, t: f64) -> HPoint {
    exp_map(o, &ray_direction(o, xi), t)
}

/// Endpoint of the ray from `o` through `p`.
pub fn ray_endpoint(o: &HPoint, p: &HPoint) -> Result<BoundaryPoint, HyperbolicError> {
    let u = unit_tangent(o, p)?;
    Ok(BoundaryPoint::normalized(&o.v + u))
}

/// `log(B(x, ξ) / B(y, ξ))`; equals `lim d(x, z) − d(y, z)` as `z → ξ`.
pub fn busemann(x: &HPoint, y: &HPoint, xi: &BoundaryPoint) -> f64 {
    (minkowski(&x.v, &xi.v) / minkowski(&y.v, &xi.v)).ln()
}

/// `B(ξ, ζ)` for null vectors, computed as `−½ B(ξ − ζ, ξ − ζ)`.
fn null_pair_form(xi: &BoundaryPoint, zeta: &BoundaryPoint) -> f64 {
    -0.5 * form_of_difference(&xi.v, &zeta.v)
}

/// Gromov product `⟨x, y⟩_z`, extended continuously to boundary arguments.
pub fn gromov_product(x: &Point, y: &Point, z: &HPoint) -> Result<f64, HyperbolicError> {
    let g = match (x, y) {
        (Point::Interior(a), Point::Interior(b)) => 0.5 * (dist(a, z) + dist(b, z) - dist(a, b)),
        (Point::Boundary(xi), Point::Interior(b)) | (Point::Interior(b), Point::Boundary(xi)) => {
            0.5 * (dist(b, z) + busemann(z, b, xi))
        }
        (Point::Boundary(xi), Point::Boundary(zeta)) => {
            let q = null_pair_form(xi, zeta);
            if !(q > 0.0) {
                return Err(HyperbolicError::CoincidentBoundaryPoints);
            }
            let den = 2.0 * minkowski(&z.v, &xi.v) * minkowski(&z.v, &zeta.v);
            -0.5 * (q / den).ln()
        }
    };
    Ok(g.max(0.0))
}

/// Gromov product of two boundary points obtained from interior products along
/// rays from `z`, sampled at t = 20, 30, 40 and extrapolated by Δ².
pub fn gromov_product_ray_limit(xi: &BoundaryPoint, zeta: &BoundaryPoint, z: &HPoint) -> f64 {
    let g = |t: f64| {
        let a = geodesic_ray(z, xi, t);
        let b = geodesic_ray(z, zeta, t);
        0.5 * (2.0 * t - dist(&a, &b))
    };
    let (g0, g1, g2) = (g(20.0), g(30.0), g(40.0));
    crate::numeric::aitken(g0, g1, g2).unwrap_or(g2)
}

/// Visual distance `exp(−⟨ξ, ζ⟩_o)`.
pub fn visual_dist(xi: &BoundaryPoint, zeta: &BoundaryPoint, o: &HPoint) -> f64 {
    let q = null_pair_form(xi, zeta).max(0.0);
    let den = 2.0 * minkowski(&o.v, &xi.v) * minkowski(&o.v, &zeta.v);
    (q / den).sqrt()
}

/// Distance from a point to a geodesic segment, given only the distances `a`, `b`
/// from the point to the endpoints and the segment length `l`.
pub fn segment_distance_from_lengths(a: f64, b: f64, l: f64) -> f64 {
    if l <= 0.0 {
        return a.min(b);
    }
    // Foot of the perpendicular at arclength s: cosh a = cosh h cosh s and
    // cosh b = cosh h cosh(l − s), hence
    // e^{2s} = (cosh a e^l − cosh b) / (cosh b − cosh a e^{−l}).
    let (ca, cb) = (ln_cosh(a), ln_cosh(b));
    let k1 = cb - ca - l;
    let k2 = ca - l - cb;
    if k1 >= 0.0 || k2 >= 0.0 {
        return a.min(b);
    }
    let num = ca + l + (-k1.exp()).ln_1p();
    let den = cb + (-k2.exp()).ln_1p();
    let s = 0.5 * (num - den);
    if !(0.0..=l).contains(&s) || !s.is_finite() {
        return a.min(b);
    }
    ln_cosh_inv(ca - ln_cosh(s)).min(a).min(b)
}

/// Visual diameter of the shadow of the ball `B(z, r)` seen from `o`, found by
/// bisecting the shadow edge along `n_dirs` directions around the direction of `z`.
pub fn shadow_diameter(z: &HPoint, r: f64, o: &HPoint, n_dirs: usize) -> Result<f64, HyperbolicError> {
    if !(r > 0.0) || n_dirs < 8 {
        return Err(HyperbolicError::OutOfRange("shadow needs r > 0 and n_dirs >= 8".into()));
    }
    let dz = dist(o, z);
    if dz <= r {
        return Ok(1.0);
    }
    let n = o.dim();
    let tz = unit_tangent(o, z)?;
    // An orthonormal tangent frame at o containing tz.
    let frame = tangent_frame(o, &tz);
    let hits = |dir: &Vector| -> bool {
        let reach = dz + r + 1.0;
        let (_, m) = golden_section(|t| dist(z, &exp_map(o, dir, t)), 0.0, reach, 1e-12, 200);
        m <= r
    };
    let mut edges: Vec<Vector> = Vec::with_capacity(n_dirs);
    for k in 0..n_dirs {
        // Probe directions spread over a great circle orthogonal to tz
        // (the shadow is a round cap, so one circle suffices).
        let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / (n_dirs as f64);
        let w = match frame.len() {
            2 => Vector::zeros(n + 1),
            3 => &frame[2] * phi.cos().signum(),
            _ => &frame[2] * phi.cos() + &frame[3] * phi.sin(),
        };
        let at = |ang: f64| &tz * ang.cos() + &w * ang.sin();
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        if hits(&at(hi)) {
            lo = hi;
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if hits(&at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        edges.push(at(lo));
    }
    let pts: Vec<BoundaryPoint> = edges.iter().map(|u| BoundaryPoint::normalized(o.coords() + u)).collect();
    let mut diam = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            diam = diam.max(visual_dist(&pts[i], &pts[j], o));
        }
    }
    Ok(diam)
}

/// B-orthonormal tangent frame at `o` whose first spatial vector is `t0`.
/// Element 0 is `o` itself.
pub fn tangent_frame(o: &HPoint, t0: &Vector) -> Vec<Vector> {
    let n = o.dim();
    let mut frame = vec![o.coords().clone(), t0.clone()];
    for i in 1..=n {
        if frame.len() == n + 1 {
            break;
        }
        let mut e = Vector::zeros(n + 1);
        e[i] = 1.0;
        let mut w = e.clone() - o.coords() * minkowski(o.coords(), &e);
        for f in frame.iter().skip(1) {
            // tangent vectors have B(f, f) = −1
            w += f * minkowski(&w, f);
        }
        let nrm2 = -minkowski(&w, &w);
        if nrm2 > 1e-10 {
            frame.push(w / nrm2.sqrt());
        }
    }
    frame
}
