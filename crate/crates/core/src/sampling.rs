//! Seeded random geometry used by property checks and the CLI `check` suite.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hyperbolic::{BoundaryPoint, HPoint, Vector};
use crate::isometry::LorentzIsometry;
use nalgebra::DMatrix;

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Point at a uniformly random distance in `[0, max_radius]` from the origin in a
/// uniformly random direction.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, n: usize, max_radius: f64) -> HPoint {
    let u = random_boundary(rng, n);
    let t: f64 = rng.random_range(0.0..=max_radius);
    let x: Vec<f64> = u.direction().iter().map(|c| c * t.sinh()).collect();
    HPoint::from_spatial(&x)
}

/// Uniform point on the boundary sphere (seen from the origin).
pub fn random_boundary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> BoundaryPoint {
    loop {
        let g = gaussian_vec(rng, n);
        if g.iter().any(|c| c.abs() > 1e-12) {
            return BoundaryPoint::from_direction(&g).expect("nonzero direction");
        }
    }
}

/// Random orthogonal spatial matrix from the QR factorization of a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> LorentzIsometry {
    let a = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
    let qr = a.qr();
    let q = qr.q();
    let mut m = DMatrix::identity(n + 1, n + 1);
    m.view_mut((1, 1), (n, n)).copy_from(&q);
    LorentzIsometry::from_matrix_unchecked(m)
}

/// Translation to a random point composed with a random rotation.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, n: usize, max_radius: f64) -> LorentzIsometry {
    let p = random_point(rng, n, max_radius);
    LorentzIsometry::translation_to(&p).compose(&random_rotation(rng, n))
}

/// Random unit tangent vector at `p`.
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, p: &HPoint) -> Vector {
    let n = p.dim();
    let t = LorentzIsometry::translation_to(p);
    let u = random_boundary(rng, n);
    let mut v = Vector::zeros(n + 1);
    for i in 0..n {
        v[i + 1] = u.direction()[i];
    }
    t.apply_vec(&v)
}
