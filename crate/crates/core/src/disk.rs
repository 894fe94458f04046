//! Poincaré disk helpers for H²: conversion to the hyperboloid and circle
//! inversions as anti-Möbius maps.

use nalgebra::Complex;

use crate::hyperbolic::{BoundaryPoint, HPoint, Vector};

pub type C64 = Complex<f64>;

/// `z ↦ (1 + |z|², 2 Re z, 2 Im z) / (1 − |z|²)`.
pub fn disk_to_hyperboloid(z: C64) -> HPoint {
    let s = 1.0 - z.norm_sqr();
    HPoint::from_spatial(&[2.0 * z.re / s, 2.0 * z.im / s])
}

pub fn hyperboloid_to_disk(p: &HPoint) -> C64 {
    let v = p.coords();
    C64::new(v[1], v[2]) / (1.0 + v[0])
}

pub fn boundary_from_angle(phi: f64) -> BoundaryPoint {
    BoundaryPoint::from_direction(&[phi.cos(), phi.sin()]).expect("unit direction")
}

pub fn boundary_angle(xi: &BoundaryPoint) -> f64 {
    let d = xi.direction();
    d[1].atan2(d[0])
}

/// Inversion in the circle `|z − c| = R`, i.e. `z ↦ c + R² / conj(z − c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleInversion {
    pub center: C64,
    pub radius: f64,
}

impl CircleInversion {
    /// The circle orthogonal to the unit circle meeting it in the arc of angular
    /// length `theta` centered at angle `phi`.
    pub fn orthogonal(phi: f64, theta: f64) -> Self {
        let half = 0.5 * theta;
        Self { center: C64::from_polar(1.0 / half.cos(), phi), radius: half.tan() }
    }

    pub fn apply(&self, z: C64) -> C64 {
        self.center + self.radius * self.radius / (z - self.center).conj()
    }

    /// Matrix `A` with `σ(z) = (a z̄ + b)/(c z̄ + d)`.
    pub fn anti_mobius(&self) -> [[C64; 2]; 2] {
        let c = self.center;
        let r2 = C64::new(self.radius * self.radius, 0.0);
        [[c, r2 - c * c.conj()], [C64::new(1.0, 0.0), -c.conj()]]
    }
}

/// Matrix of the Möbius map `σ_a ∘ σ_b`, namely `A_a · conj(A_b)`.
pub fn compose_inversions(a: &CircleInversion, b: &CircleInversion) -> [[C64; 2]; 2] {
    let x = a.anti_mobius();
    let y = b.anti_mobius();
    let yc = [[y[0][0].conj(), y[0][1].conj()], [y[1][0].conj(), y[1][1].conj()]];
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * yc[0][j] + x[i][1] * yc[1][j];
        }
    }
    out
}

/// Translation length from `|tr| / sqrt|det| = 2 cosh(ℓ/2)`.
pub fn mobius_translation_length(m: &[[C64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let t = tr.norm() / det.norm().sqrt();
    2.0 * (0.5 * t).max(1.0).acosh()
}

pub fn mobius_apply(m: &[[C64; 2]; 2], z: C64) -> C64 {
    (m[0][0] * z + m[0][1]) / (m[1][0] * z + m[1][1])
}

/// Hyperboloid coordinates of a disk point as a raw vector.
pub fn disk_vector(z: C64) -> Vector {
    disk_to_hyperboloid(z).into_coords()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::dist;

    #[test]
    fn disk_round_trip_and_distance() {
        let z = C64::new(0.3, -0.5);
        let p = disk_to_hyperboloid(z);
        assert!((hyperboloid_to_disk(&p) - z).norm() < 1e-14);
        let d = ((1.0 + z.norm()) / (1.0 - z.norm())).ln();
        assert!((dist(&p, &HPoint::origin(2)) - d).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_circle_fixes_its_arc_endpoints() {
        let s = CircleInversion::orthogonal(0.7, 0.4);
        let e = C64::from_polar(1.0, 0.7 + 0.2);
        assert!((s.apply(e) - e).norm() < 1e-12);
        let z = C64::new(0.1, 0.2);
        assert!((s.apply(s.apply(z)) - z).norm() < 1e-12);
        // anti-Möbius matrix agrees with the formula
        let m = s.anti_mobius();
        let w = (m[0][0] * z.conj() + m[0][1]) / (m[1][0] * z.conj() + m[1][1]);
        assert!((w - s.apply(z)).norm() < 1e-12);
    }
}
