//! The three-circle family: reflections in three symmetric geodesics of H²
//! cutting arcs of length θ centered at angles 0, 2π/3, 4π/3, with
//! generators `σ₁σ₂` and `σ₁σ₃`.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::disk::{boundary_angle, boundary_from_angle, compose_inversions, mobius_translation_length, CircleInversion};
use crate::hyperbolic::{minkowski, visual_dist, HPoint, Vector};
use crate::isometry::LorentzIsometry;
use crate::schottky::{SchottkyDisk, SchottkyDisks, SchottkyError, SchottkyRep};

/// Relative enlargement of the canonical disks, so that rims map strictly inside.
const DISK_SLACK: f64 = 1e-6;
pub const DEFAULT_BALL_RADIUS: usize = 6;

#[derive(Debug, Clone)]
pub struct McMullen {
    pub theta: f64,
    /// Reflections `σ₁, σ₂, σ₃` as Lorentz matrices.
    pub reflections: [LorentzIsometry; 3],
    pub circles: [CircleInversion; 3],
    pub rep: SchottkyRep,
    pub disks: SchottkyDisks,
}

pub fn circle_angle(i: usize) -> f64 {
    2.0 * PI * i as f64 / 3.0
}

/// Spacelike unit normal of the geodesic cutting the arc of length `theta`
/// centered at angle `phi`; the half-space near the arc is `B(v, m) < 0`.
pub fn reflection_normal(phi: f64, theta: f64) -> Vector {
    let h = 0.5 * theta;
    Vector::from_vec(vec![1.0 / h.tan(), phi.cos() / h.sin(), phi.sin() / h.sin()])
}

/// `v ↦ v + 2 B(v, m) m`.
pub fn reflection_matrix(m: &Vector) -> LorentzIsometry {
    let mut jm = m.clone();
    jm[1] = -jm[1];
    jm[2] = -jm[2];
    let r = DMatrix::identity(3, 3) + m * jm.transpose() * 2.0;
    LorentzIsometry::new(r).expect("reflection in a spacelike unit normal is Lorentz")
}

pub fn mcmullen_family(theta: f64) -> Result<McMullen, SchottkyError> {
    mcmullen_family_with(theta, DEFAULT_BALL_RADIUS, 1e-10)
}

pub fn mcmullen_family_with(theta: f64, ball_radius: usize, tol: f64) -> Result<McMullen, SchottkyError> {
    if !(theta > 0.0 && theta < 2.0 * PI / 3.0) {
        return Err(SchottkyError::ThetaOutOfRange(theta));
    }
    let refl: Vec<LorentzIsometry> = (0..3).map(|i| reflection_matrix(&reflection_normal(circle_angle(i), theta))).collect();
    let circles = [0, 1, 2].map(|i| CircleInversion::orthogonal(circle_angle(i), theta));
    let s1 = refl[0].compose(&refl[1]);
    let s2 = refl[0].compose(&refl[2]);
    let rep = SchottkyRep::new(vec![s1, s2], HPoint::origin(2))?.with_diagnostics(ball_radius, tol)?;
    let disks = canonical_disks(theta, &refl[0])?;
    Ok(McMullen { theta, reflections: [refl[0].clone(), refl[1].clone(), refl[2].clone()], circles, rep, disks })
}

/// `D₁⁻ = arc₂`, `D₁⁺ = σ₁(arc₂)`, `D₂⁻ = arc₃`, `D₂⁺ = σ₁(arc₃)`, slightly enlarged.
fn canonical_disks(theta: f64, sigma1: &LorentzIsometry) -> Result<SchottkyDisks, SchottkyError> {
    let o = HPoint::origin(2);
    let arc = |phi: f64, half: f64| {
        let c = boundary_from_angle(phi);
        let e = boundary_from_angle(phi + half);
        (c.clone(), visual_dist(&c, &e, &o))
    };
    let image_arc = |phi: f64| {
        let a = sigma1.apply_boundary(&boundary_from_angle(phi - 0.5 * theta));
        let b = sigma1.apply_boundary(&boundary_from_angle(phi + 0.5 * theta));
        let (ta, tb) = (boundary_angle(&a), boundary_angle(&b));
        // the image arc lies inside arc₁, which straddles angle 0
        let mid = 0.5 * (ta + tb);
        let half = 0.5 * (ta - tb).abs();
        arc(mid, half)
    };
    let mut disks = Vec::new();
    for (gen, phi) in [(1, circle_angle(1)), (2, circle_angle(2))] {
        let (c_minus, r_minus) = arc(phi, 0.5 * theta);
        let (c_plus, r_plus) = image_arc(phi);
        disks.push(SchottkyDisk { letter: -gen, center: c_minus, radius: r_minus * (1.0 + DISK_SLACK) });
        disks.push(SchottkyDisk { letter: gen, center: c_plus, radius: r_plus * (1.0 + DISK_SLACK) });
    }
    SchottkyDisks::new(o, disks, 2)
}

impl McMullen {
    /// Translation lengths of `σ₁σ₂` and `σ₁σ₃` from the traces of the
    /// corresponding Möbius maps of the disk.
    pub fn mobius_translation_lengths(&self) -> [f64; 2] {
        let c = &self.circles;
        [mobius_translation_length(&compose_inversions(&c[0], &c[1])), mobius_translation_length(&compose_inversions(&c[0], &c[2]))]
    }

    /// Hyperbolic distance between the geodesics of circles `i` and `j`,
    /// from `cosh D = |B(m_i, m_j)|`.
    pub fn circle_distance(&self, i: usize, j: usize) -> f64 {
        let mi = reflection_normal(circle_angle(i), self.theta);
        let mj = reflection_normal(circle_angle(j), self.theta);
        minkowski(&mi, &mj).abs().acosh()
    }
}
