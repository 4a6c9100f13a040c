//! Closed-form rigid alignment of corresponding point sets (Umeyama without
//! scale). Only the relative, SE(3)-aligned metric uses this.

mod svd;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use svd::svd_3x3;

/// Second singular value of the cross-covariance below this fraction of the
/// first means the points are (nearly) collinear.
pub const DEGENERACY_RATIO: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("rigid alignment needs at least 3 point pairs, got {0}")]
    InsufficientPoints(usize),
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate point configuration (collinear or coincident points)")]
    DegenerateConfiguration,
}

/// p -> R p + t with R a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self.compose(other)` applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

pub fn apply_transform(transform: &RigidTransform, pts: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    pts.iter().map(|p| transform.apply(p)).collect()
}

fn centroid(pts: &[Vector3<f64>]) -> Vector3<f64> {
    pts.iter().fold(Vector3::zeros(), |acc, p| acc + p) / pts.len() as f64
}

/// Rotation and translation minimizing `sum |R est_i + t - reference_i|^2`.
pub fn umeyama_align(
    est: &[Vector3<f64>],
    reference: &[Vector3<f64>],
) -> Result<RigidTransform, AlignmentError> {
    if est.len() != reference.len() {
        return Err(AlignmentError::LengthMismatch(est.len(), reference.len()));
    }
    if est.len() < 3 {
        return Err(AlignmentError::InsufficientPoints(est.len()));
    }
    let mu_est = centroid(est);
    let mu_ref = centroid(reference);
    let cov = est
        .iter()
        .zip(reference)
        .fold(Matrix3::zeros(), |acc, (e, r)| acc + (r - mu_ref) * (e - mu_est).transpose())
        / est.len() as f64;

    let (u, s, v) = svd_3x3(&cov);
    if !(s[0] > 0.0) || s[1] < DEGENERACY_RATIO * s[0] {
        return Err(AlignmentError::DegenerateConfiguration);
    }
    // Flip the weakest direction when U V^T would be a reflection.
    let d = if (u.determinant() * v.determinant()) < 0.0 { -1.0 } else { 1.0 };
    let rotation = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v.transpose();
    let translation = mu_ref - rotation * mu_est;
    Ok(RigidTransform { rotation, translation })
}
