//! Absolute (unaligned) and SE(3)-aligned checkpoint RMSE, and the gap
//! between them.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{apply_transform, umeyama_align, AlignmentError, RigidTransform};
use crate::matching::CheckpointVisit;
use crate::trajectory_io::Checkpoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no checkpoint observations")]
    NoCheckpoints,
    #[error("visit references unknown checkpoint '{0}'")]
    UnknownCheckpoint(String),
    #[error("checkpoint '{0}' and its estimate are in different UTM zones")]
    ZoneMismatch(String),
    #[error("alignment gap undefined for zero absolute RMSE")]
    UndefinedGap,
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

/// Estimate minus survey, in (easting, northing, height).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointError {
    pub checkpoint_id: String,
    pub t_rep: f64,
    pub eps: [f64; 3],
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub n_points: usize,
    pub rmse_absolute: f64,
    /// `None` when fewer than three points or a degenerate layout.
    pub rmse_aligned: Option<f64>,
    pub gap_percent: Option<f64>,
    /// Per-axis breakdown (E, N, h); not part of the headline metrics.
    pub per_axis_rmse: [f64; 3],
}

impl AccuracySummary {
    /// Gap rounded to whole percent, as printed in summary tables.
    pub fn gap_rounded(&self) -> Option<i64> {
        self.gap_percent.map(|g| g.round() as i64)
    }
}

pub fn checkpoint_errors(
    visits: &[CheckpointVisit],
    cps: &[Checkpoint],
) -> Result<Vec<CheckpointError>, MetricsError> {
    let by_id: BTreeMap<&str, &Checkpoint> = cps.iter().map(|c| (c.id.as_str(), c)).collect();
    visits
        .iter()
        .map(|v| {
            let cp = by_id
                .get(v.checkpoint_id.as_str())
                .ok_or_else(|| MetricsError::UnknownCheckpoint(v.checkpoint_id.clone()))?;
            if cp.coord.zone != v.p_est.zone {
                return Err(MetricsError::ZoneMismatch(v.checkpoint_id.clone()));
            }
            let eps = [
                v.p_est.easting - cp.coord.easting,
                v.p_est.northing - cp.coord.northing,
                v.p_est.height - cp.coord.height,
            ];
            Ok(CheckpointError {
                checkpoint_id: v.checkpoint_id.clone(),
                t_rep: v.t_rep,
                eps,
                norm: Vector3::from(eps).norm(),
            })
        })
        .collect()
}

/// sqrt(mean |eps_i|^2), no alignment.
pub fn absolute_rmse(errors: &[CheckpointError]) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::NoCheckpoints);
    }
    let ss: f64 = errors.iter().map(|e| e.norm * e.norm).sum();
    Ok((ss / errors.len() as f64).sqrt())
}

pub fn per_axis_rmse(errors: &[CheckpointError]) -> Result<[f64; 3], MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::NoCheckpoints);
    }
    let n = errors.len() as f64;
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (errors.iter().map(|e| e.eps[k] * e.eps[k]).sum::<f64>() / n).sqrt();
    }
    Ok(out)
}

/// RMSE of residuals after the optimal rigid alignment of `est` onto
/// `reference`.
pub fn aligned_rmse(
    est: &[Vector3<f64>],
    reference: &[Vector3<f64>],
) -> Result<(f64, RigidTransform), MetricsError> {
    // Centering on the reference centroid keeps UTM-sized coordinates from
    // eating precision in the cross-covariance.
    let shift = reference.iter().fold(Vector3::zeros(), |a, p| a + p) / reference.len().max(1) as f64;
    let est_c: Vec<_> = est.iter().map(|p| p - shift).collect();
    let ref_c: Vec<_> = reference.iter().map(|p| p - shift).collect();
    let t = umeyama_align(&est_c, &ref_c)?;
    let aligned = apply_transform(&t, &est_c);
    let ss: f64 = aligned.iter().zip(&ref_c).map(|(a, r)| (a - r).norm_squared()).sum();
    let transform = RigidTransform {
        rotation: t.rotation,
        translation: t.translation + shift - t.rotation * shift,
    };
    Ok(((ss / est.len() as f64).sqrt(), transform))
}

/// Below this absolute RMSE (the report resolution) the gap is not reported;
/// the ratio would only measure floating-point residue.
pub const GAP_MIN_ABS_RMSE: f64 = 1e-6;

/// Share of the absolute error that alignment hides, in percent:
/// `100 * (1 - aligned / absolute)`.
pub fn alignment_gap(rmse_abs: f64, rmse_aligned: f64) -> Result<f64, MetricsError> {
    if !(rmse_abs > 0.0) {
        return Err(MetricsError::UndefinedGap);
    }
    Ok(100.0 * (1.0 - rmse_aligned / rmse_abs))
}

/// Errors plus summary for one method's visits.
pub fn summarize(
    visits: &[CheckpointVisit],
    cps: &[Checkpoint],
) -> Result<(Vec<CheckpointError>, AccuracySummary), MetricsError> {
    let errors = checkpoint_errors(visits, cps)?;
    let rmse_absolute = absolute_rmse(&errors)?;
    let by_id: BTreeMap<&str, &Checkpoint> = cps.iter().map(|c| (c.id.as_str(), c)).collect();
    let est: Vec<Vector3<f64>> = visits.iter().map(|v| Vector3::from(v.p_est.to_array())).collect();
    let reference: Vec<Vector3<f64>> = visits
        .iter()
        .map(|v| Vector3::from(by_id[v.checkpoint_id.as_str()].coord.to_array()))
        .collect();
    let rmse_aligned = match aligned_rmse(&est, &reference) {
        Ok((r, _)) => Some(r),
        Err(MetricsError::Alignment(e)) => {
            log::warn!("SE(3)-aligned RMSE unavailable: {e}");
            None
        }
        Err(e) => return Err(e),
    };
    let gap_percent = match rmse_aligned {
        Some(a) if rmse_absolute >= GAP_MIN_ABS_RMSE => Some(alignment_gap(rmse_absolute, a)?),
        _ => None,
    };
    let summary = AccuracySummary {
        n_points: errors.len(),
        rmse_absolute,
        rmse_aligned,
        gap_percent,
        per_axis_rmse: per_axis_rmse(&errors)?,
    };
    Ok((errors, summary))
}
