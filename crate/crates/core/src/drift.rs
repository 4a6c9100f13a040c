//! Error growth versus separation from RTK-fixed epochs, summarized by a
//! straight line whose intercept is pinned at the fix-level error.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lever_arm::BaseCenterTrack;
use crate::matching::CheckpointVisit;
use crate::plot::{log_scatter, Panel, ScatterSeries};
use crate::trajectory_io::{GnssStatus, RtkLog};

/// Error level of a typical RTK fix, meters.
pub const DEFAULT_EPS0: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("no anchor (RTK fix) epochs in the log")]
    NoFixAvailable,
    #[error("drift fit needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("all abscissae are zero")]
    AllZeroAbscissa,
    #[error("abscissa must be finite and non-negative, got {0}")]
    InvalidAbscissa(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCoordinate {
    pub checkpoint_id: String,
    pub t_rep: f64,
    /// Seconds to the closest anchor epoch, either direction.
    pub dt_nearest_fix: f64,
    /// Path length along the track to the closest anchor epoch.
    pub dx_nearest_fix: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftAxis {
    /// Slope in m/s.
    Time,
    /// Slope in m/m.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub axis: DriftAxis,
    pub eps0: f64,
    pub alpha: f64,
    pub n: usize,
    pub residual_std: f64,
}

impl DriftFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.eps0 + self.alpha * x
    }
}

/// Cumulative chord length of the track, linearly interpolated in time and
/// clamped at both ends.
struct PathLength<'a> {
    track: &'a BaseCenterTrack,
    cumulative: Vec<f64>,
}

impl<'a> PathLength<'a> {
    fn new(track: &'a BaseCenterTrack) -> Self {
        let s = track.samples();
        let mut cumulative = Vec::with_capacity(s.len());
        let mut acc = 0.0;
        for (i, sample) in s.iter().enumerate() {
            if i > 0 {
                acc += (sample.p_base.to_vector() - s[i - 1].p_base.to_vector()).norm();
            }
            cumulative.push(acc);
        }
        Self { track, cumulative }
    }

    fn at(&self, t: f64) -> f64 {
        let s = self.track.samples();
        if s.is_empty() {
            return 0.0;
        }
        let i = s.partition_point(|x| x.t <= t);
        if i == 0 {
            return self.cumulative[0];
        }
        if i == s.len() {
            return self.cumulative[s.len() - 1];
        }
        let (t0, t1) = (s[i - 1].t, s[i].t);
        let w = (t - t0) / (t1 - t0);
        self.cumulative[i - 1] + w * (self.cumulative[i] - self.cumulative[i - 1])
    }
}

/// For each visit, time and along-track distance to the nearest anchor epoch.
///
/// Anchors are records whose status is listed in `anchors` (normally just
/// [`GnssStatus::RtkFix`]). Neighbours before and after the visit are both
/// considered, matching smoothers that propagate corrections both ways.
pub fn outage_coordinates(
    track: &BaseCenterTrack,
    log: &RtkLog,
    visits: &[CheckpointVisit],
    anchors: &[GnssStatus],
) -> Result<Vec<OutageCoordinate>, DriftError> {
    let mut fixes = log.anchor_times(anchors);
    if fixes.is_empty() {
        return Err(DriftError::NoFixAvailable);
    }
    fixes.sort_by(f64::total_cmp);
    let path = PathLength::new(track);
    Ok(visits
        .iter()
        .map(|v| {
            let t = v.t_rep;
            let i = fixes.partition_point(|&f| f < t);
            let neighbours = [i.checked_sub(1), (i < fixes.len()).then_some(i)];
            let s_t = path.at(t);
            let mut dt = f64::INFINITY;
            let mut dx = f64::INFINITY;
            for f in neighbours.into_iter().flatten().map(|k| fixes[k]) {
                dt = dt.min((f - t).abs());
                dx = dx.min((path.at(f) - s_t).abs());
            }
            OutageCoordinate {
                checkpoint_id: v.checkpoint_id.clone(),
                t_rep: t,
                dt_nearest_fix: dt,
                dx_nearest_fix: dx,
            }
        })
        .collect())
}

/// Least squares slope of `eps = eps0 + alpha * x` with `eps0` held fixed:
/// `alpha = sum x (eps - eps0) / sum x^2`.
pub fn fit_drift(samples: &[(f64, f64)], eps0: f64, axis: DriftAxis) -> Result<DriftFit, DriftError> {
    if samples.len() < 2 {
        return Err(DriftError::InsufficientSamples(samples.len()));
    }
    if let Some(&(x, _)) = samples.iter().find(|(x, _)| !(x.is_finite() && *x >= 0.0)) {
        return Err(DriftError::InvalidAbscissa(x));
    }
    let sxx: f64 = samples.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return Err(DriftError::AllZeroAbscissa);
    }
    let sxy: f64 = samples.iter().map(|(x, e)| x * (e - eps0)).sum();
    let alpha = sxy / sxx;
    let ss: f64 = samples.iter().map(|(x, e)| (e - eps0 - alpha * x).powi(2)).sum();
    Ok(DriftFit {
        axis,
        eps0,
        alpha,
        n: samples.len(),
        residual_std: (ss / (samples.len() - 1) as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub sequence: String,
    pub checkpoint_id: String,
    pub dt_s: f64,
    pub dx_m: f64,
    pub eps_m: f64,
}

/// All samples of one method, possibly pooled over several sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub method: String,
    pub samples: Vec<DriftSample>,
}

impl DriftSeries {
    pub fn fit(&self, eps0: f64, axis: DriftAxis) -> Result<DriftFit, DriftError> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .map(|s| match axis {
                DriftAxis::Time => (s.dt_s, s.eps_m),
                DriftAxis::Distance => (s.dx_m, s.eps_m),
            })
            .collect();
        fit_drift(&pts, eps0, axis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftArtifacts {
    pub csv: String,
    pub svg: String,
    pub fits: Vec<(String, Option<DriftFit>, Option<DriftFit>)>,
}

/// CSV of every sample plus a two-panel log-scale scatter (time and distance
/// to the nearest fix) with the fitted lines.
pub fn drift_report(series: &[DriftSeries], eps0: f64) -> DriftArtifacts {
    let mut csv = String::from("method,sequence,cp_id,dt_s,dx_m,eps_m\n");
    let mut fits = Vec::new();
    for s in series {
        for x in &s.samples {
            let _ = writeln!(
                csv,
                "{},{},{},{:.6},{:.6},{:.6}",
                s.method, x.sequence, x.checkpoint_id, x.dt_s, x.dx_m, x.eps_m
            );
        }
        fits.push((
            s.method.clone(),
            s.fit(eps0, DriftAxis::Time).ok(),
            s.fit(eps0, DriftAxis::Distance).ok(),
        ));
    }
    let panel = |axis: DriftAxis, label: &'static str| Panel {
        x_label: label,
        series: series
            .iter()
            .zip(&fits)
            .map(|(s, (_, ft, fd))| ScatterSeries {
                label: &s.method,
                points: s
                    .samples
                    .iter()
                    .map(|x| match axis {
                        DriftAxis::Time => (x.dt_s, x.eps_m),
                        DriftAxis::Distance => (x.dx_m, x.eps_m),
                    })
                    .collect(),
                fit: match axis {
                    DriftAxis::Time => ft.map(|f| (f.eps0, f.alpha)),
                    DriftAxis::Distance => fd.map(|f| (f.eps0, f.alpha)),
                },
            })
            .collect(),
    };
    let panels = [
        panel(DriftAxis::Time, "time to nearest RTK fix [s]"),
        panel(DriftAxis::Distance, "distance to nearest RTK fix [m]"),
    ];
    let svg = log_scatter("3D absolute error vs. nearest RTK fix", "error [m]", &panels);
    DriftArtifacts { csv, svg, fits }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::geodesy::{EnuCoord, GeodeticCoord, Hemisphere, UtmCoord, UtmZone};
    use crate::lever_arm::BaseCenterSample;
    use crate::trajectory_io::RtkRecord;

    fn straight_track(speed: f64, duration: f64) -> BaseCenterTrack {
        BaseCenterTrack::from_samples(
            (0..=(duration as usize * 10))
                .map(|k| {
                    let t = k as f64 * 0.1;
                    BaseCenterSample { t, p_base: EnuCoord::new(speed * t, 0.0, 0.0) }
                })
                .collect(),
        )
    }

    fn log_with_fixes(times: &[f64]) -> RtkLog {
        let g = GeodeticCoord::from_degrees(48.78, 9.18, 300.0).unwrap();
        RtkLog::new(times.iter().map(|&t| RtkRecord { t, position: g, status: GnssStatus::RtkFix }).collect()).unwrap()
    }

    fn visit(t: f64) -> CheckpointVisit {
        CheckpointVisit {
            checkpoint_id: format!("CP{t}"),
            t_rep: t,
            t_start: t,
            t_end: t,
            p_est: UtmCoord::new(500_000.0, 0.0, 0.0, UtmZone::new(32, Hemisphere::North).unwrap()),
            distance_to_cp: 0.0,
        }
    }

    #[test]
    fn visit_at_fix_is_zero() {
        let oc = outage_coordinates(&straight_track(1.0, 100.0), &log_with_fixes(&[0.0, 50.0]), &[visit(50.0)], &[GnssStatus::RtkFix]).unwrap();
        assert_eq!(oc[0].dt_nearest_fix, 0.0);
        assert!(oc[0].dx_nearest_fix.abs() < 1e-9);
    }

    #[test]
    fn symmetric_speed_case() {
        let oc = outage_coordinates(&straight_track(1.0, 100.0), &log_with_fixes(&[0.0, 100.0]), &[visit(30.0)], &[GnssStatus::RtkFix]).unwrap();
        assert!((oc[0].dt_nearest_fix - 30.0).abs() < 1e-9);
        assert!((oc[0].dx_nearest_fix - 30.0).abs() < 1e-9);
        let oc = outage_coordinates(&straight_track(1.0, 100.0), &log_with_fixes(&[0.0, 100.0]), &[visit(80.0)], &[GnssStatus::RtkFix]).unwrap();
        assert!((oc[0].dt_nearest_fix - 20.0).abs() < 1e-9);
        assert!((oc[0].dx_nearest_fix - 20.0).abs() < 1e-9);
    }

    #[test]
    fn non_anchor_statuses_ignored() {
        let g = GeodeticCoord::from_degrees(48.78, 9.18, 300.0).unwrap();
        let log = RtkLog::new(vec![RtkRecord { t: 10.0, position: g, status: GnssStatus::RtkFloat }]).unwrap();
        assert_eq!(
            outage_coordinates(&straight_track(1.0, 20.0), &log, &[visit(5.0)], &[GnssStatus::RtkFix]),
            Err(DriftError::NoFixAvailable)
        );
        let oc = outage_coordinates(&straight_track(1.0, 20.0), &log, &[visit(5.0)], &[GnssStatus::RtkFix, GnssStatus::RtkFloat]).unwrap();
        assert!((oc[0].dt_nearest_fix - 5.0).abs() < 1e-12);
    }

    #[test]
    fn fit_cases() {
        let flat: Vec<_> = (1..10).map(|x| (x as f64, 0.02)).collect();
        assert_eq!(fit_drift(&flat, 0.02, DriftAxis::Time).unwrap().alpha, 0.0);
        let lin: Vec<_> = (0..20).map(|x| (x as f64 * 3.7, 0.02 + 0.001 * x as f64 * 3.7)).collect();
        let f = fit_drift(&lin, 0.02, DriftAxis::Distance).unwrap();
        assert!((f.alpha - 0.001).abs() <= 1e-12 * 0.001);
        assert!(f.residual_std < 1e-12);
        assert_eq!(fit_drift(&[(1.0, 0.1)], 0.02, DriftAxis::Time), Err(DriftError::InsufficientSamples(1)));
        assert_eq!(fit_drift(&[(0.0, 0.1), (0.0, 0.3)], 0.02, DriftAxis::Time), Err(DriftError::AllZeroAbscissa));
        assert_eq!(fit_drift(&[(-1.0, 0.1), (2.0, 0.3)], 0.02, DriftAxis::Time), Err(DriftError::InvalidAbscissa(-1.0)));
    }

    #[test]
    fn report_outputs() {
        let empty = drift_report(&[], DEFAULT_EPS0);
        assert_eq!(empty.csv, "method,sequence,cp_id,dt_s,dx_m,eps_m\n");
        assert!(empty.svg.contains("no data"));

        let s = DriftSeries {
            method: "lio".into(),
            samples: (0..5)
                .map(|k| DriftSample { sequence: "s1".into(), checkpoint_id: format!("CP{k}"), dt_s: 10.0 * k as f64, dx_m: 6.0 * k as f64, eps_m: 0.02 + 0.0015 * 10.0 * k as f64 })
                .collect(),
        };
        let r = drift_report(&[s], DEFAULT_EPS0);
        assert_eq!(r.csv.lines().count(), 6);
        assert!(r.csv.contains("lio,s1,CP2,20.000000,12.000000,0.050000"));
        assert!((r.fits[0].1.unwrap().alpha - 0.0015).abs() < 1e-15);
        assert!((r.fits[0].2.unwrap().alpha - 0.0025).abs() < 1e-15);
        assert!(r.svg.contains("<polyline"));
    }

    proptest! {
        #[test]
        fn scale_consistency(xs in prop::collection::vec(0.1..100.0f64, 2..20), k in 0.1..10.0f64, a in 0.0..0.01f64) {
            let pts: Vec<_> = xs.iter().enumerate().map(|(i, &x)| (x, 0.02 + a * x + 0.001 * (i % 3) as f64)).collect();
            let scaled: Vec<_> = pts.iter().map(|(x, e)| (x * k, *e)).collect();
            let f1 = fit_drift(&pts, 0.02, DriftAxis::Time).unwrap();
            let f2 = fit_drift(&scaled, 0.02, DriftAxis::Time).unwrap();
            prop_assert!((f2.alpha - f1.alpha / k).abs() <= 1e-12 * f1.alpha.abs().max(1e-6));
        }

        #[test]
        fn more_fixes_never_increase_separation(fix_ts in prop::collection::vec(0.0..100.0f64, 1..8), extra in 0.0..100.0f64, tv in 0.0..100.0f64) {
            let mut ts = fix_ts.clone();
            ts.sort_by(f64::total_cmp);
            let track = straight_track(0.7, 100.0);
            let before = outage_coordinates(&track, &log_with_fixes(&ts), &[visit(tv)], &[GnssStatus::RtkFix]).unwrap();
            ts.push(extra);
            ts.sort_by(f64::total_cmp);
            let after = outage_coordinates(&track, &log_with_fixes(&ts), &[visit(tv)], &[GnssStatus::RtkFix]).unwrap();
            prop_assert!(after[0].dt_nearest_fix <= before[0].dt_nearest_fix);
            prop_assert!(after[0].dx_nearest_fix <= before[0].dx_nearest_fix + 1e-12);
        }
    }
}
