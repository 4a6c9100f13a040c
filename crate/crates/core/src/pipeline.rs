//! End-to-end evaluation of one sequence for several methods.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use thiserror::Error;

use crate::config::{resolve, ConfigError, RtkStandalone, RunConfig, Thresholds};
use crate::drift::{outage_coordinates, DriftAxis, DriftError, DriftFit, DriftSample, DriftSeries, OutageCoordinate};
use crate::geodesy::{geodetic_to_enu, LocalFrame, UtmZone};
use crate::lever_arm::{apply_lever_arm, BaseCenterSample, BaseCenterTrack};
use crate::matching::{
    build_visit_table, import_visit_table, positions_at_visits, require_positions_at_visits, CheckpointVisit,
    MatchError, VisitTable,
};
use crate::metrics::{summarize, AccuracySummary, CheckpointError, MetricsError};
use crate::trajectory_io::{
    first_rtk_fix, parse_checkpoints, parse_rtk_log, parse_trajectory, Checkpoint, DeviceCalibration, GnssStatus,
    ParseError, RtkLog, Trajectory, TrajectoryFormat,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("visit table {path}: {source}")]
    VisitTable { path: PathBuf, source: MatchError },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("{method}: {source}")]
    Metrics { method: String, source: MetricsError },
    #[error("{0}")]
    Evaluation(String),
}

impl EvalError {
    /// Process exit code for this class of error.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Config(ConfigError::Io { .. }) | EvalError::Io { .. } => 6,
            EvalError::Config(_) => 3,
            EvalError::Parse { source: ParseError::Io(_), .. } => 6,
            EvalError::Parse { .. } | EvalError::VisitTable { .. } => 4,
            EvalError::Match(_) | EvalError::Metrics { .. } | EvalError::Evaluation(_) => 5,
        }
    }
}

/// Everything an evaluation needs, already parsed.
#[derive(Debug, Clone)]
pub struct EvaluationInputs {
    pub sequence_id: String,
    pub zone: UtmZone,
    pub calibration: DeviceCalibration,
    pub checkpoints: Vec<Checkpoint>,
    pub rtk: RtkLog,
    pub methods: Vec<(String, Trajectory)>,
    pub visit_table: Option<VisitTable>,
    pub reference_method: Option<String>,
    pub thresholds: Thresholds,
    pub anchor_statuses: Vec<GnssStatus>,
    pub rtk_standalone: RtkStandalone,
}

fn read(path: &Path) -> Result<Vec<u8>, EvalError> {
    fs::read(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

fn parse_err(path: &Path) -> impl FnOnce(ParseError) -> EvalError + '_ {
    move |source| EvalError::Parse { path: path.to_path_buf(), source }
}

pub fn load_visit_table(path: &Path) -> Result<VisitTable, EvalError> {
    import_visit_table(&read(path)?).map_err(|source| EvalError::VisitTable { path: path.to_path_buf(), source })
}

/// Reads every file referenced by `config`. `visit_table` overrides the
/// config's own table path.
pub fn load_inputs(
    config: &RunConfig,
    config_path: &Path,
    visit_table: Option<&Path>,
) -> Result<EvaluationInputs, EvalError> {
    let zone = config.zone();
    let cp_path = resolve(config_path, &config.checkpoints);
    let checkpoints = parse_checkpoints(&read(&cp_path)?[..], zone).map_err(parse_err(&cp_path))?;
    let rtk_path = resolve(config_path, &config.rtk_log);
    let rtk = parse_rtk_log(&read(&rtk_path)?[..]).map_err(parse_err(&rtk_path))?;
    let mut methods = Vec::new();
    for m in &config.methods {
        let p = resolve(config_path, &m.trajectory);
        let traj = parse_trajectory(&read(&p)?[..], TrajectoryFormat::Tum).map_err(parse_err(&p))?;
        methods.push((m.label.clone(), traj));
    }
    let table_path = visit_table
        .map(Path::to_path_buf)
        .or_else(|| config.visit_table.as_ref().map(|p| resolve(config_path, p)));
    let visit_table = table_path.as_deref().map(load_visit_table).transpose()?;
    Ok(EvaluationInputs {
        sequence_id: config.sequence_id.clone(),
        zone,
        calibration: config.calibration,
        checkpoints,
        rtk,
        methods,
        visit_table,
        reference_method: config.reference_method.clone(),
        thresholds: config.thresholds,
        anchor_statuses: config.anchor_statuses.clone(),
        rtk_standalone: config.rtk_standalone.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub label: String,
    pub visits: Vec<CheckpointVisit>,
    pub errors: Vec<CheckpointError>,
    pub summary: AccuracySummary,
    /// Visits this method could not be evaluated at.
    pub missing: Vec<String>,
    pub outage: Vec<OutageCoordinate>,
    pub drift_time: Option<DriftFit>,
    pub drift_distance: Option<DriftFit>,
    pub track: BaseCenterTrack,
}

impl MethodResult {
    pub fn drift_samples(&self, sequence: &str) -> Vec<DriftSample> {
        self.errors
            .iter()
            .zip(&self.outage)
            .map(|(e, o)| DriftSample {
                sequence: sequence.to_string(),
                checkpoint_id: e.checkpoint_id.clone(),
                dt_s: o.dt_nearest_fix,
                dx_m: o.dx_nearest_fix,
                eps_m: e.norm,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sequence_id: String,
    pub frame: LocalFrame,
    pub table: VisitTable,
    /// True when the table was detected in this run rather than imported.
    pub table_built: bool,
    pub methods: Vec<MethodResult>,
    pub fix_ratio: f64,
    pub warnings: Vec<String>,
}

/// Base-center track from RTK antenna positions, assuming a vertical pole:
/// only the vertical part of the antenna-to-base offset is removed.
pub fn rtk_standalone_track(
    rtk: &RtkLog,
    frame: &LocalFrame,
    calibration: &DeviceCalibration,
    min_status: GnssStatus,
) -> BaseCenterTrack {
    let dz = calibration.base_to_antenna().z;
    let mut samples: Vec<BaseCenterSample> = Vec::new();
    for r in rtk.records().iter().filter(|r| r.status >= min_status) {
        if samples.last().is_some_and(|s| s.t >= r.t) {
            continue;
        }
        let p = geodetic_to_enu(&r.position, &frame.origin, &frame.ellipsoid).to_vector();
        samples.push(BaseCenterSample { t: r.t, p_base: (p - Vector3::new(0.0, 0.0, dz)).into() });
    }
    BaseCenterTrack::from_samples(samples)
}

/// Builds the visit table from the reference method's base-center track.
pub fn build_table(inputs: &EvaluationInputs, frame: &LocalFrame) -> Result<VisitTable, EvalError> {
    let label = inputs
        .reference_method
        .clone()
        .or_else(|| inputs.methods.first().map(|m| m.0.clone()))
        .ok_or_else(|| EvalError::Evaluation("no trajectory to detect dwells on".into()))?;
    let traj = &inputs
        .methods
        .iter()
        .find(|m| m.0 == label)
        .ok_or_else(|| EvalError::Evaluation(format!("reference method '{label}' not loaded")))?
        .1;
    let track = apply_lever_arm(traj, &inputs.calibration.t_imu_to_base);
    Ok(build_visit_table(
        &track,
        &inputs.checkpoints,
        &inputs.thresholds.dwell(),
        inputs.thresholds.gate_radius_m,
        frame,
        &inputs.sequence_id,
        &label,
    )?)
}

fn fit(samples: &[DriftSample], eps0: f64, axis: DriftAxis, label: &str, warnings: &mut Vec<String>) -> Option<DriftFit> {
    let series = DriftSeries { method: label.to_string(), samples: samples.to_vec() };
    match series.fit(eps0, axis) {
        Ok(f) => Some(f),
        Err(e @ (DriftError::AllZeroAbscissa | DriftError::InsufficientSamples(_))) => {
            log::info!("{label}: no {axis:?} drift fit ({e})");
            None
        }
        Err(e) => {
            warnings.push(format!("{label}: drift fit failed: {e}"));
            None
        }
    }
}

fn evaluate_method(
    label: &str,
    track: BaseCenterTrack,
    positions: Vec<Option<crate::geodesy::UtmCoord>>,
    inputs: &EvaluationInputs,
    table: &VisitTable,
    warnings: &mut Vec<String>,
) -> Result<MethodResult, EvalError> {
    let mut visits = Vec::new();
    let mut missing = Vec::new();
    for (v, p) in table.visits.iter().zip(positions) {
        match p {
            Some(p) => {
                let cp = inputs.checkpoints.iter().find(|c| c.id == v.checkpoint_id);
                visits.push(CheckpointVisit {
                    p_est: p,
                    distance_to_cp: cp.map_or(f64::NAN, |c| p.distance(&c.coord)),
                    ..v.clone()
                });
            }
            None => missing.push(v.checkpoint_id.clone()),
        }
    }
    if !missing.is_empty() {
        warnings.push(format!("{label}: no position at {} visit(s): {}", missing.len(), missing.join(", ")));
    }
    let (errors, summary) =
        summarize(&visits, &inputs.checkpoints).map_err(|source| EvalError::Metrics { method: label.to_string(), source })?;
    let outage = match outage_coordinates(&track, &inputs.rtk, &visits, &inputs.anchor_statuses) {
        Ok(o) => o,
        Err(e) => return Err(EvalError::Evaluation(format!("{label}: {e}"))),
    };
    let mut result = MethodResult {
        label: label.to_string(),
        visits,
        errors,
        summary,
        missing,
        outage,
        drift_time: None,
        drift_distance: None,
        track,
    };
    let samples = result.drift_samples(&inputs.sequence_id);
    result.drift_time = fit(&samples, inputs.thresholds.eps0_m, DriftAxis::Time, label, warnings);
    result.drift_distance = fit(&samples, inputs.thresholds.eps0_m, DriftAxis::Distance, label, warnings);
    Ok(result)
}

/// Runs the whole protocol: lever arm, shared visit table, per-method
/// absolute and aligned metrics, and distance-to-fix bookkeeping.
pub fn evaluate(inputs: &EvaluationInputs) -> Result<Evaluation, EvalError> {
    let origin = first_rtk_fix(&inputs.rtk).map_err(|source| EvalError::Parse { path: "rtk log".into(), source })?;
    let frame = LocalFrame::new(origin, inputs.zone);
    let mut warnings = Vec::new();

    let (table, table_built) = match &inputs.visit_table {
        Some(t) => {
            if t.sequence_id != inputs.sequence_id {
                warnings.push(format!(
                    "visit table was made for sequence '{}', evaluating '{}'",
                    t.sequence_id, inputs.sequence_id
                ));
            }
            (t.clone(), false)
        }
        None => (build_table(inputs, &frame)?, true),
    };
    if table.visits.is_empty() {
        return Err(EvalError::Evaluation("no checkpoint visits detected".into()));
    }
    if !table.unvisited_checkpoints.is_empty() {
        warnings.push(format!("unvisited checkpoints: {}", table.unvisited_checkpoints.join(", ")));
    }
    let fix_ratio = inputs.rtk.fix_ratio();
    if fix_ratio < 0.5 {
        warnings.push(format!("low RTK fix coverage: {:.1}%", 100.0 * fix_ratio));
    }

    let mut methods = Vec::new();
    for (label, traj) in &inputs.methods {
        let track = apply_lever_arm(traj, &inputs.calibration.t_imu_to_base);
        let positions = if table_built && *label == table.generator_method {
            table.visits.iter().map(|v| Some(v.p_est)).collect()
        } else {
            require_positions_at_visits(&table, &track, &frame, inputs.thresholds.max_lookup_gap_s)?
                .into_iter()
                .map(Some)
                .collect()
        };
        methods.push(evaluate_method(label, track, positions, inputs, &table, &mut warnings)?);
    }
    let s = &inputs.rtk_standalone;
    if s.enabled {
        let track = rtk_standalone_track(&inputs.rtk, &frame, &inputs.calibration, s.min_status);
        if track.is_empty() {
            warnings.push(format!("{}: no RTK records of status {} or better", s.label, s.min_status));
        } else {
            let positions = positions_at_visits(&table, &track, &frame, s.max_lookup_gap_s)?;
            if positions.iter().all(Option::is_none) {
                warnings.push(format!("{}: no RTK position near any visit", s.label));
            } else {
                methods.push(evaluate_method(&s.label, track, positions, inputs, &table, &mut warnings)?);
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Evaluation { sequence_id: inputs.sequence_id.clone(), frame, table, table_built, methods, fix_ratio, warnings })
}
