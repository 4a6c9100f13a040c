//! Report assembly and artifact emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drift::{drift_report, DriftArtifacts, DriftFit, DriftSample, DriftSeries};
use crate::matching::export_visit_table;
use crate::pipeline::{Evaluation, MethodResult};
use crate::plot::{grouped_bars, plan_view};
use crate::trajectory_io::Checkpoint;

pub const REPORT_SCHEMA: &str = "rtk-eval.report.v1";
pub const TOOL_NAME: &str = "rtk-eval";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const REPORT_FILE: &str = "report.json";
pub const ERRORS_FILE: &str = "errors.csv";
pub const BAR_CHART_FILE: &str = "checkpoint_errors.svg";
pub const OVERLAY_FILE: &str = "trajectory_overlay.svg";
pub const VISIT_TABLE_FILE: &str = "visit_table.json";

/// Meters are reported to the micrometer.
fn r6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    /// Hash of the config bytes followed by the tool version.
    pub config_sha256: String,
    /// Input file (as named in the config) to content hash.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(config_bytes: &[u8], inputs: BTreeMap<String, String>) -> Self {
        let mut h = config_bytes.to_vec();
        h.extend_from_slice(TOOL_VERSION.as_bytes());
        Self {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_sha256: sha256_hex(&h),
            inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitTableRef {
    pub file: String,
    pub sha256: String,
    pub generator_method: String,
    pub built_in_run: bool,
    pub n_visits: usize,
    pub unvisited_checkpoints: Vec<String>,
    pub unmatched_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointReport {
    pub checkpoint_id: String,
    pub t_rep: f64,
    /// Estimate minus survey (easting, northing, height).
    pub error_m: [f64; 3],
    pub norm_m: f64,
    pub dt_nearest_fix_s: f64,
    pub dx_nearest_fix_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftFits {
    pub time: Option<DriftFit>,
    pub distance: Option<DriftFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extensions {
    pub per_axis_rmse_m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodReport {
    pub label: String,
    pub n_points: usize,
    pub rmse_absolute_m: f64,
    pub rmse_aligned_m: Option<f64>,
    pub gap_percent: Option<f64>,
    pub checkpoints: Vec<CheckpointReport>,
    pub missing_checkpoints: Vec<String>,
    pub drift: DriftFits,
    pub extensions: Extensions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema: String,
    pub sequence_id: String,
    pub utm_zone: String,
    pub provenance: Provenance,
    pub visit_table: VisitTableRef,
    pub rtk_fix_ratio: f64,
    pub methods: Vec<MethodReport>,
    pub warnings: Vec<String>,
}

fn round_fit(f: Option<DriftFit>) -> Option<DriftFit> {
    f.map(|f| DriftFit { residual_std: r6(f.residual_std), ..f })
}

fn method_report(m: &MethodResult) -> MethodReport {
    MethodReport {
        label: m.label.clone(),
        n_points: m.summary.n_points,
        rmse_absolute_m: r6(m.summary.rmse_absolute),
        rmse_aligned_m: m.summary.rmse_aligned.map(r6),
        gap_percent: m.summary.gap_percent,
        checkpoints: m
            .errors
            .iter()
            .zip(&m.outage)
            .map(|(e, o)| CheckpointReport {
                checkpoint_id: e.checkpoint_id.clone(),
                t_rep: r6(e.t_rep),
                error_m: e.eps.map(r6),
                norm_m: r6(e.norm),
                dt_nearest_fix_s: r6(o.dt_nearest_fix),
                dx_nearest_fix_m: r6(o.dx_nearest_fix),
            })
            .collect(),
        missing_checkpoints: m.missing.clone(),
        drift: DriftFits { time: round_fit(m.drift_time), distance: round_fit(m.drift_distance) },
        extensions: Extensions { per_axis_rmse_m: m.summary.per_axis_rmse.map(r6) },
    }
}

pub fn build_report(ev: &Evaluation, provenance: Provenance) -> EvaluationReport {
    EvaluationReport {
        schema: REPORT_SCHEMA.to_string(),
        sequence_id: ev.sequence_id.clone(),
        utm_zone: ev.frame.zone.to_string(),
        provenance,
        visit_table: VisitTableRef {
            file: VISIT_TABLE_FILE.to_string(),
            sha256: sha256_hex(&export_visit_table(&ev.table)),
            generator_method: ev.table.generator_method.clone(),
            built_in_run: ev.table_built,
            n_visits: ev.table.visits.len(),
            unvisited_checkpoints: ev.table.unvisited_checkpoints.clone(),
            unmatched_segments: ev.table.unmatched_segments.len(),
        },
        rtk_fix_ratio: r6(ev.fix_ratio),
        methods: ev.methods.iter().map(method_report).collect(),
        warnings: ev.warnings.clone(),
    }
}

impl EvaluationReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    /// One line per method: absolute, SE(3)-aligned and gap columns.
    pub fn summary_table(&self) -> String {
        let w = self.methods.iter().map(|m| m.label.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(s, "sequence {} ({} visits, zone {})", self.sequence_id, self.visit_table.n_visits, self.utm_zone);
        let _ = writeln!(s, "{:<w$}  {:>4}  {:>10}  {:>10}  {:>7}", "method", "N", "abs [m]", "SE3 [m]", "gap [%]");
        for m in &self.methods {
            let aligned = m.rmse_aligned_m.map_or("-".to_string(), |v| format!("{v:.3}"));
            let gap = m.gap_percent.map_or("-".to_string(), |g| format!("{:.0}", g.round()));
            let _ = writeln!(s, "{:<w$}  {:>4}  {:>10.3}  {:>10}  {:>7}", m.label, m.n_points, m.rmse_absolute_m, aligned, gap);
        }
        s
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from("method,checkpoint_id,t_rep,e_m,n_m,u_m,norm_m\n");
        for m in &self.methods {
            for c in &m.checkpoints {
                let _ = writeln!(
                    s,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    m.label, c.checkpoint_id, c.t_rep, c.error_m[0], c.error_m[1], c.error_m[2], c.norm_m
                );
            }
        }
        s
    }

    pub fn drift_samples(&self) -> Vec<DriftSeries> {
        self.methods
            .iter()
            .map(|m| DriftSeries {
                method: m.label.clone(),
                samples: m
                    .checkpoints
                    .iter()
                    .map(|c| DriftSample {
                        sequence: self.sequence_id.clone(),
                        checkpoint_id: c.checkpoint_id.clone(),
                        dt_s: c.dt_nearest_fix_s,
                        dx_m: c.dx_nearest_fix_m,
                        eps_m: c.norm_m,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Bar chart of the absolute 3D error per visit, one bar per method.
pub fn checkpoint_bar_chart(report: &EvaluationReport, ev: &Evaluation) -> String {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let categories: Vec<String> = ev
        .table
        .visits
        .iter()
        .map(|v| {
            let n = seen.entry(&v.checkpoint_id).or_default();
            *n += 1;
            if *n == 1 {
                v.checkpoint_id.clone()
            } else {
                format!("{}#{n}", v.checkpoint_id)
            }
        })
        .collect();
    let series = report
        .methods
        .iter()
        .zip(&ev.methods)
        .map(|(m, r)| {
            let mut it = m.checkpoints.iter().peekable();
            let vals = ev
                .table
                .visits
                .iter()
                .map(|v| {
                    // Checkpoint rows follow table order, skipping missing visits.
                    let hit = r.visits.iter().any(|x| x.t_rep == v.t_rep && x.checkpoint_id == v.checkpoint_id);
                    if hit {
                        it.next().map(|c| c.norm_m)
                    } else {
                        None
                    }
                })
                .collect();
            (m.label.clone(), vals)
        })
        .collect::<Vec<_>>();
    grouped_bars("Absolute 3D error per checkpoint", "error [m]", &categories, &series)
}

/// Plan view of every base-center track in UTM with the checkpoints.
pub fn trajectory_overlay(ev: &Evaluation, checkpoints: &[Checkpoint]) -> String {
    let (e0, n0) = checkpoints
        .first()
        .map_or((0.0, 0.0), |c| ((c.coord.easting / 100.0).floor() * 100.0, (c.coord.northing / 100.0).floor() * 100.0));
    let tracks: Vec<(String, Vec<(f64, f64)>)> = ev
        .methods
        .iter()
        .map(|m| {
            let s = m.track.samples();
            let stride = (s.len() / 2000).max(1);
            let pts = s
                .iter()
                .step_by(stride)
                .filter_map(|x| ev.frame.enu_to_utm(&x.p_base).ok())
                .map(|u| (u.easting - e0, u.northing - n0))
                .collect();
            (m.label.clone(), pts)
        })
        .collect();
    let marks: Vec<(String, f64, f64)> = checkpoints
        .iter()
        .map(|c| (c.id.clone(), c.coord.easting - e0, c.coord.northing - n0))
        .collect();
    plan_view(&format!("{} in {} (E-{e0:.0}, N-{n0:.0})", ev.sequence_id, ev.frame.zone), &tracks, &marks)
}

/// Writes report.json, errors.csv, both figures and the visit table.
pub fn write_artifacts(
    out_dir: &Path,
    report: &EvaluationReport,
    ev: &Evaluation,
    checkpoints: &[Checkpoint],
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let files = [
        (REPORT_FILE, report.to_json()),
        (ERRORS_FILE, report.errors_csv().into_bytes()),
        (BAR_CHART_FILE, checkpoint_bar_chart(report, ev).into_bytes()),
        (OVERLAY_FILE, trajectory_overlay(ev, checkpoints).into_bytes()),
        (VISIT_TABLE_FILE, export_visit_table(&ev.table)),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = out_dir.join(name);
        fs::write(&p, bytes)?;
        written.push(p);
    }
    Ok(written)
}

/// Pools drift samples per method label across reports, in first-seen order.
pub fn aggregate_drift(reports: &[EvaluationReport], eps0: f64) -> DriftArtifacts {
    let mut pooled: Vec<DriftSeries> = Vec::new();
    for r in reports {
        for s in r.drift_samples() {
            match pooled.iter_mut().find(|p| p.method == s.method) {
                Some(p) => p.samples.extend(s.samples),
                None => pooled.push(s),
            }
        }
    }
    drift_report(&pooled, eps0)
}

/// Human-readable lines for the pooled fits.
pub fn drift_fit_table(artifacts: &DriftArtifacts) -> String {
    let mut s = String::from("method  n  alpha_time [cm/min]  alpha_dist [%]\n");
    for (label, ft, fd) in &artifacts.fits {
        let t = ft.map_or("-".into(), |f| format!("{:.2}", f.alpha * 6000.0));
        let d = fd.map_or("-".into(), |f| format!("{:.3}", f.alpha * 100.0));
        let n = ft.or(*fd).map_or(0, |f| f.n);
        let _ = writeln!(s, "{label}  {n}  {t}  {d}");
    }
    s
}
