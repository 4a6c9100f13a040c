//! Stationary-period detection and checkpoint association.
//!
//! The resulting [`VisitTable`] fixes the evaluation timestamp of every
//! checkpoint visit. It is built once (usually from the most accurate
//! trajectory) and then shared, so every method is evaluated at identical
//! instants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{EnuCoord, GeodesyError, LocalFrame, UtmCoord};
use crate::lever_arm::BaseCenterTrack;
use crate::trajectory_io::Checkpoint;

pub const VISIT_TABLE_SCHEMA: &str = "rtk-eval.visit-table.v1";

// Slack for dwell durations that are an exact multiple of the sample period.
const DURATION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("no checkpoints to match against")]
    NoCheckpoints,
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error("visit table schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no pose within {max_gap} s of visit to {checkpoint_id} at t={t_rep} (nearest is {gap} s away)")]
    LookupGap {
        checkpoint_id: String,
        t_rep: f64,
        gap: f64,
        max_gap: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellParams {
    pub stationary_radius_m: f64,
    pub min_dwell_s: f64,
}

impl Default for DwellParams {
    fn default() -> Self {
        Self {
            stationary_radius_m: 0.05,
            min_dwell_s: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Componentwise median over the segment.
    pub p_rep: EnuCoord,
}

impl DwellSegment {
    pub fn t_mid(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointVisit {
    pub checkpoint_id: String,
    /// Midpoint of the dwell; the evaluation instant.
    pub t_rep: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub p_est: UtmCoord,
    pub distance_to_cp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    pub stationary_radius_m: f64,
    pub min_dwell_s: f64,
    pub gate_radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitTable {
    pub schema: String,
    pub sequence_id: String,
    pub generator_method: String,
    pub visits: Vec<CheckpointVisit>,
    pub unmatched_segments: Vec<DwellSegment>,
    pub unvisited_checkpoints: Vec<String>,
    pub params: TableParams,
}

/// Keeps three sorted coordinate columns so the componentwise median of a
/// growing segment is available after every insertion.
struct RunningMedian {
    cols: [Vec<f64>; 3],
}

impl RunningMedian {
    fn new(p: &EnuCoord) -> Self {
        Self {
            cols: [vec![p.e], vec![p.n], vec![p.u]],
        }
    }

    fn push(&mut self, p: &EnuCoord) {
        for (col, v) in self.cols.iter_mut().zip([p.e, p.n, p.u]) {
            let at = col.partition_point(|x| *x < v);
            col.insert(at, v);
        }
    }

    fn median(&self) -> EnuCoord {
        let m = |c: &Vec<f64>| {
            let k = c.len();
            if k % 2 == 1 {
                c[k / 2]
            } else {
                0.5 * (c[k / 2 - 1] + c[k / 2])
            }
        };
        EnuCoord::new(m(&self.cols[0]), m(&self.cols[1]), m(&self.cols[2]))
    }
}

fn distance(a: &EnuCoord, b: &EnuCoord) -> f64 {
    (a.to_vector() - b.to_vector()).norm()
}

/// Greedy left-to-right scan for stationary periods.
///
/// A segment grows while each new sample lies within `stationary_radius_m` of
/// the median of the samples already in it. Segments shorter than
/// `min_dwell_s` are discarded and the scan restarts one sample later.
pub fn detect_dwells(track: &BaseCenterTrack, params: &DwellParams) -> Vec<DwellSegment> {
    let s = track.samples();
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut med = RunningMedian::new(&s[i].p_base);
        let mut j = i + 1;
        while j < s.len() && distance(&s[j].p_base, &med.median()) <= params.stationary_radius_m {
            med.push(&s[j].p_base);
            j += 1;
        }
        let (t_start, t_end) = (s[i].t, s[j - 1].t);
        if t_end - t_start >= params.min_dwell_s - DURATION_EPS {
            out.push(DwellSegment {
                t_start,
                t_end,
                p_rep: med.median(),
            });
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Associates each dwell with the nearest checkpoint inside `gate_radius_m`.
///
/// Ties in distance go to the lexicographically smaller id. A checkpoint may
/// be visited more than once.
pub fn match_visits(
    dwells: &[DwellSegment],
    cps: &[Checkpoint],
    gate_radius_m: f64,
    frame: &LocalFrame,
) -> Result<(Vec<CheckpointVisit>, Vec<DwellSegment>, Vec<String>), MatchError> {
    if cps.is_empty() {
        return Err(MatchError::NoCheckpoints);
    }
    let mut visits = Vec::new();
    let mut unmatched = Vec::new();
    let mut visited = vec![false; cps.len()];
    for d in dwells {
        let p = frame.enu_to_utm(&d.p_rep)?;
        let best = cps
            .iter()
            .enumerate()
            .map(|(k, cp)| (k, p.distance(&cp.coord)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cps[a.0].id.cmp(&cps[b.0].id)));
        match best {
            Some((k, dist)) if dist <= gate_radius_m => {
                visited[k] = true;
                visits.push(CheckpointVisit {
                    checkpoint_id: cps[k].id.clone(),
                    t_rep: d.t_mid(),
                    t_start: d.t_start,
                    t_end: d.t_end,
                    p_est: p,
                    distance_to_cp: dist,
                });
            }
            _ => unmatched.push(*d),
        }
    }
    let unvisited = cps
        .iter()
        .zip(&visited)
        .filter(|(_, v)| !**v)
        .map(|(cp, _)| cp.id.clone())
        .collect();
    Ok((visits, unmatched, unvisited))
}

/// Detects dwells on `track` and matches them, producing a shareable table.
pub fn build_visit_table(
    track: &BaseCenterTrack,
    cps: &[Checkpoint],
    dwell: &DwellParams,
    gate_radius_m: f64,
    frame: &LocalFrame,
    sequence_id: &str,
    generator_method: &str,
) -> Result<VisitTable, MatchError> {
    let dwells = detect_dwells(track, dwell);
    let (visits, unmatched_segments, unvisited_checkpoints) = match_visits(&dwells, cps, gate_radius_m, frame)?;
    Ok(VisitTable {
        schema: VISIT_TABLE_SCHEMA.to_string(),
        sequence_id: sequence_id.to_string(),
        generator_method: generator_method.to_string(),
        visits,
        unmatched_segments,
        unvisited_checkpoints,
        params: TableParams {
            stationary_radius_m: dwell.stationary_radius_m,
            min_dwell_s: dwell.min_dwell_s,
            gate_radius_m,
        },
    })
}

/// Pretty JSON with a trailing newline. Floats are written in shortest
/// round-trip form, so timestamps survive export and import bit-for-bit.
pub fn export_visit_table(table: &VisitTable) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(table).expect("visit table serializes");
    out.push(b'\n');
    out
}

pub fn import_visit_table(bytes: &[u8]) -> Result<VisitTable, MatchError> {
    let table: VisitTable =
        serde_json::from_slice(bytes).map_err(|e| MatchError::SchemaMismatch(e.to_string()))?;
    if table.schema != VISIT_TABLE_SCHEMA {
        return Err(MatchError::SchemaMismatch(format!(
            "expected schema '{VISIT_TABLE_SCHEMA}', found '{}'",
            table.schema
        )));
    }
    Ok(table)
}

/// Position of `track` at each visit's `t_rep`, taken from the nearest pose.
/// `None` where the nearest pose is more than `max_gap_s` away.
pub fn positions_at_visits(
    table: &VisitTable,
    track: &BaseCenterTrack,
    frame: &LocalFrame,
    max_gap_s: f64,
) -> Result<Vec<Option<UtmCoord>>, MatchError> {
    table
        .visits
        .iter()
        .map(|v| {
            let Some(k) = track.nearest_index(v.t_rep) else {
                return Ok(None);
            };
            let s = &track.samples()[k];
            if (s.t - v.t_rep).abs() > max_gap_s {
                return Ok(None);
            }
            Ok(Some(frame.enu_to_utm(&s.p_base)?))
        })
        .collect()
}

/// Like [`positions_at_visits`] but every visit must resolve.
pub fn require_positions_at_visits(
    table: &VisitTable,
    track: &BaseCenterTrack,
    frame: &LocalFrame,
    max_gap_s: f64,
) -> Result<Vec<UtmCoord>, MatchError> {
    let found = positions_at_visits(table, track, frame, max_gap_s)?;
    table
        .visits
        .iter()
        .zip(found)
        .map(|(v, p)| {
            p.ok_or_else(|| {
                let gap = track
                    .nearest_index(v.t_rep)
                    .map(|k| (track.samples()[k].t - v.t_rep).abs())
                    .unwrap_or(f64::INFINITY);
                MatchError::LookupGap {
                    checkpoint_id: v.checkpoint_id.clone(),
                    t_rep: v.t_rep,
                    gap,
                    max_gap: max_gap_s,
                }
            })
        })
        .collect()
}
