//! Synthetic scenarios with known ground truth.
//!
//! A base center walks a waypoint path (given as UTM offsets from an origin)
//! and dwells on checkpoints. Each synthetic method corrupts the true base
//! positions in UTM with a global bias, outage drift and white noise, and the
//! result is written as IMU poses in the local ENU frame anchored at the
//! first RTK fix. Expected metrics are computed straight from the generated
//! arrays.
//!
//! Drift inside an outage (the span between two consecutive fixes more than
//! one epoch apart) is `rate * x * u + sigma_rw * B(t)`, where `x` is the time
//! to the nearer bounding fix, `u` a random horizontal unit vector and `B` a
//! three-axis Brownian bridge pinned to zero at both fixes. Outside outages
//! the drift is zero. Random numbers come from ChaCha8, one stream per method.

use std::fs;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{MethodInput, RunConfig, Thresholds, UtmSpec};
use crate::drift::{DriftAxis, DriftFit, DEFAULT_EPS0};
use crate::geodesy::{
    enu_to_geodetic, geodetic_to_enu, geodetic_to_utm, utm_to_geodetic, Ellipsoid, EnuCoord, EnuOrigin,
    GeodesyError, GeodeticCoord, Hemisphere, LocalFrame, UtmCoord, UtmZone,
};
use crate::metrics::{AccuracySummary, GAP_MIN_ABS_RMSE};
use crate::trajectory_io::{
    write_checkpoints, write_rtk_log, write_tum, Checkpoint, DeviceCalibration, FrameTag, GnssStatus, Pose,
    RtkLog, RtkRecord, Trajectory,
};

pub const PRNG_ALGORITHM: &str = "ChaCha8";

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InvalidSpec(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginSpec {
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default)]
    pub height: f64,
}

/// Waypoint as an offset (east, north, up) in meters from the origin's UTM
/// position. A waypoint carrying a checkpoint id is surveyed and dwelt on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub de: f64,
    pub dn: f64,
    #[serde(default)]
    pub du: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub waypoints: Vec<Waypoint>,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSpec {
    pub checkpoint_id: String,
    pub duration_s: f64,
}

/// How one synthetic method deviates from the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub label: String,
    #[serde(default)]
    pub global_bias: [f64; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    /// Drift growth inside outages, m/s.
    #[serde(default)]
    pub drift_rate: f64,
    /// Brownian bridge intensity inside outages, m/sqrt(s).
    #[serde(default)]
    pub drift_random_walk: f64,
}

fn default_speed_label() -> String {
    "estimate".to_string()
}
fn default_sample_rate() -> f64 {
    10.0
}
fn default_t0() -> f64 {
    345_600.0
}
fn default_sequence() -> String {
    "synthetic".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sequence")]
    pub sequence_id: String,
    pub origin: OriginSpec,
    pub path: PathSpec,
    #[serde(default)]
    pub dwells: Vec<DwellSpec>,
    /// `[start, end]` seconds after the first epoch; RTK reports no fix inside.
    #[serde(default)]
    pub outage_windows: Vec<[f64; 2]>,
    #[serde(default)]
    pub drift_rate: f64,
    #[serde(default)]
    pub drift_random_walk: f64,
    #[serde(default)]
    pub global_bias: [f64; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_speed_label")]
    pub method_label: String,
    /// Further methods evaluated on the same truth.
    #[serde(default)]
    pub extra_methods: Vec<Corruption>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default)]
    pub calibration: DeviceCalibration,
    #[serde(default = "default_eps0")]
    pub eps0_m: f64,
}

fn default_eps0() -> f64 {
    DEFAULT_EPS0
}

impl ScenarioSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self, SynthError> {
        serde_json::from_slice(bytes).map_err(|e| SynthError::InvalidSpec(e.to_string()))
    }

    /// All methods, the primary one first.
    pub fn corruptions(&self) -> Vec<Corruption> {
        let mut v = vec![Corruption {
            label: self.method_label.clone(),
            global_bias: self.global_bias,
            noise_sigma: self.noise_sigma,
            drift_rate: self.drift_rate,
            drift_random_walk: self.drift_random_walk,
        }];
        v.extend(self.extra_methods.iter().cloned());
        v
    }

    pub fn zone(&self) -> Result<UtmZone, SynthError> {
        let lon = self.origin.lon_deg;
        if !(-180.0..=180.0).contains(&lon) {
            return invalid(format!("origin longitude {lon} out of range"));
        }
        let number = (((lon + 180.0) / 6.0).floor() as i64 + 1).clamp(1, 60) as u8;
        let hemisphere = if self.origin.lat_deg >= 0.0 { Hemisphere::North } else { Hemisphere::South };
        Ok(UtmZone::new(number, hemisphere)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.path.waypoints.len() < 2 {
            return invalid("path needs at least two waypoints");
        }
        if !(self.path.speed_mps.is_finite() && self.path.speed_mps > 0.0) {
            return invalid("speed must be positive");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return invalid("sample rate must be positive");
        }
        if !self.t0.is_finite() {
            return invalid("t0 must be finite");
        }
        if self.sequence_id.trim().is_empty() {
            return invalid("sequence_id is empty");
        }
        for w in &self.path.waypoints {
            if !finite(&[w.de, w.dn, w.du]) {
                return invalid("non-finite waypoint");
            }
            if let Some(id) = &w.checkpoint_id {
                if id.is_empty() || id.contains(',') {
                    return invalid(format!("invalid checkpoint id '{id}'"));
                }
                if !self.dwells.iter().any(|d| &d.checkpoint_id == id) {
                    return invalid(format!("checkpoint {id} has no dwell duration"));
                }
            }
        }
        for d in &self.dwells {
            if !(d.duration_s.is_finite() && d.duration_s >= 2.0 / self.sample_rate_hz) {
                return invalid(format!("dwell at {} must last at least two samples", d.checkpoint_id));
            }
            let same: Vec<&Waypoint> = self
                .path
                .waypoints
                .iter()
                .filter(|w| w.checkpoint_id.as_ref() == Some(&d.checkpoint_id))
                .collect();
            if same.is_empty() {
                return invalid(format!("dwell references unknown checkpoint {}", d.checkpoint_id));
            }
            if same.iter().any(|w| (w.de, w.dn, w.du) != (same[0].de, same[0].dn, same[0].du)) {
                return invalid(format!("checkpoint {} appears at different positions", d.checkpoint_id));
            }
        }
        let mut prev_end = 0.0;
        for (k, w) in self.outage_windows.iter().enumerate() {
            if !finite(w) || w[0] <= 0.0 || w[1] <= w[0] {
                return invalid(format!("outage window {k} must satisfy 0 < start < end"));
            }
            if k > 0 && w[0] <= prev_end {
                return invalid("outage windows must be sorted and non-overlapping");
            }
            prev_end = w[1];
        }
        let mut labels: Vec<String> = Vec::new();
        for c in self.corruptions() {
            if c.label.trim().is_empty() || c.label.contains(',') || labels.contains(&c.label) {
                return invalid(format!("invalid or duplicate method label '{}'", c.label));
            }
            if !finite(&c.global_bias) || !finite(&[c.noise_sigma, c.drift_rate, c.drift_random_walk]) {
                return invalid(format!("non-finite corruption for {}", c.label));
            }
            if c.noise_sigma < 0.0 || c.drift_rate < 0.0 || c.drift_random_walk < 0.0 {
                return invalid(format!("negative corruption magnitude for {}", c.label));
            }
            labels.push(c.label);
        }
        if let Err(e) = self.calibration.validate() {
            return invalid(e.to_string());
        }
        self.zone()?;
        Ok(())
    }
}

/// One stretch of the true path: a straight walk or a dwell.
#[derive(Debug, Clone)]
struct Leg {
    t0: f64,
    t1: f64,
    p0: Vector3<f64>,
    p1: Vector3<f64>,
    yaw: f64,
    s0: f64,
    checkpoint: Option<String>,
}

struct Timeline {
    legs: Vec<Leg>,
}

impl Timeline {
    fn build(spec: &ScenarioSpec, origin_utm: Vector3<f64>) -> Self {
        let wp: Vec<Vector3<f64>> = spec
            .path
            .waypoints
            .iter()
            .map(|w| origin_utm + Vector3::new(w.de, w.dn, w.du))
            .collect();
        let heading = |a: &Vector3<f64>, b: &Vector3<f64>| (b.y - a.y).atan2(b.x - a.x);
        // Initial heading: first non-degenerate leg.
        let mut yaw = wp
            .windows(2)
            .find(|w| (w[1] - w[0]).xy().norm() > TIME_EPS)
            .map(|w| heading(&w[0], &w[1]))
            .unwrap_or(0.0);
        let (mut t, mut s) = (0.0, 0.0);
        let mut legs = Vec::new();
        for (i, w) in spec.path.waypoints.iter().enumerate() {
            if let Some(id) = &w.checkpoint_id {
                let d = spec.dwells.iter().find(|d| &d.checkpoint_id == id).expect("validated").duration_s;
                legs.push(Leg { t0: t, t1: t + d, p0: wp[i], p1: wp[i], yaw, s0: s, checkpoint: Some(id.clone()) });
                t += d;
            }
            if let Some(next) = wp.get(i + 1) {
                let len = (next - wp[i]).norm();
                if len > TIME_EPS {
                    if (next - wp[i]).xy().norm() > TIME_EPS {
                        yaw = heading(&wp[i], next);
                    }
                    let dur = len / spec.path.speed_mps;
                    legs.push(Leg { t0: t, t1: t + dur, p0: wp[i], p1: *next, yaw, s0: s, checkpoint: None });
                    t += dur;
                    s += len;
                }
            }
        }
        Self { legs }
    }

    fn duration(&self) -> f64 {
        self.legs.last().map_or(0.0, |l| l.t1)
    }

    fn leg(&self, tau: f64) -> (&Leg, f64) {
        let i = self.legs.partition_point(|l| l.t1 < tau).min(self.legs.len() - 1);
        let l = &self.legs[i];
        let w = if l.t1 > l.t0 { ((tau - l.t0) / (l.t1 - l.t0)).clamp(0.0, 1.0) } else { 0.0 };
        (l, w)
    }

    fn position(&self, tau: f64) -> Vector3<f64> {
        let (l, w) = self.leg(tau);
        if l.checkpoint.is_some() {
            return l.p0;
        }
        l.p0 + (l.p1 - l.p0) * w
    }

    fn yaw(&self, tau: f64) -> f64 {
        self.leg(tau).0.yaw
    }

    fn arc_length(&self, tau: f64) -> f64 {
        let (l, w) = self.leg(tau);
        l.s0 + (l.p1 - l.p0).norm() * w
    }
}

/// Ground-truth record of one injected dwell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedVisit {
    pub checkpoint_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub t_mid: f64,
    pub dt_nearest_fix: f64,
    /// Along the true path.
    pub dx_nearest_fix: f64,
    /// Deterministic drift magnitude at `t_mid` per unit rate.
    pub outage_depth_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMethod {
    pub label: String,
    pub summary: AccuracySummary,
    /// Slope expected on the time axis from the deterministic part of the drift.
    pub drift: Option<DriftFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMethod {
    pub corruption: Corruption,
    pub trajectory: Trajectory,
    /// Corrupted base-center positions in UTM, one per pose.
    pub base_utm: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sequence_id: String,
    pub zone: UtmZone,
    pub calibration: DeviceCalibration,
    pub frame: LocalFrame,
    pub truth: Trajectory,
    pub methods: Vec<SyntheticMethod>,
    pub rtk: RtkLog,
    pub checkpoints: Vec<Checkpoint>,
    pub visits: Vec<InjectedVisit>,
    pub expected: Vec<ExpectedMethod>,
    pub gate_radius_m: f64,
}

impl Scenario {
    pub fn estimate(&self) -> &Trajectory {
        &self.methods[0].trajectory
    }
}

fn outage_windows_contain(spec: &ScenarioSpec, tau: f64) -> bool {
    spec.outage_windows.iter().any(|w| w[0] - TIME_EPS <= tau && tau <= w[1] + TIME_EPS)
}

/// Previous and next fix around `tau`, relative times. `fixes` is sorted.
fn bracket(fixes: &[f64], tau: f64) -> (Option<f64>, Option<f64>) {
    let i = fixes.partition_point(|f| *f <= tau + TIME_EPS);
    let prev = i.checked_sub(1).map(|k| fixes[k]);
    let next = fixes.get(i).copied();
    (prev, next)
}

/// Whether `tau` lies inside an outage, i.e. between fixes spaced more than
/// one epoch apart, or after the last fix.
fn outage_span(fixes: &[f64], tau: f64) -> Option<(f64, Option<f64>)> {
    let (prev, next) = bracket(fixes, tau);
    let prev = prev?;
    if (tau - prev).abs() <= TIME_EPS {
        return None;
    }
    match next {
        Some(n) if n - prev <= 1.0 + TIME_EPS => None,
        _ => Some((prev, next)),
    }
}

fn tent(fixes: &[f64], tau: f64) -> f64 {
    match outage_span(fixes, tau) {
        None => 0.0,
        Some((p, Some(n))) => (tau - p).min(n - tau),
        Some((p, None)) => tau - p,
    }
}

fn rounded_geodetic(g: GeodeticCoord) -> Result<GeodeticCoord, GeodesyError> {
    // Same values the CSV writer and parser produce.
    GeodeticCoord::from_degrees(g.lat_deg(), g.lon_deg(), g.h())
}

/// Generates the scenario. Deterministic for a given spec (seed included).
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SynthError> {
    spec.validate()?;
    let ell = Ellipsoid::GRS80;
    let zone = spec.zone()?;
    let origin_geo = GeodeticCoord::from_degrees(spec.origin.lat_deg, spec.origin.lon_deg, spec.origin.height)?;
    let ou = geodetic_to_utm(&origin_geo, zone, &ell)?;
    let timeline = Timeline::build(spec, Vector3::new(ou.easting, ou.northing, ou.height));
    let duration = timeline.duration();
    let to_geo = |p: &Vector3<f64>| utm_to_geodetic(&UtmCoord::new(p.x, p.y, p.z, zone), &ell);
    let cal = spec.calibration;
    let rot = |yaw: f64| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);

    // RTK log at 1 Hz; antenna positions from the truth.
    let provisional = EnuOrigin::new(to_geo(&timeline.position(0.0))?);
    let n_rtk = (duration + TIME_EPS).floor() as usize;
    let mut records = Vec::with_capacity(n_rtk + 1);
    let mut fixes = Vec::new();
    for k in 0..=n_rtk {
        let tau = k as f64;
        let base = geodetic_to_enu(&to_geo(&timeline.position(tau))?, &provisional, &ell).to_vector();
        let antenna = base + rot(timeline.yaw(tau)) * cal.base_to_antenna();
        let g = rounded_geodetic(enu_to_geodetic(&EnuCoord::from(antenna), &provisional, &ell)?)?;
        let status = if outage_windows_contain(spec, tau) { GnssStatus::None } else { GnssStatus::RtkFix };
        if status == GnssStatus::RtkFix {
            fixes.push(tau);
        }
        records.push(RtkRecord { t: spec.t0 + tau, position: g, status });
    }
    if records.first().map(|r| r.status) != Some(GnssStatus::RtkFix) {
        return invalid("the first epoch must have an RTK fix");
    }
    let enu_origin = EnuOrigin::new(records[0].position);
    let frame = LocalFrame::new(enu_origin, zone).with_ellipsoid(ell);
    let rtk = RtkLog::new(records).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    let n_samples = (duration * spec.sample_rate_hz + TIME_EPS).floor() as usize;
    let taus: Vec<f64> = (0..=n_samples).map(|k| k as f64 / spec.sample_rate_hz).collect();
    if taus.len() < 2 {
        return invalid("path too short for two samples");
    }
    let truth_utm: Vec<Vector3<f64>> = taus.iter().map(|&tau| timeline.position(tau)).collect();
    let yaws: Vec<f64> = taus.iter().map(|&tau| timeline.yaw(tau)).collect();

    let to_trajectory = |base_utm: &[Vector3<f64>]| -> Result<Trajectory, SynthError> {
        let mut poses = Vec::with_capacity(base_utm.len());
        for ((tau, p), yaw) in taus.iter().zip(base_utm).zip(&yaws) {
            let base = geodetic_to_enu(&to_geo(p)?, &enu_origin, &ell).to_vector();
            let q = rot(*yaw);
            poses.push(Pose { t: spec.t0 + tau, position: base - q * cal.t_imu_to_base, orientation: q });
        }
        Trajectory::new(poses, FrameTag::EnuLocal).map_err(|e| SynthError::InvalidSpec(e.to_string()))
    };
    let truth = to_trajectory(&truth_utm)?;

    let mut methods = Vec::new();
    for (m, c) in spec.corruptions().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(m as u64);
        let drift = drift_series(&taus, &fixes, &c, &mut rng);
        let noise = Normal::new(0.0, c.noise_sigma).expect("validated sigma");
        let bias = Vector3::from(c.global_bias);
        let base_utm: Vec<Vector3<f64>> = truth_utm
            .iter()
            .zip(&drift)
            .map(|(p, d)| {
                let mut v = p + bias + d;
                if c.noise_sigma > 0.0 {
                    v += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                }
                v
            })
            .collect();
        let trajectory = to_trajectory(&base_utm)?;
        methods.push(SyntheticMethod { corruption: c, trajectory, base_utm });
    }

    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut visits = Vec::new();
    for leg in &timeline.legs {
        let Some(id) = &leg.checkpoint else { continue };
        if !checkpoints.iter().any(|c| &c.id == id) {
            checkpoints.push(Checkpoint { id: id.clone(), coord: UtmCoord::new(leg.p0.x, leg.p0.y, leg.p0.z, zone) });
        }
        let t_mid = 0.5 * (leg.t0 + leg.t1);
        let (prev, next) = bracket(&fixes, t_mid);
        let near = [prev, next];
        let dt = near.iter().flatten().map(|f| (f - t_mid).abs()).fold(f64::INFINITY, f64::min);
        let s = timeline.arc_length(t_mid);
        let dx = near
            .iter()
            .flatten()
            .map(|f| (timeline.arc_length(*f) - s).abs())
            .fold(f64::INFINITY, f64::min);
        visits.push(InjectedVisit {
            checkpoint_id: id.clone(),
            t_start: spec.t0 + leg.t0,
            t_end: spec.t0 + leg.t1,
            t_mid: spec.t0 + t_mid,
            dt_nearest_fix: dt,
            dx_nearest_fix: dx,
            outage_depth_s: tent(&fixes, t_mid),
        });
    }
    checkpoints.sort_by(|a, b| a.id.cmp(&b.id));

    let max_bias = spec
        .corruptions()
        .iter()
        .map(|c| Vector3::from(c.global_bias).norm())
        .fold(0.0, f64::max);
    let mut scenario = Scenario {
        sequence_id: spec.sequence_id.clone(),
        zone,
        calibration: cal,
        frame,
        truth,
        methods,
        rtk,
        checkpoints,
        visits,
        expected: Vec::new(),
        gate_radius_m: 1.0 + max_bias,
    };
    scenario.expected = expected_metrics(spec, &scenario);
    Ok(scenario)
}

fn drift_series(taus: &[f64], fixes: &[f64], c: &Corruption, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let mut out = vec![Vector3::zeros(); taus.len()];
    if c.drift_rate == 0.0 && c.drift_random_walk == 0.0 {
        return out;
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut k = 0;
    while k < taus.len() {
        let Some((prev, next)) = outage_span(fixes, taus[k]) else {
            k += 1;
            continue;
        };
        let end = taus[k..].iter().position(|t| outage_span(fixes, *t).map(|s| s.0) != Some(prev)).map_or(taus.len(), |j| k + j);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let u = Vector3::new(theta.cos(), theta.sin(), 0.0);
        let mut w = Vector3::zeros();
        let mut last = prev;
        let mut walk = Vec::with_capacity(end - k);
        for tau in &taus[k..end] {
            let dt = tau - last;
            w += Vector3::new(std.sample(rng), std.sample(rng), std.sample(rng)) * (c.drift_random_walk * dt.sqrt());
            walk.push(w);
            last = *tau;
        }
        let pin = next.map(|n| {
            let dt = n - last;
            w + Vector3::new(std.sample(rng), std.sample(rng), std.sample(rng)) * (c.drift_random_walk * dt.sqrt())
        });
        for (j, tau) in taus[k..end].iter().enumerate() {
            let x = match next {
                Some(n) => (tau - prev).min(n - tau),
                None => tau - prev,
            };
            let bridge = match (pin, next) {
                (Some(wn), Some(n)) => walk[j] - wn * ((tau - prev) / (n - prev)),
                _ => walk[j],
            };
            out[k + j] = u * (c.drift_rate * x) + bridge;
        }
        k = end;
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Brute-force expected metrics from the generated arrays: per injected dwell
/// the componentwise median of the corrupted UTM samples for the first method,
/// the sample nearest the dwell midpoint for the others, compared with the
/// surveyed coordinates. The aligned value uses an SVD-based Kabsch solve.
pub fn expected_metrics(spec: &ScenarioSpec, scenario: &Scenario) -> Vec<ExpectedMethod> {
    let cp = |id: &str| {
        let c = &scenario.checkpoints.iter().find(|c| c.id == id).expect("checkpoint exists").coord;
        Vector3::new(c.easting, c.northing, c.height)
    };
    scenario
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let times: Vec<f64> = m.trajectory.poses().iter().map(|p| p.t).collect();
            let mut est = Vec::new();
            let mut reference = Vec::new();
            for v in &scenario.visits {
                let p = if mi == 0 {
                    let idx: Vec<usize> = (0..times.len())
                        .filter(|&i| times[i] >= v.t_start - TIME_EPS && times[i] <= v.t_end + TIME_EPS)
                        .collect();
                    Vector3::from_fn(|r, _| median(idx.iter().map(|&i| m.base_utm[i][r]).collect()))
                } else {
                    // Other methods are read at the single pose nearest the dwell midpoint.
                    let k = (0..times.len())
                        .min_by(|&a, &b| (times[a] - v.t_mid).abs().total_cmp(&(times[b] - v.t_mid).abs()))
                        .expect("non-empty trajectory");
                    m.base_utm[k]
                };
                est.push(p);
                reference.push(cp(&v.checkpoint_id));
            }
            let n = est.len();
            let errs: Vec<Vector3<f64>> = est.iter().zip(&reference).map(|(e, r)| e - r).collect();
            let rmse_absolute = if n == 0 { 0.0 } else { (errs.iter().map(|e| e.norm_squared()).sum::<f64>() / n as f64).sqrt() };
            let per_axis_rmse = std::array::from_fn(|k| {
                if n == 0 { 0.0 } else { (errs.iter().map(|e| e[k] * e[k]).sum::<f64>() / n as f64).sqrt() }
            });
            let rmse_aligned = kabsch_rmse(&est, &reference);
            let gap_percent = match rmse_aligned {
                Some(a) if rmse_absolute >= GAP_MIN_ABS_RMSE => Some(100.0 * (1.0 - a / rmse_absolute)),
                _ => None,
            };
            let c = &m.corruption;
            let xs: Vec<(f64, f64)> = scenario
                .visits
                .iter()
                .map(|v| (v.dt_nearest_fix, c.drift_rate * v.outage_depth_s))
                .collect();
            let sxx: f64 = xs.iter().map(|(x, _)| x * x).sum();
            let drift = (sxx > 0.0 && xs.len() >= 2).then(|| DriftFit {
                axis: DriftAxis::Time,
                eps0: spec.eps0_m,
                alpha: xs.iter().map(|(x, e)| x * (e - spec.eps0_m)).sum::<f64>() / sxx,
                n: xs.len(),
                residual_std: 0.0,
            });
            ExpectedMethod {
                label: c.label.clone(),
                summary: AccuracySummary { n_points: n, rmse_absolute, rmse_aligned, gap_percent, per_axis_rmse },
                drift,
            }
        })
        .collect()
}

fn kabsch_rmse(est: &[Vector3<f64>], reference: &[Vector3<f64>]) -> Option<f64> {
    let n = est.len();
    if n < 3 {
        return None;
    }
    let ce = est.iter().sum::<Vector3<f64>>() / n as f64;
    let cr = reference.iter().sum::<Vector3<f64>>() / n as f64;
    let h = est
        .iter()
        .zip(reference)
        .fold(nalgebra::Matrix3::zeros(), |acc, (e, r)| acc + (e - ce) * (r - cr).transpose());
    let svd = h.svd(true, true);
    let mut s = svd.singular_values.as_slice().to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    if !(s[1] >= 1e-9 * s[0]) || s[0] == 0.0 {
        return None;
    }
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * nalgebra::Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let ss: f64 = est.iter().zip(reference).map(|(e, p)| (r * (e - ce) + cr - p).norm_squared()).sum();
    Some((ss / n as f64).sqrt())
}

#[derive(Serialize)]
struct ExpectedFile<'a> {
    sequence_id: &'a str,
    prng: &'a str,
    seed: u64,
    methods: &'a [ExpectedMethod],
    visits: &'a [InjectedVisit],
}

/// Writes the scenario as the files the evaluator reads, plus `expected.json`
/// and a ready-to-run `run.json`.
pub fn write_scenario(spec: &ScenarioSpec, scenario: &Scenario, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_tum(&scenario.truth, &mut buf)?;
    fs::write(dir.join("truth.tum"), &buf)?;
    let mut methods = Vec::new();
    for m in &scenario.methods {
        let name = format!("{}.tum", file_stem(&m.corruption.label));
        buf.clear();
        write_tum(&m.trajectory, &mut buf)?;
        fs::write(dir.join(&name), &buf)?;
        methods.push(MethodInput { label: m.corruption.label.clone(), trajectory: name.into() });
    }
    buf.clear();
    write_rtk_log(&scenario.rtk, &mut buf)?;
    fs::write(dir.join("rtk.csv"), &buf)?;
    buf.clear();
    write_checkpoints(&scenario.checkpoints, &mut buf)?;
    fs::write(dir.join("checkpoints.csv"), &buf)?;

    let expected = ExpectedFile {
        sequence_id: &scenario.sequence_id,
        prng: PRNG_ALGORITHM,
        seed: spec.seed,
        methods: &scenario.expected,
        visits: &scenario.visits,
    };
    let mut json = serde_json::to_vec_pretty(&expected).expect("expected metrics serialize");
    json.push(b'\n');
    fs::write(dir.join("expected.json"), json)?;

    let config = RunConfig {
        sequence_id: scenario.sequence_id.clone(),
        utm: UtmSpec { zone: scenario.zone.number, hemisphere: scenario.zone.hemisphere },
        calibration: scenario.calibration,
        checkpoints: "checkpoints.csv".into(),
        rtk_log: "rtk.csv".into(),
        methods,
        visit_table: None,
        reference_method: None,
        thresholds: Thresholds { gate_radius_m: scenario.gate_radius_m, eps0_m: spec.eps0_m, ..Thresholds::default() },
        anchor_statuses: vec![GnssStatus::RtkFix],
        rtk_standalone: Default::default(),
        output_dir: "out".into(),
    };
    fs::write(dir.join("run.json"), config.to_json())?;
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// A closed loop visiting `n` checkpoints on a circle, each dwelt on for
/// `dwell_s`. Handy for tests and the command line.
pub fn loop_spec(n: usize, radius_m: f64, dwell_s: f64) -> ScenarioSpec {
    let mut waypoints: Vec<Waypoint> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Waypoint {
                de: radius_m * a.cos(),
                dn: radius_m * a.sin(),
                du: 0.3 * (3.0 * a).sin(),
                checkpoint_id: Some(format!("CP{:02}", k + 1)),
            }
        })
        .collect();
    waypoints.push(Waypoint { checkpoint_id: None, ..waypoints[0].clone() });
    ScenarioSpec {
        seed: 0,
        sequence_id: default_sequence(),
        origin: OriginSpec { lat_deg: 48.78, lon_deg: 9.18, height: 300.0 },
        path: PathSpec { waypoints, speed_mps: 1.0 },
        dwells: (0..n).map(|k| DwellSpec { checkpoint_id: format!("CP{:02}", k + 1), duration_s: dwell_s }).collect(),
        outage_windows: Vec::new(),
        drift_rate: 0.0,
        drift_random_walk: 0.0,
        global_bias: [0.0; 3],
        noise_sigma: 0.0,
        method_label: default_speed_label(),
        extra_methods: Vec::new(),
        sample_rate_hz: default_sample_rate(),
        t0: default_t0(),
        calibration: DeviceCalibration::default(),
        eps0_m: DEFAULT_EPS0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lever_arm::apply_lever_arm;

    fn base_utm_from_file_path(s: &Scenario, m: usize) -> Vec<Vector3<f64>> {
        apply_lever_arm(&s.methods[m].trajectory, &s.calibration.t_imu_to_base)
            .samples()
            .iter()
            .map(|x| Vector3::from(s.frame.enu_to_utm(&x.p_base).unwrap().to_array()))
            .collect()
    }

    #[test]
    fn clean_estimate_equals_truth() {
        let s = generate(&loop_spec(6, 20.0, 8.0)).unwrap();
        assert_eq!(s.estimate(), &s.truth);
        let e = &s.expected[0].summary;
        assert_eq!(e.n_points, 6);
        assert!(e.rmse_absolute < 1e-9);
        assert_eq!(e.gap_percent, None);
        // Poses map back onto the generated UTM base positions.
        for (a, b) in base_utm_from_file_path(&s, 0).iter().zip(&s.methods[0].base_utm) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn bias_only_expectation() {
        let mut spec = loop_spec(8, 25.0, 8.0);
        spec.global_bias = [1.0, 0.0, 0.0];
        let s = generate(&spec).unwrap();
        let e = &s.expected[0].summary;
        assert!((e.rmse_absolute - 1.0).abs() < 1e-9);
        assert!(e.rmse_aligned.unwrap() < 1e-9);
        assert!((e.gap_percent.unwrap() - 100.0).abs() < 1e-7);
        assert_eq!(s.gate_radius_m, 2.0);
    }

    #[test]
    fn rtk_outages_and_origin() {
        let mut spec = loop_spec(6, 20.0, 8.0);
        spec.outage_windows = vec![[30.5, 60.2]];
        let s = generate(&spec).unwrap();
        let none: Vec<f64> = s.rtk.records().iter().filter(|r| r.status == GnssStatus::None).map(|r| r.t - spec.t0).collect();
        assert_eq!(none, (31..=60).map(|k| k as f64).collect::<Vec<_>>());
        assert_eq!(s.frame.origin.origin, s.rtk.records()[0].position);
        // The antenna sits above the base center by the lever-arm difference.
        let first = s.truth.poses()[0];
        let p_base = first.position + first.orientation * s.calibration.t_imu_to_base;
        let p_ant = geodetic_to_enu(&s.rtk.records()[0].position, &s.frame.origin, &Ellipsoid::GRS80).to_vector();
        let miss = (p_ant - p_base - first.orientation * s.calibration.base_to_antenna()).norm();
        assert!(miss < 1e-8, "{miss}");
    }

    #[test]
    fn drift_profile_follows_tent() {
        let mut spec = loop_spec(6, 30.0, 8.0);
        spec.outage_windows = vec![[20.0, 80.0]];
        spec.drift_rate = 0.01;
        let s = generate(&spec).unwrap();
        let taus: Vec<f64> = s.truth.poses().iter().map(|p| p.t - spec.t0).collect();
        for (k, tau) in taus.iter().enumerate() {
            let drift = (s.methods[0].base_utm[k] - base_truth(&s, k)).norm();
            let expect = if *tau > 19.0 && *tau < 81.0 { 0.01 * (tau - 19.0).min(81.0 - tau) } else { 0.0 };
            assert!((drift - expect).abs() < 1e-6, "tau {tau}: {drift} vs {expect}");
            assert!((s.methods[0].base_utm[k] - base_truth(&s, k)).z.abs() < 1e-7);
        }
        let fit = s.expected[0].drift.unwrap();
        assert!(fit.alpha > 0.0 && fit.alpha < 0.01);
    }

    fn base_truth(s: &Scenario, k: usize) -> Vector3<f64> {
        let p = s.truth.poses()[k];
        let b = p.position + p.orientation * s.calibration.t_imu_to_base;
        Vector3::from(s.frame.enu_to_utm(&EnuCoord::from(b)).unwrap().to_array())
    }

    #[test]
    fn bridge_is_pinned_at_fixes() {
        let mut spec = loop_spec(6, 30.0, 8.0);
        spec.outage_windows = vec![[20.0, 80.0]];
        spec.drift_random_walk = 0.05;
        let s = generate(&spec).unwrap();
        let poses = s.truth.poses();
        let at = |tau: f64| poses.iter().position(|p| (p.t - spec.t0 - tau).abs() < 1e-9).unwrap();
        for tau in [19.0, 81.0, 5.0, 100.0] {
            let k = at(tau);
            assert!((s.methods[0].base_utm[k] - base_truth(&s, k)).norm() < 1e-8, "tau {tau}");
        }
        let mid = at(50.0);
        assert!((s.methods[0].base_utm[mid] - base_truth(&s, mid)).norm() > 1e-4);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut spec = loop_spec(5, 20.0, 8.0);
        spec.noise_sigma = 0.01;
        spec.outage_windows = vec![[10.0, 40.0]];
        spec.drift_rate = 0.002;
        spec.drift_random_walk = 0.001;
        spec.seed = 7;
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(generate(&spec).unwrap().methods[0].base_utm, generate(&other).unwrap().methods[0].base_utm);
        // Adding a method leaves the first one untouched.
        let mut more = spec.clone();
        more.extra_methods.push(Corruption { label: "b".into(), global_bias: [0.0; 3], noise_sigma: 0.05, drift_rate: 0.0, drift_random_walk: 0.0 });
        assert_eq!(generate(&more).unwrap().methods[0], generate(&spec).unwrap().methods[0]);
    }

    #[test]
    fn bookkeeping_distances() {
        let mut spec = loop_spec(4, 20.0, 10.0);
        spec.outage_windows = vec![[5.0, 1000.0]];
        let s = generate(&spec).unwrap();
        // Only the first epoch before the outage is a fix.
        let v = &s.visits[0];
        assert_eq!(v.t_start - spec.t0, 0.0);
        assert!((v.dt_nearest_fix - 1.0).abs() < 1e-12 && v.dx_nearest_fix == 0.0);
        let v = &s.visits[1];
        assert!((v.dt_nearest_fix - (v.t_mid - spec.t0 - 4.0)).abs() < 1e-9);
        assert!(v.dx_nearest_fix > 0.0);
    }

    #[test]
    fn invalid_specs() {
        let base = loop_spec(4, 20.0, 8.0);
        let mut cases = Vec::new();
        let mut s = base.clone();
        s.path.speed_mps = 0.0;
        cases.push(s);
        let mut s = base.clone();
        s.outage_windows = vec![[0.0, 10.0]];
        cases.push(s);
        let mut s = base.clone();
        s.outage_windows = vec![[10.0, 20.0], [15.0, 30.0]];
        cases.push(s);
        let mut s = base.clone();
        s.dwells[0].duration_s = -1.0;
        cases.push(s);
        let mut s = base.clone();
        s.dwells.push(DwellSpec { checkpoint_id: "ghost".into(), duration_s: 5.0 });
        cases.push(s);
        let mut s = base.clone();
        s.dwells.remove(0);
        cases.push(s);
        let mut s = base.clone();
        s.noise_sigma = -0.1;
        cases.push(s);
        let mut s = base.clone();
        s.extra_methods.push(Corruption { label: s.method_label.clone(), global_bias: [0.0; 3], noise_sigma: 0.0, drift_rate: 0.0, drift_random_walk: 0.0 });
        cases.push(s);
        for c in cases {
            assert!(matches!(generate(&c), Err(SynthError::InvalidSpec(_))), "{c:?}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = loop_spec(3, 10.0, 6.0);
        let json = serde_json::to_vec(&spec).unwrap();
        assert_eq!(ScenarioSpec::from_json(&json).unwrap(), spec);
        let minimal = br#"{"origin": {"lat_deg": 48.78, "lon_deg": 9.18},
            "path": {"speed_mps": 1.0, "waypoints": [{"de": 0, "dn": 0, "checkpoint_id": "A"}, {"de": 10, "dn": 0}]},
            "dwells": [{"checkpoint_id": "A", "duration_s": 6}]}"#;
        let s = ScenarioSpec::from_json(minimal).unwrap();
        assert_eq!(s.sample_rate_hz, 10.0);
        assert_eq!(s.zone().unwrap(), UtmZone::new(32, Hemisphere::North).unwrap());
        assert_eq!(generate(&s).unwrap().checkpoints.len(), 1);
    }
}
