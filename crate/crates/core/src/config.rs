//! Run configuration for one sequence evaluated across several methods.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::DEFAULT_EPS0;
use crate::geodesy::{GeodesyError, Hemisphere, UtmZone};
use crate::matching::DwellParams;
use crate::trajectory_io::{DeviceCalibration, GnssStatus};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtmSpec {
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

impl UtmSpec {
    pub fn to_zone(self) -> Result<UtmZone, GeodesyError> {
        UtmZone::new(self.zone, self.hemisphere)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodInput {
    pub label: String,
    /// TUM file with IMU poses in the local ENU frame.
    pub trajectory: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub stationary_radius_m: f64,
    pub min_dwell_s: f64,
    pub gate_radius_m: f64,
    pub eps0_m: f64,
    /// Largest allowed offset between a visit time and the pose used for it.
    pub max_lookup_gap_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let d = DwellParams::default();
        Self {
            stationary_radius_m: d.stationary_radius_m,
            min_dwell_s: d.min_dwell_s,
            gate_radius_m: 1.0,
            eps0_m: DEFAULT_EPS0,
            max_lookup_gap_s: 0.2,
        }
    }
}

impl Thresholds {
    pub fn dwell(&self) -> DwellParams {
        DwellParams {
            stationary_radius_m: self.stationary_radius_m,
            min_dwell_s: self.min_dwell_s,
        }
    }
}

/// Standalone RTK treated as one more method. The base center is taken as
/// the antenna position shifted straight down by the vertical component of
/// the antenna-to-base lever arm, i.e. the pole is assumed vertical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RtkStandalone {
    pub enabled: bool,
    pub label: String,
    /// Records of this status or better are used.
    pub min_status: GnssStatus,
    pub max_lookup_gap_s: f64,
}

impl Default for RtkStandalone {
    fn default() -> Self {
        Self {
            enabled: false,
            label: "RTK standalone".to_string(),
            min_status: GnssStatus::RtkFix,
            max_lookup_gap_s: 1.0,
        }
    }
}

fn default_anchors() -> Vec<GnssStatus> {
    vec![GnssStatus::RtkFix]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sequence_id: String,
    pub utm: UtmSpec,
    #[serde(default)]
    pub calibration: DeviceCalibration,
    pub checkpoints: PathBuf,
    pub rtk_log: PathBuf,
    pub methods: Vec<MethodInput>,
    /// Existing table to evaluate against instead of detecting dwells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_table: Option<PathBuf>,
    /// Method whose dwells define the visit table; defaults to the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_method: Option<String>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_anchors")]
    pub anchor_statuses: Vec<GnssStatus>,
    #[serde(default)]
    pub rtk_standalone: RtkStandalone,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Returns the raw bytes too, for
    /// provenance hashing.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = fs::read(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((Self::from_json(&bytes)?, bytes))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("config serializes");
        out.push(b'\n');
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.sequence_id.trim().is_empty() {
            return bad("sequence_id is empty".into());
        }
        if let Err(e) = self.utm.to_zone() {
            return bad(e.to_string());
        }
        if let Err(e) = self.calibration.validate() {
            return bad(e.to_string());
        }
        if self.methods.is_empty() && !self.rtk_standalone.enabled {
            return bad("no methods to evaluate".into());
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            if m.label.trim().is_empty() || m.label.contains(',') {
                return bad(format!("invalid method label '{}'", m.label));
            }
            if !labels.insert(m.label.as_str()) {
                return bad(format!("duplicate method label '{}'", m.label));
            }
        }
        if self.rtk_standalone.enabled && !labels.insert(self.rtk_standalone.label.as_str()) {
            return bad(format!("duplicate method label '{}'", self.rtk_standalone.label));
        }
        if let Some(r) = &self.reference_method {
            if !self.methods.iter().any(|m| &m.label == r) {
                return bad(format!("reference_method '{r}' is not a trajectory method"));
            }
        }
        if self.visit_table.is_none() && self.methods.is_empty() {
            return bad("a visit table is required when no trajectory method is given".into());
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("stationary_radius_m", t.stationary_radius_m),
            ("min_dwell_s", t.min_dwell_s),
            ("gate_radius_m", t.gate_radius_m),
            ("max_lookup_gap_s", t.max_lookup_gap_s),
            ("rtk_standalone.max_lookup_gap_s", self.rtk_standalone.max_lookup_gap_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(t.eps0_m.is_finite() && t.eps0_m >= 0.0) {
            return bad(format!("eps0_m must be non-negative, got {}", t.eps0_m));
        }
        if self.anchor_statuses.is_empty() {
            return bad("anchor_statuses is empty".into());
        }
        Ok(())
    }

    pub fn zone(&self) -> UtmZone {
        self.utm.to_zone().expect("validated")
    }

    /// Label of the method whose dwells define the visit table.
    pub fn reference_label(&self) -> Option<&str> {
        self.reference_method
            .as_deref()
            .or_else(|| self.methods.first().map(|m| m.label.as_str()))
    }
}

/// Resolves `p` against the directory containing the config file.
pub fn resolve(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config_path
        .parent()
        .map(|d| d.join(p))
        .unwrap_or_else(|| p.to_path_buf())
}
