use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{is_blank_or_comment, malformed, parse_f64, read_lines, ParseError};
use crate::geodesy::{EnuOrigin, GeodeticCoord};

const HEADER: [&str; 5] = ["t", "lat_deg", "lon_deg", "height", "status"];

/// Receiver positioning mode. Variants are declared worst to best so the
/// derived ordering matches solution quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GnssStatus {
    #[serde(rename = "NONE")]
    None,
    #[serde(rename = "SINGLE")]
    Single,
    #[serde(rename = "DGPS")]
    Dgps,
    #[serde(rename = "FLOAT")]
    RtkFloat,
    #[serde(rename = "FIX")]
    RtkFix,
}

impl GnssStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GnssStatus::None => "NONE",
            GnssStatus::Single => "SINGLE",
            GnssStatus::Dgps => "DGPS",
            GnssStatus::RtkFloat => "FLOAT",
            GnssStatus::RtkFix => "FIX",
        }
    }
}

impl fmt::Display for GnssStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive; only the five canonical spellings are accepted.
impl FromStr for GnssStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FIX" => Ok(GnssStatus::RtkFix),
            "FLOAT" => Ok(GnssStatus::RtkFloat),
            "DGPS" => Ok(GnssStatus::Dgps),
            "SINGLE" => Ok(GnssStatus::Single),
            "NONE" => Ok(GnssStatus::None),
            _ => Err(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtkRecord {
    pub t: f64,
    pub position: GeodeticCoord,
    pub status: GnssStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RtkLog {
    records: Vec<RtkRecord>,
}

impl RtkLog {
    /// Fails on decreasing timestamps; equal timestamps are allowed.
    pub fn new(records: Vec<RtkRecord>) -> Result<Self, ParseError> {
        for (i, w) in records.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(ParseError::NonMonotonicTimestamp(i + 2));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[RtkRecord] {
        &self.records
    }

    /// Times of records whose status is in `anchors`, in log order.
    pub fn anchor_times(&self, anchors: &[GnssStatus]) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| anchors.contains(&r.status))
            .map(|r| r.t)
            .collect()
    }

    /// Fraction of records with an RTK fix; 0 for an empty log.
    pub fn fix_ratio(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let fixes = self.records.iter().filter(|r| r.status == GnssStatus::RtkFix).count();
        fixes as f64 / self.records.len() as f64
    }
}

pub fn parse_rtk_log(source: impl Read) -> Result<RtkLog, ParseError> {
    let mut lines = read_lines(source)?
        .into_iter()
        .filter(|(_, l)| !is_blank_or_comment(l));
    let (n, header) = lines.next().ok_or(ParseError::EmptyFile)?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    if cols != HEADER {
        return Err(malformed(n, format!("expected header '{}'", HEADER.join(","))));
    }
    let mut records: Vec<RtkRecord> = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed(n, format!("expected 5 fields, found {}", fields.len())));
        }
        let t = parse_f64(n, fields[0], "t")?;
        let lat = parse_f64(n, fields[1], "lat_deg")?;
        let lon = parse_f64(n, fields[2], "lon_deg")?;
        let h = parse_f64(n, fields[3], "height")?;
        let status = fields[4]
            .parse::<GnssStatus>()
            .map_err(|status| ParseError::UnknownStatus { line: n, status })?;
        let position = GeodeticCoord::from_degrees(lat, lon, h).map_err(|e| malformed(n, e.to_string()))?;
        if let Some(prev) = records.last() {
            if t < prev.t {
                return Err(ParseError::NonMonotonicTimestamp(n));
            }
        }
        records.push(RtkRecord { t, position, status });
    }
    Ok(RtkLog { records })
}

pub fn write_rtk_log(log: &RtkLog, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for r in log.records() {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            r.position.lat_deg(),
            r.position.lon_deg(),
            r.position.h(),
            r.status
        )?;
    }
    Ok(())
}

/// ENU origin at the earliest RTK fix in the log.
pub fn first_rtk_fix(log: &RtkLog) -> Result<EnuOrigin, ParseError> {
    log.records()
        .iter()
        .find(|r| r.status == GnssStatus::RtkFix)
        .map(|r| EnuOrigin::new(r.position))
        .ok_or(ParseError::NoFixAvailable)
}
