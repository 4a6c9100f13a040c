//! Readers and writers for the on-disk inputs: TUM trajectories, checkpoint
//! surveys, RTK receiver logs, and the device calibration.
//!
//! Writers print floats in shortest round-trip form, so anything written can
//! be read back bit-for-bit.

mod calibration;
mod checkpoints;
mod rtk;
mod trajectory;

use thiserror::Error;

pub use calibration::DeviceCalibration;
pub use checkpoints::{parse_checkpoints, write_checkpoints, Checkpoint};
pub use rtk::{first_rtk_fix, parse_rtk_log, write_rtk_log, GnssStatus, RtkLog, RtkRecord};
pub use trajectory::{parse_trajectory, write_tum, FrameTag, Pose, Trajectory, TrajectoryFormat};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {0}: timestamp does not increase")]
    NonMonotonicTimestamp(usize),
    #[error("input contains no data")]
    EmptyFile,
    #[error("trajectory needs at least 2 poses, found {0}")]
    TooFewPoses(usize),
    #[error("line {line}: duplicate checkpoint id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown GNSS status '{status}'")]
    UnknownStatus { line: usize, status: String },
    #[error("RTK log has no RTK fix record")]
    NoFixAvailable,
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// Reads a whole stream and splits it into numbered lines, rejecting invalid
/// UTF-8 at the offending line.
pub(crate) fn read_lines(mut source: impl std::io::Read) -> Result<Vec<(usize, String)>, ParseError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| malformed(i + 1, "invalid UTF-8"))?;
        out.push((i + 1, line.trim_end_matches('\r').to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_f64(line: usize, field: &str, name: &str) -> Result<f64, ParseError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("{name}: cannot parse '{}'", field.trim())))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("{name}: non-finite value")));
    }
    Ok(v)
}

pub(crate) fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}
