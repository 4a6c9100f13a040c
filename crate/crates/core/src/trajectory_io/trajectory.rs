use std::io::{Read, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{is_blank_or_comment, malformed, parse_f64, read_lines, ParseError};

const QUAT_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryFormat {
    /// `t tx ty tz qx qy qz qw`, whitespace separated.
    Tum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameTag {
    EnuLocal,
    Utm,
}

/// IMU body pose in the world frame at time `t` (GNSS seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub t: f64,
    pub position: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    frame: FrameTag,
}

impl Trajectory {
    /// Validates strictly increasing timestamps and at least two poses.
    pub fn new(poses: Vec<Pose>, frame: FrameTag) -> Result<Self, ParseError> {
        if poses.len() < 2 {
            return Err(ParseError::TooFewPoses(poses.len()));
        }
        for (i, w) in poses.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(ParseError::NonMonotonicTimestamp(i + 2));
            }
        }
        Ok(Self { poses, frame })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn frame(&self) -> FrameTag {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.poses[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.poses[self.poses.len() - 1].t
    }
}

pub fn parse_trajectory(source: impl Read, format: TrajectoryFormat) -> Result<Trajectory, ParseError> {
    match format {
        TrajectoryFormat::Tum => parse_tum(source),
    }
}

fn parse_tum(source: impl Read) -> Result<Trajectory, ParseError> {
    let mut poses: Vec<Pose> = Vec::new();
    for (n, line) in read_lines(source)? {
        if is_blank_or_comment(&line) {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(malformed(n, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 8];
        for (slot, (field, name)) in v.iter_mut().zip(fields.iter().zip(["t", "tx", "ty", "tz", "qx", "qy", "qz", "qw"])) {
            *slot = parse_f64(n, field, name)?;
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(malformed(n, format!("quaternion norm {} is not 1", q.norm())));
        }
        if let Some(prev) = poses.last() {
            if !(v[0] > prev.t) {
                return Err(ParseError::NonMonotonicTimestamp(n));
            }
        }
        poses.push(Pose {
            t: v[0],
            position: Vector3::new(v[1], v[2], v[3]),
            orientation: UnitQuaternion::from_quaternion(q),
        });
    }
    if poses.is_empty() {
        return Err(ParseError::EmptyFile);
    }
    Trajectory::new(poses, FrameTag::EnuLocal)
}

pub fn write_tum(traj: &Trajectory, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# t tx ty tz qx qy qz qw")?;
    for p in traj.poses() {
        let q = p.orientation.quaternion();
        writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.t, p.position.x, p.position.y, p.position.z, q.i, q.j, q.k, q.w
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn parse(s: &str) -> Result<Trajectory, ParseError> {
        parse_trajectory(s.as_bytes(), TrajectoryFormat::Tum)
    }

    #[test]
    fn two_valid_lines() {
        let t = parse("# header\n1.0 0 0 0 0 0 0 1\n2.0 1 2 3 0 0 0 1\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.poses()[1].position, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.frame(), FrameTag::EnuLocal);
    }

    #[test]
    fn quaternion_normalization_contract() {
        let t = parse("1 0 0 0 0 0 0 1.0005\n2 0 0 0 0 0 0 1\n").unwrap();
        assert!((t.poses()[0].orientation.quaternion().norm() - 1.0).abs() < 1e-15);
        let err = parse("1 0 0 0 0 0 0 2\n2 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, ParseError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn out_of_order_timestamps() {
        let err = parse("2 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, ParseError::NonMonotonicTimestamp(2)));
        let err = parse("2 0 0 0 0 0 0 1\n2 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, ParseError::NonMonotonicTimestamp(2)));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse(""), Err(ParseError::EmptyFile)));
        assert!(matches!(parse("# only\n\n"), Err(ParseError::EmptyFile)));
        assert!(matches!(parse("1 0 0 0 0 0 0 1\n"), Err(ParseError::TooFewPoses(1))));
        assert!(matches!(
            parse("1 0 0 0 0 0 1\n"),
            Err(ParseError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse("1 0 0 0 0 0 0 1\n\n2 x 0 0 0 0 0 1\n"),
            Err(ParseError::MalformedLine { line: 3, .. })
        ));
        assert!(matches!(
            parse("1 0 0 nan 0 0 0 1\n2 0 0 0 0 0 0 1\n"),
            Err(ParseError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_parse_is_lossless() {
        let poses = (0..5)
            .map(|i| Pose {
                t: 345_600.0 + 0.1 * i as f64,
                position: Vector3::new(0.1 * i as f64, -1.0 / 3.0, 2e-7),
                orientation: UnitQuaternion::from_euler_angles(0.01, -0.02, 0.3 * i as f64),
            })
            .collect();
        let t = Trajectory::new(poses, FrameTag::EnuLocal).unwrap();
        let mut buf = Vec::new();
        write_tum(&t, &mut buf).unwrap();
        let back = parse_trajectory(buf.as_slice(), TrajectoryFormat::Tum).unwrap();
        for (a, b) in t.poses().iter().zip(back.poses()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.position, b.position);
            assert!(a.orientation.angle_to(&b.orientation) < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
            let _ = parse_trajectory(bytes.as_slice(), TrajectoryFormat::Tum);
        }

        #[test]
        fn never_panics_on_numeric_noise(s in "([0-9eE.+-]{0,6}[ \t]{0,2}){0,10}\n{0,2}") {
            let _ = parse_trajectory(s.as_bytes(), TrajectoryFormat::Tum);
        }
    }
}
