//! Moves estimated IMU positions to the base center of the pole, the point
//! that is held over each checkpoint.

use nalgebra::Vector3;

use crate::geodesy::EnuCoord;
use crate::trajectory_io::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseCenterSample {
    pub t: f64,
    pub p_base: EnuCoord,
}

/// Base-center positions, one per source pose, same timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaseCenterTrack {
    samples: Vec<BaseCenterSample>,
}

impl BaseCenterTrack {
    /// Caller guarantees strictly increasing timestamps.
    pub fn from_samples(samples: Vec<BaseCenterSample>) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[1].t > w[0].t));
        Self { samples }
    }

    pub fn samples(&self) -> &[BaseCenterSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the sample closest in time to `t`.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        if self.samples.is_empty() {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t < t);
        let candidates = [i.checked_sub(1), (i < self.samples.len()).then_some(i)];
        candidates
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                let da = (self.samples[a].t - t).abs();
                let db = (self.samples[b].t - t).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
    }
}

/// p_base = p_imu + R_world_imu * t_imu_to_base, per pose.
pub fn apply_lever_arm(traj: &Trajectory, offset: &Vector3<f64>) -> BaseCenterTrack {
    let samples = traj
        .poses()
        .iter()
        .map(|pose| BaseCenterSample {
            t: pose.t,
            p_base: (pose.position + pose.orientation * offset).into(),
        })
        .collect();
    BaseCenterTrack { samples }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    use super::*;
    use crate::trajectory_io::{FrameTag, Pose};

    fn traj(position: Vector3<f64>, q: UnitQuaternion<f64>) -> Trajectory {
        let poses = (0..2)
            .map(|i| Pose {
                t: i as f64,
                position,
                orientation: q,
            })
            .collect();
        Trajectory::new(poses, FrameTag::EnuLocal).unwrap()
    }

    #[test]
    fn identity_rotation_base_center() {
        let t = traj(Vector3::new(1.0, 2.0, 3.0), UnitQuaternion::identity());
        let b = apply_lever_arm(&t, &Vector3::new(-0.073, -0.023, -0.172));
        let p = b.samples()[0].p_base.to_vector();
        assert!((p - Vector3::new(0.927, 1.977, 2.828)).norm() < 1e-15);
        assert_eq!(b.len(), 2);
        assert_eq!(b.samples()[1].t, 1.0);
    }

    #[test]
    fn zero_offset_keeps_positions() {
        let t = traj(Vector3::new(1.0, -2.0, 0.5), UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1));
        let b = apply_lever_arm(&t, &Vector3::zeros());
        assert_eq!(b.samples()[0].p_base.to_vector(), Vector3::new(1.0, -2.0, 0.5));
    }

    #[test]
    fn quarter_turn_yaw() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2);
        let b = apply_lever_arm(&traj(Vector3::zeros(), q), &Vector3::new(1.0, 0.0, 0.0));
        assert!((b.samples()[0].p_base.to_vector() - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn nearest_index_lookup() {
        let samples = [0.0, 1.0, 2.0]
            .iter()
            .map(|&t| BaseCenterSample { t, p_base: EnuCoord::new(t, 0.0, 0.0) })
            .collect();
        let track = BaseCenterTrack::from_samples(samples);
        assert_eq!(track.nearest_index(-5.0), Some(0));
        assert_eq!(track.nearest_index(0.4), Some(0));
        assert_eq!(track.nearest_index(0.5), Some(0));
        assert_eq!(track.nearest_index(0.6), Some(1));
        assert_eq!(track.nearest_index(9.0), Some(2));
        assert_eq!(BaseCenterTrack::default().nearest_index(1.0), None);
    }

    proptest! {
        #[test]
        fn offset_length_preserved(
            rpy in prop::array::uniform3(-3.1..3.1f64),
            p in prop::array::uniform3(-100.0..100.0f64),
            o in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let q = UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]);
            let offset = Vector3::from(o);
            let b = apply_lever_arm(&traj(Vector3::from(p), q), &offset);
            let moved = (b.samples()[0].p_base.to_vector() - Vector3::from(p)).norm();
            prop_assert!((moved - offset.norm()).abs() <= 1e-12 * offset.norm().max(1e-3) + 1e-13);
        }

        #[test]
        fn body_frame_offsets_compose(
            rpy in prop::array::uniform3(-3.1..3.1f64),
            o1 in prop::array::uniform3(-1.0..1.0f64),
            o2 in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let q = UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]);
            let t = traj(Vector3::new(3.0, 4.0, 5.0), q);
            let (o1, o2) = (Vector3::from(o1), Vector3::from(o2));
            let once = apply_lever_arm(&t, &(o1 + o2));
            let step = apply_lever_arm(&t, &o1);
            let shifted: Vec<Pose> = t
                .poses()
                .iter()
                .zip(step.samples())
                .map(|(pose, s)| Pose { position: s.p_base.to_vector(), ..*pose })
                .collect();
            let twice = apply_lever_arm(&Trajectory::new(shifted, FrameTag::EnuLocal).unwrap(), &o2);
            let d = once.samples()[0].p_base.to_vector() - twice.samples()[0].p_base.to_vector();
            prop_assert!(d.norm() < 1e-14);
        }
    }
}
