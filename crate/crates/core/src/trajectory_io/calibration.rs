use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ParseError;

const MAX_LEVER_ARM: f64 = 2.0;

/// Reference-point offsets from the IMU origin, expressed in the IMU frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceCalibration {
    pub t_imu_to_base: Vector3<f64>,
    pub t_imu_to_antenna: Vector3<f64>,
}

impl DeviceCalibration {
    pub fn new(t_imu_to_base: Vector3<f64>, t_imu_to_antenna: Vector3<f64>) -> Result<Self, ParseError> {
        let c = Self {
            t_imu_to_base,
            t_imu_to_antenna,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        for (name, v) in [("imu_to_base", self.t_imu_to_base), ("imu_to_antenna", self.t_imu_to_antenna)] {
            if !v.iter().all(|x| x.is_finite()) {
                return Err(ParseError::InvalidCalibration(format!("{name} is not finite")));
            }
            if v.norm() >= MAX_LEVER_ARM {
                return Err(ParseError::InvalidCalibration(format!(
                    "{name} length {:.3} m exceeds {MAX_LEVER_ARM} m",
                    v.norm()
                )));
            }
        }
        Ok(())
    }

    /// Antenna phase center relative to the base center, IMU frame.
    pub fn base_to_antenna(&self) -> Vector3<f64> {
        self.t_imu_to_antenna - self.t_imu_to_base
    }
}

/// Handheld pole used for the reference dataset (CAD-derived offsets).
impl Default for DeviceCalibration {
    fn default() -> Self {
        Self {
            t_imu_to_base: Vector3::new(-0.073, -0.023, -0.172),
            t_imu_to_antenna: Vector3::new(0.023, -0.023, 0.090),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert!(DeviceCalibration::default().validate().is_ok());
        let d = DeviceCalibration::default().base_to_antenna();
        assert!((d - Vector3::new(0.096, 0.0, 0.262)).norm() < 1e-15);
    }

    #[test]
    fn rejects_implausible_offsets() {
        assert!(DeviceCalibration::new(Vector3::new(0.0, 0.0, -2.5), Vector3::zeros()).is_err());
        assert!(DeviceCalibration::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros()).is_err());
    }
}
