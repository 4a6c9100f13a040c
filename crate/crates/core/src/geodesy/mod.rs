//! Coordinate frames and the transformations between them.
//!
//! Angles are radians internally. Heights are ellipsoidal throughout; no geoid
//! model is applied anywhere in the crate.

mod ecef;
mod ellipsoid;
mod enu;
mod utm;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ecef::{ecef_to_geodetic, geodetic_to_ecef, EcefCoord};
pub use ellipsoid::Ellipsoid;
pub use enu::{enu_to_geodetic, geodetic_to_enu, EnuCoord, EnuOrigin};
pub use utm::{geodetic_to_utm, utm_to_geodetic, zone_central_meridian, Hemisphere, UtmCoord, UtmZone};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0} rad is outside [-pi/2, pi/2]")]
    InvalidLatitude(f64),
    #[error("non-finite coordinate component")]
    NonFinite,
    #[error("geodetic latitude iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("coordinate outside the projection domain: {0}")]
    OutOfDomain(String),
    #[error("invalid UTM zone {0} (expected 1..=60)")]
    InvalidZone(u8),
}

/// Geodetic latitude, longitude (radians) and ellipsoidal height (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticCoord {
    lat: f64,
    lon: f64,
    h: f64,
}

impl GeodeticCoord {
    /// Builds a coordinate, normalizing longitude to (-pi, pi].
    pub fn new(lat: f64, lon: f64, h: f64) -> Result<Self, GeodesyError> {
        if !(lat.is_finite() && lon.is_finite() && h.is_finite()) {
            return Err(GeodesyError::NonFinite);
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&lat) {
            return Err(GeodesyError::InvalidLatitude(lat));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
            h,
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, h: f64) -> Result<Self, GeodesyError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), h)
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

fn normalize_lon(lon: f64) -> f64 {
    let mut l = lon % (2.0 * PI);
    if l <= -PI {
        l += 2.0 * PI;
    } else if l > PI {
        l -= 2.0 * PI;
    }
    l
}

/// Everything needed to carry a local ENU position into UTM: the ENU origin,
/// the target zone and the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: EnuOrigin,
    pub zone: UtmZone,
    pub ellipsoid: Ellipsoid,
}

impl LocalFrame {
    pub fn new(origin: EnuOrigin, zone: UtmZone) -> Self {
        Self {
            origin,
            zone,
            ellipsoid: Ellipsoid::GRS80,
        }
    }

    pub fn with_ellipsoid(mut self, ellipsoid: Ellipsoid) -> Self {
        self.ellipsoid = ellipsoid;
        self
    }

    /// ENU -> geodetic -> UTM.
    pub fn enu_to_utm(&self, p: &EnuCoord) -> Result<UtmCoord, GeodesyError> {
        let g = enu_to_geodetic(p, &self.origin, &self.ellipsoid)?;
        geodetic_to_utm(&g, self.zone, &self.ellipsoid)
    }

    /// UTM -> geodetic -> ENU.
    pub fn utm_to_enu(&self, u: &UtmCoord) -> Result<EnuCoord, GeodesyError> {
        let g = utm_to_geodetic(u, &self.ellipsoid)?;
        Ok(geodetic_to_enu(&g, &self.origin, &self.ellipsoid))
    }
}
