use serde::{Deserialize, Serialize};

use super::{Ellipsoid, GeodesyError, GeodeticCoord};

const MAX_ITERATIONS: usize = 20;
const LAT_TOLERANCE: f64 = 1e-12;
const HEIGHT_TOLERANCE: f64 = 1e-6;

/// Earth-centered, Earth-fixed Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefCoord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &EcefCoord) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

pub fn geodetic_to_ecef(g: &GeodeticCoord, ell: &Ellipsoid) -> EcefCoord {
    let (sin_lat, cos_lat) = g.lat().sin_cos();
    let (sin_lon, cos_lon) = g.lon().sin_cos();
    let n = ell.prime_vertical_radius(g.lat());
    EcefCoord {
        x: (n + g.h()) * cos_lat * cos_lon,
        y: (n + g.h()) * cos_lat * sin_lon,
        z: (n * (1.0 - ell.e2()) + g.h()) * sin_lat,
    }
}

/// Inverse of [`geodetic_to_ecef`].
///
/// Bowring's closed-form expression seeds a fixed-point iteration on the
/// parametric latitude, which usually settles in two or three steps.
pub fn ecef_to_geodetic(p: &EcefCoord, ell: &Ellipsoid) -> Result<GeodeticCoord, GeodesyError> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(GeodesyError::NonFinite);
    }
    let a = ell.a();
    let b = ell.b();
    let e2 = ell.e2();
    let ep2 = ell.ep2();
    let rho = p.x.hypot(p.y);
    if rho == 0.0 && p.z == 0.0 {
        return Err(GeodesyError::NonConvergence(0));
    }
    let lon = p.y.atan2(p.x);

    // Bowring seed.
    let mut beta = (a * p.z).atan2(b * rho);
    let mut lat = f64::NAN;
    let mut h = f64::NAN;
    for _ in 0..MAX_ITERATIONS {
        let (sb, cb) = beta.sin_cos();
        let next_lat = (p.z + ep2 * b * sb * sb * sb).atan2(rho - e2 * a * cb * cb * cb);
        let next_h = height_above(rho, p.z, next_lat, ell);
        let converged = (next_lat - lat).abs() < LAT_TOLERANCE && (next_h - h).abs() < HEIGHT_TOLERANCE;
        lat = next_lat;
        h = next_h;
        if converged {
            return GeodeticCoord::new(lat, lon, h);
        }
        beta = ((1.0 - ell.f()) * lat.sin()).atan2(lat.cos());
    }
    Err(GeodesyError::NonConvergence(MAX_ITERATIONS))
}

// Valid at every latitude, including the poles.
fn height_above(rho: f64, z: f64, lat: f64, ell: &Ellipsoid) -> f64 {
    let (s, c) = lat.sin_cos();
    let n = ell.prime_vertical_radius(lat);
    rho * c + z * s - n * (1.0 - ell.e2() * s * s)
}
