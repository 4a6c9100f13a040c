use serde::{Deserialize, Serialize};

/// Reference ellipsoid given by semi-major axis and flattening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    a: f64,
    f: f64,
}

impl Ellipsoid {
    /// GRS80, the ellipsoid of ETRS89.
    pub const GRS80: Ellipsoid = Ellipsoid {
        a: 6_378_137.0,
        f: 1.0 / 298.257_222_101,
    };

    pub const WGS84: Ellipsoid = Ellipsoid {
        a: 6_378_137.0,
        f: 1.0 / 298.257_223_563,
    };

    /// Returns `None` unless `a > 0` and `0 < f < 1`.
    pub fn new(a: f64, f: f64) -> Option<Self> {
        (a.is_finite() && a > 0.0 && f > 0.0 && f < 1.0).then_some(Self { a, f })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    /// Semi-minor axis.
    pub fn b(&self) -> f64 {
        self.a * (1.0 - self.f)
    }

    /// First eccentricity squared.
    pub fn e2(&self) -> f64 {
        self.f * (2.0 - self.f)
    }

    /// Second eccentricity squared.
    pub fn ep2(&self) -> f64 {
        let e2 = self.e2();
        e2 / (1.0 - e2)
    }

    /// Third flattening n = (a - b) / (a + b).
    pub fn n(&self) -> f64 {
        self.f / (2.0 - self.f)
    }

    /// Prime vertical radius of curvature at geodetic latitude `lat`.
    pub fn prime_vertical_radius(&self, lat: f64) -> f64 {
        let s = lat.sin();
        self.a / (1.0 - self.e2() * s * s).sqrt()
    }
}

impl Default for Ellipsoid {
    fn default() -> Self {
        Self::GRS80
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grs80_derived_constants() {
        let e = Ellipsoid::GRS80;
        assert!((e.b() - 6_356_752.314_140_356).abs() < 1e-6);
        assert!((e.e2() - 0.006_694_380_022_900_787).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Ellipsoid::new(-1.0, 0.003).is_none());
        assert!(Ellipsoid::new(6e6, 0.0).is_none());
        assert!(Ellipsoid::new(6e6, 1.0).is_none());
        assert!(Ellipsoid::new(6e6, 0.003).is_some());
    }
}
