use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ecef_to_geodetic, geodetic_to_ecef, EcefCoord, Ellipsoid, GeodesyError, GeodeticCoord};

/// East/north/up offset in meters from an [`EnuOrigin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuCoord {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuCoord {
    pub fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }
}

impl From<Vector3<f64>> for EnuCoord {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Tangent point of a local ENU frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuOrigin {
    pub origin: GeodeticCoord,
}

impl EnuOrigin {
    pub fn new(origin: GeodeticCoord) -> Self {
        Self { origin }
    }

    /// Columns are the east, north and up unit vectors expressed in ECEF.
    pub fn enu_to_ecef_rotation(&self) -> Matrix3<f64> {
        let (sl, cl) = self.origin.lat().sin_cos();
        let (so, co) = self.origin.lon().sin_cos();
        Matrix3::new(
            -so, -sl * co, cl * co, //
            co, -sl * so, cl * so, //
            0.0, cl, sl,
        )
    }
}

pub fn enu_to_geodetic(
    p: &EnuCoord,
    origin: &EnuOrigin,
    ell: &Ellipsoid,
) -> Result<GeodeticCoord, GeodesyError> {
    let o = geodetic_to_ecef(&origin.origin, ell);
    let d = origin.enu_to_ecef_rotation() * p.to_vector();
    ecef_to_geodetic(&EcefCoord::new(o.x + d.x, o.y + d.y, o.z + d.z), ell)
}

pub fn geodetic_to_enu(g: &GeodeticCoord, origin: &EnuOrigin, ell: &Ellipsoid) -> EnuCoord {
    let o = geodetic_to_ecef(&origin.origin, ell);
    let p = geodetic_to_ecef(g, ell);
    let d = Vector3::new(p.x - o.x, p.y - o.y, p.z - o.z);
    (origin.enu_to_ecef_rotation().transpose() * d).into()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const GRS80: Ellipsoid = Ellipsoid::GRS80;

    fn stuttgart() -> EnuOrigin {
        EnuOrigin::new(GeodeticCoord::from_degrees(48.78, 9.18, 300.0).unwrap())
    }

    #[test]
    fn zero_offset_is_origin() {
        let o = stuttgart();
        let g = enu_to_geodetic(&EnuCoord::new(0.0, 0.0, 0.0), &o, &GRS80).unwrap();
        assert!((g.lat() - o.origin.lat()).abs() < 1e-14);
        assert!((g.lon() - o.origin.lon()).abs() < 1e-14);
        assert!((g.h() - 300.0).abs() < 1e-8);
        let e = geodetic_to_enu(&o.origin, &o, &GRS80);
        assert_eq!((e.e, e.n, e.u), (0.0, 0.0, 0.0));
    }

    #[test]
    fn up_axis_is_ellipsoid_normal() {
        let o = stuttgart();
        let g = enu_to_geodetic(&EnuCoord::new(0.0, 0.0, 100.0), &o, &GRS80).unwrap();
        assert!((g.lat() - o.origin.lat()).abs() < 1e-12);
        assert!((g.lon() - o.origin.lon()).abs() < 1e-12);
        assert!((g.h() - 400.0).abs() < 1e-6);
    }

    #[test]
    fn east_offset_preserves_distance() {
        let o = stuttgart();
        let g = enu_to_geodetic(&EnuCoord::new(1000.0, 0.0, 0.0), &o, &GRS80).unwrap();
        let d = geodetic_to_ecef(&g, &GRS80).distance(&geodetic_to_ecef(&o.origin, &GRS80));
        assert!((d - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let r = stuttgart().enu_to_ecef_rotation();
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_within_50km(
            e in -50_000.0..50_000.0f64,
            n in -50_000.0..50_000.0f64,
            u in -1_000.0..1_000.0f64,
        ) {
            let o = stuttgart();
            let p = EnuCoord::new(e, n, u);
            let g = enu_to_geodetic(&p, &o, &GRS80).unwrap();
            let q = geodetic_to_enu(&g, &o, &GRS80);
            // Both directions pass through ECEF, where one ulp is 0.93 nm.
            let err = (p.to_vector() - q.to_vector()).norm();
            prop_assert!(err < 5e-9, "round trip error {err}");
        }

        #[test]
        fn isometry(
            a in prop::array::uniform3(-5_000.0..5_000.0f64),
            b in prop::array::uniform3(-5_000.0..5_000.0f64),
        ) {
            let o = stuttgart();
            let pa = EnuCoord::new(a[0], a[1], a[2]);
            let pb = EnuCoord::new(b[0], b[1], b[2]);
            let ea = geodetic_to_ecef(&enu_to_geodetic(&pa, &o, &GRS80).unwrap(), &GRS80);
            let eb = geodetic_to_ecef(&enu_to_geodetic(&pb, &o, &GRS80).unwrap(), &GRS80);
            let d_enu = (pa.to_vector() - pb.to_vector()).norm();
            prop_assume!(d_enu > 1.0);
            prop_assert!(((ea.distance(&eb) - d_enu) / d_enu).abs() < 1e-9);
        }
    }
}
