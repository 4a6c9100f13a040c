//! Universal Transverse Mercator via the Krüger series, carried to sixth order
//! in the third flattening (Karney 2011 coefficients). Sub-millimeter within
//! a zone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Ellipsoid, GeodesyError, GeodeticCoord};

const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
const MAX_ABS_LAT_DEG: f64 = 84.0;
const MAX_ZONE_OFFSET_DEG: f64 = 10.0;
const WARN_ZONE_OFFSET_DEG: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    North,
    South,
}

/// A UTM zone number paired with a hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub hemisphere: Hemisphere,
}

impl UtmZone {
    pub fn new(number: u8, hemisphere: Hemisphere) -> Result<Self, GeodesyError> {
        if !(1..=60).contains(&number) {
            return Err(GeodesyError::InvalidZone(number));
        }
        Ok(Self { number, hemisphere })
    }

    pub fn central_meridian(&self) -> f64 {
        zone_central_meridian(self.number)
    }
}

impl fmt::Display for UtmZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.hemisphere {
            Hemisphere::North => 'n',
            Hemisphere::South => 's',
        };
        write!(f, "utm{}{}", self.number, h)
    }
}

/// Parses `utm32n`, `32N`, `utm32s`, ...
impl FromStr for UtmZone {
    type Err = GeodesyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let body = lower.strip_prefix("utm").unwrap_or(&lower);
        let bad = || GeodesyError::OutOfDomain(format!("cannot parse UTM zone '{s}'"));
        let (digits, hemi) = body.split_at(body.len().checked_sub(1).ok_or_else(bad)?);
        let hemisphere = match hemi {
            "n" => Hemisphere::North,
            "s" => Hemisphere::South,
            _ => return Err(bad()),
        };
        let number: u8 = digits.parse().map_err(|_| bad())?;
        UtmZone::new(number, hemisphere)
    }
}

/// Easting/northing in meters, ellipsoidal height passed through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmCoord {
    pub easting: f64,
    pub northing: f64,
    pub height: f64,
    pub zone: UtmZone,
}

impl UtmCoord {
    pub fn new(easting: f64, northing: f64, height: f64, zone: UtmZone) -> Self {
        Self {
            easting,
            northing,
            height,
            zone,
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.easting, self.northing, self.height]
    }

    pub fn distance(&self, other: &UtmCoord) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

/// Central meridian of a zone, in radians.
pub fn zone_central_meridian(zone: u8) -> f64 {
    (f64::from(zone) * 6.0 - 183.0).to_radians()
}

struct KruegerSeries {
    /// Rectifying radius times k0.
    scale: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    e: f64,
    e2: f64,
}

impl KruegerSeries {
    fn new(ell: &Ellipsoid) -> Self {
        let n = ell.n();
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let a_rect = ell.a() / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1_983_433.0 / 1_935_360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167_603.0 / 181_440.0 * n6,
            49561.0 / 161_280.0 * n4 - 179.0 / 168.0 * n5 + 6_601_661.0 / 7_257_600.0 * n6,
            34729.0 / 80640.0 * n5 - 3_418_889.0 / 1_995_840.0 * n6,
            212_378_941.0 / 319_334_400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604_800.0 * n6,
            n2 / 48.0 + n3 / 15.0 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1_118_711.0 / 3_870_720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161_280.0 * n4 - 11.0 / 504.0 * n5 - 830_251.0 / 7_257_600.0 * n6,
            4583.0 / 161_280.0 * n5 - 108_847.0 / 3_991_680.0 * n6,
            20_648_693.0 / 638_668_800.0 * n6,
        ];
        Self {
            scale: K0 * a_rect,
            alpha,
            beta,
            e: ell.e2().sqrt(),
            e2: ell.e2(),
        }
    }

    /// tan(conformal latitude) from tan(geodetic latitude).
    fn conformal_tan(&self, tau: f64) -> f64 {
        let sigma = (self.e * (self.e * tau / tau.hypot(1.0)).atanh()).sinh();
        tau * sigma.hypot(1.0) - sigma * tau.hypot(1.0)
    }

    /// Newton inversion of [`Self::conformal_tan`].
    fn geodetic_tan(&self, tau_c: f64) -> f64 {
        let mut tau = tau_c / (1.0 - self.e2);
        for _ in 0..10 {
            let tc = self.conformal_tan(tau);
            let dtau = (tau_c - tc) / tc.hypot(1.0) * (1.0 + (1.0 - self.e2) * tau * tau)
                / ((1.0 - self.e2) * tau.hypot(1.0));
            tau += dtau;
            if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }
}

fn check_latitude(lat: f64) -> Result<(), GeodesyError> {
    if lat.abs() >= MAX_ABS_LAT_DEG.to_radians() {
        return Err(GeodesyError::OutOfDomain(format!(
            "latitude {:.6} deg beyond +/-{MAX_ABS_LAT_DEG} deg",
            lat.to_degrees()
        )));
    }
    Ok(())
}

fn zone_offset(lon: f64, zone: &UtmZone) -> Result<f64, GeodesyError> {
    let mut dl = lon - zone.central_meridian();
    dl = (dl + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
    let deg = dl.to_degrees().abs();
    if deg > MAX_ZONE_OFFSET_DEG {
        return Err(GeodesyError::OutOfDomain(format!(
            "longitude {deg:.3} deg from the central meridian of {zone}"
        )));
    }
    if deg > WARN_ZONE_OFFSET_DEG {
        log::warn!("longitude {deg:.3} deg from the central meridian of {zone}; projection accuracy degrades");
    }
    Ok(dl)
}

pub fn geodetic_to_utm(
    g: &GeodeticCoord,
    zone: UtmZone,
    ell: &Ellipsoid,
) -> Result<UtmCoord, GeodesyError> {
    check_latitude(g.lat())?;
    let dl = zone_offset(g.lon(), &zone)?;
    let k = KruegerSeries::new(ell);

    let tau_c = k.conformal_tan(g.lat().tan());
    let (sin_dl, cos_dl) = dl.sin_cos();
    let xi_c = tau_c.atan2(cos_dl);
    let eta_c = (sin_dl / tau_c.hypot(cos_dl)).asinh();

    let mut xi = xi_c;
    let mut eta = eta_c;
    for (j, a) in k.alpha.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xi += a * (m * xi_c).sin() * (m * eta_c).cosh();
        eta += a * (m * xi_c).cos() * (m * eta_c).sinh();
    }

    let false_northing = match zone.hemisphere {
        Hemisphere::North => 0.0,
        Hemisphere::South => FALSE_NORTHING_SOUTH,
    };
    Ok(UtmCoord {
        easting: FALSE_EASTING + k.scale * eta,
        northing: false_northing + k.scale * xi,
        height: g.h(),
        zone,
    })
}

pub fn utm_to_geodetic(u: &UtmCoord, ell: &Ellipsoid) -> Result<GeodeticCoord, GeodesyError> {
    if !(u.easting.is_finite() && u.northing.is_finite() && u.height.is_finite()) {
        return Err(GeodesyError::NonFinite);
    }
    if !(u.easting > 0.0 && u.easting < 1_000_000.0) {
        return Err(GeodesyError::OutOfDomain(format!(
            "easting {:.3} outside (0, 1000000)",
            u.easting
        )));
    }
    let k = KruegerSeries::new(ell);
    let false_northing = match u.zone.hemisphere {
        Hemisphere::North => 0.0,
        Hemisphere::South => FALSE_NORTHING_SOUTH,
    };
    let xi = (u.northing - false_northing) / k.scale;
    let eta = (u.easting - FALSE_EASTING) / k.scale;

    let mut xi_c = xi;
    let mut eta_c = eta;
    for (j, b) in k.beta.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xi_c -= b * (m * xi).sin() * (m * eta).cosh();
        eta_c -= b * (m * xi).cos() * (m * eta).sinh();
    }

    let sinh_eta = eta_c.sinh();
    let (sin_xi, cos_xi) = xi_c.sin_cos();
    let tau_c = sin_xi / sinh_eta.hypot(cos_xi);
    let dl = sinh_eta.atan2(cos_xi);
    let lat = k.geodetic_tan(tau_c).atan();
    check_latitude(lat)?;
    GeodeticCoord::new(lat, u.zone.central_meridian() + dl, u.height)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const GRS80: Ellipsoid = Ellipsoid::GRS80;

    fn z32n() -> UtmZone {
        UtmZone::new(32, Hemisphere::North).unwrap()
    }

    #[test]
    fn central_meridian_easting() {
        let g = GeodeticCoord::from_degrees(48.78, 9.0, 250.0).unwrap();
        let u = geodetic_to_utm(&g, z32n(), &GRS80).unwrap();
        assert!((u.easting - 500_000.0).abs() < 1e-4);
        assert_eq!(u.height, 250.0);
    }

    #[test]
    fn equator_has_zero_northing() {
        let g = GeodeticCoord::from_degrees(0.0, 9.0, 0.0).unwrap();
        let u = geodetic_to_utm(&g, z32n(), &GRS80).unwrap();
        assert!(u.northing.abs() < 1e-4);
        assert!((u.easting - 500_000.0).abs() < 1e-4);
    }

    // Oracle values from PROJ (EPSG:4258 -> EPSG:25832 and the matching
    // southern-zone definition), frozen in tests/fixtures/oracle.py output.
    #[test]
    fn projection_fixtures() {
        let cases = [
            (48.78, 9.18, 513_223.539_353, 5_403_015.518_032),
            (48.78, 9.0, 500_000.0, 5_402_999.894_009),
            (60.0, 12.4, 689_588.464_203, 6_656_284.908_256),
        ];
        for (lat, lon, e, n) in cases {
            let g = GeodeticCoord::from_degrees(lat, lon, 0.0).unwrap();
            let u = geodetic_to_utm(&g, z32n(), &GRS80).unwrap();
            assert!((u.easting - e).abs() < 1e-3, "{lat} {lon}: {}", u.easting - e);
            assert!((u.northing - n).abs() < 1e-3, "{lat} {lon}: {}", u.northing - n);
        }
        let g = GeodeticCoord::from_degrees(-30.0, 5.6, 0.0).unwrap();
        let u = geodetic_to_utm(&g, UtmZone::new(32, Hemisphere::South).unwrap(), &GRS80).unwrap();
        assert!((u.easting - 171_980.928_319).abs() < 1e-3);
        assert!((u.northing - 6_676_344.775_423).abs() < 1e-3);
    }

    #[test]
    fn false_origin_inverts() {
        let u = UtmCoord::new(500_000.0, 0.0, 0.0, z32n());
        let g = utm_to_geodetic(&u, &GRS80).unwrap();
        assert!(g.lat().abs() < 1e-15);
        assert!((g.lon_deg() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn fixture_inverts_to_source() {
        let u = UtmCoord::new(513_223.539_353, 5_403_015.518_032, 300.0, z32n());
        let g = utm_to_geodetic(&u, &GRS80).unwrap();
        // 1 mm ~ 9e-9 deg of latitude.
        assert!((g.lat_deg() - 48.78).abs() < 1e-8);
        assert!((g.lon_deg() - 9.18).abs() < 1.5e-8);
        assert_eq!(g.h(), 300.0);
    }

    #[test]
    fn polar_latitudes_rejected() {
        let g = GeodeticCoord::from_degrees(85.0, 9.0, 0.0).unwrap();
        assert!(matches!(
            geodetic_to_utm(&g, z32n(), &GRS80),
            Err(GeodesyError::OutOfDomain(_))
        ));
        let far = GeodeticCoord::from_degrees(48.0, 30.0, 0.0).unwrap();
        assert!(matches!(
            geodetic_to_utm(&far, z32n(), &GRS80),
            Err(GeodesyError::OutOfDomain(_))
        ));
        assert!(utm_to_geodetic(&UtmCoord::new(-5.0, 0.0, 0.0, z32n()), &GRS80).is_err());
    }

    #[test]
    fn zone_parsing() {
        assert_eq!("utm32n".parse::<UtmZone>().unwrap(), z32n());
        assert_eq!("32N".parse::<UtmZone>().unwrap(), z32n());
        assert_eq!(
            "UTM33s".parse::<UtmZone>().unwrap(),
            UtmZone::new(33, Hemisphere::South).unwrap()
        );
        assert!("utm61n".parse::<UtmZone>().is_err());
        assert!("utm32x".parse::<UtmZone>().is_err());
        assert!("".parse::<UtmZone>().is_err());
        assert_eq!(z32n().to_string(), "utm32n");
    }

    proptest! {
        #[test]
        fn round_trip_in_zone(
            lat in -80.0..84.0f64,
            dlon in -3.5..3.5f64,
            h in -10_000.0..10_000.0f64,
        ) {
            let g = GeodeticCoord::from_degrees(lat, 9.0 + dlon, h).unwrap();
            let zone = UtmZone::new(32, if lat >= 0.0 { Hemisphere::North } else { Hemisphere::South }).unwrap();
            let u = geodetic_to_utm(&g, zone, &GRS80).unwrap();
            let back = utm_to_geodetic(&u, &GRS80).unwrap();
            let u2 = geodetic_to_utm(&back, zone, &GRS80).unwrap();
            prop_assert!(u.distance(&u2) < 1e-6);
            prop_assert!((back.lat() - g.lat()).abs() < 2e-13);
            prop_assert!((back.lon() - g.lon()).abs() < 2e-13);
        }
    }
}
