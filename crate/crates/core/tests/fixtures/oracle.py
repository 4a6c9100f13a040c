"""Independent reference values frozen into the Rust test-suite.

Requires mpmath and pyproj. Not run by cargo; rerun by hand when a fixture
needs regenerating.
"""
from mpmath import mp, mpf, sin, cos, sqrt, radians
from pyproj import Transformer

mp.dps = 40
a = mpf(6378137)
f = 1 / mpf("298.257222101")
e2 = f * (2 - f)


def ecef(lat_deg, lon_deg, h):
    lat, lon, h = radians(mpf(lat_deg)), radians(mpf(lon_deg)), mpf(h)
    n = a / sqrt(1 - e2 * sin(lat) ** 2)
    return ((n + h) * cos(lat) * cos(lon), (n + h) * cos(lat) * sin(lon), (n * (1 - e2) + h) * sin(lat))


print("ecef(48.78, 9.18, 300):", [mp.nstr(v, 20) for v in ecef("48.78", "9.18", 300)])

north = Transformer.from_crs("EPSG:4258", "EPSG:25832", always_xy=True)
south = Transformer.from_crs("EPSG:4258", "+proj=utm +zone=32 +south +ellps=GRS80", always_xy=True)
for lon, lat in [(9.18, 48.78), (9.0, 48.78), (12.4, 60.0)]:
    print("utm32n", lat, lon, "%.6f %.6f" % north.transform(lon, lat))
print("utm32s", -30.0, 5.6, "%.6f %.6f" % south.transform(5.6, -30.0))
