"""Physical constants and unit conversions shared across the package."""

import math

EARTH_RADIUS_KM = 6371.0
MU_EARTH = 398600.4418  # km^3 / s^2
SIDEREAL_DAY_S = 86164.0905
EARTH_ROTATION_RAD_PER_MIN = 2.0 * math.pi / (SIDEREAL_DAY_S / 60.0)

# decimal units: 1 TB = 8e6 megabits
MEGABITS_PER_TB = 8.0e6

DEFAULT_ELEVATION_DEG = 25.0
