"""
Overhead-pass geometry for a circular LEO orbit over a spherical Earth.

The pass is parameterised by its maximum elevation: the orbit plane sits
at a fixed minimum Earth-central angle from the site and the satellite
moves along it at the circular-orbit angular rate. Time is measured from
acquisition of signal (elevation 0) so the pass window is
[0, 2 * t_max].
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from core.errors import ConfigurationError, OutOfPassError

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
EARTH_GM_KM3_S2 = 398600.4418
SPEED_OF_LIGHT_KM_S = 299792.458

# Window edges are accepted within this many seconds.
WINDOW_TOLERANCE_S = 1e-9


@dataclass(frozen=True)
class PassGeometry:
    """Orbit and site of one pass."""

    orbit_altitude_km: float = 500.0
    site_latitude_deg: float = 55.86
    site_longitude_deg: float = -4.25
    pass_max_elevation_deg: float = 90.0
    time_step_s: float = 1.0

    def __post_init__(self):
        if not self.orbit_altitude_km > 0:
            raise ConfigurationError(
                f"orbit_altitude_km must be > 0, got {self.orbit_altitude_km}"
            )
        if not 0 < self.pass_max_elevation_deg <= 90:
            raise ConfigurationError(
                f"pass_max_elevation_deg must be in (0, 90], got {self.pass_max_elevation_deg}"
            )
        if not -90 <= self.site_latitude_deg <= 90:
            raise ConfigurationError(f"site_latitude_deg out of range: {self.site_latitude_deg}")
        if not self.time_step_s > 0:
            raise ConfigurationError(f"time_step_s must be > 0, got {self.time_step_s}")

    @property
    def orbit_radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.orbit_altitude_km

    @property
    def angular_rate_rad_s(self) -> float:
        return math.sqrt(EARTH_GM_KM3_S2 / self.orbit_radius_km**3)

    @property
    def min_central_angle_rad(self) -> float:
        return central_angle(self.pass_max_elevation_deg, self.orbit_altitude_km)

    def time_grid(self) -> np.ndarray:
        """Sample times across the pass window, both edges included."""
        start, end, _ = pass_window(self)
        steps = int(math.floor((end - start) / self.time_step_s))
        grid = start + self.time_step_s * np.arange(steps + 1)
        if grid[-1] < end:
            grid = np.append(grid, end)
        return grid

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PassGeometry":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown geometry keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def central_angle(elevation_deg: float, altitude_km: float) -> float:
    """Earth-central angle between site and sub-satellite point at an elevation."""
    e = math.radians(elevation_deg)
    ratio = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + altitude_km)
    return math.acos(ratio * math.cos(e)) - e


def slant_range_km(elevation_deg: float, altitude_km: float) -> float:
    """Site-to-satellite distance at a given elevation."""
    e = math.radians(elevation_deg)
    r = EARTH_RADIUS_KM + altitude_km
    return math.sqrt(r**2 - (EARTH_RADIUS_KM * math.cos(e)) ** 2) - EARTH_RADIUS_KM * math.sin(e)


def pass_window(geom: PassGeometry) -> Tuple[float, float, float]:
    """
    Return (start_s, end_s, t_max_s) of the pass.

    The window is the interval of non-negative elevation.
    """
    ratio = EARTH_RADIUS_KM / geom.orbit_radius_km
    half_arc = math.acos(min(1.0, ratio / math.cos(geom.min_central_angle_rad)))
    t_max = half_arc / geom.angular_rate_rad_s
    return 0.0, 2.0 * t_max, t_max


def _profile(geom: PassGeometry, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, _, t_max = pass_window(geom)
    r = geom.orbit_radius_km
    along = geom.angular_rate_rad_s * (t - t_max)
    cos_gamma = math.cos(geom.min_central_angle_rad) * np.cos(along)
    cos_gamma = np.clip(cos_gamma, -1.0, 1.0)
    sin_gamma = np.sqrt(1.0 - cos_gamma**2)
    elevation = np.degrees(np.arctan2(cos_gamma - EARTH_RADIUS_KM / r, sin_gamma))
    distance = np.sqrt(EARTH_RADIUS_KM**2 + r**2 - 2.0 * EARTH_RADIUS_KM * r * cos_gamma)
    return np.clip(elevation, 0.0, 90.0), distance


def elevation_profile(
    geom: PassGeometry, t: Union[float, np.ndarray]
) -> Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]:
    """
    Elevation (degrees) and slant range (km) at pass time t.

    Args:
        geom: Pass geometry
        t: Seconds since acquisition of signal (scalar or array)

    Returns:
        (elevation_deg, slant_range_km), scalars for scalar input

    Raises:
        OutOfPassError: t outside the pass window
    """
    start, end, _ = pass_window(geom)
    times = np.asarray(t, dtype=float)
    if np.any(times < start - WINDOW_TOLERANCE_S) or np.any(times > end + WINDOW_TOLERANCE_S):
        raise OutOfPassError(f"time {t} s outside pass window [{start}, {end:.3f}] s")
    elevation, distance = _profile(geom, times)
    if times.ndim == 0:
        return float(elevation), float(distance)
    return elevation, distance


def light_time_s(slant_km: float) -> float:
    """One-way propagation delay over a slant range."""
    return slant_km / SPEED_OF_LIGHT_KM_S


def time_above(geom: PassGeometry, elevation_deg: float) -> Tuple[float, float]:
    """Interval of the pass with elevation at or above `elevation_deg`."""
    start, end, t_max = pass_window(geom)
    if elevation_deg <= 0:
        return start, end
    if elevation_deg > geom.pass_max_elevation_deg:
        return t_max, t_max
    gamma = central_angle(elevation_deg, geom.orbit_altitude_km)
    arc = math.acos(
        min(1.0, math.cos(gamma) / math.cos(geom.min_central_angle_rad))
    )
    half = arc / geom.angular_rate_rad_s
    return t_max - half, t_max + half
