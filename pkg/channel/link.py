"""
Free-space link transmittance: Gaussian-beam aperture capture, pointing
error, atmospheric extinction, fixed optics loss and cloud blockage.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import chi2, ncx2

from channel.geometry import PassGeometry, elevation_profile, light_time_s
from channel.pointing import OpticsConfig, PointingState, static_pointing_error
from core.errors import ConfigurationError
from core.rng import RandomBitSource

logger = logging.getLogger(__name__)

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class AtmosphereConfig:
    """Beer-Lambert extinction scaled by airmass, plus the site horizon mask."""

    zenith_loss_db: float = 1.0
    horizon_mask_deg: float = 0.0

    def __post_init__(self):
        if self.zenith_loss_db < 0:
            raise ConfigurationError(f"zenith_loss_db must be >= 0, got {self.zenith_loss_db}")
        if not 0 <= self.horizon_mask_deg < 90:
            raise ConfigurationError(
                f"horizon_mask_deg must be in [0, 90), got {self.horizon_mask_deg}"
            )

    def transmittance(self, elevation_deg):
        """Atmospheric transmittance at an elevation above the mask."""
        airmass = 1.0 / np.sin(np.radians(elevation_deg))
        return 10.0 ** (-self.zenith_loss_db * airmass / 10.0)


@dataclass(frozen=True)
class CloudField:
    """Ground-truth cloud blockage over the pass as sorted, disjoint intervals."""

    blocked_intervals: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        previous_end = -math.inf
        for start, end in self.blocked_intervals:
            if not start < end:
                raise ConfigurationError(f"cloud interval ({start}, {end}) is empty")
            if start < previous_end:
                raise ConfigurationError(
                    f"cloud intervals must be sorted and non-overlapping near {start}"
                )
            previous_end = end
        object.__setattr__(self, "_starts", [s for s, _ in self.blocked_intervals])

    @classmethod
    def clear(cls) -> "CloudField":
        return cls(())

    @classmethod
    def from_list(cls, intervals: Sequence[Sequence[float]]) -> "CloudField":
        try:
            return cls(tuple((float(s), float(e)) for s, e in intervals))
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"bad cloud intervals {intervals!r}: {e}") from e

    @classmethod
    def random(
        cls,
        duration_s: float,
        rng: RandomBitSource,
        mean_clear_s: float = 60.0,
        mean_blocked_s: float = 30.0,
    ) -> "CloudField":
        """Alternating exponential clear/blocked spells over [0, duration_s]."""
        if mean_clear_s <= 0 or mean_blocked_s <= 0:
            raise ConfigurationError("mean cloud spell lengths must be > 0")
        blocked = bool(rng.uniform() < mean_blocked_s / (mean_clear_s + mean_blocked_s))
        t = 0.0
        intervals: List[Tuple[float, float]] = []
        while t < duration_s:
            mean = mean_blocked_s if blocked else mean_clear_s
            length = float(rng.generator.exponential(mean))
            end = min(duration_s, t + length)
            if blocked and end > t:
                intervals.append((t, end))
            t = end
            blocked = not blocked
        return cls(tuple(intervals))

    def is_blocked(self, t: float) -> bool:
        i = bisect.bisect_right(self._starts, t) - 1
        return i >= 0 and t < self.blocked_intervals[i][1]

    def blocked_mask(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if not self.blocked_intervals:
            return np.zeros(times.shape, dtype=bool)
        starts = np.array(self._starts)
        ends = np.array([e for _, e in self.blocked_intervals])
        i = np.searchsorted(starts, times, side="right") - 1
        valid = i >= 0
        return valid & (times < ends[np.maximum(i, 0)])

    def is_clear_over(self, start: float, end: float) -> bool:
        """True when no blocked interval intersects [start, end)."""
        if end <= start:
            return not self.is_blocked(start)
        for s, e in self.blocked_intervals:
            if s < end and e > start:
                return False
        return True

    def clear_seconds(self, start: float, end: float) -> float:
        """Clear-sky seconds within [start, end)."""
        blocked = sum(
            max(0.0, min(e, end) - max(s, start)) for s, e in self.blocked_intervals
        )
        return max(0.0, end - start - blocked)

    def to_list(self) -> List[List[float]]:
        return [[s, e] for s, e in self.blocked_intervals]


def beam_capture_fraction(
    footprint_fwhm_m: Union[float, np.ndarray],
    aperture_radius_m: float,
    offset_m: Union[float, np.ndarray],
) -> Union[float, np.ndarray]:
    """
    Fraction of a circular Gaussian beam collected by a circular aperture.

    The intensity profile integrated over a disc displaced by `offset_m`
    from the beam centre is the CDF of a non-central chi-square with two
    degrees of freedom.
    """
    sigma = np.asarray(footprint_fwhm_m, dtype=float) / FWHM_PER_SIGMA
    x = (aperture_radius_m / sigma) ** 2
    nc = (np.asarray(offset_m, dtype=float) / sigma) ** 2
    centred = chi2.cdf(x, 2)
    shifted = ncx2.cdf(x, 2, np.maximum(nc, 1e-300))
    fraction = np.clip(np.where(nc > 0, shifted, centred), 0.0, 1.0)
    return float(fraction) if np.ndim(fraction) == 0 else fraction


@dataclass(frozen=True)
class LinkState:
    """Deterministic channel state at one instant (jitter excluded)."""

    t: float
    elevation_deg: float
    slant_range_km: float
    pointing_error_rad: float
    eta_geometric: float
    eta_atmosphere: float
    eta_optics: float
    blocked: bool

    @property
    def eta(self) -> float:
        if self.blocked:
            return 0.0
        return self.eta_geometric * self.eta_atmosphere * self.eta_optics

    @property
    def light_time_s(self) -> float:
        return light_time_s(self.slant_range_km)

    def to_dict(self) -> Dict[str, Any]:
        values = dict(self.__dict__)
        values["eta"] = self.eta
        return values


def link_state(
    geom: PassGeometry,
    optics: OpticsConfig,
    pointing: PointingState,
    atmosphere: AtmosphereConfig,
    clouds: CloudField,
    t: float,
) -> LinkState:
    """Channel state at pass time t with jitter switched off."""
    elevation, slant = elevation_profile(geom, t)
    error = static_pointing_error(pointing, optics, pointing.temperature_c)
    below_mask = elevation <= atmosphere.horizon_mask_deg
    footprint = optics.quantum_divergence_fwhm_rad * slant * 1e3
    aperture_radius = optics.receiver_aperture_mm * 1e-3 / 2.0
    geometric = beam_capture_fraction(footprint, aperture_radius, abs(error) * slant * 1e3)
    return LinkState(
        t=float(t),
        elevation_deg=elevation,
        slant_range_km=slant,
        pointing_error_rad=error,
        eta_geometric=geometric,
        eta_atmosphere=0.0 if below_mask else float(atmosphere.transmittance(elevation)),
        eta_optics=10.0 ** (-optics.fixed_loss_db / 10.0),
        blocked=bool(below_mask or clouds.is_blocked(t)),
    )


def transmittance(
    geom: PassGeometry,
    optics: OpticsConfig,
    pointing: PointingState,
    atmosphere: AtmosphereConfig,
    clouds: CloudField,
    t: float,
    rng: RandomBitSource,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """
    Channel transmittance at pass time t.

    With `size` set, returns one value per pulse, each with its own
    2-D Gaussian pointing jitter sample added to bias and thermal
    deflection.
    """
    state = link_state(geom, optics, pointing, atmosphere, clouds, t)
    n = 1 if size is None else int(size)
    if state.blocked:
        eta = np.zeros(n)
    else:
        sigma = pointing.jitter_sigma_rad
        if sigma > 0:
            dx = state.pointing_error_rad + rng.normal(sigma, n)
            dy = rng.normal(sigma, n)
            error = np.hypot(dx, dy)
        else:
            error = np.full(n, abs(state.pointing_error_rad))
        range_m = state.slant_range_km * 1e3
        geometric = beam_capture_fraction(
            optics.quantum_divergence_fwhm_rad * range_m,
            optics.receiver_aperture_mm * 1e-3 / 2.0,
            error * range_m,
        )
        eta = np.clip(
            np.asarray(geometric) * state.eta_atmosphere * state.eta_optics, 0.0, 1.0
        )
    return float(eta[0]) if size is None else eta


def transmittance_series(
    geom: PassGeometry,
    optics: OpticsConfig,
    pointing: PointingState,
    atmosphere: AtmosphereConfig,
    clouds: CloudField,
    rng: RandomBitSource,
    times: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """Columns t_s, elevation_deg, slant_range_km, eta over the pass time grid."""
    grid = geom.time_grid() if times is None else np.asarray(times, dtype=float)
    elevation, slant = elevation_profile(geom, grid)
    eta = np.array(
        [transmittance(geom, optics, pointing, atmosphere, clouds, t, rng) for t in grid]
    )
    return {
        "t_s": grid,
        "elevation_deg": np.atleast_1d(elevation),
        "slant_range_km": np.atleast_1d(slant),
        "eta": eta,
    }
