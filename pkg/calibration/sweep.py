"""
Half-wave-plate sweep fitting for relative polarization tests.

Counts behind a polarizer follow A * cos^2(2 (theta - phi)) + B in the HWP
angle theta. Expanding gives C + a cos(4 theta) + b sin(4 theta), which is
fitted by linear least squares and converted back to phase, amplitude
and visibility.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from core.angles import wrap_degrees, wrap_symmetric
from core.domain import Polarization
from core.errors import ConfigurationError
from core.rng import RandomBitSource
from receiver.analyzer import AnalyzerNetwork, port_distribution

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
MIN_SPAN_DEG = 90.0
LOW_VISIBILITY = 0.2


@dataclass(frozen=True)
class SweepSeries:
    """Counts per polarization at each HWP angle."""

    hwp_angles: np.ndarray
    counts: Mapping[Polarization, np.ndarray]

    def __post_init__(self):
        angles = np.asarray(self.hwp_angles, dtype=float)
        if np.any(np.diff(angles) <= 0):
            raise ConfigurationError("HWP angles must be strictly increasing")
        if len(angles) and angles[-1] - angles[0] >= 180.0:
            raise ConfigurationError("HWP angles must lie within one 180 degree period")
        for pol, values in self.counts.items():
            if len(values) != len(angles):
                raise ConfigurationError(
                    f"{pol.name} has {len(values)} counts for {len(angles)} angles"
                )
        object.__setattr__(self, "hwp_angles", angles)
        object.__setattr__(
            self, "counts", {p: np.asarray(v, dtype=float) for p, v in self.counts.items()}
        )


@dataclass(frozen=True)
class ChannelFit:
    phase_deg: float
    amplitude: float
    offset: float
    visibility: float
    residual_rms: float

    @property
    def low_visibility(self) -> bool:
        return self.visibility < LOW_VISIBILITY

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phase_hwp_deg": self.phase_deg,
            "amplitude": self.amplitude,
            "offset": self.offset,
            "visibility": self.visibility,
            "residual_rms": self.residual_rms,
            "low_visibility": self.low_visibility,
        }


@dataclass(frozen=True)
class SweepFit:
    channels: Dict[Polarization, ChannelFit]
    # Keyed "D-H": polarization-space separation 2 * (phi_D - phi_H), in (-90, 90].
    separations_deg: Dict[str, float]

    def hwp_separation(self, a: Polarization, b: Polarization) -> float:
        """HWP-angle separation phi_b - phi_a, wrapped into (-45, 45]."""
        return wrap_symmetric(self.channels[b].phase_deg - self.channels[a].phase_deg, 90.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "channels": {p.name: f.to_dict() for p, f in self.channels.items()},
            "separations_deg": dict(self.separations_deg),
        }


def fit_channel(hwp_angles: np.ndarray, counts: np.ndarray) -> ChannelFit:
    theta = np.radians(4.0 * np.asarray(hwp_angles, dtype=float))
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    (c, a, b), *_ = np.linalg.lstsq(design, counts, rcond=None)
    half_amplitude = float(np.hypot(a, b))
    amplitude = 2.0 * half_amplitude
    phase = wrap_degrees(np.degrees(np.arctan2(b, a)) / 4.0, 90.0)
    offset = float(c) - half_amplitude
    denominator = amplitude + 2.0 * offset
    visibility = amplitude / denominator if denominator > 0 else 0.0
    residual = counts - design @ np.array([c, a, b])
    return ChannelFit(
        phase_deg=float(phase),
        amplitude=amplitude,
        offset=offset,
        visibility=float(visibility),
        residual_rms=float(np.sqrt(np.mean(residual**2))),
    )


def hwp_sweep_fit(s: SweepSeries) -> SweepFit:
    """
    Fit every polarization channel of a sweep.

    Raises:
        ConfigurationError: Fewer than 8 angles or a span under 90 degrees
    """
    if len(s.hwp_angles) < MIN_SAMPLES:
        raise ConfigurationError(f"need at least {MIN_SAMPLES} HWP angles, got {len(s.hwp_angles)}")
    if s.hwp_angles[-1] - s.hwp_angles[0] < MIN_SPAN_DEG:
        raise ConfigurationError(f"HWP sweep must span at least {MIN_SPAN_DEG} degrees")

    channels = {pol: fit_channel(s.hwp_angles, counts) for pol, counts in s.counts.items()}
    for pol, fit in channels.items():
        if fit.low_visibility:
            logger.warning(f"{pol.name} channel visibility {fit.visibility:.3f} is below {LOW_VISIBILITY}")

    separations = {}
    for a, b in combinations(channels, 2):
        separations[f"{b.name}-{a.name}"] = float(
            wrap_symmetric(2.0 * (channels[b].phase_deg - channels[a].phase_deg), 180.0)
        )
    return SweepFit(channels, separations)


def simulate_relative_sweep(
    angles_deg: Mapping[Polarization, float],
    hwp_angles: Sequence[float],
    peak_counts: float,
    background: float,
    rng: RandomBitSource,
) -> SweepSeries:
    """
    Single-PBS relative polarization test.

    A motorised HWP sits in front of one polarizing splitter and the SPCM
    watches the reflected (V) arm; each test-pattern slot's counts are
    Poisson around its Malus-law expectation plus background.

    Args:
        angles_deg: Physical linear angle of each test-pattern polarization
        hwp_angles: HWP angles to step through (degrees)
        peak_counts: Expected counts at full transmission
        background: Expected background counts per point
        rng: Random source for the Poisson noise
    """
    hwp = np.asarray(hwp_angles, dtype=float)
    reflecting = AnalyzerNetwork(hv_fraction=1.0)
    counts = {}
    for pol, angle in angles_deg.items():
        reflected = port_distribution(angle + 2.0 * hwp, net=reflecting)[:, 1]
        counts[pol] = rng.poisson(peak_counts * reflected + background).astype(float)
    return SweepSeries(hwp, counts)
