"""Beam divergence from FWHM spot widths along the propagation axis."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np
from scipy.stats import linregress

from core.errors import CalibrationFailure, ConfigurationError

logger = logging.getLogger(__name__)

ASTIGMATISM_FRACTION = 0.10
MIN_DISTANCES = 3
# Width slope in mm per cm expressed in radians.
MM_PER_CM_TO_RAD = 1e-3 / 1e-2


@dataclass(frozen=True)
class SpotMeasurement:
    distance_cm: float
    width_x_mm: float
    width_y_mm: float

    def __post_init__(self):
        if not self.width_x_mm > 0 or not self.width_y_mm > 0:
            raise ConfigurationError(
                f"spot widths must be > 0 at {self.distance_cm} cm, "
                f"got {self.width_x_mm} x {self.width_y_mm} mm"
            )


@dataclass(frozen=True)
class AxisFit:
    divergence_rad: float
    intercept_mm: float
    stderr_rad: float
    r_value: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class DivergenceFit:
    """Full-angle FWHM divergence per axis, with far-field fit flags."""

    x: AxisFit
    y: AxisFit
    astigmatic: bool
    converging: bool

    @property
    def div_x(self) -> float:
        return self.x.divergence_rad

    @property
    def div_y(self) -> float:
        return self.y.divergence_rad

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x.to_dict(),
            "y": self.y.to_dict(),
            "astigmatic": self.astigmatic,
            "converging": self.converging,
        }


def _fit_axis(distance_cm: np.ndarray, width_mm: np.ndarray) -> AxisFit:
    result = linregress(distance_cm, width_mm)
    r_value = float(result.rvalue) if np.isfinite(result.rvalue) else 1.0
    stderr = float(result.stderr) if np.isfinite(result.stderr) else 0.0
    return AxisFit(
        divergence_rad=float(result.slope) * MM_PER_CM_TO_RAD,
        intercept_mm=float(result.intercept),
        stderr_rad=stderr * MM_PER_CM_TO_RAD,
        r_value=r_value,
    )


def divergence_fit(spots: Sequence[SpotMeasurement]) -> DivergenceFit:
    """
    Straight-line fit of FWHM width against distance for each axis.

    Valid in the far field, where the FWHM grows linearly; the slope is
    the full-angle divergence.

    Raises:
        CalibrationFailure: Fewer than three distinct distances
    """
    distances = np.array([s.distance_cm for s in spots], dtype=float)
    if len(np.unique(distances)) < MIN_DISTANCES:
        raise CalibrationFailure(
            f"divergence fit needs {MIN_DISTANCES} distinct distances, got {len(np.unique(distances))}"
        )
    x = _fit_axis(distances, np.array([s.width_x_mm for s in spots]))
    y = _fit_axis(distances, np.array([s.width_y_mm for s in spots]))

    mean = (abs(x.divergence_rad) + abs(y.divergence_rad)) / 2.0
    astigmatic = abs(x.divergence_rad - y.divergence_rad) > ASTIGMATISM_FRACTION * mean
    converging = x.divergence_rad < 0 or y.divergence_rad < 0
    if converging:
        logger.warning("Beam converges on at least one axis; check the collimation")
    if astigmatic:
        logger.warning(
            f"Astigmatic beam: {x.divergence_rad:.3e} rad (x) vs {y.divergence_rad:.3e} rad (y)"
        )
    return DivergenceFit(x, y, bool(astigmatic), bool(converging))
