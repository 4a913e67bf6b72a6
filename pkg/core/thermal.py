"""
Temperature qualification bounds and piecewise-linear drift tables.

Drift curves are tables over temperature knots; values outside the
outermost knots are held at the end values.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from core.errors import ConfigurationError, TemperatureFault

logger = logging.getLogger(__name__)

SURVIVAL_RANGE_C = (-30.0, 80.0)
OPERATING_RANGE_C = (-20.0, 50.0)
REFERENCE_TEMPERATURE_C = 21.0


def check_temperature(temperature_c: float, what: str = "source") -> None:
    """Refuse temperatures outside survival; warn outside the operating range."""
    low, high = SURVIVAL_RANGE_C
    if not low <= temperature_c <= high:
        raise TemperatureFault(
            f"{what} temperature {temperature_c} C outside survival range [{low}, {high}]"
        )
    op_low, op_high = OPERATING_RANGE_C
    if not op_low <= temperature_c <= op_high:
        logger.warning(
            f"{what} temperature {temperature_c} C outside operating range "
            f"[{op_low}, {op_high}]"
        )


@dataclass(frozen=True)
class DriftTable:
    """Piecewise-linear function of temperature."""

    knots_c: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if not self.knots_c or len(self.knots_c) != len(self.values):
            raise ConfigurationError(
                f"drift table needs matching knots and values: {self.knots_c} / {self.values}"
            )
        if any(b <= a for a, b in zip(self.knots_c, self.knots_c[1:])):
            raise ConfigurationError(f"drift table knots not increasing: {self.knots_c}")

    def __call__(self, temperature_c: float) -> float:
        return float(np.interp(temperature_c, self.knots_c, self.values))

    @classmethod
    def constant(cls, value: float) -> "DriftTable":
        return cls((REFERENCE_TEMPERATURE_C,), (float(value),))

    @classmethod
    def from_mapping(cls, table: Mapping[str, float]) -> "DriftTable":
        """Build from {"-20": 2.0, "21": 1.0, ...}."""
        try:
            pairs = sorted((float(k), float(v)) for k, v in table.items())
        except (AttributeError, TypeError, ValueError) as e:
            raise ConfigurationError(f"bad drift table {table!r}: {e}") from e
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def to_mapping(self) -> Dict[str, float]:
        return {repr(k): v for k, v in zip(self.knots_c, self.values)}
