"""
Per-diode calibration state of the quantum source and its thermal drift.

Rotation tables are measured on a reference fibre length and scale
linearly with the deployed fibre length.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Union

import numpy as np

from core.domain import POLARIZATIONS, Polarization
from core.errors import ConfigurationError
from core.thermal import REFERENCE_TEMPERATURE_C, DriftTable, check_temperature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiodeState:
    """Calibration of one laser diode."""

    drive_current_ma: float = 40.0
    nominal_current_ma: float = 40.0
    coupling_efficiency: float = 1.0
    mu_scale: DriftTable = field(default_factory=lambda: DriftTable.constant(1.0))
    pol_rotation_deg: DriftTable = field(default_factory=lambda: DriftTable.constant(0.0))

    def __post_init__(self):
        if not 0 < self.coupling_efficiency <= 1:
            raise ConfigurationError(
                f"coupling_efficiency must be in (0, 1], got {self.coupling_efficiency}"
            )
        if self.drive_current_ma <= 0 or self.nominal_current_ma <= 0:
            raise ConfigurationError("diode currents must be positive")


@dataclass(frozen=True)
class DiodeCalibration:
    """Calibration of the four diodes, evaluated at `temperature_c`."""

    diodes: Dict[Polarization, DiodeState]
    temperature_c: float = REFERENCE_TEMPERATURE_C
    table_fibre_length_m: float = 1.0
    fibre_length_m: float = 1.0

    def __post_init__(self):
        missing = [p.name for p in POLARIZATIONS if p not in self.diodes]
        if missing:
            raise ConfigurationError(f"calibration missing diodes: {missing}")
        for p, state in self.diodes.items():
            ref = state.mu_scale(REFERENCE_TEMPERATURE_C)
            if abs(ref - 1.0) > 1e-9:
                raise ConfigurationError(
                    f"diode {p.name} mu_scale at {REFERENCE_TEMPERATURE_C} C is {ref}, expected 1"
                )
        if self.table_fibre_length_m <= 0 or self.fibre_length_m < 0:
            raise ConfigurationError("fibre lengths must be positive")

    @classmethod
    def ideal(cls) -> "DiodeCalibration":
        return cls({p: DiodeState() for p in POLARIZATIONS})

    def at(self, temperature_c: float) -> "DiodeCalibration":
        return replace(self, temperature_c=temperature_c)

    def mu_scale(self, p: Polarization) -> float:
        return self.diodes[p].mu_scale(self.temperature_c)

    def pol_rotation(self, p: Polarization) -> float:
        """Emission rotation of diode p at the current temperature (degrees)."""
        ratio = self.fibre_length_m / self.table_fibre_length_m
        return self.diodes[p].pol_rotation_deg(self.temperature_c) * ratio

    def mu_factor(self, p: Polarization) -> float:
        """Multiplier applied to the class mean photon number for diode p."""
        state = self.diodes[p]
        current = state.drive_current_ma / state.nominal_current_ma
        return state.coupling_efficiency * self.mu_scale(p) * current

    def mu_factors(self) -> np.ndarray:
        return np.array([self.mu_factor(p) for p in POLARIZATIONS])

    def rotations(self) -> np.ndarray:
        return np.array([self.pol_rotation(p) for p in POLARIZATIONS])

    def currents(self) -> np.ndarray:
        return np.array([self.diodes[p].drive_current_ma for p in POLARIZATIONS])

    def with_currents(self, currents_ma: Sequence[float]) -> "DiodeCalibration":
        diodes = {
            p: replace(self.diodes[p], drive_current_ma=float(c))
            for p, c in zip(POLARIZATIONS, currents_ma)
        }
        return replace(self, diodes=diodes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "temperature_c": self.temperature_c,
            "table_fibre_length_m": self.table_fibre_length_m,
            "fibre_length_m": self.fibre_length_m,
            "diodes": {
                p.name: {
                    "drive_current_ma": s.drive_current_ma,
                    "nominal_current_ma": s.nominal_current_ma,
                    "coupling_efficiency": s.coupling_efficiency,
                    "mu_scale": s.mu_scale.to_mapping(),
                    "pol_rotation_deg": s.pol_rotation_deg.to_mapping(),
                }
                for p, s in self.diodes.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiodeCalibration":
        raw = data.get("diodes")
        if not isinstance(raw, Mapping):
            raise ConfigurationError("calibration table needs a 'diodes' section")
        diodes = {}
        for p in POLARIZATIONS:
            section = raw.get(p.name)
            if section is None:
                raise ConfigurationError(f"calibration table missing diodes.{p.name}")
            diodes[p] = DiodeState(
                drive_current_ma=float(section.get("drive_current_ma", 40.0)),
                nominal_current_ma=float(section.get("nominal_current_ma", 40.0)),
                coupling_efficiency=float(section.get("coupling_efficiency", 1.0)),
                mu_scale=DriftTable.from_mapping(section.get("mu_scale", {"21": 1.0})),
                pol_rotation_deg=DriftTable.from_mapping(
                    section.get("pol_rotation_deg", {"21": 0.0})
                ),
            )
        return cls(
            diodes=diodes,
            temperature_c=float(data.get("temperature_c", REFERENCE_TEMPERATURE_C)),
            table_fibre_length_m=float(data.get("table_fibre_length_m", 1.0)),
            fibre_length_m=float(data.get("fibre_length_m", 1.0)),
        )


def load_calibration(path: Union[str, Path]) -> DiodeCalibration:
    """Load a calibration table file."""
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from e
    cal = DiodeCalibration.from_dict(data)
    logger.info(f"Loaded diode calibration from {path}")
    return cal


def apply_thermal_step(
    cal: DiodeCalibration, from_t: float, to_t: float
) -> DiodeCalibration:
    """
    Move a calibration from one temperature to another.

    The input is left untouched; the returned calibration evaluates
    mu_scale and pol_rotation at `to_t`.
    """
    check_temperature(from_t)
    check_temperature(to_t)
    if cal.temperature_c != from_t:
        logger.debug(
            f"Calibration held at {cal.temperature_c} C, stepping from {from_t} C"
        )
    return cal.at(to_t)


def retune_currents(cal: DiodeCalibration, temperature_c: float) -> DiodeCalibration:
    """
    Adjust drive currents from temperature telemetry so every diode emits
    its configured mean photon number again.
    """
    check_temperature(temperature_c)
    warm = cal.at(temperature_c)
    currents = []
    for p in POLARIZATIONS:
        state = warm.diodes[p]
        loss = state.coupling_efficiency * warm.mu_scale(p)
        currents.append(state.nominal_current_ma / loss)
    logger.info(
        f"Retuned currents at {temperature_c} C: "
        + ", ".join(f"{p.name}={c:.2f} mA" for p, c in zip(POLARIZATIONS, currents))
    )
    return warm.with_currents(currents)
