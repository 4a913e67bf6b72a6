"""Telescope optics, pointing errors and downlink beacon accounting."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Tuple

from core.domain import Basis
from core.errors import ConfigurationError
from core.thermal import DriftTable, check_temperature

logger = logging.getLogger(__name__)

# Pre-telescope beam deflection (rad) measured against bench temperature;
# the measurement reference is 22 C.
DEFAULT_DEFLECTION_TABLE = DriftTable((-20.0, 22.0, 50.0), (-1.81e-3, 0.0, 2.13e-3))


@dataclass(frozen=True)
class OpticsConfig:
    """
    Transmit telescope and ground receiver optics.

    The quantum divergence is the far-field (post-telescope) value; the
    beacon divergence is given before the telescope.
    """

    magnification: float = 30.0
    aperture_clear_mm: float = 80.0
    fov_half_angle_deg: float = 0.25
    quantum_divergence_fwhm_rad: float = 12e-6
    beacon_divergence_fwhm_rad: float = 3e-3
    central_obstruction_loss_db: float = 0.0
    receiver_aperture_mm: float = 700.0
    optics_loss_db: float = 3.0
    # Extra rotation per basis picked up in the pointing optics (degrees).
    basis_rotation_deg: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.magnification > 1:
            raise ConfigurationError(f"magnification must be > 1, got {self.magnification}")
        if not self.quantum_divergence_fwhm_rad > 0 or not self.beacon_divergence_fwhm_rad > 0:
            raise ConfigurationError("divergences must be > 0")
        if not self.receiver_aperture_mm > 0:
            raise ConfigurationError("receiver_aperture_mm must be > 0")
        if self.optics_loss_db < 0 or self.central_obstruction_loss_db < 0:
            raise ConfigurationError("optical losses are given as non-negative dB")
        if len(self.basis_rotation_deg) != 2:
            raise ConfigurationError("basis_rotation_deg needs one value per basis (HV, DA)")

    @property
    def beacon_divergence_post_rad(self) -> float:
        return self.beacon_divergence_fwhm_rad / self.magnification

    @property
    def fixed_loss_db(self) -> float:
        return self.optics_loss_db + self.central_obstruction_loss_db

    def rotation_for(self, basis: Basis) -> float:
        return float(self.basis_rotation_deg[basis.value])

    def to_dict(self) -> Dict[str, Any]:
        values = dict(self.__dict__)
        values["basis_rotation_deg"] = {
            b.name: self.basis_rotation_deg[b.value] for b in (Basis.HV, Basis.DA)
        }
        return values

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OpticsConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown optics keys: {sorted(unknown)}")
        values = {k: v for k, v in data.items() if k != "basis_rotation_deg"}
        rotation = data.get("basis_rotation_deg", {})
        if not isinstance(rotation, Mapping):
            raise ConfigurationError("optics.basis_rotation_deg must map HV/DA to degrees")
        values["basis_rotation_deg"] = (
            float(rotation.get("HV", 0.0)),
            float(rotation.get("DA", 0.0)),
        )
        return cls(**values)


@dataclass(frozen=True)
class PointingState:
    """Residual pointing error of the fine-steering loop."""

    jitter_sigma_rad: float = 1e-6
    bias_rad: float = 0.0
    temperature_c: float = 22.0
    thermal_deflection: DriftTable = field(default=DEFAULT_DEFLECTION_TABLE)

    def __post_init__(self):
        if self.jitter_sigma_rad < 0:
            raise ConfigurationError(f"jitter_sigma_rad must be >= 0, got {self.jitter_sigma_rad}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "jitter_sigma_rad": self.jitter_sigma_rad,
            "bias_rad": self.bias_rad,
            "temperature_c": self.temperature_c,
            "thermal_deflection_rad": self.thermal_deflection.to_mapping(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PointingState":
        known = {"jitter_sigma_rad", "bias_rad", "temperature_c", "thermal_deflection_rad"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown pointing keys: {sorted(unknown)}")
        table = data.get("thermal_deflection_rad")
        return cls(
            jitter_sigma_rad=float(data.get("jitter_sigma_rad", 1e-6)),
            bias_rad=float(data.get("bias_rad", 0.0)),
            temperature_c=float(data.get("temperature_c", 22.0)),
            thermal_deflection=(
                DriftTable.from_mapping(table) if table is not None else DEFAULT_DEFLECTION_TABLE
            ),
        )


def thermal_deflection_pre_telescope(p: PointingState, temperature_c: float) -> float:
    """Signed beam deflection before the telescope (rad)."""
    check_temperature(temperature_c, "optical bench")
    return p.thermal_deflection(temperature_c)


def thermal_deflection_post_telescope(
    p: PointingState, o: OpticsConfig, temperature_c: float
) -> float:
    """Signed beam deflection leaving the telescope (rad)."""
    return thermal_deflection_pre_telescope(p, temperature_c) / o.magnification


def static_pointing_error(p: PointingState, o: OpticsConfig, temperature_c: float) -> float:
    """Deterministic part of the pointing error: bias plus thermal deflection."""
    return p.bias_rad + thermal_deflection_post_telescope(p, o, temperature_c)


@dataclass(frozen=True)
class BeaconBudget:
    duty: float
    rect_peak_power_w: float


@dataclass(frozen=True)
class BeaconConfig:
    """
    Pulsed downlink beacon used for timing.

    `detect_prob` is the chance one beacon pulse registers on the ground
    timing detector; `coarse_timing_error_s` is the error of the ground
    station's predicted beacon arrival, which must stay under half a
    beacon period.
    """

    rate_hz: float = 100e3
    pulse_width_s: float = 10e-9
    avg_power_w: float = 0.045
    detect_prob: float = 0.5
    sync_window_s: float = 10e-3
    coarse_timing_error_s: float = 1e-6

    def __post_init__(self):
        beacon_duty_cycle(self.pulse_width_s, self.rate_hz, self.avg_power_w)
        if not 0 < self.detect_prob <= 1:
            raise ConfigurationError(f"beacon detect_prob must be in (0, 1], got {self.detect_prob}")
        if not self.sync_window_s > 0:
            raise ConfigurationError("beacon sync_window_s must be > 0")
        if abs(self.coarse_timing_error_s) >= 0.5 / self.rate_hz:
            raise ConfigurationError(
                "coarse_timing_error_s must stay below half a beacon period"
            )

    @property
    def budget(self) -> "BeaconBudget":
        return beacon_duty_cycle(self.pulse_width_s, self.rate_hz, self.avg_power_w)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BeaconConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown beacon keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def beacon_duty_cycle(pulse_width_s: float, rate_hz: float, avg_power_w: float) -> BeaconBudget:
    """
    Duty cycle and rectangular-equivalent peak power of the pulsed beacon.

    The peak assumes rectangular pulses; a real pulse shape puts the
    measured peak above this value.
    """
    if pulse_width_s <= 0 or rate_hz <= 0:
        raise ConfigurationError("beacon pulse width and rate must be > 0")
    if avg_power_w < 0:
        raise ConfigurationError(f"beacon average power must be >= 0, got {avg_power_w}")
    duty = pulse_width_s * rate_hz
    if duty > 1:
        raise ConfigurationError(
            f"beacon duty cycle {duty} exceeds 1 ({pulse_width_s} s at {rate_hz} Hz)"
        )
    return BeaconBudget(duty=duty, rect_peak_power_w=avg_power_w / duty)
