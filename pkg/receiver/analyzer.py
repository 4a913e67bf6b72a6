"""
Polarization analysis at the ground station.

Two QWPs linearise the incoming polarization and a HWP rotates it by
twice its angle; a 50/50 non-polarizing splitter then feeds an HV and a
DA polarizing splitter. Polarization is carried as a linear angle.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np

from core.angles import wrap_degrees, wrap_symmetric
from core.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WaveplateSettings:
    """Waveplate angles in degrees, reduced modulo 180."""

    qwp1_deg: float = 0.0
    qwp2_deg: float = 0.0
    hwp_deg: float = 0.0

    def __post_init__(self):
        for name in ("qwp1_deg", "qwp2_deg", "hwp_deg"):
            object.__setattr__(self, name, wrap_degrees(float(getattr(self, name))))

    @property
    def rotation_deg(self) -> float:
        """Rotation applied to linear polarization by the HWP."""
        return 2.0 * self.hwp_deg


@dataclass(frozen=True)
class AnalyzerNetwork:
    """
    Four-port readout.

    Attributes:
        hv_fraction: Share of light the non-polarizing splitter sends to the HV arm
        port_efficiencies: Transmission to each of the H, V, D, A detectors
        arm_rotation_deg: Per-arm frame offset (HV, DA) from the arm waveplates
    """

    hv_fraction: float = 0.5
    port_efficiencies: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    arm_rotation_deg: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.hv_fraction <= 1:
            raise ConfigurationError(f"hv_fraction must be in [0, 1], got {self.hv_fraction}")
        eff = np.asarray(self.port_efficiencies, dtype=float)
        if eff.shape != (4,) or np.any(eff < 0) or np.any(eff > 1):
            raise ConfigurationError(
                f"port_efficiencies must be four values in [0, 1], got {self.port_efficiencies}"
            )
        if len(self.arm_rotation_deg) != 2:
            raise ConfigurationError("arm_rotation_deg needs (HV, DA) values")


def port_distribution(
    input_angle_deg: Union[float, np.ndarray],
    wp: WaveplateSettings = WaveplateSettings(),
    net: AnalyzerNetwork = AnalyzerNetwork(),
) -> np.ndarray:
    """
    Probability of each port (H, V, D, A) for a photon at a linear angle.

    Port efficiencies are not applied here, so every row sums to 1.

    Args:
        input_angle_deg: Linear polarization angle, scalar or array
        wp: Waveplate settings
        net: Analyzer network

    Returns:
        Array of shape (4,) for scalar input, (n, 4) otherwise
    """
    angle = np.asarray(input_angle_deg, dtype=float) + wp.rotation_deg
    hv = np.radians(angle - net.arm_rotation_deg[0])
    da = np.radians(angle - 45.0 - net.arm_rotation_deg[1])
    s = net.hv_fraction
    probs = np.stack(
        [
            s * np.cos(hv) ** 2,
            s * np.sin(hv) ** 2,
            (1.0 - s) * np.cos(da) ** 2,
            (1.0 - s) * np.sin(da) ** 2,
        ],
        axis=-1,
    )
    return probs


def apply_compensation(measured_rotation_deg: float) -> WaveplateSettings:
    """
    Waveplate settings that undo a measured polarization rotation.

    The HWP is set to minus half the rotation; QWPs stay at their
    linearising angles.
    """
    rotation = wrap_symmetric(measured_rotation_deg)
    settings = WaveplateSettings(qwp1_deg=0.0, qwp2_deg=0.0, hwp_deg=-rotation / 2.0)
    logger.debug(f"Compensating {rotation} deg rotation with HWP at {settings.hwp_deg} deg")
    return settings


def compensate_arms(
    net: AnalyzerNetwork, hv_rotation_deg: float, da_rotation_deg: float
) -> AnalyzerNetwork:
    """Lock each readout arm onto a measured per-basis rotation."""
    return replace(
        net,
        arm_rotation_deg=(wrap_symmetric(hv_rotation_deg), wrap_symmetric(da_rotation_deg)),
    )
