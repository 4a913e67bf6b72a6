"""Angle utilities for linear polarization and waveplate settings."""

from typing import Optional

import numpy as np

from core.domain import Polarization


def wrap_degrees(degrees, period: float = 180.0):
    """
    Reduce an angle (or array of angles) into [0, period).

    Args:
        degrees: Angle in degrees
        period: Wrapping period (180 for linear polarization)

    Returns:
        Angle in [0, period)
    """
    wrapped = np.mod(degrees, period)
    # np.mod can return `period` itself for tiny negative inputs
    wrapped = np.where(wrapped >= period, 0.0, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def wrap_symmetric(degrees, period: float = 180.0):
    """
    Reduce an angle into (-period/2, period/2].

    Args:
        degrees: Angle in degrees
        period: Wrapping period

    Returns:
        Angle in (-period/2, period/2]
    """
    half = period / 2.0
    wrapped = half - np.mod(half - np.asarray(degrees, dtype=float), period)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def nearest_polarization(degrees: Optional[float]) -> Optional[Polarization]:
    """
    Map a linear polarization angle onto the closest of H, D, V, A.

    Args:
        degrees: Polarization angle in degrees (any range)

    Returns:
        Closest Polarization, or None for None input
    """
    if degrees is None:
        return None

    degrees = degrees % 180

    # 4 states with 45 degree segments, offset by 22.5 to center on each state
    states = [Polarization.H, Polarization.D, Polarization.V, Polarization.A]
    index = int((degrees + 22.5) / 45) % 4
    return states[index]
