"""
Parameter estimation: per-class gains, decoy-state bounds and key length.

The bounds are the asymptotic vacuum + weak decoy closed forms; the key
length is GLLP-style asymptotic accounting with error correction charged
through an efficiency factor.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from core.domain import IntensityLabel
from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

QBER_ABORT_THRESHOLD = 0.11
DEFAULT_EC_EFFICIENCY = 1.16
CONFIDENCE_Z = 3.0
# Error rate of a pure dark count.
VACUUM_ERROR_RATE = 0.5


@dataclass(frozen=True)
class ClassStatistics:
    """Counts for one intensity class."""

    label: IntensityLabel
    mu: float
    sent: int
    detected: int
    sampled: int = 0
    errors: int = 0

    def __post_init__(self):
        if self.detected > self.sent and self.sent > 0:
            raise ConfigurationError(
                f"{self.label.name}: {self.detected} detections from {self.sent} pulses"
            )
        if self.errors > self.sampled:
            raise ConfigurationError(f"{self.label.name}: more errors than sampled bits")

    @property
    def gain(self) -> float:
        return self.detected / self.sent if self.sent else 0.0

    @property
    def error_rate(self) -> float:
        return self.errors / self.sampled if self.sampled else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": self.mu,
            "sent": self.sent,
            "detected": self.detected,
            "sampled": self.sampled,
            "errors": self.errors,
            "gain": self.gain,
            "error_rate": self.error_rate,
        }


@dataclass(frozen=True)
class DecoyStatistics:
    signal: ClassStatistics
    decoy: ClassStatistics
    vacuum: ClassStatistics

    def by_label(self, label: IntensityLabel) -> ClassStatistics:
        return {
            IntensityLabel.SIGNAL: self.signal,
            IntensityLabel.DECOY: self.decoy,
            IntensityLabel.VACUUM: self.vacuum,
        }[label]

    def with_errors(self, label: IntensityLabel, sampled: int, errors: int) -> "DecoyStatistics":
        """Copy with the sampled error counts of one class replaced."""
        current = self.by_label(label)
        updated = ClassStatistics(
            current.label, current.mu, current.sent, current.detected, sampled, errors
        )
        parts = {"signal": self.signal, "decoy": self.decoy, "vacuum": self.vacuum}
        parts[label.name.lower()] = updated
        return DecoyStatistics(**parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "signal": self.signal.to_dict(),
            "decoy": self.decoy.to_dict(),
            "vacuum": self.vacuum.to_dict(),
        }


def binary_entropy(p: float) -> float:
    """h2(p) in bits; 0 at p = 0 and p = 1."""
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def qber_confidence_interval(
    qber: float, n: int, z: float = CONFIDENCE_Z
) -> Tuple[float, float]:
    """Normal-approximation interval on a sampled error rate."""
    if n == 0:
        return 0.0, 0.0
    delta = z * math.sqrt(qber * (1 - qber) / n)
    return max(0.0, qber - delta), min(1.0, qber + delta)


def decoy_bounds(stats: DecoyStatistics, mu_s: float, mu_d: float) -> Tuple[float, float]:
    """
    Lower bound on the single-photon yield and upper bound on its error rate.

    The background yield Y0 is the measured vacuum-class gain; when no
    vacuum pulses were sent it is bounded from the signal and decoy gains.
    Raw bounds outside their range log a warning and are clamped; an
    error rate above 0.5 carries no more information than a dark count.

    Args:
        stats: Per-class counts
        mu_s: Signal mean photon number
        mu_d: Decoy mean photon number

    Returns:
        (y1_lower, e1_upper), y1_lower in [0, 1] and e1_upper in [0, 0.5]
    """
    if not mu_s > mu_d > 0:
        raise ConfigurationError(f"need mu_s > mu_d > 0, got {mu_s} and {mu_d}")
    s, d, v = stats.signal, stats.decoy, stats.vacuum
    if s.sent == 0 or d.sent == 0 or s.detected == 0 or d.detected == 0:
        logger.warning("Decoy bounds need signal and decoy detections; reporting no single photons")
        return 0.0, VACUUM_ERROR_RATE

    q_s, q_d = s.gain, d.gain
    if q_d > q_s:
        logger.warning(f"Decoy gain {q_d:.3e} exceeds signal gain {q_s:.3e}; check class labels")

    if v.sent > 0:
        y0 = v.gain
        e0 = v.error_rate if v.sampled else VACUUM_ERROR_RATE
    else:
        y0 = max(0.0, (mu_s * q_d * math.exp(mu_d) - mu_d * q_s * math.exp(mu_s)) / (mu_s - mu_d))
        e0 = VACUUM_ERROR_RATE

    y1_raw = (mu_s / (mu_s * mu_d - mu_d**2)) * (
        q_d * math.exp(mu_d)
        - q_s * math.exp(mu_s) * mu_d**2 / mu_s**2
        - (mu_s**2 - mu_d**2) / mu_s**2 * y0
    )
    y1_lower = float(np.clip(y1_raw, 0.0, 1.0))
    if y1_raw != y1_lower:
        logger.warning(f"Single-photon yield bound {y1_raw:.3e} clamped to {y1_lower}")
    if y1_lower == 0.0:
        return 0.0, VACUUM_ERROR_RATE

    e1_raw = (d.error_rate * q_d * math.exp(mu_d) - e0 * y0) / (y1_lower * mu_d)
    e1_upper = float(np.clip(e1_raw, 0.0, VACUUM_ERROR_RATE))
    if e1_raw > VACUUM_ERROR_RATE:
        logger.warning(f"Single-photon error bound {e1_raw:.3e} clamped to {VACUUM_ERROR_RATE}")
    return y1_lower, e1_upper


def single_photon_fraction(y1_lower: float, mu_s: float, signal_gain: float) -> float:
    """Lower bound on the share of signal detections that came from one photon."""
    if signal_gain <= 0:
        return 0.0
    return float(np.clip(y1_lower * mu_s * math.exp(-mu_s) / signal_gain, 0.0, 1.0))


def expected_gain(mu: float, eta: float, y0: float = 0.0) -> float:
    """Gain of a Poissonian class through transmittance eta with background yield y0."""
    return 1.0 - (1.0 - y0) * math.exp(-eta * mu)


def single_photon_yield(eta: float, y0: float = 0.0) -> float:
    return 1.0 - (1.0 - y0) * (1.0 - eta)


def single_photon_error(eta: float, y0: float = 0.0, e_detector: float = 0.0) -> float:
    """True single-photon error rate for a channel with misalignment error `e_detector`."""
    y1 = single_photon_yield(eta, y0)
    if y1 == 0:
        return VACUUM_ERROR_RATE
    return (VACUUM_ERROR_RATE * y0 + e_detector * eta * (1.0 - y0)) / y1


def secure_key_length(
    n: int,
    qber: float,
    y1_fraction: float,
    e1_upper: float,
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY,
    threshold: float = QBER_ABORT_THRESHOLD,
) -> int:
    """
    Asymptotic secure key length in bits.

    length = n * [y1_fraction * (1 - h2(e1_upper)) - f * h2(qber)], floored
    at zero; zero when the QBER reaches the abort threshold. e1_upper is
    capped at 0.5, where h2 peaks.
    """
    if ec_efficiency < 1:
        raise ConfigurationError(f"error correction efficiency must be >= 1, got {ec_efficiency}")
    if n <= 0 or qber >= threshold:
        return 0
    e1 = min(e1_upper, VACUUM_ERROR_RATE)
    rate = y1_fraction * (1.0 - binary_entropy(e1)) - ec_efficiency * binary_entropy(qber)
    return max(0, int(math.floor(n * rate)))
