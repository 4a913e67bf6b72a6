"""Pulse drawing shared by the transmitter and the tests."""

from typing import Optional, Sequence, Tuple

import numpy as np

from core.domain import IntensityClass, PulseBatch, PulseRecord
from core.errors import ConfigurationError
from core.rng import RandomBitSource

PROB_TOLERANCE = 1e-9


def check_probabilities(name: str, probs: Sequence[float], length: int) -> np.ndarray:
    """Validate a probability vector, naming it in the error."""
    values = np.asarray(probs, dtype=float)
    if values.shape != (length,):
        raise ConfigurationError(
            f"{name} must have {length} entries, got {list(np.atleast_1d(values))}"
        )
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ConfigurationError(f"{name} has negative entries: {list(values)}")
    if abs(values.sum() - 1.0) > PROB_TOLERANCE:
        raise ConfigurationError(f"{name} sums to {values.sum()!r}, expected 1")
    return values


def draw_pulses(
    rng: RandomBitSource,
    state_probs: Sequence[float],
    intensity_probs: Sequence[float],
    classes: Tuple[IntensityClass, IntensityClass, IntensityClass],
    start_index: int,
    n: int,
    pulse_rate: float,
    mu_factor: Optional[np.ndarray] = None,
    rotation_by_state: Optional[np.ndarray] = None,
) -> PulseBatch:
    """
    Draw a batch of pulses.

    Polarization and intensity are drawn independently, then the photon
    number of each pulse is Poisson with the class mean photon number times
    the per-state factor in `mu_factor` (coupling, thermal drift).

    Args:
        rng: Random source
        state_probs: Probabilities of H, V, D, A
        intensity_probs: Probabilities of signal, decoy, vacuum
        classes: Signal, decoy and vacuum classes
        start_index: Pulse index of the first pulse
        n: Number of pulses
        pulse_rate: Pulse clock (Hz)
        mu_factor: Optional 4-vector multiplying mu per emitting diode
        rotation_by_state: Optional 4-vector of emission rotation (degrees)

    Returns:
        PulseBatch with n pulses
    """
    states = check_probabilities("state_probs", state_probs, 4)
    mix = check_probabilities("intensity_probs", intensity_probs, 3)
    if pulse_rate <= 0:
        raise ConfigurationError(f"pulse_rate must be positive, got {pulse_rate}")

    pol = rng.choice(states, n)
    intensity = rng.choice(mix, n)

    mus = np.array([c.mean_photon_number for c in classes])
    lam = mus[intensity]
    if mu_factor is not None:
        lam = lam * np.asarray(mu_factor, dtype=float)[pol]
    photons = rng.poisson(lam).astype(np.int64)

    index = np.arange(start_index, start_index + n, dtype=np.int64)
    rotation = (
        np.asarray(rotation_by_state, dtype=float)[pol]
        if rotation_by_state is not None
        else np.zeros(n)
    )
    return PulseBatch(
        index=index,
        emit_time=index / float(pulse_rate),
        pol=pol,
        intensity=intensity,
        photons=photons,
        rotation_deg=rotation,
        classes=tuple(classes),
    )


def draw_pulse(
    rng: RandomBitSource,
    state_probs: Sequence[float],
    intensity_probs: Sequence[float],
    classes: Tuple[IntensityClass, IntensityClass, IntensityClass],
    index: int,
    pulse_rate: float,
) -> PulseRecord:
    """Draw a single pulse."""
    batch = draw_pulses(
        rng, state_probs, intensity_probs, classes, index, 1, pulse_rate
    )
    return next(batch.records())
