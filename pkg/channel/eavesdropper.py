"""Intercept-resend eavesdropper on the quantum channel."""

import logging

import numpy as np

from core.domain import POLARIZATION_ANGLES, PulseBatch
from core.rng import RandomBitSource

logger = logging.getLogger(__name__)

# Polarization codes of the two outcomes per measurement basis: (H, V), (D, A).
_OUTCOMES = np.array([[0, 1], [2, 3]], dtype=np.int8)


def intercept_resend(batch: PulseBatch, rng: RandomBitSource) -> PulseBatch:
    """
    Measure every non-empty pulse in a random basis and resend the result.

    The resent pulse carries the measured polarization, the original
    photon number and no residual rotation. Empty pulses pass untouched.
    """
    n = len(batch)
    basis = rng.bits(n).astype(np.int8)
    u = rng.uniform(n)

    first = _OUTCOMES[basis, 0]
    delta = np.radians(batch.angle - POLARIZATION_ANGLES[first])
    p_first = np.cos(delta) ** 2
    measured = np.where(u < p_first, first, _OUTCOMES[basis, 1]).astype(np.int8)

    occupied = batch.photons > 0
    pol = np.where(occupied, measured, batch.pol).astype(np.int8)
    rotation = np.where(occupied, 0.0, batch.rotation_deg)
    changed = int(np.count_nonzero(pol != batch.pol))
    logger.debug(f"Eavesdropper intercepted {int(occupied.sum())} pulses, {changed} flipped")
    return batch.replace(pol=pol, rotation_deg=rotation)
