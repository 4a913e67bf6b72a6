"""Iterative drive-current equalisation of the four source diodes."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence

import numpy as np

from core.errors import CalibrationFailure, ConfigurationError

logger = logging.getLogger(__name__)

MeasureFn = Callable[[np.ndarray], np.ndarray]

# Exponent of the multiplicative update; below 1 damps Poisson noise.
UPDATE_EXPONENT = 0.5


@dataclass
class EqualizationResult:
    currents: np.ndarray
    counts: np.ndarray
    iterations: int
    trace: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return float(self.counts.max() / self.counts.min())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "currents_ma": self.currents,
            "counts": self.counts,
            "iterations": self.iterations,
            "ratio": self.ratio,
            "trace": self.trace,
        }


def equalize_currents(
    measure: MeasureFn,
    initial: Sequence[float],
    target_rel_tol: float = 0.01,
    max_iters: int = 20,
) -> EqualizationResult:
    """
    Adjust per-diode currents until the measured counts agree.

    Each step measures all diodes and moves every current toward the
    geometric-mean count: I <- I * (mean / counts) ** 0.5. `measure` is
    called strictly sequentially.

    Args:
        measure: Maps a current vector to per-diode counts
        initial: Starting currents
        target_rel_tol: Accept when max/min count <= 1 + tol
        max_iters: Number of measurements allowed

    Raises:
        CalibrationFailure: No convergence within `max_iters`, or a diode
            gave no counts; the exception carries the iteration trace
    """
    if target_rel_tol <= 0 or max_iters < 1:
        raise ConfigurationError("equalisation needs tol > 0 and at least one iteration")
    currents = np.asarray(initial, dtype=float).copy()
    if np.any(currents <= 0):
        raise ConfigurationError(f"initial currents must be > 0, got {currents.tolist()}")

    trace: List[Dict[str, Any]] = []
    for iteration in range(1, max_iters + 1):
        counts = np.asarray(measure(currents), dtype=float)
        trace.append({"iteration": iteration, "currents_ma": currents.tolist(), "counts": counts.tolist()})
        if np.any(counts <= 0):
            dark = [int(i) for i in np.flatnonzero(counts <= 0)]
            raise CalibrationFailure(f"diodes {dark} gave no counts", trace)
        ratio = counts.max() / counts.min()
        logger.debug(f"Equalisation step {iteration}: ratio {ratio:.4f}")
        if ratio <= 1.0 + target_rel_tol:
            logger.info(f"Currents equalised after {iteration} measurements (ratio {ratio:.4f})")
            return EqualizationResult(currents, counts, iteration, trace)
        target = np.exp(np.mean(np.log(counts)))
        currents = currents * (target / counts) ** UPDATE_EXPONENT

    raise CalibrationFailure(
        f"counts did not equalise to {target_rel_tol} in {max_iters} iterations", trace
    )
