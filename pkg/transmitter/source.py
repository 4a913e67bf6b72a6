"""Pulse-train generation of the weak coherent pulse source."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, Tuple, Union

import numpy as np

from core.domain import (
    INTENSITY_LABELS,
    POLARIZATIONS,
    IntensityClass,
    IntensityLabel,
    Polarization,
    PulseBatch,
    intensity_classes,
)
from core.errors import ConfigurationError
from core.pulses import check_probabilities, draw_pulses
from core.report_output import write_columns
from core.rng import RandomBitSource
from core.thermal import check_temperature
from transmitter.calibration import DiodeCalibration

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceConfig:
    """Source settings. Defaults are the mission baseline."""

    pulse_rate_hz: float = 1e8
    pulse_fwhm_s: float = 1e-9
    signal_mu: float = 0.8
    decoy_mu: float = 0.4
    quantum_wavelength_nm: float = 785.0
    alignment_wavelength_nm: float = 830.0
    intensity_probs: Tuple[float, float, float] = (0.7, 0.2, 0.1)
    state_probs: Tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    temperature_c: float = 21.0
    # The 830 nm alignment beam is only modelled as present or not.
    alignment_beam: bool = True

    def __post_init__(self):
        if not self.pulse_rate_hz > 0:
            raise ConfigurationError(f"pulse_rate_hz must be > 0, got {self.pulse_rate_hz}")
        intensity_classes(self.signal_mu, self.decoy_mu)
        check_probabilities("intensity_probs", self.intensity_probs, 3)
        check_probabilities("state_probs", self.state_probs, 4)

    @property
    def classes(self) -> Tuple[IntensityClass, IntensityClass, IntensityClass]:
        return intensity_classes(self.signal_mu, self.decoy_mu)

    @property
    def pulse_period_s(self) -> float:
        return 1.0 / self.pulse_rate_hz

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SourceConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown source keys: {sorted(unknown)}")
        values = dict(data)
        for key in ("intensity_probs", "state_probs"):
            if key in values:
                values[key] = tuple(float(v) for v in values[key])
        return cls(**values)


@dataclass(frozen=True)
class TestPattern:
    """Deterministic calibration pattern of (polarization, intensity) slots."""

    __test__ = False

    sequence: Tuple[Tuple[Polarization, IntensityLabel], ...]
    modulation_rate_hz: float = 20e6

    def __post_init__(self):
        if not self.sequence:
            raise ConfigurationError("test pattern is empty")
        if not self.modulation_rate_hz > 0:
            raise ConfigurationError("test pattern modulation rate must be > 0")

    @classmethod
    def of(
        cls,
        polarizations: Sequence[Polarization],
        modulation_rate_hz: float = 20e6,
        intensity: IntensityLabel = IntensityLabel.SIGNAL,
    ) -> "TestPattern":
        return cls(tuple((p, intensity) for p in polarizations), modulation_rate_hz)

    @property
    def period_s(self) -> float:
        return len(self.sequence) / self.modulation_rate_hz


def generate_pulse_train(
    cfg: SourceConfig,
    cal: DiodeCalibration,
    temperature_c: float,
    rng: RandomBitSource,
    n: int,
    start_index: int = 0,
) -> PulseBatch:
    """
    Generate n QRNG-driven pulses.

    Each pulse's mean photon number is the class mu times the emitting
    diode's coupling, thermal mu_scale and current ratio; its linear
    polarization is rotated by the diode's fibre rotation at temperature.
    """
    if n < 1:
        raise ConfigurationError(f"pulse count must be >= 1, got {n}")
    check_temperature(temperature_c)
    warm = cal.at(temperature_c)
    return draw_pulses(
        rng,
        cfg.state_probs,
        cfg.intensity_probs,
        cfg.classes,
        start_index,
        n,
        cfg.pulse_rate_hz,
        mu_factor=warm.mu_factors(),
        rotation_by_state=warm.rotations(),
    )


def emit_test_pattern(
    cfg: SourceConfig,
    cal: DiodeCalibration,
    pattern: TestPattern,
    temperature_c: float,
    rng: RandomBitSource,
    repetitions: int,
) -> PulseBatch:
    """Emit `pattern` repeated `repetitions` times at its modulation rate."""
    if repetitions < 1:
        raise ConfigurationError(f"repetitions must be >= 1, got {repetitions}")
    if pattern.modulation_rate_hz > cfg.pulse_rate_hz:
        raise ConfigurationError(
            f"modulation rate {pattern.modulation_rate_hz} Hz exceeds pulse rate "
            f"{cfg.pulse_rate_hz} Hz"
        )
    check_temperature(temperature_c)
    warm = cal.at(temperature_c)

    slot_pol = np.array([p.code for p, _ in pattern.sequence], dtype=np.int8)
    slot_class = np.array([c.code for _, c in pattern.sequence], dtype=np.int8)
    pol = np.tile(slot_pol, repetitions)
    intensity = np.tile(slot_class, repetitions)

    classes = cfg.classes
    mus = np.array([c.mean_photon_number for c in classes])
    lam = mus[intensity] * warm.mu_factors()[pol]
    photons = rng.poisson(lam).astype(np.int64)

    index = np.arange(len(pol), dtype=np.int64)
    return PulseBatch(
        index=index,
        emit_time=index / pattern.modulation_rate_hz,
        pol=pol,
        intensity=intensity,
        photons=photons,
        rotation_deg=warm.rotations()[pol],
        classes=classes,
    )


def make_bench_measure(
    cfg: SourceConfig,
    cal: DiodeCalibration,
    temperature_c: float,
    rng: RandomBitSource,
    pulses_per_diode: int,
    detector_efficiency: float = 0.6,
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Simulated SPCM bench: fibre straight into one detector, one diode
    pulsed at a time with signal intensity. Returns a callback mapping
    drive currents to click counts per diode.
    """
    check_temperature(temperature_c)
    warm = cal.at(temperature_c)

    def measure(currents_ma: np.ndarray) -> np.ndarray:
        trial = warm.with_currents(currents_ma)
        mu = cfg.signal_mu * trial.mu_factors()
        click_prob = 1.0 - np.exp(-mu * detector_efficiency)
        return rng.binomial(pulses_per_diode, click_prob).astype(float)

    return measure


def write_pulse_stream(path: Union[str, Path], batch: PulseBatch) -> Path:
    """Write a pulse stream as columns `index time_s pol class photons`."""
    pol_names = np.array([p.name for p in POLARIZATIONS])
    class_names = np.array([c.name.lower() for c in INTENSITY_LABELS])
    return write_columns(
        path,
        ["index", "time_s", "pol", "class", "photons"],
        [
            batch.index,
            batch.emit_time,
            pol_names[batch.pol],
            class_names[batch.intensity],
            batch.photons,
        ],
    )
