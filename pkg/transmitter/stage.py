"""Transmitter stage of a pass simulation."""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from core.angles import nearest_polarization
from core.base_stage import BaseStage
from core.domain import INTENSITY_LABELS, POLARIZATIONS, PulseBatch
from core.rng import RandomBitSource
from core.thermal import check_temperature
from transmitter.calibration import DiodeCalibration, retune_currents
from transmitter.source import SourceConfig, generate_pulse_train

logger = logging.getLogger(__name__)


class TransmitterStage(BaseStage):
    """
    Quantum source on the satellite.

    Emits pulse blocks and keeps per-state and per-class tallies for the
    run report.
    """

    name = "transmitter"

    def __init__(
        self,
        config: Dict[str, Any],
        source: SourceConfig,
        calibration: Optional[DiodeCalibration] = None,
    ):
        """
        Initialize the transmitter.

        Args:
            config: Stage options (`retune_currents`)
            source: Source settings
            calibration: Diode calibration (ideal when omitted)
        """
        super().__init__(config)
        self.source = source
        self.calibration = calibration or DiodeCalibration.ideal()
        check_temperature(source.temperature_c)

        if config.get("retune_currents", False):
            self.calibration = retune_currents(self.calibration, source.temperature_c)

        self.pulses_sent = 0
        self.blocks = 0
        self._by_state = np.zeros(len(POLARIZATIONS), dtype=np.int64)
        self._by_class = np.zeros(len(INTENSITY_LABELS), dtype=np.int64)
        self._photons_by_class = np.zeros(len(INTENSITY_LABELS), dtype=np.int64)

    def emit(self, rng: RandomBitSource, start_index: int, n: int) -> PulseBatch:
        """Emit one block of n pulses starting at pulse index `start_index`."""
        batch = generate_pulse_train(
            self.source,
            self.calibration,
            self.source.temperature_c,
            rng,
            n,
            start_index=start_index,
        )
        self.pulses_sent += len(batch)
        self.blocks += 1
        self._by_state += np.bincount(batch.pol, minlength=len(POLARIZATIONS))
        self._by_class += np.bincount(batch.intensity, minlength=len(INTENSITY_LABELS))
        self._photons_by_class += np.bincount(
            batch.intensity, weights=batch.photons, minlength=len(INTENSITY_LABELS)
        ).astype(np.int64)
        logger.debug(f"Emitted block of {n} pulses from index {start_index}")
        return batch

    def summarize(self) -> Dict[str, Any]:
        warm = self.calibration.at(self.source.temperature_c)
        classes = {}
        for label, sent, photons in zip(
            INTENSITY_LABELS, self._by_class, self._photons_by_class
        ):
            classes[label.name.lower()] = {
                "pulses": int(sent),
                "mean_photons": float(photons / sent) if sent else 0.0,
            }
        return {
            "pulses_sent": int(self.pulses_sent),
            "blocks": int(self.blocks),
            "temperature_c": self.source.temperature_c,
            "pulse_rate_hz": self.source.pulse_rate_hz,
            "by_state": {p.name: int(c) for p, c in zip(POLARIZATIONS, self._by_state)},
            "classes": classes,
            "mu_factor": {p.name: warm.mu_factor(p) for p in POLARIZATIONS},
            "pol_rotation_deg": {p.name: warm.pol_rotation(p) for p in POLARIZATIONS},
            "emitted_as": {
                p.name: nearest_polarization(p.angle + warm.pol_rotation(p)).name
                for p in POLARIZATIONS
            },
        }

    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        signal = summary["classes"]["signal"]
        lines = [
            f"transmitter: {summary['pulses_sent']} pulses in {summary['blocks']} blocks "
            f"at {summary['temperature_c']} C",
            f"transmitter: signal mean photons {signal['mean_photons']:.4f}",
        ]
        for name, label in summary["emitted_as"].items():
            if label != name:
                rotation = summary["pol_rotation_deg"][name]
                lines.append(f"transmitter: {name} diode emits nearer {label} ({rotation:+.1f} deg)")
        return lines
