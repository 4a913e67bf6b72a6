"""Receiver stage of a pass simulation."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from channel.pointing import BeaconConfig, OpticsConfig
from core.base_stage import BaseStage
from core.domain import Basis, Origin, PulseBatch, TagBatch
from core.errors import ConfigurationError, SyncFailure
from core.rng import RandomBitSource
from receiver.analyzer import (
    AnalyzerNetwork,
    WaveplateSettings,
    apply_compensation,
    compensate_arms,
    port_distribution,
)
from receiver.detector import ClockModel, DetectorModel, detect, detect_beacon
from receiver.sync import Detections, SyncResult, pair_tags, recover_sync

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReceiverConfig:
    """
    Ground station analyzer settings.

    With `compensate` set, the HWP undoes the HV-basis rotation of the
    pointing optics and the DA arm is locked onto the extra DA rotation;
    otherwise `hwp_deg` and `arm_rotation_deg` are used as given.
    """

    hwp_deg: float = 0.0
    hv_fraction: float = 0.5
    port_efficiencies: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    arm_rotation_deg: Tuple[float, float] = (0.0, 0.0)
    compensate: bool = True
    coincidence_window_s: Optional[float] = None

    def __post_init__(self):
        self.network()
        if self.coincidence_window_s is not None and not self.coincidence_window_s > 0:
            raise ConfigurationError("coincidence_window_s must be > 0 when set")

    def network(self) -> AnalyzerNetwork:
        return AnalyzerNetwork(self.hv_fraction, self.port_efficiencies, self.arm_rotation_deg)

    def settings_for(self, optics: OpticsConfig) -> Tuple[WaveplateSettings, AnalyzerNetwork]:
        """Waveplates and network for a given pointing optics."""
        if not self.compensate:
            return WaveplateSettings(hwp_deg=self.hwp_deg), self.network()
        hv = optics.rotation_for(Basis.HV)
        da = optics.rotation_for(Basis.DA)
        return apply_compensation(hv), compensate_arms(self.network(), 0.0, da - hv)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ReceiverConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown receiver keys: {sorted(unknown)}")
        values = dict(data)
        if "port_efficiencies" in values:
            values["port_efficiencies"] = tuple(float(v) for v in values["port_efficiencies"])
        if "arm_rotation_deg" in values:
            arms = values["arm_rotation_deg"]
            if not isinstance(arms, Mapping):
                raise ConfigurationError("receiver.arm_rotation_deg must map HV/DA to degrees")
            values["arm_rotation_deg"] = (float(arms.get("HV", 0.0)), float(arms.get("DA", 0.0)))
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        values = dict(self.__dict__)
        values["arm_rotation_deg"] = {"HV": self.arm_rotation_deg[0], "DA": self.arm_rotation_deg[1]}
        return values


class ReceiverStage(BaseStage):
    """
    Optical ground station receive chain.

    For every pulse block: analyse and detect the photons, timetag the
    beacon, recover the clock from the beacon, and pair quantum tags to
    pulse indices.
    """

    name = "receiver"

    def __init__(
        self,
        config: Dict[str, Any],
        waveplates: WaveplateSettings,
        network: AnalyzerNetwork,
        detector: DetectorModel,
        clock: ClockModel,
        beacon: BeaconConfig,
        pulse_rate_hz: float,
    ):
        """
        Initialize the receiver.

        Args:
            config: Stage options (`coincidence_window_s`)
            waveplates: Compensation waveplates
            network: Analyzer network
            detector: SPCM model
            clock: Timetagger clock
            beacon: Downlink beacon settings
            pulse_rate_hz: Quantum pulse clock
        """
        super().__init__(config)
        self.waveplates = waveplates
        self.network = network
        self.detector = detector
        self.clock = clock
        self.beacon = beacon
        self.pulse_rate_hz = pulse_rate_hz
        self.coincidence_window_s = config.get("coincidence_window_s")

        self.tags: List[TagBatch] = []
        self.syncs: List[SyncResult] = []
        self.beacon_tags = 0
        self.sync_failures = 0
        self._detections: List[Detections] = []

    def receive(
        self,
        batch: PulseBatch,
        light_time_s: float,
        rng: RandomBitSource,
        beacon_rng: RandomBitSource,
    ) -> Detections:
        """
        Detect one received pulse block and pair its tags to pulse indices.

        Raises:
            SyncFailure: The beacon did not yield a clock fit
        """
        if len(batch) == 0:
            return Detections.concat([])
        period = 1.0 / self.pulse_rate_hz
        arrival = batch.emit_time + light_time_s
        probs = port_distribution(batch.angle, self.waveplates, self.network)
        probs = probs * np.asarray(self.network.port_efficiencies)
        tags = detect(
            arrival,
            probs,
            batch.photons,
            self.detector,
            self.clock,
            rng,
            window=(float(arrival[0]), float(arrival[-1]) + period),
        )
        self.tags.append(tags)

        block_start = float(batch.emit_time[0])
        block_span = float(batch.emit_time[-1] - batch.emit_time[0]) + period
        beacon_tags = detect_beacon(
            block_start,
            max(block_span, self.beacon.sync_window_s),
            self.beacon.rate_hz,
            self.beacon.detect_prob,
            self.detector,
            self.clock,
            beacon_rng,
            light_time_s=light_time_s,
        )
        self.beacon_tags += len(beacon_tags)

        # Ground prediction of the first beacon pulse in the block.
        reference = math.ceil(block_start * self.beacon.rate_hz - 1e-9)
        hint = (
            float(self.clock.to_receiver(reference / self.beacon.rate_hz + light_time_s))
            + self.beacon.coarse_timing_error_s
        )
        try:
            sync = recover_sync(
                beacon_tags, self.beacon.rate_hz, coarse_offset=hint, reference_index=reference
            )
        except SyncFailure:
            self.sync_failures += 1
            raise
        self.syncs.append(sync)

        first = int(batch.index[0])
        detections = pair_tags(
            tags,
            sync,
            self.pulse_rate_hz,
            window_s=self.coincidence_window_s,
            index_range=(first, int(batch.index[-1]) + 1),
        )
        self._detections.append(detections)
        logger.debug(
            f"Block at {block_start:.3f} s: {len(tags)} tags, {len(detections)} detections"
        )
        return detections

    def all_tags(self) -> TagBatch:
        return TagBatch.merge(self.tags) if self.tags else TagBatch.empty()

    def summarize(self) -> Dict[str, Any]:
        merged = Detections.concat(self._detections)
        tags = self.all_tags()
        dark = int(np.count_nonzero(tags.origins == Origin.DARK.value))
        rms = [s.residual_rms_s for s in self.syncs]
        return {
            "tags": len(tags),
            "dark_tags": dark,
            "beacon_tags": self.beacon_tags,
            "detections": len(merged),
            "double_clicks": merged.double_clicks,
            "outside_window": merged.outside_window,
            "sync_blocks": len(self.syncs),
            "sync_failures": self.sync_failures,
            "sync_residual_rms_s": float(np.mean(rms)) if rms else 0.0,
            "clock_drift": self.syncs[-1].drift if self.syncs else 0.0,
            "hwp_deg": self.waveplates.hwp_deg,
        }

    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        return [
            f"receiver: {summary['tags']} tags ({summary['dark_tags']} dark), "
            f"{summary['detections']} single-port detections, "
            f"{summary['double_clicks']} double clicks discarded",
            f"receiver: sync over {summary['sync_blocks']} blocks, "
            f"residual rms {summary['sync_residual_rms_s']:.3e} s",
        ]
