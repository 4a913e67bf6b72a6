"""
End-to-end pass simulation.

The scheduler plans the pass first. Pulse blocks are then placed every
`block_interval_s` inside Qkd segments and streamed through transmitter,
channel and receiver; the protocol runs once over everything detected.
Each block draws from its own named substreams, so blocks are independent
shards of the pass.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from channel.link import transmittance_series
from channel.stage import ChannelStage
from config import Config, Scenario
from core.domain import PulseBatch
from core.errors import QkdSimError
from core.report_output import ReportOutput
from core.rng import RandomBitSource
from protocol.report import KeyRateReport, write_keys, write_report
from protocol.sifting import SentRecord
from protocol.stage import ProtocolStage
from receiver.stage import ReceiverStage
from receiver.sync import Detections
from receiver.timetag_file import write_timetags
from scheduler.planner import Activity, ActivityPlan
from scheduler.stage import SchedulerStage
from transmitter.source import write_pulse_stream
from transmitter.stage import TransmitterStage

logger = logging.getLogger(__name__)

EDGE_TOLERANCE_S = 1e-9


@dataclass
class RunReport:
    """Outcome of one simulated pass."""

    key_rate: KeyRateReport
    seed: int
    config_sha256: str
    blocks: int
    pulses_sent: int
    eta: Dict[str, float]
    utilization: Dict[str, Any]
    telemetry: Dict[str, Dict[str, Any]]
    fault: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return self.key_rate.aborted

    def to_dict(self) -> Dict[str, Any]:
        return {
            "key_rate": self.key_rate.to_dict(),
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "blocks": self.blocks,
            "pulses_sent": self.pulses_sent,
            "eta": self.eta,
            "utilization": self.utilization,
            "telemetry": self.telemetry,
            "fault": self.fault,
        }


def block_times(plan: ActivityPlan, interval_s: float, max_blocks: Optional[int] = None) -> List[float]:
    """Start times of pulse blocks: every `interval_s` from the start of each Qkd segment."""
    times: List[float] = []
    for seg in plan.segments(Activity.QKD):
        t = seg.start_s
        while t < seg.end_s - EDGE_TOLERANCE_S:
            times.append(float(t))
            if max_blocks is not None and len(times) >= max_blocks:
                return times
            t += interval_s
    return times


class PassSimulator:
    """Runs one scenario and writes its artifacts."""

    def __init__(self, scenario: Scenario, config: Optional[Config] = None, config_sha256: str = ""):
        self.scenario = scenario
        self.config = config or Config()
        self.config_sha256 = config_sha256
        self.rng = RandomBitSource(scenario.seed)

        s = scenario
        waveplates, network = s.receiver.settings_for(s.optics)
        self.stages = {
            "transmitter": TransmitterStage(
                {"retune_currents": s.simulation.retune_currents}, s.source, s.calibration
            ),
            "channel": ChannelStage(
                {"eavesdropper": s.simulation.eavesdropper},
                s.geometry,
                s.optics,
                s.pointing,
                s.atmosphere,
                s.clouds,
            ),
            "receiver": ReceiverStage(
                {"coincidence_window_s": s.receiver.coincidence_window_s},
                waveplates,
                network,
                s.detector,
                s.clock,
                s.beacon,
                s.source.pulse_rate_hz,
            ),
            "protocol": ProtocolStage({}, s.protocol),
            "scheduler": SchedulerStage({}, s.scheduler, s.geometry, s.clouds),
        }
        self.batches: List[PulseBatch] = []

    @property
    def transmitter(self) -> TransmitterStage:
        return self.stages["transmitter"]

    @property
    def channel(self) -> ChannelStage:
        return self.stages["channel"]

    @property
    def receiver(self) -> ReceiverStage:
        return self.stages["receiver"]

    @property
    def protocol(self) -> ProtocolStage:
        return self.stages["protocol"]

    @property
    def scheduler(self) -> SchedulerStage:
        return self.stages["scheduler"]

    def _run_block(self, k: int, t: float, keep_raw: bool) -> Tuple[SentRecord, Detections]:
        s = self.scenario
        block_rng = self.rng.substream(f"block-{k}")
        n = s.simulation.pulses_per_block
        start_index = int(round(t * s.source.pulse_rate_hz))

        batch = self.transmitter.emit(block_rng.substream("source"), start_index, n)
        if keep_raw:
            self.batches.append(batch)
        received, _ = self.channel.propagate(
            batch, t, block_rng.substream("channel"), block_rng.substream("eve")
        )
        detections = self.receiver.receive(
            received,
            self.channel.light_time(t),
            block_rng.substream("detector"),
            block_rng.substream("beacon"),
        )
        logger.debug(f"Block {k} at {t:.1f} s: {len(detections)} detections")
        return SentRecord.from_batch(batch), detections

    def run(self, out_dir: Union[str, Path]) -> RunReport:
        """
        Simulate the pass and write every artifact into out_dir.

        Module faults during the pass do not raise: the report carries
        `aborted` with the fault code as cause and `fault` is set.
        """
        s = self.scenario
        output = ReportOutput(out_dir)
        plan = self.scheduler.make_plan(self.rng.substream("scheduler-oracle"))

        times = block_times(plan, s.simulation.block_interval_s, s.simulation.max_blocks)
        total_pulses = len(times) * s.simulation.pulses_per_block
        keep_raw = total_pulses <= self.config.raw_pulse_limit
        if not keep_raw:
            logger.warning(
                f"{total_pulses} pulses exceed the raw stream limit "
                f"{self.config.raw_pulse_limit}; pulses.txt not written"
            )
        logger.info(f"Simulating {len(times)} blocks of {s.simulation.pulses_per_block} pulses")

        fault: Optional[QkdSimError] = None
        key_rate: Optional[KeyRateReport] = None
        outcome = None
        try:
            sent_parts: List[SentRecord] = []
            detections: List[Detections] = []
            for k, t in enumerate(times):
                sent, found = self._run_block(k, t, keep_raw)
                sent_parts.append(sent)
                detections.append(found)
            outcome = self.protocol.run(
                SentRecord.concat(sent_parts, s.source.classes),
                Detections.concat(detections),
                self.rng.substream("protocol"),
                session_id=s.session_id,
                pulse_rate_hz=s.source.pulse_rate_hz,
            )
            key_rate = outcome.report
        except QkdSimError as e:
            fault = e
            logger.error(f"Pass simulation fault: {e.one_line()}")
            key_rate = KeyRateReport.aborted_session(
                s.session_id, f"{e.code}: {' '.join(str(e).split())}", s.protocol.ec_efficiency
            )

        utilization = self.scheduler.evaluate(
            {
                "blocks": len(times),
                "pulses_sent": self.transmitter.pulses_sent,
                "secure_length": key_rate.secure_length,
            }
        )

        eta_columns = transmittance_series(
            s.geometry,
            s.optics,
            s.pointing,
            s.atmosphere,
            s.clouds,
            self.rng.substream("eta-series"),
        )
        activity = [
            plan.activity_at(min(t, plan.pass_end_s - EDGE_TOLERANCE_S)).value
            for t in eta_columns["t_s"]
        ]
        output.write_columns(
            "eta_series.txt",
            ["t_s", "elevation_deg", "slant_range_km", "eta", "activity"],
            [
                eta_columns["t_s"],
                eta_columns["elevation_deg"],
                eta_columns["slant_range_km"],
                eta_columns["eta"],
                activity,
            ],
        )
        eta = eta_columns["eta"]
        eta_summary = {
            "mean": float(eta.mean()),
            "max": float(eta.max()),
            "nonzero_seconds": float(np.count_nonzero(eta > 0) * s.geometry.time_step_s),
        }

        header, columns = plan.columns()
        output.write_columns("plan.txt", header, columns, comments=[f"session_id {s.session_id}"])
        output.write_key_value("utilization.txt", utilization.to_dict())
        write_timetags(
            output.path("timetags.txt"),
            self.receiver.all_tags(),
            s.clock.resolution_s,
            s.session_id,
        )
        if outcome is not None:
            write_keys(
                output.path("keys.txt"),
                outcome.transmitter_key,
                outcome.receiver_key,
                {"session_id": s.session_id, "seed": s.seed},
            )
            output.path("transcript.bin").write_bytes(outcome.channel.transcript_bytes())
        if keep_raw:
            write_pulse_stream(output.path("pulses.txt"), PulseBatch.concat(self.batches))

        telemetry: Dict[str, Dict[str, Any]] = {}
        stage_lines: Dict[str, List[str]] = {}
        for name, stage in self.stages.items():
            summary, lines = stage.report()
            telemetry[name] = summary
            stage_lines[name] = lines
            output.write_stage_data(name, summary, lines)
        if fault is not None:
            stage_lines["fault"] = [fault.one_line()]
        output.write_combined_report(stage_lines)

        report = RunReport(
            key_rate=key_rate,
            seed=s.seed,
            config_sha256=self.config_sha256,
            blocks=len(times),
            pulses_sent=self.transmitter.pulses_sent,
            eta=eta_summary,
            utilization=utilization.to_dict(),
            telemetry=telemetry,
            fault=fault.code if fault is not None else None,
        )
        write_report(
            output,
            key_rate,
            {
                "seed": s.seed,
                "config": s.to_dict(),
                "config_sha256": self.config_sha256,
                "blocks": report.blocks,
                "pulses_sent": report.pulses_sent,
                "eta": eta_summary,
                "utilization": report.utilization,
                "fault": report.fault,
            },
        )
        report.artifacts = sorted(p.name for p in output.out_dir.iterdir() if p.is_file())
        return report


def run_pass(
    scenario: Scenario,
    out_dir: Union[str, Path],
    config: Optional[Config] = None,
    config_sha256: str = "",
) -> RunReport:
    """Simulate one pass of `scenario` and write its artifacts into out_dir."""
    return PassSimulator(scenario, config, config_sha256).run(out_dir)
