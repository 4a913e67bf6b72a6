"""Protocol stage: sifting, parameter estimation and key accounting."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from core.base_stage import BaseStage
from core.domain import IntensityLabel
from core.errors import ConfigurationError, ProtocolViolation
from core.rng import RandomBitSource
from protocol.channel import ClassicalChannel
from protocol.estimation import (
    DEFAULT_EC_EFFICIENCY,
    QBER_ABORT_THRESHOLD,
    DecoyStatistics,
    decoy_bounds,
    qber_confidence_interval,
    secure_key_length,
    single_photon_fraction,
)
from protocol.messages import Abort
from protocol.report import KeyRateReport
from protocol.sifting import (
    ReceiverAgent,
    SentRecord,
    SiftedKey,
    TransmitterAgent,
    audit_transcript,
    check_partition,
    classify_detections,
    estimate_qber,
    run_reconciliation,
)
from receiver.sync import Detections

logger = logging.getLogger(__name__)

ABORT_QBER = 1
ABORT_PROTOCOL = 2


@dataclass(frozen=True)
class ProtocolConfig:
    sample_fraction: float = 0.1
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY
    qber_threshold: float = QBER_ABORT_THRESHOLD
    # Fault injection on the classical channel.
    loss_prob: float = 0.0
    reorder_prob: float = 0.0

    def __post_init__(self):
        if not 0 < self.sample_fraction < 1:
            raise ConfigurationError(f"sample_fraction must lie in (0, 1), got {self.sample_fraction}")
        if self.ec_efficiency < 1:
            raise ConfigurationError(f"ec_efficiency must be >= 1, got {self.ec_efficiency}")
        if not 0 < self.qber_threshold <= 0.5:
            raise ConfigurationError(f"qber_threshold must lie in (0, 0.5], got {self.qber_threshold}")
        for name in ("loss_prob", "reorder_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProtocolConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown protocol keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class SessionOutcome:
    report: KeyRateReport
    transmitter_key: SiftedKey
    receiver_key: SiftedKey
    stats: Optional[DecoyStatistics]
    partition: Dict[str, np.ndarray]
    channel: ClassicalChannel
    leaked: List[int] = field(default_factory=list)


def _empty_key(role: str) -> SiftedKey:
    return SiftedKey(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint8), role)


class ProtocolStage(BaseStage):
    """
    Runs the classical post-processing once the pass's detections are in.

    A broken exchange (loss, reordering, inconsistent data) ends the
    session with an aborted report rather than an exception.
    """

    name = "protocol"

    def __init__(self, config: Dict[str, Any], params: ProtocolConfig):
        super().__init__(config)
        self.params = params
        self.outcome: Optional[SessionOutcome] = None

    def run(
        self,
        sent: SentRecord,
        detections: Detections,
        rng: RandomBitSource,
        session_id: str = "",
        pulse_rate_hz: float = 0.0,
    ) -> SessionOutcome:
        """
        Run one session over a fresh classical channel.

        Args:
            sent: Transmitter record of every pulse sent in the pass
            detections: Receiver's single-port detections
            rng: Protocol substream; QBER sampling and channel faults draw from children
            session_id: Label carried in the session header and reports
            pulse_rate_hz: Pulse clock announced in the session header
        """
        p = self.params
        channel = ClassicalChannel(p.loss_prob, p.reorder_prob, rng.substream("classical-channel"))
        tx = TransmitterAgent(sent, channel.endpoint("tx"), session_id, pulse_rate_hz)
        rx = ReceiverAgent(detections, channel.endpoint("rx"))

        try:
            stats = run_reconciliation(tx, rx)
            kt, kr = tx.sifted_key(), rx.sifted_key()
            qber, kt_rest, kr_rest = estimate_qber(
                kt, kr, p.sample_fraction, rng.substream("qber-sample"), channel
            )
        except ProtocolViolation as e:
            logger.error(f"Session {session_id} aborted: {e}")
            report = KeyRateReport.aborted_session(session_id, f"protocol violation: {e}", p.ec_efficiency)
            partition = {}
            if tx.reconciliation is not None:
                partition = classify_detections(tx.reconciliation, np.zeros(0, dtype=np.int64))
            self.outcome = SessionOutcome(
                report, _empty_key("transmitter"), _empty_key("receiver"), tx.stats, partition, channel
            )
            return self.outcome

        sampled = np.setdiff1d(kt.indices, kt_rest.indices)
        stats = stats.with_errors(
            IntensityLabel.SIGNAL,
            len(sampled),
            int(round(qber * len(sampled))),
        )
        partition = classify_detections(tx.reconciliation, sampled)
        if not check_partition(partition, tx.reconciliation.indices):
            raise ProtocolViolation("detections do not partition into the reporting categories")

        mu_s = sent.mu(IntensityLabel.SIGNAL)
        mu_d = sent.mu(IntensityLabel.DECOY)
        y1_lower, e1_upper = decoy_bounds(stats, mu_s, mu_d)
        y1_fraction = single_photon_fraction(y1_lower, mu_s, stats.signal.gain)
        qber_low, qber_high = qber_confidence_interval(qber, len(sampled))

        aborted = qber >= p.qber_threshold
        reason = ""
        if aborted:
            reason = f"qber {qber:.4f} reached the abort threshold {p.qber_threshold}"
            channel.endpoint("tx").send(Abort(ABORT_QBER, reason))
            logger.error(f"Session {session_id} aborted: {reason}")
            secure = 0
        else:
            secure = secure_key_length(
                len(kt_rest), qber, y1_fraction, e1_upper, p.ec_efficiency, p.qber_threshold
            )

        report = KeyRateReport(
            session_id=session_id,
            sifted_length=len(kt),
            sampled_length=len(sampled),
            qber=qber,
            qber_low=qber_low,
            qber_high=qber_high,
            y1_lower=y1_lower,
            e1_upper=e1_upper,
            single_photon_fraction=y1_fraction,
            secure_length=secure,
            ec_efficiency=p.ec_efficiency,
            aborted=aborted,
            abort_reason=reason,
        )
        leaked = audit_transcript(channel.transcript, kt_rest.indices)
        if aborted:
            kt_rest, kr_rest = _empty_key("transmitter"), _empty_key("receiver")
        self.outcome = SessionOutcome(report, kt_rest, kr_rest, stats, partition, channel, leaked)
        return self.outcome

    def summarize(self) -> Dict[str, Any]:
        if self.outcome is None:
            return {"ran": False}
        o = self.outcome
        summary: Dict[str, Any] = {
            "ran": True,
            "key_rate": o.report.to_dict(),
            "partition": {k: len(v) for k, v in o.partition.items()},
            "frames": len(o.channel.transcript),
            "transcript_bytes": len(o.channel.transcript_bytes()),
            "leaked_bits": len(o.leaked),
        }
        if o.stats is not None:
            summary["decoy_statistics"] = o.stats.to_dict()
        return summary

    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        if not summary.get("ran"):
            return ["protocol: not run"]
        r = summary["key_rate"]
        lines = [
            f"protocol: sifted {r['sifted_length']} bits, qber {r['qber']:.4f} "
            f"({r['sampled_length']} sampled), secure {r['secure_length']} bits ({r['analysis']})",
            f"protocol: y1_lower {r['y1_lower']:.4e}, e1_upper {r['e1_upper']:.4f}",
        ]
        if r["aborted"]:
            lines.append(f"protocol: aborted, {r['abort_reason']}")
        return lines
