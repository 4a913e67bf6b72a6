"""
Basis reconciliation between the transmitter and receiver agents.

Each agent holds only its own data and talks to the other through a
ClassicalChannel endpoint:

    tx -> SessionHeader
    rx -> DetectionReport, BasisReveal
    tx -> BasisReveal, IntensityDeclaration
    tx -> SampleRequest    (matching-basis decoy and vacuum detections)
    rx -> SampleReveal

Matching-basis signal detections become the sifted keys.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.domain import (
    BASIS_BY_CODE,
    BIT_BY_CODE,
    BIT_CONVENTION,
    IntensityClass,
    IntensityLabel,
    PulseBatch,
)
from core.errors import ProtocolViolation
from core.rng import RandomBitSource
from protocol.channel import ClassicalChannel, Endpoint, TranscriptEntry
from protocol.estimation import ClassStatistics, DecoyStatistics
from protocol.messages import (
    BasisReveal,
    DetectionReport,
    IntensityDeclaration,
    SampleRequest,
    SampleReveal,
    SessionHeader,
    decode_frame,
)
from receiver.sync import Detections

logger = logging.getLogger(__name__)

PARTITION_KEYS = ("sifted", "wrong_basis", "decoy_stat", "vacuum_stat", "sampled")


@dataclass
class SentRecord:
    """Compact transmitter-side view of the pulses sent: index, state, class."""

    indices: np.ndarray
    pols: np.ndarray
    intensity: np.ndarray
    classes: Tuple[IntensityClass, ...]

    def __len__(self) -> int:
        return len(self.indices)

    @staticmethod
    def from_batch(batch: PulseBatch) -> "SentRecord":
        return SentRecord(
            batch.index.astype(np.int64),
            batch.pol.astype(np.int8),
            batch.intensity.astype(np.int8),
            batch.classes,
        )

    @staticmethod
    def concat(parts: Sequence["SentRecord"], classes: Tuple[IntensityClass, ...]) -> "SentRecord":
        if not parts:
            empty = np.zeros(0, dtype=np.int8)
            return SentRecord(np.zeros(0, dtype=np.int64), empty, empty.copy(), classes)
        return SentRecord(
            np.concatenate([p.indices for p in parts]),
            np.concatenate([p.pols for p in parts]),
            np.concatenate([p.intensity for p in parts]),
            classes,
        )

    def sent_per_class(self) -> np.ndarray:
        return np.bincount(self.intensity, minlength=3)[:3]

    def mu(self, label: IntensityLabel) -> float:
        return self.classes[label.code].mean_photon_number


@dataclass
class SiftedKey:
    """Sifted key of one side. Indices are strictly increasing."""

    indices: np.ndarray
    bits: np.ndarray
    role: str

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if len(self.indices) != len(self.bits):
            raise ProtocolViolation(f"{self.role} key has {len(self.indices)} indices, {len(self.bits)} bits")
        if np.any(np.diff(self.indices) <= 0):
            raise ProtocolViolation(f"{self.role} key indices are not strictly increasing")

    def __len__(self) -> int:
        return len(self.indices)

    def without(self, positions: np.ndarray) -> "SiftedKey":
        keep = np.ones(len(self), dtype=bool)
        keep[positions] = False
        return SiftedKey(self.indices[keep], self.bits[keep], self.role)

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()


@dataclass
class Reconciliation:
    """Outcome of basis reconciliation, identical on both sides."""

    indices: np.ndarray
    matched: np.ndarray
    classes: np.ndarray

    def selected(self, label: IntensityLabel) -> np.ndarray:
        return self.matched & (self.classes == label.code)


class TransmitterAgent:
    """Satellite side of the classical exchange."""

    def __init__(
        self,
        sent: SentRecord,
        endpoint: Endpoint,
        session_id: str = "",
        pulse_rate_hz: float = 0.0,
    ):
        order = np.argsort(sent.indices, kind="stable")
        self.sent = SentRecord(
            sent.indices[order], sent.pols[order], sent.intensity[order], sent.classes
        )
        self.endpoint = endpoint
        self.session_id = session_id
        self.pulse_rate_hz = pulse_rate_hz
        self.state = "idle"
        self.reconciliation: Optional[Reconciliation] = None
        self._pols: Optional[np.ndarray] = None
        self.stats: Optional[DecoyStatistics] = None

    def _expect(self, state: str) -> None:
        if self.state != state:
            raise ProtocolViolation(f"transmitter in state {self.state!r}, expected {state!r}")

    def open(self) -> None:
        self._expect("idle")
        self.endpoint.send(
            SessionHeader(
                session_id=self.session_id,
                pulse_rate_hz=self.pulse_rate_hz,
                signal_mu=self.sent.mu(IntensityLabel.SIGNAL),
                decoy_mu=self.sent.mu(IntensityLabel.DECOY),
                bit_convention=BIT_CONVENTION,
                pulses_sent=len(self.sent),
            )
        )
        self.state = "open"

    def reconcile(self) -> Reconciliation:
        """Receive the detection report and answer with bases and classes."""
        self._expect("open")
        report = self.endpoint.receive(DetectionReport)
        rx_bases = self.endpoint.receive(BasisReveal).bases
        indices = report.indices
        if len(rx_bases) != len(indices):
            raise ProtocolViolation(
                f"basis reveal carries {len(rx_bases)} bases for {len(indices)} detections"
            )
        if len(indices) and len(self.sent) == 0:
            raise ProtocolViolation("receiver reported detections but no pulses were sent")
        pos = np.minimum(np.searchsorted(self.sent.indices, indices), max(len(self.sent) - 1, 0))
        if len(indices):
            unknown = self.sent.indices[pos] != indices
            if np.any(unknown):
                raise ProtocolViolation(
                    f"receiver reported pulse {indices[unknown][0]}, which was never sent"
                )
            pols = self.sent.pols[pos]
            classes = self.sent.intensity[pos].astype(np.uint8)
        else:
            pols = np.zeros(0, dtype=np.int8)
            classes = np.zeros(0, dtype=np.uint8)
        tx_bases = BASIS_BY_CODE[pols]
        self.endpoint.send(BasisReveal(tx_bases))
        self.endpoint.send(IntensityDeclaration(classes))

        self._pols = pols
        self.reconciliation = Reconciliation(indices, tx_bases == rx_bases, classes)
        sent = self.sent.sent_per_class()
        detected = np.bincount(classes, minlength=3)[:3]
        self.stats = DecoyStatistics(
            *(
                ClassStatistics(label, self.sent.mu(label), int(sent[label.code]), int(detected[label.code]))
                for label in (IntensityLabel.SIGNAL, IntensityLabel.DECOY, IntensityLabel.VACUUM)
            )
        )
        self.state = "reconciled"
        return self.reconciliation

    def request_decoy_bits(self) -> None:
        """Ask for the receiver's bits on matching-basis decoy and vacuum detections."""
        self._expect("reconciled")
        rec = self.reconciliation
        wanted = rec.selected(IntensityLabel.DECOY) | rec.selected(IntensityLabel.VACUUM)
        self.endpoint.send(SampleRequest(rec.indices[wanted]))
        self.state = "decoy_requested"

    def conclude_decoy_bits(self) -> DecoyStatistics:
        self._expect("decoy_requested")
        rec = self.reconciliation
        wanted = rec.selected(IntensityLabel.DECOY) | rec.selected(IntensityLabel.VACUUM)
        revealed = self.endpoint.receive(SampleReveal).bits
        if len(revealed) != int(np.count_nonzero(wanted)):
            raise ProtocolViolation(
                f"sample reveal carries {len(revealed)} bits for {np.count_nonzero(wanted)} requested"
            )
        own = BIT_BY_CODE[self._pols[wanted]]
        wrong = own != revealed
        wanted_classes = rec.classes[wanted]
        for label in (IntensityLabel.DECOY, IntensityLabel.VACUUM):
            in_class = wanted_classes == label.code
            self.stats = self.stats.with_errors(
                label, int(np.count_nonzero(in_class)), int(np.count_nonzero(wrong & in_class))
            )
        self.state = "sifted"
        return self.stats

    def sifted_key(self) -> SiftedKey:
        if self.state not in ("reconciled", "decoy_requested", "sifted"):
            raise ProtocolViolation("transmitter has no reconciliation yet")
        keep = self.reconciliation.selected(IntensityLabel.SIGNAL)
        return SiftedKey(self.reconciliation.indices[keep], BIT_BY_CODE[self._pols[keep]], "transmitter")


class ReceiverAgent:
    """Ground side of the classical exchange."""

    def __init__(self, detections: Detections, endpoint: Endpoint):
        order = np.argsort(detections.indices, kind="stable")
        self.indices = detections.indices[order].astype(np.int64)
        self.ports = detections.ports[order]
        if np.any(np.diff(self.indices) <= 0):
            raise ProtocolViolation("receiver holds more than one detection for a pulse index")
        self.endpoint = endpoint
        self.state = "idle"
        self.header: Optional[SessionHeader] = None
        self.reconciliation: Optional[Reconciliation] = None

    def _expect(self, state: str) -> None:
        if self.state != state:
            raise ProtocolViolation(f"receiver in state {self.state!r}, expected {state!r}")

    def report(self) -> None:
        """Accept the session header and report detections with bases."""
        self._expect("idle")
        self.header = self.endpoint.receive(SessionHeader)
        if self.header.bit_convention != BIT_CONVENTION:
            raise ProtocolViolation(
                f"bit convention {self.header.bit_convention} does not match {BIT_CONVENTION}"
            )
        self.endpoint.send(DetectionReport(self.indices))
        self.endpoint.send(BasisReveal(BASIS_BY_CODE[self.ports]))
        self.state = "reported"

    def accept_reconciliation(self) -> Reconciliation:
        self._expect("reported")
        tx_bases = self.endpoint.receive(BasisReveal).bases
        classes = self.endpoint.receive(IntensityDeclaration).classes
        if len(tx_bases) != len(self.indices) or len(classes) != len(self.indices):
            raise ProtocolViolation("reconciliation lengths do not match the detection report")
        self.reconciliation = Reconciliation(
            self.indices, tx_bases == BASIS_BY_CODE[self.ports], classes
        )
        self.state = "reconciled"
        return self.reconciliation

    def reveal_decoy_bits(self) -> None:
        self._expect("reconciled")
        request = self.endpoint.receive(SampleRequest).indices
        rec = self.reconciliation
        allowed = rec.indices[rec.selected(IntensityLabel.DECOY) | rec.selected(IntensityLabel.VACUUM)]
        if not np.all(np.isin(request, allowed)):
            raise ProtocolViolation("transmitter asked for bits outside the decoy and vacuum sets")
        pos = np.searchsorted(self.indices, request)
        self.endpoint.send(SampleReveal(BIT_BY_CODE[self.ports[pos]]))
        self.state = "sifted"

    def sifted_key(self) -> SiftedKey:
        if self.reconciliation is None:
            raise ProtocolViolation("receiver has no reconciliation yet")
        keep = self.reconciliation.selected(IntensityLabel.SIGNAL)
        return SiftedKey(self.indices[keep], BIT_BY_CODE[self.ports[keep]], "receiver")


def run_reconciliation(tx: TransmitterAgent, rx: ReceiverAgent) -> DecoyStatistics:
    """Drive both agents through the exchange in wire order."""
    tx.open()
    rx.report()
    tx.reconcile()
    rx.accept_reconciliation()
    tx.request_decoy_bits()
    rx.reveal_decoy_bits()
    return tx.conclude_decoy_bits()


def sift(
    sent: SentRecord,
    received: Detections,
    channel: ClassicalChannel,
    session_id: str = "",
    pulse_rate_hz: float = 0.0,
) -> Tuple[SiftedKey, SiftedKey, DecoyStatistics]:
    """
    Reconcile bases over `channel` and build both sifted keys.

    Raises:
        ProtocolViolation: Ordering, loss or consistency failure in the exchange
    """
    tx = TransmitterAgent(sent, channel.endpoint("tx"), session_id, pulse_rate_hz)
    rx = ReceiverAgent(received, channel.endpoint("rx"))
    stats = run_reconciliation(tx, rx)
    kt, kr = tx.sifted_key(), rx.sifted_key()
    logger.info(f"Sifted {len(kt)} of {len(rx.indices)} detections")
    return kt, kr, stats


def estimate_qber(
    kt: SiftedKey,
    kr: SiftedKey,
    sample_fraction: float,
    rng: RandomBitSource,
    channel: ClassicalChannel,
) -> Tuple[float, SiftedKey, SiftedKey]:
    """
    Disclose a random sample of the sifted key and measure its error rate.

    The transmitter picks the sample and both sides reveal their bits at
    those indices; the sampled positions are dropped from both keys.

    Returns:
        (qber, remaining transmitter key, remaining receiver key)

    Raises:
        ProtocolViolation: Keys not index-aligned, or a broken exchange
    """
    if not 0 < sample_fraction < 1:
        raise ProtocolViolation(f"sample fraction must lie in (0, 1), got {sample_fraction}")
    if len(kt) != len(kr) or not np.array_equal(kt.indices, kr.indices):
        raise ProtocolViolation("sifted keys are not index-aligned")
    n = len(kt)
    if n == 0:
        return 0.0, kt, kr

    tx, rx = channel.endpoint("tx"), channel.endpoint("rx")
    k = max(1, int(round(n * sample_fraction)))
    positions = rng.sample_indices(n, k)
    tx.send(SampleRequest(kt.indices[positions]))

    requested = rx.receive(SampleRequest).indices
    rx_pos = np.searchsorted(kr.indices, requested)
    if np.any(rx_pos >= n) or not np.array_equal(kr.indices[np.minimum(rx_pos, n - 1)], requested):
        raise ProtocolViolation("sample request names indices outside the sifted key")
    rx.send(SampleReveal(kr.bits[rx_pos]))

    rx_bits = tx.receive(SampleReveal).bits
    if len(rx_bits) != k:
        raise ProtocolViolation(f"sample reveal carries {len(rx_bits)} bits, expected {k}")
    tx.send(SampleReveal(kt.bits[positions]))
    tx_bits = rx.receive(SampleReveal).bits

    errors = int(np.count_nonzero(rx_bits != kt.bits[positions]))
    if errors != int(np.count_nonzero(tx_bits != kr.bits[rx_pos])):
        raise ProtocolViolation("the two sides disagree on the sampled error count")
    qber = errors / k
    logger.info(f"QBER {qber:.4f} from {k} sampled bits ({errors} errors)")
    return qber, kt.without(positions), kr.without(rx_pos)


def classify_detections(
    reconciliation: Reconciliation, sampled_indices: np.ndarray
) -> Dict[str, np.ndarray]:
    """
    Partition every detected index into exactly one category.

    `sampled_indices` are signal key indices disclosed for the QBER estimate.
    """
    rec = reconciliation
    signal = rec.selected(IntensityLabel.SIGNAL)
    sampled = signal & np.isin(rec.indices, sampled_indices)
    return {
        "sifted": rec.indices[signal & ~sampled],
        "wrong_basis": rec.indices[~rec.matched],
        "decoy_stat": rec.indices[rec.selected(IntensityLabel.DECOY)],
        "vacuum_stat": rec.indices[rec.selected(IntensityLabel.VACUUM)],
        "sampled": rec.indices[sampled],
    }


def check_partition(partition: Dict[str, np.ndarray], detected: np.ndarray) -> bool:
    """True when the categories are disjoint and together cover `detected`."""
    merged = np.concatenate([partition[k] for k in PARTITION_KEYS])
    return len(merged) == len(detected) and np.array_equal(np.sort(merged), np.sort(detected))


def audit_transcript(
    transcript: List[TranscriptEntry], final_indices: np.ndarray
) -> List[int]:
    """
    Indices of the final key whose bit value appears anywhere on the wire.

    Bit values only travel in SampleReveal frames, which answer the most
    recent SampleRequest; every other frame type carries no bit values.
    """
    disclosed: List[np.ndarray] = []
    last_request = np.zeros(0, dtype=np.int64)
    for entry in transcript:
        message, _, _ = decode_frame(entry.frame)
        if isinstance(message, SampleRequest):
            last_request = message.indices
        elif isinstance(message, SampleReveal):
            disclosed.append(last_request[: len(message.bits)])
    if not disclosed:
        return []
    leaked = np.intersect1d(np.concatenate(disclosed), np.asarray(final_indices, dtype=np.int64))
    if len(leaked):
        logger.error(f"{len(leaked)} final key bits were disclosed on the classical channel")
    return [int(i) for i in leaked]
