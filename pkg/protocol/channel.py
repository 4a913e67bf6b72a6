"""In-process classical channel between the transmitter and receiver agents."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Tuple, Type

from core.errors import DecodeError, ProtocolViolation
from core.rng import RandomBitSource
from protocol.messages import Abort, SiftingMessage, decode_frame, encode_frame

logger = logging.getLogger(__name__)

ROLES = ("tx", "rx")


@dataclass(frozen=True)
class TranscriptEntry:
    """One frame as it went onto the wire."""

    sender: str
    seq: int
    frame: bytes
    delivered: bool


class ClassicalChannel:
    """
    Ordered frame delivery with optional loss and reordering injection.

    Frames are encoded on send and decoded on receive, so every message
    crosses the wire format. The receiving endpoint checks sequence
    numbers; a lost or reordered frame surfaces as ProtocolViolation.
    """

    def __init__(
        self,
        loss_prob: float = 0.0,
        reorder_prob: float = 0.0,
        rng: Optional[RandomBitSource] = None,
    ):
        if not 0 <= loss_prob <= 1 or not 0 <= reorder_prob <= 1:
            raise ProtocolViolation("loss and reorder probabilities must lie in [0, 1]")
        if (loss_prob or reorder_prob) and rng is None:
            raise ProtocolViolation("fault injection needs a random source")
        self.loss_prob = loss_prob
        self.reorder_prob = reorder_prob
        self.rng = rng
        self.transcript: List[TranscriptEntry] = []
        self._queues: Dict[str, Deque[Tuple[int, bytes]]] = {r: deque() for r in ROLES}
        self._next_send = {r: 0 for r in ROLES}
        self._next_recv = {r: 0 for r in ROLES}

    def endpoint(self, role: str) -> "Endpoint":
        if role not in ROLES:
            raise ProtocolViolation(f"unknown channel role {role!r}")
        return Endpoint(self, role)

    def _send(self, sender: str, message: SiftingMessage) -> None:
        seq = self._next_send[sender]
        self._next_send[sender] += 1
        frame = encode_frame(message, seq)
        peer = _peer(sender)
        lost = self.loss_prob > 0 and self.rng.uniform() < self.loss_prob
        self.transcript.append(TranscriptEntry(sender, seq, frame, not lost))
        if lost:
            logger.debug(f"Dropped {sender} frame {seq} ({type(message).__name__})")
            return
        queue = self._queues[peer]
        if queue and self.reorder_prob > 0 and self.rng.uniform() < self.reorder_prob:
            queue.insert(len(queue) - 1, (seq, frame))
            logger.debug(f"Reordered {sender} frame {seq}")
        else:
            queue.append((seq, frame))

    def _receive(self, receiver: str) -> SiftingMessage:
        queue = self._queues[receiver]
        expected = self._next_recv[receiver]
        if not queue:
            raise ProtocolViolation(f"{receiver} expected frame {expected}, nothing was delivered")
        _, frame = queue.popleft()
        try:
            message, seq, _ = decode_frame(frame)
        except DecodeError as e:
            raise ProtocolViolation(f"{receiver} received an undecodable frame: {e}") from e
        if seq != expected:
            raise ProtocolViolation(f"{receiver} expected sequence {expected}, got {seq}")
        self._next_recv[receiver] += 1
        return message

    def pending(self, role: str) -> int:
        return len(self._queues[role])

    def transcript_bytes(self) -> bytes:
        """All frames in send order, as an observer on the wire sees them."""
        return b"".join(e.frame for e in self.transcript)


class Endpoint:
    """One side's view of the channel."""

    def __init__(self, channel: ClassicalChannel, role: str):
        self.channel = channel
        self.role = role

    def send(self, message: SiftingMessage) -> None:
        self.channel._send(self.role, message)

    def receive(self, expected: Type[SiftingMessage]) -> SiftingMessage:
        """
        Receive the next message, which must be of type `expected`.

        Raises:
            ProtocolViolation: Missing, out-of-sequence or unexpected message,
                or the peer aborted
        """
        message = self.channel._receive(self.role)
        if isinstance(message, Abort) and expected is not Abort:
            raise ProtocolViolation(f"peer aborted (code {message.code}): {message.reason}")
        if not isinstance(message, expected):
            raise ProtocolViolation(
                f"{self.role} expected {expected.__name__}, got {type(message).__name__}"
            )
        return message


def _peer(role: str) -> str:
    return "rx" if role == "tx" else "tx"
