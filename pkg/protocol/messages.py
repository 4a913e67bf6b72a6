"""
Wire format for the classical sifting exchange.

Every frame is a 10-byte little-endian header followed by the payload:

    version  u8
    type     u8
    seq      u32   per-direction sequence number
    length   u32   payload bytes

Index lists are sent as a u32 count followed by LEB128 varints of the
gaps between consecutive sorted indices (the first gap is taken from 0).
Bit and basis lists are a u32 count followed by MSB-first packed bits;
intensity classes pack four 2-bit codes per byte.
"""

import logging
import struct
from dataclasses import dataclass, fields
from enum import IntEnum
from typing import Callable, Dict, Iterator, Tuple, Type, Union

import numpy as np

from core.errors import DecodeError, ProtocolViolation, UnsupportedVersionError

logger = logging.getLogger(__name__)

WIRE_VERSION = 1
HEADER = struct.Struct("<BBII")
COUNT = struct.Struct("<I")
# Indices are u32 on the wire; a varint gap never needs more than 5 bytes.
MAX_INDEX = 2**32 - 1
MAX_VARINT_BYTES = 5


class MessageType(IntEnum):
    SESSION_HEADER = 1
    DETECTION_REPORT = 2
    BASIS_REVEAL = 3
    INTENSITY_DECLARATION = 4
    SAMPLE_REQUEST = 5
    SAMPLE_REVEAL = 6
    ABORT = 7


class _Message:
    """Field-wise equality that understands numpy array fields."""

    kind: MessageType

    def __eq__(self, other) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(np.asarray(a), np.asarray(b)):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def _uint_array(values, dtype) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=dtype).reshape(-1))


@dataclass(eq=False)
class SessionHeader(_Message):
    """Opens a session: pulse clock, intensities and the bit convention."""

    session_id: str
    pulse_rate_hz: float
    signal_mu: float
    decoy_mu: float
    bit_convention: int
    pulses_sent: int

    kind = MessageType.SESSION_HEADER


@dataclass(eq=False)
class DetectionReport(_Message):
    """Receiver's sorted list of pulse indices with one detection."""

    indices: np.ndarray

    kind = MessageType.DETECTION_REPORT

    def __post_init__(self):
        self.indices = _uint_array(self.indices, np.int64)


@dataclass(eq=False)
class BasisReveal(_Message):
    """One basis bit (0 = HV, 1 = DA) per reported index, in report order."""

    bases: np.ndarray

    kind = MessageType.BASIS_REVEAL

    def __post_init__(self):
        self.bases = _uint_array(self.bases, np.uint8)


@dataclass(eq=False)
class IntensityDeclaration(_Message):
    """Transmitter's class code per reported index, in report order."""

    classes: np.ndarray

    kind = MessageType.INTENSITY_DECLARATION

    def __post_init__(self):
        self.classes = _uint_array(self.classes, np.uint8)


@dataclass(eq=False)
class SampleRequest(_Message):
    """Indices whose bit values are to be disclosed."""

    indices: np.ndarray

    kind = MessageType.SAMPLE_REQUEST

    def __post_init__(self):
        self.indices = _uint_array(self.indices, np.int64)


@dataclass(eq=False)
class SampleReveal(_Message):
    """Bit values for the most recent SampleRequest, in request order."""

    bits: np.ndarray

    kind = MessageType.SAMPLE_REVEAL

    def __post_init__(self):
        self.bits = _uint_array(self.bits, np.uint8)


@dataclass(eq=False)
class Abort(_Message):
    code: int
    reason: str

    kind = MessageType.ABORT


SiftingMessage = Union[
    SessionHeader,
    DetectionReport,
    BasisReveal,
    IntensityDeclaration,
    SampleRequest,
    SampleReveal,
    Abort,
]


# --- varints -----------------------------------------------------------------


def encode_varints(values: np.ndarray) -> bytes:
    """LEB128-encode non-negative integers below 2**35."""
    values = np.asarray(values, dtype=np.uint64)
    if len(values) == 0:
        return b""
    groups = np.stack(
        [(values >> np.uint64(7 * k)) & np.uint64(0x7F) for k in range(MAX_VARINT_BYTES)],
        axis=1,
    ).astype(np.uint8)
    nbytes = np.ones(len(values), dtype=np.int64)
    for k in range(1, MAX_VARINT_BYTES):
        nbytes += values >= np.uint64(1 << (7 * k))
    used = np.arange(MAX_VARINT_BYTES) < nbytes[:, None]
    more = np.arange(MAX_VARINT_BYTES) < (nbytes - 1)[:, None]
    groups[more] |= 0x80
    return groups[used].tobytes()


def decode_varints(data: bytes, count: int, offset: int) -> Tuple[np.ndarray, int]:
    """
    Decode `count` LEB128 varints from `data[offset:]`.

    Returns:
        (values, offset after the last varint)
    """
    if count == 0:
        return np.zeros(0, dtype=np.int64), offset
    if offset >= len(data):
        raise DecodeError(f"truncated varint list, 0 of {count} values", offset)
    raw = np.frombuffer(data, dtype=np.uint8, offset=offset)
    ends = np.flatnonzero((raw & 0x80) == 0)
    if len(ends) < count:
        raise DecodeError(f"truncated varint list, {len(ends)} of {count} values", len(data))
    ends = ends[:count]
    starts = np.concatenate([[0], ends[:-1] + 1])
    lengths = ends - starts + 1
    if np.any(lengths > MAX_VARINT_BYTES):
        bad = int(starts[np.argmax(lengths > MAX_VARINT_BYTES)])
        raise DecodeError("varint longer than 5 bytes", offset + bad)
    body = raw[: ends[-1] + 1].astype(np.int64)
    position = np.arange(len(body)) - np.repeat(starts, lengths)
    contrib = (body & 0x7F) << (7 * position)
    values = np.add.reduceat(contrib, starts)
    return values, offset + int(ends[-1]) + 1


# --- payload codecs ----------------------------------------------------------


class _Reader:
    """Cursor over one payload; offsets reported are absolute in the frame."""

    def __init__(self, data: bytes, start: int, end: int):
        self.data = data
        self.pos = start
        self.end = end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise DecodeError(f"payload truncated, need {n} bytes", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))

    def finish(self) -> None:
        if self.pos != self.end:
            raise DecodeError(f"{self.end - self.pos} unexpected trailing bytes", self.pos)


def _encode_indices(indices: np.ndarray) -> bytes:
    if len(indices):
        if indices[0] < 0 or indices[-1] > MAX_INDEX:
            raise ProtocolViolation("pulse index outside the u32 wire range")
        if np.any(np.diff(indices) <= 0):
            raise ProtocolViolation("index lists must be strictly increasing")
    gaps = np.diff(indices, prepend=0) if len(indices) else indices
    return COUNT.pack(len(indices)) + encode_varints(gaps)


def _decode_indices(r: _Reader) -> np.ndarray:
    (count,) = r.unpack(COUNT)
    start = r.pos
    gaps, end = decode_varints(memoryview(r.data)[: r.end], count, r.pos)
    if count > 1 and np.any(gaps[1:] == 0):
        raise DecodeError("repeated index in delta list", start)
    r.pos = end
    return np.cumsum(gaps)


def _encode_bits(bits: np.ndarray) -> bytes:
    if np.any(bits > 1):
        raise ProtocolViolation("bit lists carry only 0 or 1")
    return COUNT.pack(len(bits)) + np.packbits(bits).tobytes()


def _decode_bits(r: _Reader) -> np.ndarray:
    (count,) = r.unpack(COUNT)
    packed = np.frombuffer(r.take((count + 7) // 8), dtype=np.uint8)
    return np.unpackbits(packed, count=count)


def _encode_classes(classes: np.ndarray) -> bytes:
    if np.any(classes > 2):
        raise ProtocolViolation("intensity class codes are 0, 1 or 2")
    padded = np.zeros(-(-len(classes) // 4) * 4, dtype=np.uint8)
    padded[: len(classes)] = classes
    quads = padded.reshape(-1, 4)
    packed = (quads[:, 0] << 6) | (quads[:, 1] << 4) | (quads[:, 2] << 2) | quads[:, 3]
    return COUNT.pack(len(classes)) + packed.astype(np.uint8).tobytes()


def _decode_classes(r: _Reader) -> np.ndarray:
    (count,) = r.unpack(COUNT)
    start = r.pos
    packed = np.frombuffer(r.take((count + 3) // 4), dtype=np.uint8)
    quads = np.stack([(packed >> s) & 0x3 for s in (6, 4, 2, 0)], axis=1).reshape(-1)
    classes = quads[:count].astype(np.uint8)
    if np.any(classes > 2):
        raise DecodeError("unknown intensity class code", start + int(np.argmax(classes > 2)) // 4)
    return classes


def _encode_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolViolation("text field longer than 65535 bytes")
    return struct.pack("<H", len(raw)) + raw


def _decode_text(r: _Reader) -> str:
    start = r.pos
    (n,) = r.unpack(struct.Struct("<H"))
    try:
        return r.take(n).decode("utf-8")
    except UnicodeDecodeError:
        raise DecodeError("text field is not UTF-8", start) from None


_SESSION = struct.Struct("<dddBQ")
_ABORT_CODE = struct.Struct("<H")


def _encode_payload(m: SiftingMessage) -> bytes:
    if isinstance(m, SessionHeader):
        return _encode_text(m.session_id) + _SESSION.pack(
            m.pulse_rate_hz, m.signal_mu, m.decoy_mu, m.bit_convention, m.pulses_sent
        )
    if isinstance(m, (DetectionReport, SampleRequest)):
        return _encode_indices(m.indices)
    if isinstance(m, BasisReveal):
        return _encode_bits(m.bases)
    if isinstance(m, SampleReveal):
        return _encode_bits(m.bits)
    if isinstance(m, IntensityDeclaration):
        return _encode_classes(m.classes)
    if isinstance(m, Abort):
        return _ABORT_CODE.pack(m.code) + _encode_text(m.reason)
    raise ProtocolViolation(f"not a sifting message: {type(m).__name__}")


def _decode_session(r: _Reader) -> SessionHeader:
    session_id = _decode_text(r)
    rate, signal_mu, decoy_mu, convention, sent = r.unpack(_SESSION)
    return SessionHeader(session_id, rate, signal_mu, decoy_mu, convention, sent)


def _decode_abort(r: _Reader) -> Abort:
    (code,) = r.unpack(_ABORT_CODE)
    return Abort(code, _decode_text(r))


_DECODERS: Dict[MessageType, Callable[[_Reader], SiftingMessage]] = {
    MessageType.SESSION_HEADER: _decode_session,
    MessageType.DETECTION_REPORT: lambda r: DetectionReport(_decode_indices(r)),
    MessageType.BASIS_REVEAL: lambda r: BasisReveal(_decode_bits(r)),
    MessageType.INTENSITY_DECLARATION: lambda r: IntensityDeclaration(_decode_classes(r)),
    MessageType.SAMPLE_REQUEST: lambda r: SampleRequest(_decode_indices(r)),
    MessageType.SAMPLE_REVEAL: lambda r: SampleReveal(_decode_bits(r)),
    MessageType.ABORT: _decode_abort,
}

MESSAGE_CLASSES: Dict[MessageType, Type[_Message]] = {
    cls.kind: cls
    for cls in (
        SessionHeader,
        DetectionReport,
        BasisReveal,
        IntensityDeclaration,
        SampleRequest,
        SampleReveal,
        Abort,
    )
}


# --- frames ------------------------------------------------------------------


def encode_frame(m: SiftingMessage, seq: int = 0) -> bytes:
    """Encode one message as a versioned, length-prefixed frame."""
    payload = _encode_payload(m)
    return HEADER.pack(WIRE_VERSION, int(m.kind), seq, len(payload)) + payload


def decode_frame(data: bytes, offset: int = 0) -> Tuple[SiftingMessage, int, int]:
    """
    Decode the frame starting at `offset`.

    Returns:
        (message, sequence number, offset just past the frame)

    Raises:
        UnsupportedVersionError: Unknown wire version
        DecodeError: Truncated or garbled bytes, naming the offset
    """
    if len(data) - offset < HEADER.size:
        raise DecodeError(f"frame header truncated ({len(data) - offset} bytes)", offset)
    version, kind, seq, length = HEADER.unpack_from(data, offset)
    if version != WIRE_VERSION:
        raise UnsupportedVersionError(f"wire version {version} (expected {WIRE_VERSION})", offset)
    try:
        kind = MessageType(kind)
    except ValueError:
        raise DecodeError(f"unknown message type {kind}", offset + 1) from None
    start = offset + HEADER.size
    end = start + length
    if end > len(data):
        raise DecodeError(f"payload length {length} runs past the end of the data", offset + 6)
    reader = _Reader(data, start, end)
    message = _DECODERS[kind](reader)
    reader.finish()
    return message, seq, end


def encode_message(m: SiftingMessage) -> bytes:
    return encode_frame(m, 0)


def decode_message(data: bytes) -> SiftingMessage:
    """Decode exactly one frame."""
    message, _, end = decode_frame(data)
    if end != len(data):
        raise DecodeError(f"{len(data) - end} bytes after the frame", end)
    return message


def iter_frames(data: bytes) -> Iterator[Tuple[SiftingMessage, int]]:
    """Walk a concatenated frame stream."""
    offset = 0
    while offset < len(data):
        message, seq, offset = decode_frame(data, offset)
        yield message, seq
