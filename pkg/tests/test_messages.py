"""Tests for the sifting wire format."""

import pytest
import os
import struct
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.domain import BIT_CONVENTION
from core.errors import DecodeError, ProtocolViolation, UnsupportedVersionError
from protocol.messages import (
    HEADER,
    Abort,
    BasisReveal,
    DetectionReport,
    IntensityDeclaration,
    MessageType,
    SampleRequest,
    SampleReveal,
    SessionHeader,
    decode_frame,
    decode_message,
    decode_varints,
    encode_frame,
    encode_message,
    encode_varints,
    iter_frames,
)


def _frame(kind, payload, version=1, seq=0):
    return HEADER.pack(version, kind, seq, len(payload)) + payload


class TestLayout:
    """Test byte layout of frames."""

    @pytest.mark.unit
    def test_detection_report_bytes(self):
        """Test header fields and varint gaps."""
        frame = encode_frame(DetectionReport([3, 10, 200]), seq=5)

        assert frame == bytes([1, 2, 5, 0, 0, 0, 8, 0, 0, 0, 3, 0, 0, 0, 0x03, 0x07, 0xBE, 0x01])

    @pytest.mark.unit
    def test_bits_msb_first(self):
        """Test bit lists pack most significant bit first."""
        frame = encode_message(SampleReveal([1, 0, 1]))
        assert frame[HEADER.size :] == struct.pack("<I", 3) + bytes([0xA0])

    @pytest.mark.unit
    def test_classes_two_bits_each(self):
        """Test intensity classes pack four per byte."""
        frame = encode_message(IntensityDeclaration([0, 1, 2, 0, 2]))
        assert frame[HEADER.size :] == struct.pack("<I", 5) + bytes([0x18, 0x80])

    @pytest.mark.unit
    def test_varints(self):
        """Test LEB128 encoding of small and large values."""
        assert encode_varints(np.array([0, 127, 128, 300])) == bytes([0x00, 0x7F, 0x80, 0x01, 0xAC, 0x02])
        values, end = decode_varints(bytes([0xAC, 0x02, 0x05]), 2, 0)
        assert values.tolist() == [300, 5]
        assert end == 3


class TestRoundTrip:
    """Test decoding recovers representative messages."""

    @pytest.mark.unit
    def test_session_header(self):
        """Test the session header with its bit convention."""
        message = SessionHeader("pass-0001", 1e8, 0.8, 0.4, BIT_CONVENTION, 123_456_789)
        assert decode_message(encode_message(message)) == message

    @pytest.mark.unit
    def test_large_sparse_indices(self):
        """Test sparse indices near the u32 limit."""
        message = SampleRequest([0, 1, 2**31, 2**32 - 1])
        assert decode_message(encode_message(message)) == message

    @pytest.mark.unit
    def test_abort_text(self):
        """Test abort reasons carry UTF-8 text."""
        message = Abort(1, "qber 0.25 ≥ 0.11")
        assert decode_message(encode_message(message)) == message

    @pytest.mark.unit
    def test_empty_lists(self):
        """Test empty reports and reveals."""
        for message in (DetectionReport([]), BasisReveal([]), IntensityDeclaration([])):
            assert decode_message(encode_message(message)) == message

    @pytest.mark.unit
    def test_random_messages(self):
        """Test seeded random messages of every type decode to themselves."""
        rng = np.random.default_rng(7)
        alphabet = list("abcdefghij-_ 0123456789éλ≥")

        def text(max_len):
            return "".join(rng.choice(alphabet, size=int(rng.integers(0, max_len + 1))))

        def indices():
            n = int(rng.integers(0, 200))
            return np.unique(rng.integers(0, 2**32, size=n, dtype=np.int64))

        def bits():
            return rng.integers(0, 2, size=int(rng.integers(0, 200)))

        makers = [
            lambda: SessionHeader(
                text(20),
                float(rng.uniform(1e6, 1e9)),
                float(rng.uniform(0.5, 1.0)),
                float(rng.uniform(0.1, 0.5)),
                int(rng.integers(0, 2)),
                int(rng.integers(0, 2**62)),
            ),
            lambda: DetectionReport(indices()),
            lambda: BasisReveal(bits()),
            lambda: IntensityDeclaration(rng.integers(0, 3, size=int(rng.integers(0, 200)))),
            lambda: SampleRequest(indices()),
            lambda: SampleReveal(bits()),
            lambda: Abort(int(rng.integers(0, 2**16)), text(40)),
        ]
        for _ in range(50):
            for make in makers:
                message = make()
                assert decode_message(encode_message(message)) == message

    @pytest.mark.unit
    def test_dense_indices_compact(self):
        """Test consecutive indices take one byte each, well under four-byte words."""
        frame = encode_message(SampleRequest(list(range(1000))))

        assert len(frame) == HEADER.size + 4 + 1000
        assert len(frame) - HEADER.size - 4 < 4 * 1000

    @pytest.mark.unit
    def test_frame_stream(self):
        """Test concatenated frames decode in order with sequence numbers."""
        data = encode_frame(BasisReveal([0, 1]), 0) + encode_frame(SampleReveal([1]), 1)

        decoded = list(iter_frames(data))

        assert [seq for _, seq in decoded] == [0, 1]
        assert decoded[0][0] == BasisReveal([0, 1])


class TestDecodeErrors:
    """Test malformed input."""

    @pytest.mark.unit
    def test_every_truncation_fails(self):
        """Test every proper prefix of a frame is a decode error."""
        frame = encode_message(SessionHeader("s", 1e8, 0.8, 0.4, BIT_CONVENTION, 10))
        for cut in range(len(frame)):
            with pytest.raises(DecodeError):
                decode_message(frame[:cut])

    @pytest.mark.unit
    def test_truncated_payload_offset(self):
        """Test a short payload names the header length field."""
        frame = encode_message(DetectionReport([1, 2, 3]))
        with pytest.raises(DecodeError) as exc_info:
            decode_message(frame[:-1])
        assert exc_info.value.offset == 6

    @pytest.mark.unit
    def test_unsupported_version(self):
        """Test a future wire version is refused as such."""
        frame = _frame(MessageType.BASIS_REVEAL, struct.pack("<I", 0), version=2)
        with pytest.raises(UnsupportedVersionError):
            decode_message(frame)

    @pytest.mark.unit
    def test_unknown_type(self):
        """Test an unknown message type names byte 1."""
        with pytest.raises(DecodeError) as exc_info:
            decode_message(_frame(9, b""))
        assert exc_info.value.offset == 1

    @pytest.mark.unit
    def test_trailing_bytes(self):
        """Test bytes after a frame are refused."""
        with pytest.raises(DecodeError, match="after the frame"):
            decode_message(encode_message(SampleReveal([1])) + b"\x00")

    @pytest.mark.unit
    def test_repeated_index(self):
        """Test a zero gap after the first index is refused."""
        frame = _frame(MessageType.DETECTION_REPORT, struct.pack("<I", 2) + bytes([3, 0]))
        with pytest.raises(DecodeError, match="repeated"):
            decode_message(frame)

    @pytest.mark.unit
    def test_overlong_varint(self):
        """Test a six-byte varint is refused."""
        frame = _frame(MessageType.SAMPLE_REQUEST, struct.pack("<I", 1) + bytes([0x80] * 5 + [0x01]))
        with pytest.raises(DecodeError, match="longer than 5 bytes"):
            decode_message(frame)

    @pytest.mark.unit
    def test_bad_class_code(self):
        """Test the unused class code 3 is refused."""
        frame = _frame(MessageType.INTENSITY_DECLARATION, struct.pack("<I", 1) + bytes([0xC0]))
        with pytest.raises(DecodeError, match="intensity class"):
            decode_message(frame)

    @pytest.mark.unit
    def test_payload_padding_refused(self):
        """Test extra payload bytes inside a frame are refused."""
        frame = _frame(MessageType.SAMPLE_REVEAL, struct.pack("<I", 1) + bytes([0x80, 0x00]))
        with pytest.raises(DecodeError, match="trailing"):
            decode_frame(frame)


class TestEncodeChecks:
    """Test messages that cannot go on the wire."""

    @pytest.mark.unit
    def test_unsorted_indices(self):
        """Test index lists must increase."""
        with pytest.raises(ProtocolViolation):
            encode_message(DetectionReport([5, 3]))

    @pytest.mark.unit
    def test_index_range(self):
        """Test indices beyond u32 are refused."""
        with pytest.raises(ProtocolViolation):
            encode_message(SampleRequest([2**32]))

    @pytest.mark.unit
    def test_non_bits(self):
        """Test bit lists carry only 0 and 1."""
        with pytest.raises(ProtocolViolation):
            encode_message(SampleReveal([2]))
