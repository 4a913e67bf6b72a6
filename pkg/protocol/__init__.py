# Classical post-processing: sifting, estimation, wire format
from protocol.messages import (
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
    encode_frame,
    encode_message,
)
from protocol.channel import ClassicalChannel
from protocol.estimation import (
    ClassStatistics,
    DecoyStatistics,
    binary_entropy,
    decoy_bounds,
    expected_gain,
    secure_key_length,
    single_photon_error,
    single_photon_fraction,
    single_photon_yield,
)
from protocol.sifting import (
    SentRecord,
    SiftedKey,
    audit_transcript,
    classify_detections,
    estimate_qber,
    sift,
)
from protocol.report import KeyRateReport, write_keys, write_report
from protocol.stage import ProtocolConfig, ProtocolStage, SessionOutcome

__all__ = [
    "Abort",
    "BasisReveal",
    "DetectionReport",
    "IntensityDeclaration",
    "MessageType",
    "SampleRequest",
    "SampleReveal",
    "SessionHeader",
    "decode_frame",
    "decode_message",
    "encode_frame",
    "encode_message",
    "ClassicalChannel",
    "ClassStatistics",
    "DecoyStatistics",
    "binary_entropy",
    "decoy_bounds",
    "expected_gain",
    "secure_key_length",
    "single_photon_error",
    "single_photon_fraction",
    "single_photon_yield",
    "SentRecord",
    "SiftedKey",
    "audit_transcript",
    "classify_detections",
    "estimate_qber",
    "sift",
    "KeyRateReport",
    "write_keys",
    "write_report",
    "ProtocolConfig",
    "ProtocolStage",
    "SessionOutcome",
]
