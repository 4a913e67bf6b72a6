# Ground station receive chain: analyzer, detectors, clock sync
from receiver.analyzer import (
    AnalyzerNetwork,
    WaveplateSettings,
    apply_compensation,
    compensate_arms,
    port_distribution,
)
from receiver.detector import ClockModel, DetectorModel, dead_time_filter, detect, detect_beacon
from receiver.sync import Detections, SyncResult, pair_tags, recover_sync
from receiver.timetag_file import read_timetags, write_timetags
from receiver.stage import ReceiverConfig, ReceiverStage

__all__ = [
    "AnalyzerNetwork",
    "WaveplateSettings",
    "apply_compensation",
    "compensate_arms",
    "port_distribution",
    "ClockModel",
    "DetectorModel",
    "dead_time_filter",
    "detect",
    "detect_beacon",
    "Detections",
    "SyncResult",
    "pair_tags",
    "recover_sync",
    "read_timetags",
    "write_timetags",
    "ReceiverConfig",
    "ReceiverStage",
]
