# Weak coherent pulse source and its diode calibration
from transmitter.calibration import (
    DiodeCalibration,
    DiodeState,
    apply_thermal_step,
    load_calibration,
    retune_currents,
)
from transmitter.source import (
    SourceConfig,
    TestPattern,
    emit_test_pattern,
    generate_pulse_train,
    make_bench_measure,
    write_pulse_stream,
)
from transmitter.stage import TransmitterStage

__all__ = [
    "DiodeCalibration",
    "DiodeState",
    "apply_thermal_step",
    "load_calibration",
    "retune_currents",
    "SourceConfig",
    "TestPattern",
    "emit_test_pattern",
    "generate_pulse_train",
    "make_bench_measure",
    "write_pulse_stream",
    "TransmitterStage",
]
