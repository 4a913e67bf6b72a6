"""Exception hierarchy shared by all simulator modules."""

from typing import Any, List, Optional


class QkdSimError(Exception):
    """Base class for simulator faults. `code` is stable and machine-parsable."""

    code = "E_SIM"

    def one_line(self) -> str:
        """Single-line form used by the CLI."""
        message = " ".join(str(self).split())
        return f"error {self.code}: {message}"


class ConfigurationError(QkdSimError, ValueError):
    """Invalid parameters or malformed configuration."""

    code = "E_CONFIG"


class TemperatureFault(QkdSimError):
    """Temperature outside the hardware survival range."""

    code = "E_THERMAL"


class OutOfPassError(QkdSimError):
    """Time requested outside the pass window."""

    code = "E_OUT_OF_PASS"


class SyncFailure(QkdSimError):
    """Beacon clock recovery failed."""

    code = "E_SYNC"


class ProtocolViolation(QkdSimError):
    """Classical exchange out of order, lost, or inconsistent."""

    code = "E_PROTOCOL"


class DecodeError(QkdSimError):
    """Wire bytes could not be decoded."""

    code = "E_DECODE"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnsupportedVersionError(DecodeError):
    """Frame carries a wire version this build does not speak."""

    code = "E_VERSION"


class CalibrationFailure(QkdSimError):
    """Iterative calibration did not converge."""

    code = "E_CALIBRATION"

    def __init__(self, message: str, trace: Optional[List[Any]] = None):
        super().__init__(message)
        self.trace = trace or []


class ParseError(QkdSimError):
    """Input file could not be parsed."""

    code = "E_PARSE"

    def __init__(self, message: str, path: str, line: int, column: int):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path = path
        self.line = line
        self.column = column


class RandomnessExhausted(QkdSimError):
    """Replayed random bit file ran out."""

    code = "E_RNG"
