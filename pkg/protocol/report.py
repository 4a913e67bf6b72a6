"""Key-rate report and sifted key export."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from core.errors import ConfigurationError
from core.report_output import ReportOutput, format_value
from protocol.sifting import SiftedKey

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KeyRateReport:
    """
    Outcome of one session's post-processing.

    `analysis` is always "asymptotic": no finite-key corrections are applied.
    """

    session_id: str
    sifted_length: int
    sampled_length: int
    qber: float
    qber_low: float
    qber_high: float
    y1_lower: float
    e1_upper: float
    single_photon_fraction: float
    secure_length: int
    ec_efficiency: float
    aborted: bool = False
    abort_reason: str = ""
    analysis: str = "asymptotic"

    def __post_init__(self):
        if self.secure_length < 0:
            raise ConfigurationError(f"secure length must be >= 0, got {self.secure_length}")
        if self.aborted and self.secure_length != 0:
            raise ConfigurationError("an aborted session cannot carry secure key")

    @staticmethod
    def aborted_session(session_id: str, reason: str, ec_efficiency: float) -> "KeyRateReport":
        return KeyRateReport(
            session_id=session_id,
            sifted_length=0,
            sampled_length=0,
            qber=0.0,
            qber_low=0.0,
            qber_high=0.0,
            y1_lower=0.0,
            e1_upper=0.0,
            single_photon_fraction=0.0,
            secure_length=0,
            ec_efficiency=ec_efficiency,
            aborted=True,
            abort_reason=reason,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "KeyRateReport":
        return KeyRateReport(**data)


def write_report(
    output: ReportOutput,
    report: KeyRateReport,
    extra: Optional[Mapping[str, Any]] = None,
) -> None:
    """Write report.json and the flat report.txt."""
    data: Dict[str, Any] = {"key_rate": report.to_dict()}
    if extra:
        data.update(extra)
    output.write_json("report.json", data)
    output.write_key_value("report.txt", data)
    logger.info(
        f"Session {report.session_id}: sifted {report.sifted_length}, "
        f"qber {report.qber:.4f}, secure {report.secure_length} bits"
        + (f", aborted: {report.abort_reason}" if report.aborted else "")
    )


def write_keys(
    path: Union[str, Path],
    kt: SiftedKey,
    kr: SiftedKey,
    metadata: Mapping[str, Any],
) -> Path:
    """
    Write both sifted keys as hex with session metadata.

    Bits are packed MSB first; the final byte is zero-padded.
    """
    target = Path(path)
    lines = [f"# {key} {format_value(metadata[key])}" for key in sorted(metadata)]
    lines.append(f"# length_bits {len(kt)}")
    lines.append(f"{kt.role} {kt.to_hex()}")
    lines.append(f"{kr.role} {kr.to_hex()}")
    target.write_text("\n".join(lines) + "\n")
    return target
