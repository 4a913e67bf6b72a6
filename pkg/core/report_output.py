"""Report and artifact writing for simulation and calibration runs."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


def _to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_json(data: Any) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(_to_jsonable(data), indent=2, sort_keys=True) + "\n"


def flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten nested dicts into dotted keys."""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def format_value(value: Any) -> str:
    value = _to_jsonable(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def write_columns(
    path: Union[str, Path],
    header: Sequence[str],
    columns: Sequence[Sequence[Any]],
    comments: Sequence[str] = (),
) -> Path:
    """Write whitespace-separated columns with a `#` header."""
    target = Path(path)
    with open(target, "w") as f:
        for comment in comments:
            f.write(f"# {comment}\n")
        f.write("# " + " ".join(header) + "\n")
        for row in zip(*columns):
            f.write(" ".join(format_value(v) for v in row) + "\n")
    return target


class ReportOutput:
    """
    Writes run artifacts into one output directory.

    Features:
    - Per-stage summary JSON plus text lines, and a combined report
    - Flat key-value and columnar text writers
    - Clears the previous run's stage summaries on startup

    Nothing written here contains wall-clock time, so repeated seeded runs
    produce byte-identical files.
    """

    def __init__(self, out_dir: Union[str, Path]):
        """
        Initialize report output.

        Args:
            out_dir: Directory to write output files
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        # Clear stage summaries left by an earlier run
        self._startup_cleanup()

    def _startup_cleanup(self) -> None:
        """Remove stage summaries from a previous run in the same directory."""
        for json_file in self.out_dir.glob("*_summary.json"):
            try:
                with open(json_file) as f:
                    data = json.load(f)
                stage = data.get("stage", json_file.stem)
                logger.info(f"Clearing previous summary for {stage}")
            except (json.JSONDecodeError, AttributeError):
                logger.debug(f"Removing unreadable summary {json_file.name}")
            json_file.unlink()

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_json(self, name: str, data: Any) -> Path:
        target = self.path(name)
        target.write_text(dumps_json(data))
        logger.debug(f"Wrote {target.name}")
        return target

    def write_key_value(self, name: str, data: Mapping[str, Any]) -> Path:
        """Write a flat `key = value` text file (nested keys dotted)."""
        flat = flatten(data)
        lines = [f"{key} = {format_value(flat[key])}" for key in sorted(flat)]
        target = self.path(name)
        target.write_text("\n".join(lines) + "\n")
        return target

    def write_columns(
        self,
        name: str,
        header: Sequence[str],
        columns: Sequence[Sequence[Any]],
        comments: Sequence[str] = (),
    ) -> Path:
        """Write columns into the output directory."""
        return write_columns(self.path(name), header, columns, comments)

    def write_stage_data(
        self,
        stage_name: str,
        summary: Dict[str, Any],
        report_lines: List[str],
    ) -> None:
        """
        Write one stage's summary.

        Args:
            stage_name: Name of the stage (e.g., "transmitter", "protocol")
            summary: Telemetry dict (JSON output)
            report_lines: Formatted text lines
        """
        self.write_json(
            f"{stage_name}_summary.json",
            {"stage": stage_name, "summary": summary, "lines": report_lines},
        )
        logger.debug(f"Wrote {len(summary)} summary fields for {stage_name}")

    def write_combined_report(self, stage_lines: Dict[str, List[str]]) -> None:
        """
        Write the combined report from all stages.

        Args:
            stage_lines: Dict mapping stage names to report lines
        """
        all_lines = []
        for lines in stage_lines.values():
            if lines:
                all_lines.extend(lines)

        combined_file = self.path("combined_report.txt")
        combined_file.write_text("\n".join(all_lines) + "\n" if all_lines else "No data\n")

        logger.debug(f"Wrote combined report with {len(all_lines)} lines")
