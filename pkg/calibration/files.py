"""
Columnar text formats for calibration inputs.

    sweep series     # hwp_deg H V D A      (any subset of H V D A)
    spot widths      # distance_cm width_x_mm width_y_mm
    ROI specs        # label start_bin end_bin
    histograms       # bin time_s counts

Lines starting with `#` are comments; the last comment before the first
data row is the column header.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from calibration.divergence import SpotMeasurement
from calibration.histogram import AccumulativeHistogram, Roi
from calibration.sweep import SweepSeries
from core.domain import Polarization
from core.errors import ConfigurationError, ParseError
from core.report_output import write_columns

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
POLARIZATION_BY_NAME = {p.name: p for p in Polarization}

SWEEP_ANGLE = "hwp_deg"
SPOT_HEADER = ("distance_cm", "width_x_mm", "width_y_mm")
ROI_HEADER = ("label", "start_bin", "end_bin")
HISTOGRAM_HEADER = ("bin", "time_s", "counts")


Row = Tuple[int, str, List[Tuple[str, int]]]


def _read_rows(path: PathLike) -> Tuple[List[str], List[Row]]:
    """
    Split a columnar file into its header and data rows.

    Returns:
        (header names, [(line number, raw line, [(token, column)])])
    """
    source = Path(path)
    header: List[str] = []
    rows: List[Row] = []
    with open(source) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                if not rows:
                    header = stripped[1:].split()
                continue
            tokens = []
            pos = 0
            for token in stripped.split():
                pos = line.index(token, pos)
                tokens.append((token, pos + 1))
                pos += len(token)
            rows.append((lineno, line, tokens))
    return header, rows


def _expect_fields(path: PathLike, row: Row, n: int) -> None:
    lineno, line, tokens = row
    if len(tokens) != n:
        column = tokens[n][1] if len(tokens) > n else len(line) + 1
        raise ParseError(f"expected {n} fields, got {len(tokens)}", str(path), lineno, column)


def _number(path: PathLike, row: Row, i: int, cast=float):
    lineno, _, tokens = row
    token, column = tokens[i]
    try:
        return cast(token)
    except ValueError:
        raise ParseError(f"bad number {token!r}", str(path), lineno, column) from None


def _check_header(path: PathLike, header: List[str], expected: Sequence[str]) -> None:
    if tuple(header) != tuple(expected):
        raise ParseError(
            f"expected header '# {' '.join(expected)}', got '# {' '.join(header)}'",
            str(path),
            1,
            1,
        )


def read_sweep(path: PathLike) -> SweepSeries:
    """Read a sweep series; the header names the polarization columns."""
    header, rows = _read_rows(path)
    if not header or header[0] != SWEEP_ANGLE or len(header) < 2:
        raise ParseError(f"sweep header must start with '{SWEEP_ANGLE}'", str(path), 1, 1)
    pols = []
    for name in header[1:]:
        if name not in POLARIZATION_BY_NAME:
            raise ParseError(f"unknown polarization column {name!r}", str(path), 1, 1)
        pols.append(POLARIZATION_BY_NAME[name])

    angles = []
    columns: List[List[float]] = [[] for _ in pols]
    for row in rows:
        _expect_fields(path, row, len(header))
        angles.append(_number(path, row, 0))
        for i in range(len(pols)):
            columns[i].append(_number(path, row, i + 1))
    try:
        series = SweepSeries(np.array(angles), dict(zip(pols, map(np.array, columns))))
    except ConfigurationError as e:
        raise ParseError(str(e), str(path), rows[0][0] if rows else 1, 1) from e
    logger.info(f"Read {len(angles)} sweep points for {[p.name for p in pols]} from {path}")
    return series


def write_sweep(path: PathLike, s: SweepSeries) -> Path:
    pols = list(s.counts)
    return write_columns(
        path,
        [SWEEP_ANGLE] + [p.name for p in pols],
        [s.hwp_angles] + [s.counts[p] for p in pols],
    )


def read_spots(path: PathLike) -> List[SpotMeasurement]:
    header, rows = _read_rows(path)
    _check_header(path, header, SPOT_HEADER)
    spots = []
    for row in rows:
        _expect_fields(path, row, 3)
        values = [_number(path, row, i) for i in range(3)]
        try:
            spots.append(SpotMeasurement(*values))
        except ConfigurationError as e:
            raise ParseError(str(e), str(path), row[0], row[2][1][1]) from e
    return spots


def write_spots(path: PathLike, spots: Sequence[SpotMeasurement]) -> Path:
    return write_columns(
        path,
        SPOT_HEADER,
        [
            [s.distance_cm for s in spots],
            [s.width_x_mm for s in spots],
            [s.width_y_mm for s in spots],
        ],
    )


def read_rois(path: PathLike) -> List[Roi]:
    header, rows = _read_rows(path)
    _check_header(path, header, ROI_HEADER)
    rois = []
    for row in rows:
        _expect_fields(path, row, 3)
        lineno, _, tokens = row
        label, column = tokens[0]
        if label not in POLARIZATION_BY_NAME:
            raise ParseError(f"unknown ROI label {label!r}", str(path), lineno, column)
        start = _number(path, row, 1, int)
        end = _number(path, row, 2, int)
        try:
            rois.append(Roi(POLARIZATION_BY_NAME[label], start, end))
        except ConfigurationError as e:
            raise ParseError(str(e), str(path), lineno, tokens[1][1]) from e
    return rois


def write_rois(path: PathLike, rois: Sequence[Roi]) -> Path:
    return write_columns(
        path,
        ROI_HEADER,
        [[r.label.name for r in rois], [r.start_bin for r in rois], [r.end_bin for r in rois]],
    )


def write_histogram(path: PathLike, h: AccumulativeHistogram) -> Path:
    return write_columns(
        path,
        HISTOGRAM_HEADER,
        [np.arange(h.n_bins), h.bin_times(), h.counts],
        comments=[f"period_s {h.period!r}", f"bin_width_s {h.bin_width!r}", f"t0_s {h.t0!r}"],
    )
