"""Accumulative timetag histograms and region-of-interest counting."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.signal import find_peaks

from core.domain import Polarization, Port, TagBatch
from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH_S = 100e-12
# Bin counts within this distance of an integer are accepted as integral.
BIN_COUNT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class AccumulativeHistogram:
    """Tag counts folded modulo the modulation period."""

    bin_width: float
    period: float
    t0: float
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def bin_times(self) -> np.ndarray:
        """Start time of every bin within the period (s)."""
        return np.arange(self.n_bins) * self.bin_width

    def bin_of(self, time_in_period: float) -> int:
        return int(np.floor(time_in_period / self.bin_width)) % self.n_bins


def bin_count(period: float, bin_width: float) -> int:
    """Number of bins in one period; must be integral."""
    if not period > 0 or not bin_width > 0:
        raise ConfigurationError("period and bin width must be > 0")
    ratio = period / bin_width
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > BIN_COUNT_TOLERANCE * max(1.0, ratio):
        raise ConfigurationError(
            f"period {period} s is not an integer number of {bin_width} s bins ({ratio:.6f})"
        )
    return n


def accumulate_histogram(
    tags: Union[TagBatch, np.ndarray],
    period: float,
    bin_width: float = DEFAULT_BIN_WIDTH_S,
    t0: float = 0.0,
    port: Optional[Port] = None,
) -> AccumulativeHistogram:
    """
    Fold tag times modulo `period` into bins of `bin_width`.

    Args:
        tags: Timetags, or bare times in seconds
        period: Modulation period (s)
        bin_width: Bin width (s)
        t0: Time mapped to the start of bin 0
        port: Restrict to one detector port

    Raises:
        ConfigurationError: Non-integral bin count or no tags
    """
    n = bin_count(period, bin_width)
    if isinstance(tags, TagBatch):
        selected = tags.on_port(port) if port is not None else tags
        times = selected.times
    else:
        times = np.asarray(tags, dtype=float)
    if len(times) == 0:
        raise ConfigurationError("cannot histogram an empty tag stream")

    phase = np.mod(times - t0, period)
    bins = np.minimum((phase / bin_width).astype(np.int64), n - 1)
    counts = np.bincount(bins, minlength=n)
    logger.debug(f"Histogrammed {len(times)} tags into {n} bins of {bin_width} s")
    return AccumulativeHistogram(bin_width, period, t0, counts)


def find_histogram_peaks(
    h: AccumulativeHistogram, min_separation_s: float, prominence: float = 0.1
) -> np.ndarray:
    """Bin indices of the histogram peaks, at least `min_separation_s` apart."""
    distance = max(1, int(min_separation_s / h.bin_width))
    # Pad by wrapping so peaks at the period edge are found once.
    pad = distance
    wrapped = np.concatenate([h.counts[-pad:], h.counts, h.counts[:pad]])
    peaks, _ = find_peaks(wrapped, distance=distance, prominence=prominence * h.counts.max())
    peaks = peaks - pad
    return np.unique(peaks[(peaks >= 0) & (peaks < h.n_bins)])


@dataclass(frozen=True)
class Roi:
    """Bins [start_bin, end_bin) attributed to one test-pattern slot."""

    label: Polarization
    start_bin: int
    end_bin: int

    def __post_init__(self):
        if not 0 <= self.start_bin < self.end_bin:
            raise ConfigurationError(
                f"ROI {self.label.name} needs 0 <= start < end, got {self.start_bin}..{self.end_bin}"
            )


RoiSpec = List[Roi]


def check_rois(rois: Sequence[Roi], n_bins: int) -> None:
    """
    Raises:
        ConfigurationError: An ROI runs past the period or two ROIs overlap
    """
    ordered = sorted(rois, key=lambda r: r.start_bin)
    for roi in ordered:
        if roi.end_bin > n_bins:
            raise ConfigurationError(
                f"ROI {roi.label.name} ends at bin {roi.end_bin}, past the period ({n_bins} bins)"
            )
    for a, b in zip(ordered, ordered[1:]):
        if b.start_bin < a.end_bin:
            raise ConfigurationError(f"ROIs {a.label.name} and {b.label.name} overlap")


def slot_rois(
    h: AccumulativeHistogram,
    labels: Sequence[Polarization],
    slot_spacing_s: float,
    width_s: float,
    offset_s: float = 0.0,
) -> RoiSpec:
    """One ROI of `width_s` per slot, centred on offset + i * spacing."""
    rois = []
    half = width_s / 2.0
    for i, label in enumerate(labels):
        centre = offset_s + i * slot_spacing_s
        start = int(np.floor((centre - half) / h.bin_width + 1e-9))
        end = int(np.ceil((centre + half) / h.bin_width - 1e-9))
        rois.append(Roi(label, max(start, 0), min(end, h.n_bins)))
    check_rois(rois, h.n_bins)
    return rois


def roi_counts(h: AccumulativeHistogram, rois: Sequence[Roi]) -> Dict[Polarization, int]:
    """Sum of the histogram bins inside every ROI."""
    check_rois(rois, h.n_bins)
    counts: Dict[Polarization, int] = {}
    for roi in rois:
        counts[roi.label] = counts.get(roi.label, 0) + int(h.counts[roi.start_bin : roi.end_bin].sum())
    return counts


def relative_counts(counts: Dict[Polarization, int]) -> Dict[Polarization, float]:
    """ROI counts divided by the largest one."""
    peak = max(counts.values()) if counts else 0
    if peak == 0:
        return {k: 0.0 for k in counts}
    return {k: v / peak for k, v in counts.items()}
