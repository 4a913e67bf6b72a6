"""
Beacon clock recovery and timetag-to-pulse pairing.

The receiver clock is fitted against beacon pulse indices; the fitted
line maps receiver time back onto satellite emission time, which the
pulse clock turns into a pulse index.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from core.domain import BASIS_BY_CODE, BIT_BY_CODE, Port, TagBatch
from core.errors import SyncFailure

logger = logging.getLogger(__name__)

MIN_BEACON_TAGS = 100
PHASE_SCAN_STEPS = 100
MAX_DRIFT = 1e-4
# Residual beyond this fraction of a beacon period means a wrong index.
AMBIGUITY_FRACTION = 0.25


@dataclass(frozen=True)
class SyncResult:
    """Fitted receiver clock: t_rx = offset_s + (1 + drift) * t_satellite."""

    offset_s: float
    drift: float
    residual_rms_s: float
    n_tags: int
    first_index: int = 0

    def to_true_time(self, t_rx: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return (np.asarray(t_rx, dtype=float) - self.offset_s) / (1.0 + self.drift)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _phase_scan(times: np.ndarray, period: float) -> float:
    """Beacon phase within one period that best fits the leading tags."""
    head = times[:PHASE_SCAN_STEPS] - times[0]
    phases = period * np.arange(PHASE_SCAN_STEPS) / PHASE_SCAN_STEPS
    frac = (head[None, :] - phases[:, None]) / period
    frac = frac - np.round(frac)
    best = int(np.argmin((frac**2).sum(axis=1)))
    return times[0] + phases[best] + float(frac[best].mean()) * period


def recover_sync(
    beacon_tags: Union[TagBatch, np.ndarray],
    nominal_rate: float,
    coarse_offset: Optional[float] = None,
    reference_index: int = 0,
) -> SyncResult:
    """
    Fit receiver clock offset and drift from beacon timetags.

    Args:
        beacon_tags: Beacon-port tags (or their receiver times)
        nominal_rate: Beacon pulse rate (Hz)
        coarse_offset: Predicted receiver time of beacon pulse
            `reference_index`, good to half a beacon period. Without it the
            first tag is index 0.
        reference_index: Beacon index the coarse prediction refers to

    Returns:
        SyncResult

    Raises:
        SyncFailure: Too few tags or no consistent index assignment
    """
    if isinstance(beacon_tags, TagBatch):
        times = beacon_tags.on_port(Port.BEACON).times
    else:
        times = np.asarray(beacon_tags, dtype=float)
    times = np.sort(times)
    n = len(times)
    if n < MIN_BEACON_TAGS:
        raise SyncFailure(f"need at least {MIN_BEACON_TAGS} beacon tags, got {n}")

    period = 1.0 / nominal_rate
    anchor = _phase_scan(times, period)
    if coarse_offset is None:
        k0 = 0
    else:
        k0 = reference_index + int(np.round((anchor - coarse_offset) / period))

    steps = np.round(np.diff(times) / period).astype(np.int64)
    if np.any(steps < 1):
        raise SyncFailure("two beacon tags fall on one beacon period")
    k = k0 + np.concatenate([[0], np.cumsum(steps)])

    x = k * period
    # Fit the deviation from the nominal clock so drift keeps full precision.
    y = times - x
    x_mean = x.mean()
    y_mean = y.mean()
    design = np.column_stack([np.ones(n), x - x_mean])
    (intercept, drift), *_ = np.linalg.lstsq(design, y - y_mean, rcond=None)
    offset = y_mean + intercept - drift * x_mean
    residuals = y - (offset + drift * x)

    worst = float(np.max(np.abs(residuals)))
    if worst > AMBIGUITY_FRACTION * period:
        raise SyncFailure(
            f"ambiguous beacon index assignment (residual {worst:.3e} s, period {period:.3e} s)"
        )
    drift = float(drift)
    if abs(drift) >= MAX_DRIFT:
        raise SyncFailure(f"implausible clock drift {drift:.3e}")

    result = SyncResult(
        offset_s=float(offset),
        drift=drift,
        residual_rms_s=float(np.sqrt(np.mean(residuals**2))),
        n_tags=n,
        first_index=int(k[0]),
    )
    logger.debug(
        f"Sync from {n} beacon tags: offset {result.offset_s:.9e} s, drift {drift:.3e}, "
        f"rms {result.residual_rms_s:.3e} s"
    )
    return result


@dataclass
class Detections:
    """Single-port detections keyed by pulse index, as the receiver reports them."""

    indices: np.ndarray
    ports: np.ndarray
    tags_in: int = 0
    outside_window: int = 0
    out_of_range: int = 0
    double_clicks: int = 0

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def bases(self) -> np.ndarray:
        return BASIS_BY_CODE[self.ports]

    @property
    def bits(self) -> np.ndarray:
        return BIT_BY_CODE[self.ports]

    @staticmethod
    def concat(parts: "list[Detections]") -> "Detections":
        if not parts:
            return Detections(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int8))
        return Detections(
            indices=np.concatenate([p.indices for p in parts]),
            ports=np.concatenate([p.ports for p in parts]),
            tags_in=sum(p.tags_in for p in parts),
            outside_window=sum(p.outside_window for p in parts),
            out_of_range=sum(p.out_of_range for p in parts),
            double_clicks=sum(p.double_clicks for p in parts),
        )


def pair_tags(
    tags: TagBatch,
    sync: SyncResult,
    pulse_rate: float,
    window_s: Optional[float] = None,
    index_range: Optional[Tuple[int, int]] = None,
) -> Detections:
    """
    Assign quantum-port tags to pulse indices.

    Tags further than `window_s` (default half a pulse period) from the
    nearest pulse slot are dropped, as are indices outside `index_range`
    [start, stop). Indices clicked on more than one port are discarded.
    """
    period = 1.0 / pulse_rate
    window = period / 2.0 if window_s is None else window_s
    quantum = tags.ports != Port.BEACON.value
    ports = tags.ports[quantum]
    times = tags.times[quantum]

    slots = sync.to_true_time(times) * pulse_rate
    index = np.round(slots).astype(np.int64)
    in_window = np.abs(slots - index) * period <= window
    outside = int(np.count_nonzero(~in_window))
    index, ports = index[in_window], ports[in_window]

    out_of_range = 0
    if index_range is not None:
        inside = (index >= index_range[0]) & (index < index_range[1])
        out_of_range = int(np.count_nonzero(~inside))
        index, ports = index[inside], ports[inside]

    double = 0
    pairs = np.zeros((0, 2), dtype=np.int64)
    if len(index):
        pairs = np.unique(np.column_stack([index, ports.astype(np.int64)]), axis=0)
        unique_index, counts = np.unique(pairs[:, 0], return_counts=True)
        single = unique_index[counts == 1]
        keep = np.isin(pairs[:, 0], single)
        double = int(np.count_nonzero(counts > 1))
        pairs = pairs[keep]

    return Detections(
        indices=pairs[:, 0].astype(np.int64),
        ports=pairs[:, 1].astype(np.int8),
        tags_in=len(times),
        outside_window=outside,
        out_of_range=out_of_range,
        double_clicks=double,
    )
