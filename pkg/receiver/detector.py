"""
SPCM and timetagger model.

Photons are routed to ports, survive with the port efficiency, pick up
Gaussian timing jitter, and land on the receiver clock quantised to its
resolution. Dark counts are a uniform Poisson process per port. Each
port is then dead-time filtered (non-paralysable).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core.domain import Origin, Port, TagBatch
from core.errors import ConfigurationError
from core.rng import RandomBitSource

logger = logging.getLogger(__name__)

QUANTUM_PORTS = (Port.H, Port.V, Port.D, Port.A)


def _four(name: str, value: Union[float, Sequence[float]]) -> Tuple[float, float, float, float]:
    try:
        values = np.broadcast_to(np.asarray(value, dtype=float), (4,))
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{name} needs one value or four per-port values: {value!r}") from e
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class DetectorModel:
    """Four SPCMs behind the analyzer."""

    efficiency: Tuple[float, float, float, float] = (0.65, 0.65, 0.65, 0.65)
    dark_count_rate_hz: Tuple[float, float, float, float] = (100.0, 100.0, 100.0, 100.0)
    dead_time_s: float = 30e-9
    timing_jitter_sigma_s: float = 350e-12

    def __post_init__(self):
        object.__setattr__(self, "efficiency", _four("efficiency", self.efficiency))
        object.__setattr__(
            self, "dark_count_rate_hz", _four("dark_count_rate_hz", self.dark_count_rate_hz)
        )
        if any(not 0 <= e <= 1 for e in self.efficiency):
            raise ConfigurationError(f"detector efficiency must be in [0, 1]: {self.efficiency}")
        if any(r < 0 for r in self.dark_count_rate_hz):
            raise ConfigurationError("dark count rates must be >= 0")
        if self.dead_time_s < 0 or self.timing_jitter_sigma_s < 0:
            raise ConfigurationError("dead time and jitter must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DetectorModel":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown detector keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ClockModel:
    """Receiver timetagger clock relative to satellite time."""

    offset_s: float = 0.0
    drift: float = 0.0
    resolution_s: float = 1e-12

    def __post_init__(self):
        if not self.resolution_s > 0:
            raise ConfigurationError(f"clock resolution must be > 0, got {self.resolution_s}")
        if abs(self.drift) >= 1e-3:
            raise ConfigurationError(f"clock drift {self.drift} is not a small rate")

    def quantize(self, t_rx: np.ndarray) -> np.ndarray:
        return np.round(np.asarray(t_rx) / self.resolution_s) * self.resolution_s

    def to_receiver(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Receiver clock reading for a true time (before quantisation)."""
        return self.offset_s + (1.0 + self.drift) * np.asarray(t, dtype=float)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClockModel":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown clock keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def dead_time_filter(times: np.ndarray, dead_time_s: float) -> np.ndarray:
    """
    Mask of tags kept by a non-paralysable dead time on one port.

    `times` must be sorted. A tag is kept when it arrives at least
    `dead_time_s` after the previous kept tag.
    """
    n = len(times)
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead_time_s <= 0:
        return keep
    if np.all(np.diff(times) >= dead_time_s):
        return keep
    last = times[0]
    for i in range(1, n):
        if times[i] - last >= dead_time_s:
            last = times[i]
        else:
            keep[i] = False
    return keep


def _route(
    port_probs: np.ndarray, photons: np.ndarray, efficiency: np.ndarray, rng: RandomBitSource
) -> np.ndarray:
    """Per-pulse photon counts reaching each port, by sequential conditional binomials."""
    q = port_probs * efficiency
    remaining = photons.astype(np.int64)
    used = np.zeros(len(photons))
    counts = np.zeros((len(photons), 4), dtype=np.int64)
    for j in range(4):
        free = 1.0 - used
        p = np.divide(q[:, j], free, out=np.zeros_like(free), where=free > 0)
        counts[:, j] = rng.binomial(remaining, np.clip(p, 0.0, 1.0))
        remaining = remaining - counts[:, j]
        used = used + q[:, j]
    return counts


def detect(
    arrival_times: np.ndarray,
    port_probs: np.ndarray,
    photon_counts: np.ndarray,
    det: DetectorModel,
    clock: ClockModel,
    rng: RandomBitSource,
    window: Optional[Tuple[float, float]] = None,
) -> TagBatch:
    """
    Turn photon arrivals into receiver timetags.

    Args:
        arrival_times: True arrival time of each pulse at the receiver, sorted
        port_probs: (n, 4) port distribution per pulse
        photon_counts: Photons per pulse reaching the analyzer
        det: Detector model
        clock: Receiver clock
        rng: Random source
        window: True-time span for dark counts (defaults to the arrival span)

    Returns:
        TagBatch sorted by receiver time
    """
    arrival_times = np.asarray(arrival_times, dtype=float)
    photon_counts = np.asarray(photon_counts)
    port_probs = np.asarray(port_probs, dtype=float).reshape(-1, 4)
    efficiency = np.asarray(det.efficiency)

    occupied = np.flatnonzero(photon_counts > 0)
    counts = _route(port_probs[occupied], photon_counts[occupied], efficiency, rng)
    pulse_pos, port = np.nonzero(counts > 0)
    signal_times = arrival_times[occupied][pulse_pos]

    if window is None:
        window = (
            (float(arrival_times[0]), float(arrival_times[-1]))
            if len(arrival_times)
            else (0.0, 0.0)
        )
    start, end = window
    duration = max(0.0, end - start)
    dark_ports = []
    dark_times = []
    for j, rate in enumerate(det.dark_count_rate_hz):
        n_dark = int(rng.poisson(rate * duration)) if rate > 0 and duration > 0 else 0
        dark_ports.append(np.full(n_dark, j, dtype=np.int8))
        dark_times.append(start + duration * rng.uniform(n_dark))

    if det.timing_jitter_sigma_s > 0 and len(signal_times):
        signal_times = signal_times + rng.normal(det.timing_jitter_sigma_s, len(signal_times))

    ports = np.concatenate([port.astype(np.int8)] + dark_ports)
    times = np.concatenate([signal_times] + dark_times)
    origins = np.concatenate(
        [
            np.full(len(signal_times), Origin.SIGNAL.value, dtype=np.int8),
            np.full(len(times) - len(signal_times), Origin.DARK.value, dtype=np.int8),
        ]
    )
    times = clock.quantize(clock.to_receiver(times))

    kept = []
    for p in QUANTUM_PORTS:
        on_port = np.flatnonzero(ports == p.value)
        order = on_port[np.argsort(times[on_port], kind="stable")]
        keep = dead_time_filter(times[order], det.dead_time_s)
        kept.append(order[keep])
    selected = np.concatenate(kept) if kept else np.zeros(0, dtype=np.int64)

    tags = TagBatch.merge([TagBatch(ports[selected], times[selected], origins[selected])])
    logger.debug(
        f"Detected {len(tags)} tags ({int((tags.origins == Origin.DARK.value).sum())} dark) "
        f"from {len(occupied)} occupied pulses"
    )
    return tags


def detect_beacon(
    start_s: float,
    duration_s: float,
    rate_hz: float,
    detect_prob: float,
    det: DetectorModel,
    clock: ClockModel,
    rng: RandomBitSource,
    light_time_s: float = 0.0,
) -> TagBatch:
    """
    Downlink beacon timetags.

    Beacon pulse k leaves the satellite at k / rate_hz and is registered
    on the Beacon port with probability `detect_prob`.
    """
    if rate_hz <= 0:
        raise ConfigurationError(f"beacon rate must be > 0, got {rate_hz}")
    if not 0 <= detect_prob <= 1:
        raise ConfigurationError(f"beacon detect_prob must be in [0, 1], got {detect_prob}")
    first = math.ceil(start_s * rate_hz - 1e-9)
    last = math.ceil((start_s + duration_s) * rate_hz - 1e-9)
    k = np.arange(first, last, dtype=np.int64)
    seen = rng.uniform(len(k)) < detect_prob
    times = k[seen] / rate_hz + light_time_s
    if det.timing_jitter_sigma_s > 0 and len(times):
        times = times + rng.normal(det.timing_jitter_sigma_s, len(times))
    times = clock.quantize(clock.to_receiver(times))
    order = np.argsort(times, kind="stable")
    return TagBatch(
        np.full(len(times), Port.BEACON.value, dtype=np.int8),
        times[order],
        np.full(len(times), Origin.SIGNAL.value, dtype=np.int8),
    )
