"""
Shared vocabulary: polarization encoding, intensity classes, pulse and
timetag records.

Columnar batches (`PulseBatch`, `TagBatch`) hold the same data as the
record types in numpy arrays so a pass of millions of pulses stays
vectorised. Integer codes follow `POLARIZATIONS`, `INTENSITY_LABELS` and
`PORTS` ordering.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError


class Polarization(Enum):
    """Linear polarization states; the value is the angle in degrees."""

    H = 0
    V = 90
    D = 45
    A = 135

    @property
    def label(self) -> str:
        return self.name

    @property
    def angle(self) -> float:
        return float(self.value)

    @property
    def code(self) -> int:
        return POLARIZATIONS.index(self)


POLARIZATIONS: Tuple[Polarization, ...] = (
    Polarization.H,
    Polarization.V,
    Polarization.D,
    Polarization.A,
)

POLARIZATION_ANGLES = np.array([p.angle for p in POLARIZATIONS])


class Basis(Enum):
    """Polarization bases. `members[0]` encodes bit 1, `members[1]` bit 0."""

    HV = 0
    DA = 1

    @property
    def label(self) -> str:
        return self.name

    @property
    def members(self) -> Tuple[Polarization, Polarization]:
        if self is Basis.HV:
            return (Polarization.H, Polarization.V)
        return (Polarization.D, Polarization.A)


# Indexed by polarization code (H, V, D, A).
BIT_BY_CODE = np.array([1, 0, 1, 0], dtype=np.uint8)
BASIS_BY_CODE = np.array([0, 0, 1, 1], dtype=np.uint8)

# Bit convention byte carried in the session header: bit i is bit_of(POLARIZATIONS[i]).
BIT_CONVENTION = int(sum(int(b) << i for i, b in enumerate(BIT_BY_CODE)))


def bit_of(p: Polarization) -> int:
    """Bit encoded by a polarization (H=1, V=0, D=1, A=0)."""
    return int(BIT_BY_CODE[p.code])


def basis_of(p: Polarization) -> Basis:
    """Basis a polarization belongs to."""
    return Basis(int(BASIS_BY_CODE[p.code]))


def polarization_for(basis: Basis, bit: int) -> Polarization:
    """Inverse of (basis_of, bit_of)."""
    one, zero = basis.members
    return one if bit else zero


class IntensityLabel(Enum):
    SIGNAL = 0
    DECOY = 1
    VACUUM = 2

    @property
    def code(self) -> int:
        return self.value


INTENSITY_LABELS: Tuple[IntensityLabel, ...] = (
    IntensityLabel.SIGNAL,
    IntensityLabel.DECOY,
    IntensityLabel.VACUUM,
)


@dataclass(frozen=True)
class IntensityClass:
    """A pulse intensity class and its mean photon number."""

    label: IntensityLabel
    mean_photon_number: float

    def __post_init__(self):
        mu = self.mean_photon_number
        if self.label is IntensityLabel.VACUUM and mu != 0:
            raise ConfigurationError(f"vacuum class must have mu = 0, got {mu}")
        if self.label is not IntensityLabel.VACUUM and not mu > 0:
            raise ConfigurationError(f"{self.label.name} class needs mu > 0, got {mu}")


def intensity_classes(
    signal_mu: float, decoy_mu: float
) -> Tuple[IntensityClass, IntensityClass, IntensityClass]:
    """Build the (signal, decoy, vacuum) classes, checking signal > decoy > 0."""
    if not signal_mu > decoy_mu > 0:
        raise ConfigurationError(
            f"need signal_mu > decoy_mu > 0, got {signal_mu} and {decoy_mu}"
        )
    return (
        IntensityClass(IntensityLabel.SIGNAL, signal_mu),
        IntensityClass(IntensityLabel.DECOY, decoy_mu),
        IntensityClass(IntensityLabel.VACUUM, 0.0),
    )


@dataclass(frozen=True)
class PulseRecord:
    """One emitted weak coherent pulse."""

    index: int
    emit_time: float
    polarization: Polarization
    intensity: IntensityClass
    photon_count: int
    # Extra emission-side rotation of the linear angle (degrees).
    rotation_deg: float = 0.0

    @property
    def angle(self) -> float:
        return self.polarization.angle + self.rotation_deg


class Port(Enum):
    H = 0
    V = 1
    D = 2
    A = 3
    BEACON = 4


PORTS: Tuple[Port, ...] = (Port.H, Port.V, Port.D, Port.A, Port.BEACON)


class Origin(Enum):
    SIGNAL = 0
    DARK = 1


@dataclass(frozen=True)
class TimeTag:
    """One receiver timetag. `origin` is diagnostic only."""

    port: Port
    time: float
    origin: Origin = Origin.SIGNAL

    def protocol_view(self) -> Tuple[Port, float]:
        return (self.port, self.time)


@dataclass
class PulseBatch:
    """Columnar pulse stream."""

    index: np.ndarray
    emit_time: np.ndarray
    pol: np.ndarray
    intensity: np.ndarray
    photons: np.ndarray
    rotation_deg: np.ndarray
    classes: Tuple[IntensityClass, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.index)

    @property
    def angle(self) -> np.ndarray:
        """Physical linear polarization angle of every pulse (degrees)."""
        return POLARIZATION_ANGLES[self.pol] + self.rotation_deg

    def records(self) -> Iterator[PulseRecord]:
        for i in range(len(self)):
            yield PulseRecord(
                index=int(self.index[i]),
                emit_time=float(self.emit_time[i]),
                polarization=POLARIZATIONS[int(self.pol[i])],
                intensity=self.classes[int(self.intensity[i])],
                photon_count=int(self.photons[i]),
                rotation_deg=float(self.rotation_deg[i]),
            )

    def replace(self, **changes) -> "PulseBatch":
        values = {
            "index": self.index,
            "emit_time": self.emit_time,
            "pol": self.pol,
            "intensity": self.intensity,
            "photons": self.photons,
            "rotation_deg": self.rotation_deg,
            "classes": self.classes,
        }
        values.update(changes)
        return PulseBatch(**values)

    @staticmethod
    def concat(batches: Sequence["PulseBatch"]) -> "PulseBatch":
        if not batches:
            return PulseBatch.empty()
        return PulseBatch(
            index=np.concatenate([b.index for b in batches]),
            emit_time=np.concatenate([b.emit_time for b in batches]),
            pol=np.concatenate([b.pol for b in batches]),
            intensity=np.concatenate([b.intensity for b in batches]),
            photons=np.concatenate([b.photons for b in batches]),
            rotation_deg=np.concatenate([b.rotation_deg for b in batches]),
            classes=batches[0].classes,
        )

    @staticmethod
    def empty(classes: Tuple[IntensityClass, ...] = ()) -> "PulseBatch":
        return PulseBatch(
            index=np.zeros(0, dtype=np.int64),
            emit_time=np.zeros(0),
            pol=np.zeros(0, dtype=np.int8),
            intensity=np.zeros(0, dtype=np.int8),
            photons=np.zeros(0, dtype=np.int64),
            rotation_deg=np.zeros(0),
            classes=classes,
        )


@dataclass
class TagBatch:
    """Columnar timetag stream, sorted by time."""

    ports: np.ndarray
    times: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def protocol_view(self) -> Tuple[np.ndarray, np.ndarray]:
        """Port and time columns only; origins are hidden from the protocol."""
        return self.ports, self.times

    def on_port(self, port: Port) -> "TagBatch":
        mask = self.ports == port.value
        return TagBatch(self.ports[mask], self.times[mask], self.origins[mask])

    def records(self) -> Iterator[TimeTag]:
        for port, t, origin in zip(self.ports, self.times, self.origins):
            yield TimeTag(PORTS[int(port)], float(t), Origin(int(origin)))

    @staticmethod
    def from_records(tags: Sequence[TimeTag]) -> "TagBatch":
        return TagBatch.merge(
            [
                TagBatch(
                    np.array([t.port.value for t in tags], dtype=np.int8),
                    np.array([t.time for t in tags], dtype=float),
                    np.array([t.origin.value for t in tags], dtype=np.int8),
                )
            ]
        )

    @staticmethod
    def merge(batches: List["TagBatch"]) -> "TagBatch":
        if not batches:
            return TagBatch.empty()
        ports = np.concatenate([b.ports for b in batches])
        times = np.concatenate([b.times for b in batches])
        origins = np.concatenate([b.origins for b in batches])
        order = np.lexsort((ports, times))
        return TagBatch(ports[order], times[order], origins[order])

    @staticmethod
    def empty() -> "TagBatch":
        return TagBatch(
            np.zeros(0, dtype=np.int8), np.zeros(0), np.zeros(0, dtype=np.int8)
        )
