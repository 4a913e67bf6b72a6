"""
Seeded randomness standing in for the payload QRNG.

`RandomBitSource` wraps a counter-based Philox generator keyed by
(seed, stream_id), so the same pair reproduces the same variates on any
platform and distinct stream ids never overlap. `ReplayBitSource` feeds
recorded QRNG output into the choices that consume uniform variates.
"""

import hashlib
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from core.errors import ConfigurationError, RandomnessExhausted

logger = logging.getLogger(__name__)


def stream_id_for(name: str) -> int:
    """Stable 63-bit stream id for a named substream."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


class RandomBitSource:
    """Deterministic random source for one (seed, stream_id) pair."""

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or seed >= 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer: {seed}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(seq))

    def substream(self, name: str) -> "RandomBitSource":
        """Independent child stream identified by name."""
        return RandomBitSource(self.seed, stream_id_for(f"{self.stream_id}/{name}"))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size: Optional[int] = None) -> Union[float, np.ndarray]:
        return self._gen.random(size)

    def bits(self, n: int) -> np.ndarray:
        return (self.uniform(n) < 0.5).astype(np.uint8)

    def choice(self, probs: np.ndarray, size: int) -> np.ndarray:
        """Categorical draw by inverse CDF over uniform variates."""
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        u = self.uniform(size)
        return np.searchsorted(cdf, u, side="right").astype(np.int8)

    def poisson(self, lam, size: Optional[int] = None) -> np.ndarray:
        return self._gen.poisson(lam, size)

    def binomial(self, n, p, size: Optional[int] = None) -> np.ndarray:
        return self._gen.binomial(n, p, size)

    def normal(self, scale, size: Optional[int] = None) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def integers(self, low: int, high: int, size: Optional[int] = None):
        return self._gen.integers(low, high, size)

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct sorted positions out of range(n)."""
        return np.sort(self._gen.choice(n, size=k, replace=False))


class ReplayBitSource(RandomBitSource):
    """
    Replays a recorded bit file for uniform variates.

    Every uniform variate consumes 32 bits (little-endian uint32 / 2**32).
    Poisson, binomial and Gaussian draws come from the seeded fallback.
    """

    def __init__(self, path: Union[str, Path], seed: int = 0, stream_id: int = 0):
        super().__init__(seed, stream_id)
        self.path = Path(path)
        self._words = np.frombuffer(self.path.read_bytes(), dtype="<u4")
        self._pos = 0
        logger.info(f"Replaying {len(self._words)} QRNG words from {self.path}")

    @property
    def remaining(self) -> int:
        return len(self._words) - self._pos

    def uniform(self, size: Optional[int] = None):
        n = 1 if size is None else int(size)
        if n > self.remaining:
            raise RandomnessExhausted(
                f"{self.path} exhausted: need {n} words, {self.remaining} left"
            )
        words = self._words[self._pos : self._pos + n]
        self._pos += n
        values = words.astype(np.float64) / 2**32
        return float(values[0]) if size is None else values
