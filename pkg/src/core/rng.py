"""Seeded, counter-based random streams.

Every stream is a numpy ``Generator`` over the Philox counter-based bit
generator, seeded from ``SeedSequence(master_seed, spawn_key=path)``. The
stream path is a tuple of non-negative integers, so parallel workers derive
independent children by appending their own id instead of sharing state.

Normal draws use numpy's ziggurat sampler and uniform draws use the 53-bit
double conversion; both are fixed functions of the Philox counter, so equal
(master_seed, stream path) pairs give bit-identical draws on every platform.
"""

import hashlib
from typing import Sequence, Tuple, Union

import numpy as np

StreamId = Union[int, Sequence[int]]

# Top-level stream ids used by the simulator. Keeping them apart means token
# noise and per-location programming noise never share a sequence.
TOKEN_STREAM = 1
FROZEN_STREAM = 2
TRIAL_STREAM = 3
DATA_STREAM = 4


def location_id(location: str) -> int:
    """Stable 63-bit integer for a physical location name."""
    digest = hashlib.blake2b(location.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def _normalize_path(stream_id: StreamId) -> Tuple[int, ...]:
    if isinstance(stream_id, (int, np.integer)):
        path = (int(stream_id),)
    else:
        path = tuple(int(s) for s in stream_id)
    if any(s < 0 for s in path):
        raise ValueError(f"stream ids must be non-negative, got {path}")
    return path


class RandomStream:
    """Single-owner random stream identified by (master_seed, stream path)."""

    def __init__(self, master_seed: int, stream_id: StreamId = 0):
        if int(master_seed) < 0:
            raise ValueError(f"master_seed must be non-negative, got {master_seed}")
        self.master_seed = int(master_seed)
        self.path = _normalize_path(stream_id)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    @property
    def stream_id(self) -> int:
        """Last component of the stream path."""
        return self.path[-1]

    def child(self, stream_id: int) -> "RandomStream":
        """Derive an independent stream below this one."""
        return RandomStream(self.master_seed, self.path + (int(stream_id),))

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        """Zero-mean normal draws with standard deviation ``scale``."""
        return self._gen.normal(0.0, scale, size)

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        """Uniform draws on ``[low, high)``."""
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int = None, size=None) -> np.ndarray:
        """Integers on ``[low, high)``, or ``[0, low)`` when ``high`` is None."""
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace: bool = True, p=None):
        return self._gen.choice(a, size=size, replace=replace, p=p)

    def permutation(self, x) -> np.ndarray:
        return self._gen.permutation(x)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying generator, for numpy APIs that take one."""
        return self._gen

    def __repr__(self) -> str:
        return f"RandomStream(master_seed={self.master_seed}, path={self.path})"
