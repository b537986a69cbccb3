"""Counter-based random streams indexed by (seed, path, purpose, counter).

Every draw is a pure function of its index, computed with the SplitMix64
mixing function on unsigned 64-bit integers. A stream covers a batch of
Monte Carlo paths at once; path ``i`` of a stream produces the same numbers
whatever batch it is simulated in, which makes results independent of how
paths are split across workers.

Uniforms are ``(k + 0.5) * 2**-52`` for the top 52 bits ``k`` of the mixed
word, so they lie strictly inside (0, 1). Gaussians use the inverse normal
CDF (``scipy.special.ndtri``) on those uniforms.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def purpose_hash(purpose: str) -> int:
    """Platform-stable 64-bit hash of a purpose tag."""
    digest = hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Random substream for a batch of paths and one purpose tag.

    Parameters
    ----------
    seed : int
        Master seed (taken modulo 2**64).
    paths : int or array_like of int
        Global Monte Carlo path indices covered by this stream. An integer
        ``n`` means ``range(n)``.
    purpose : str
        Tag separating independent uses on the same path, e.g. ``"wiener"``
        or ``"tau/randomized_milstein/n=6"``.
    """

    def __init__(self, seed: int, paths=1, purpose: str = "default"):
        if np.ndim(paths) == 0:
            paths = np.arange(int(paths))
        self.seed = int(seed) & _MASK64
        self.paths = np.asarray(paths, dtype=np.int64)
        if self.paths.ndim != 1:
            raise ValueError("paths must be one-dimensional")
        self.purpose = purpose
        with np.errstate(over="ignore"):
            s = _mix64(np.array([self.seed], dtype=np.uint64) + _GOLDEN)
            k = _mix64(s ^ (self.paths.astype(np.uint64) * _GOLDEN + np.uint64(1)))
            self._keys = _mix64(k ^ np.uint64(purpose_hash(purpose)))

    @property
    def n_paths(self) -> int:
        return self.paths.size

    def child(self, purpose: str) -> "RngStream":
        """Stream for the same paths under another purpose tag."""
        return RngStream(self.seed, self.paths, purpose)

    def subset(self, rows) -> "RngStream":
        return RngStream(self.seed, self.paths[rows], self.purpose)

    def bits(self, counters) -> np.ndarray:
        """Raw 64-bit words, shape ``(n_paths,) + counters.shape``."""
        c = np.asarray(counters, dtype=np.uint64)
        keys = self._keys.reshape((-1,) + (1,) * c.ndim)
        with np.errstate(over="ignore"):
            return _mix64(keys + (c + np.uint64(1)) * _GOLDEN)

    def uniform(self, counters) -> np.ndarray:
        """Uniform draws on the open interval (0, 1)."""
        k = self.bits(counters) >> np.uint64(12)
        return (k.astype(np.float64) + 0.5) * 2.0**-52

    def normal(self, counters) -> np.ndarray:
        """Standard normal draws."""
        return ndtri(self.uniform(counters))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, n_paths={self.n_paths}, purpose={self.purpose!r})"
