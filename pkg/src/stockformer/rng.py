"""Seeded, platform-independent random number generation.

The generator is xoshiro256++ with its state seeded from a splitmix64
stream, as the xoshiro reference recommends. To make bulk draws cheap in
numpy, a fixed block of ``LANES`` independent xoshiro256++ instances is
stepped in lockstep; lane ``L`` takes its four state words from splitmix64
outputs ``4L .. 4L+3``. Each bulk draw consumes whole generator steps and
discards any unused tail of the final step, so the stream for a given seed
depends only on the sequence of draw sizes. All arithmetic is 64-bit
wrapping, which numpy evaluates identically on every platform.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
LANES = 8192


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of a splitmix64 stream started at ``seed``."""
    counters = np.uint64(seed & MASK64) + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
    return _mix64(counters)


def derive_seed(seed: int, tag: int) -> int:
    """Deterministic child seed for subsystem ``tag`` (init, shuffle, ...)."""
    with np.errstate(over="ignore"):  # 64-bit wrapping is the point
        z = np.uint64(seed & MASK64) + _GOLDEN * np.uint64((tag + 1) & MASK64)
        return int(_mix64(np.uint64(z)))


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class Rng:
    """xoshiro256++ stream (``LANES`` lockstep instances), seeded via splitmix64."""

    def __init__(self, seed: int):
        if not isinstance(seed, int):
            raise InvalidArgumentError(f"seed must be an int, got {type(seed).__name__}")
        self.seed = seed & MASK64
        words = splitmix64(self.seed, 4 * LANES).reshape(LANES, 4)
        self._s = [words[:, j].copy() for j in range(4)]

    def _step(self) -> np.ndarray:
        """One generator step: LANES raw uint64 outputs."""
        s0, s1, s2, s3 = self._s
        out = _rotl(s0 + s3, 23) + s0
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return out

    def _raw(self, count: int) -> np.ndarray:
        steps = -(-count // LANES)
        blocks = np.empty((steps, LANES), dtype=np.uint64)
        for i in range(steps):
            blocks[i] = self._step()
        return blocks.reshape(-1)[:count]

    def uniform(self, *shape: int) -> np.ndarray:
        """float64 draws in [0, 1) built from the top 53 bits."""
        count = int(np.prod(shape)) if shape else 1
        vals = (self._raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return vals.reshape(shape) if shape else vals[0]

    def normal(self, *shape: int) -> np.ndarray:
        """Standard normal draws via Box-Muller on uniform pairs."""
        count = int(np.prod(shape)) if shape else 1
        pairs = -(-count // 2)
        raw = self._raw(2 * pairs)
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        vals = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
        return vals.reshape(shape) if shape else vals[0]

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        """Uniform ints in [low, high) by scaling uniform doubles."""
        if high <= low:
            raise InvalidArgumentError(f"empty integer range [{low}, {high})")
        vals = np.floor(self.uniform(size) * (high - low)).astype(np.int64) + low
        return np.minimum(vals, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Permutation of range(n) as the stable argsort of n uniform draws."""
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self, tag: int) -> "Rng":
        return Rng(derive_seed(self.seed, tag))
