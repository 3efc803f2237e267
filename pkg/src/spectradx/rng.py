"""Deterministic counter-based random streams ("splitmix64-v1").

Every random quantity in this package is drawn from a named, fully
specified 64-bit generator so that runs are reproducible bit-for-bit from
a single integer seed, and so that an independent implementation can
reproduce the exact streams from this description alone.

Generator ``splitmix64-v1``
    Output ``j`` (counting from 0) of the stream with seed ``s`` is::

        z_j = mix64((s + (j + 1) * GAMMA) mod 2**64)

    where ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` is the splitmix64
    finalizer (xor-shift 30, multiply 0xBF58476D1CE4E5B9, xor-shift 27,
    multiply 0x94D049BB133111EB, xor-shift 31).

Uniform doubles
    ``u_j = ((z_j >> 11) + 1) * 2**-53``, i.e. the top 53 bits mapped to
    the half-open interval (0, 1].  The interval excludes 0 so logarithms
    in the Gaussian transform are always finite.

Gaussian doubles (Box-Muller)
    Consecutive uniform pairs (u_{2k}, u_{2k+1}) give::

        r = sqrt(-2 ln u_{2k});  g_{2k} = r cos(2 pi u_{2k+1})
                                 g_{2k+1} = r sin(2 pi u_{2k+1})

    A request for n Gaussians consumes 2 * ceil(n / 2) stream outputs;
    no half-pair is carried across calls.

Derived streams
    Sub-stream ``i`` of master seed ``m`` has seed ``m XOR splitmix64(0)_i``
    (output ``i`` of the zero-seeded stream); see :func:`derive_seed`.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "splitmix64-v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF

_INV_2_53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


def stream_outputs(seed: int, start: int, count: int) -> np.ndarray:
    """Raw uint64 outputs [start, start+count) of the stream for ``seed``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK64) + idx * _GAMMA
    return _mix64(state)


def derive_seed(master: int, index: int) -> int:
    """Seed of derived stream ``index``: master XOR splitmix64(0) output index."""
    z = int(stream_outputs(0, index, 1)[0])
    return (master & _MASK64) ^ z


class SplitMix64:
    """Sequential view over one splitmix64-v1 stream.

    The object only tracks (seed, position); any prefix of the stream can
    be regenerated from those two integers.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self.position = 0

    def next_u64(self, count: int) -> np.ndarray:
        out = stream_outputs(self.seed, self.position, count)
        self.position += count
        return out

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in (0, 1] from the top 53 bits of each output."""
        bits = self.next_u64(count) >> np.uint64(11)
        return (bits.astype(np.float64) + 1.0) * _INV_2_53

    def normal(self, count: int) -> np.ndarray:
        """Standard normal doubles via Box-Muller on uniform pairs."""
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]

    def integers(self, count: int, bound: int) -> np.ndarray:
        """Integers in [0, bound) as floor(uniform * bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return np.minimum((self.uniform(count) * bound).astype(np.int64), bound - 1)
