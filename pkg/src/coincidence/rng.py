"""Counter-based random numbers: every (seed, stream, counter) triple has a fixed value.

Algorithm (all arithmetic modulo 2**64)::

    mix(z)  = SplitMix64 finaliser:
              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
              z ^ (z >> 31)
    key(seed, stream)   = mix(mix(seed) + (stream + 1) * 0xD1B54A32D192ED03)
    raw(key, counter)   = mix(mix(counter * 0x9E3779B97F4A7C15 + key) ^ key)
    uniform(key, counter) = (raw >> 11) * 2**-53          in [0, 1)

A Bernoulli(p) draw is ``uniform < p``. No state is carried between draws,
so any subset of counters can be evaluated in any order, on any number of
workers, and give identical values.
"""
from __future__ import annotations

import numba
import numpy as np

MASK64 = (1 << 64) - 1
WEYL = 0x9E3779B97F4A7C15
STREAM_GAMMA = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_WEYL = np.uint64(WEYL)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


# --- reference implementation on Python ints --------------------------------


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    return mix64(mix64(seed) + (stream + 1) * STREAM_GAMMA)


def raw64(key: int, counter: int) -> int:
    return mix64(mix64(counter * WEYL + key) ^ key)


def uniform_py(key: int, counter: int) -> float:
    return (raw64(key, counter) >> 11) * _INV53


def derive_seed(seed: int, index: int) -> int:
    """Child seed for the ``index``-th independent run spawned from ``seed``."""
    return stream_key(seed ^ 0x5851F42D4C957F2D, index)


# --- compiled kernels ------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


@numba.njit(cache=True, inline="always")
def uniform_at(key, counter):
    z = _mix(_mix(counter * _U_WEYL + key) ^ key)
    return np.float64(z >> _U11) * _INV53


@numba.njit(cache=True, inline="always")
def bernoulli_at(key, counter, p):
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return uniform_at(key, counter) < p


@numba.njit(cache=True)
def _uniform_block(key, counters, out):
    for i in range(counters.shape[0]):
        out[i] = uniform_at(key, counters[i])


class CounterRNG:
    """Keyed view of the generator. ``split`` gives statistically independent children."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)

    def key(self, stream: int) -> int:
        return stream_key(self.seed, stream)

    def split(self, index: int) -> "CounterRNG":
        return CounterRNG(derive_seed(self.seed, index))

    def uniform(self, stream: int, counters) -> np.ndarray:
        counters = np.ascontiguousarray(counters, dtype=np.uint64)
        out = np.empty(counters.shape[0], dtype=np.float64)
        _uniform_block(np.uint64(self.key(stream)), counters, out)
        return out

    def bernoulli(self, stream: int, counters, p: float) -> np.ndarray:
        return self.uniform(stream, counters) < p
