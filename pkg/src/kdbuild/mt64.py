"""MT19937-64, the 64-bit Mersenne Twister of Matsumoto and Nishimura.

Output matches ``std::mt19937_64``; the 10000th draw after seeding with 5489
is 9981545732273789042.
"""

from __future__ import annotations

import numpy as np
from numba import njit

DEFAULT_SEED = 5489

_NN = 312
_MM = 156
_MATRIX_A = np.uint64(0xB5026F5AA96619E9)
_UPPER = np.uint64(0xFFFFFFFF80000000)
_LOWER = np.uint64(0x7FFFFFFF)
_INIT_MULT = np.uint64(6364136223846793005)


@njit(cache=True, nogil=True)
def _seed(mt, seed):
    mt[0] = seed
    for i in range(1, _NN):
        prev = mt[i - 1]
        mt[i] = _INIT_MULT * (prev ^ (prev >> np.uint64(62))) + np.uint64(i)


@njit(cache=True, nogil=True)
def _twist(mt):
    one = np.uint64(1)
    for i in range(_NN):
        x = (mt[i] & _UPPER) | (mt[(i + 1) % _NN] & _LOWER)
        xa = x >> one
        if x & one:
            xa ^= _MATRIX_A
        mt[i] = mt[(i + _MM) % _NN] ^ xa


@njit(cache=True, nogil=True)
def _next(mt, pos):
    """Next tempered output; ``pos[0]`` is the read position into ``mt``."""
    if pos[0] >= _NN:
        _twist(mt)
        pos[0] = 0
    x = mt[pos[0]]
    pos[0] += 1
    x ^= (x >> np.uint64(29)) & np.uint64(0x5555555555555555)
    x ^= (x << np.uint64(17)) & np.uint64(0x71D67FFFEDA60000)
    x ^= (x << np.uint64(37)) & np.uint64(0xFFF7EEE000000000)
    x ^= x >> np.uint64(43)
    return x


@njit(cache=True, nogil=True)
def _bounded(mt, pos, bound):
    """Uniform draw in [0, bound) by rejecting the lowest 2**64 mod bound outputs."""
    b = np.uint64(bound)
    threshold = (np.uint64(0) - b) % b
    while True:
        x = _next(mt, pos)
        if x >= threshold:
            return x % b


@njit(cache=True, nogil=True)
def _shuffle(mt, pos, arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = _bounded(mt, pos, i + 1)
        arr[i], arr[j] = arr[j], arr[i]


@njit(cache=True, nogil=True)
def _fill(mt, pos, out):
    for i in range(out.shape[0]):
        out[i] = _next(mt, pos)


class MT19937_64:
    def __init__(self, seed: int = DEFAULT_SEED):
        self._mt = np.empty(_NN, dtype=np.uint64)
        self._pos = np.array([_NN], dtype=np.int64)
        _seed(self._mt, np.uint64(seed & 0xFFFFFFFFFFFFFFFF))

    def next_u64(self) -> int:
        return int(_next(self._mt, self._pos))

    def draws(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.uint64)
        _fill(self._mt, self._pos, out)
        return out

    def below(self, bound: int) -> int:
        if bound < 1:
            raise ValueError(f"bound must be positive, got {bound}")
        return int(_bounded(self._mt, self._pos, bound))

    def shuffle(self, arr: np.ndarray) -> None:
        """Fisher-Yates shuffle in place, from the last element down."""
        _shuffle(self._mt, self._pos, arr)
