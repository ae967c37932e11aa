"""Dense float64 matrix helpers and the seeded random source.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Vectors are
1-D arrays.  Nothing here mutates its inputs.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class RandomSource:
    """Explicit, seeded random generator (PCG64 underneath).

    Every place that needs randomness takes one of these; there is no global
    state.  ``spawn`` derives an independent child stream deterministically.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo, hi, size):
        return self._gen.uniform(lo, hi, size)

    def random(self, size):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, *keys: int) -> "RandomSource":
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *keys])
        child = RandomSource.__new__(RandomSource)
        child.seed = self.seed
        child._gen = np.random.Generator(np.random.PCG64(ss))
        return child


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def identity(x):
    return np.array(x, dtype=np.float64)


UNARY = {"sigmoid": sigmoid, "tanh": np.tanh, "identity": identity}


def apply_unary(name: str, a) -> np.ndarray:
    try:
        fn = UNARY[name]
    except KeyError:
        raise ValueError(f"unsupported function {name!r}") from None
    return fn(np.asarray(a, dtype=np.float64))


def uniform_init(rows: int, cols: int, lo: float, hi: float, rng: RandomSource) -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"uniform_init needs lo < hi, got [{lo}, {hi}]")
    return rng.uniform(lo, hi, (rows, cols))


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()
