"""Nested subsampling levels shared by both protocol parties."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import ParameterError
from .gfq import FieldVec
from .prf import MASK64, TAG_LEVEL, prf, prf_array


def max_level(n: int, k: int) -> int:
    """``floor(log2(n / k))`` computed on integers."""
    if k < 1 or n < k:
        raise ParameterError(f"need 1 <= k <= n, got n={n}, k={k}")
    return (n // k).bit_length() - 1


class LevelFamily:
    """Hash family h_0..h_L with ``Pr(h_j(i) = 1) = 2**-j``.

    Each index gets a single 64-bit draw ``u(i)``; it belongs to level ``j``
    iff ``u(i) < 2**(64 - j)``, so levels are nested.
    """

    __slots__ = ("seed", "n", "L", "__dict__")

    def __init__(self, seed: int, n: int, L: int):
        if n < 1 or L < 0 or L > 63:
            raise ParameterError(f"invalid level family n={n}, L={L}")
        self.seed = seed & MASK64
        self.n = n
        self.L = L

    def _check(self, j: int, i: int | None = None):
        if not 0 <= j <= self.L:
            raise ParameterError(f"level {j} outside [0, {self.L}]")
        if i is not None and not 0 <= i < self.n:
            raise ParameterError(f"index {i} outside [0, {self.n})")

    def draw(self, i: int) -> int:
        return prf(self.seed, TAG_LEVEL, i)

    def member(self, j: int, i: int) -> bool:
        self._check(j, i)
        return j == 0 or self.draw(i) < (1 << (64 - j))

    @cached_property
    def draws(self) -> np.ndarray:
        return prf_array(self.seed, TAG_LEVEL, np.arange(self.n, dtype=np.uint64))

    @cached_property
    def top_level(self) -> np.ndarray:
        """Deepest level each index belongs to, capped at ``L``."""
        u = self.draws
        top = np.zeros(self.n, dtype=np.int64)
        for j in range(1, self.L + 1):
            top += u < np.uint64(1 << (64 - j))
        return top

    def mask(self, j: int) -> np.ndarray:
        self._check(j)
        return self.top_level >= j

    def top_of(self, i: int) -> int:
        self._check(0, i)
        return int(self.top_level[i])


def restrict(x: FieldVec, f: LevelFamily, j: int) -> FieldVec:
    """Zero every coordinate outside level ``j``."""
    if len(x) != f.n:
        raise ParameterError(f"vector length {len(x)} != family dimension {f.n}")
    return FieldVec(x.q, np.where(f.mask(j), x.entries, 0))
