"""Colexicographic ranking of subsets, exact on big integers."""

from __future__ import annotations

import math
from typing import NamedTuple

from ..errors import FormatError, ParameterError


class SubsetCode(NamedTuple):
    n: int
    w: int
    rank: int


def binom_bits(n: int, w: int) -> int:
    """``ceil(log2 C(n, w))``, the width of a rank field."""
    return (math.comb(n, w) - 1).bit_length()


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length() if n > 1 else 0


def subset_rank(n: int, subset) -> SubsetCode:
    """``sum(C(c_t, t))`` over the sorted elements ``c_1 < ... < c_w``."""
    elems = sorted(set(int(a) for a in subset))
    if elems and (elems[0] < 0 or elems[-1] >= n):
        raise ParameterError(f"subset elements must lie in [0, {n})")
    rank = sum(math.comb(c, t) for t, c in enumerate(elems, start=1))
    return SubsetCode(n, len(elems), rank)


def subset_unrank(code: SubsetCode) -> tuple[int, ...]:
    n, w, rank = code
    if not 0 <= w <= n:
        raise FormatError(f"subset size {w} outside [0, {n}]")
    if not 0 <= rank < math.comb(n, w):
        raise FormatError(f"rank {rank} outside [0, C({n}, {w}))")
    out = []
    c = n - 1
    val = math.comb(c, w) if w else 0
    # walk c downward keeping val == C(c, t) by exact ratio updates
    for t in range(w, 0, -1):
        while val > rank:
            val = val * (c - t) // c
            c -= 1
        out.append(c)
        rank -= val
        if t > 1:
            val = val * t // c
            c -= 1
    return tuple(reversed(out))
