"""Parameter blocks shared by the set encoder and decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError
from ..prf import MASK64, TAG_PERM, TAG_SUBSAMPLE, derive_seed, prf, prf_array

DELTA_CONSTRAINT = "64 ≤ log 1/δ ≤ n/64"
K_CONSTRAINT = "1 ≤ k ≤ n/2^10"


def shuffled_positions(seed: int, n: int) -> np.ndarray:
    """``pos[a]`` = position of ``a`` in a seeded Fisher-Yates shuffle of ``range(n)``."""
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = prf(seed, TAG_PERM, i) % (i + 1)
        order[i], order[j] = order[j], order[i]
    pos = np.empty(n, dtype=np.int64)
    pos[np.array(order, dtype=np.int64)] = np.arange(n, dtype=np.int64)
    pos.setflags(write=False)
    return pos


def _max_power_two_exponent(lhs_factor: int, bound: int) -> int:
    """Largest ``r >= 0`` with ``lhs_factor * 2**r <= bound`` (assumes ``lhs_factor <= bound``)."""
    return (bound // lhs_factor).bit_length() - 1


def _floor_root_scaled(m: int, K: int, r: int) -> int:
    """``floor(m * 2**(-r/K))``: the largest ``t`` with ``t**K * 2**r <= m**K``."""
    target = m**K
    t = int(m * 2.0 ** (-r / K))
    while t > 0 and t**K << r > target:
        t -= 1
    while (t + 1) ** K << r <= target:
        t += 1
    return t


@dataclass(frozen=True)
class LbParams:
    n: int
    log2_inv_delta: int
    seed: int = 0
    m: int = field(init=False)
    K: int = field(init=False)
    R: int = field(init=False)
    sizes: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        n, ld = self.n, self.log2_inv_delta
        if not 64 <= ld <= n / 64:
            raise ParameterError(f"constraint {DELTA_CONSTRAINT} violated: log 1/δ = {ld}, n = {n}")
        m = math.isqrt(n * ld)
        K = ld // 16
        # R = floor(K log2(m / 4K))  <=>  largest R with 2**R * (4K)**K <= m**K
        R = _max_power_two_exponent((4 * K) ** K, m**K)
        sizes = tuple(_floor_root_scaled(m, K, r) for r in range(R + 1))
        for r in range(R):
            if sizes[r] - sizes[r + 1] < 2:
                raise ParameterError(f"size schedule gap n_{r} - n_{r + 1} = {sizes[r] - sizes[r + 1]} < 2")
        object.__setattr__(self, "seed", self.seed & MASK64)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "sizes", sizes)

    @property
    def positions(self) -> np.ndarray:
        cached = self.__dict__.get("_positions")
        if cached is None:
            cached = shuffled_positions(derive_seed(self.seed, "perm"), self.n)
            object.__setattr__(self, "_positions", cached)
        return cached


def lb_params(n: int, log2_inv_delta: int, seed: int = 0) -> LbParams:
    return LbParams(n, log2_inv_delta, seed)


@dataclass(frozen=True)
class LbParamsK:
    n: int
    k: int
    seed: int = 0
    m: int = field(init=False)
    R: int = field(init=False)

    def __post_init__(self):
        n, k = self.n, self.k
        if not 1 <= k <= n / 1024:
            raise ParameterError(f"constraint {K_CONSTRAINT} violated: k = {k}, n = {n}")
        # R = floor(log2(n/k)/2 - 2)  <=>  largest R with 4**(R + 2) * k <= n
        R = ((n // k).bit_length() - 1) // 2 - 2
        object.__setattr__(self, "seed", self.seed & MASK64)
        object.__setattr__(self, "m", math.isqrt(n * k))
        object.__setattr__(self, "R", R)

    @property
    def depth(self) -> np.ndarray:
        """Number of consecutive retention coin flips each index survives, capped at R."""
        cached = self.__dict__.get("_depth")
        if cached is None:
            u = prf_array(derive_seed(self.seed, "subsample"), TAG_SUBSAMPLE, np.arange(self.n, dtype=np.uint64))
            depth = np.zeros(self.n, dtype=np.int64)
            alive = np.ones(self.n, dtype=bool)
            for r in range(self.R):
                alive &= ((u >> np.uint64(r)) & np.uint64(1)).astype(bool)
                depth += alive
            depth.setflags(write=False)
            cached = depth
            object.__setattr__(self, "_depth", cached)
        return cached

    def in_level(self, r: int, items) -> set[int]:
        """Elements of ``items`` that lie in ``T_r``."""
        d = self.depth
        return {a for a in items if d[a] >= r}

    def level_set(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.depth >= r)


def lb_params_k(n: int, k: int, seed: int = 0) -> LbParamsK:
    return LbParamsK(n, k, seed)
