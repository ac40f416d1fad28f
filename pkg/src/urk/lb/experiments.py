"""Statistics and numeric checks around the set encoder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from ..errors import ParameterError
from ..protocol import ProtocolHandle
from .params import LbParams
from .scheme import dec, enc, encoding_bit_length


def savings_inequality_holds(n: int, m: int, w: int) -> bool:
    """Exact check of ``log2 C(n,m) - log2 C(n,w) >= (m - w) * log2((n - m) / m)``."""
    d = m - w
    return math.comb(n, m) * m**d >= math.comb(n, w) * (n - m) ** d


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    successes: int
    remainder: int
    total_bits: int
    inequality: bool
    roundtrip: bool


@dataclass(frozen=True)
class SavingsReport:
    trials: tuple[TrialRecord, ...]
    log2_binom_nm: float
    R: int

    @property
    def mean_savings(self) -> float:
        return float(np.mean([t.successes for t in self.trials]))

    @property
    def mean_total_bits(self) -> float:
        return float(np.mean([t.total_bits for t in self.trials]))

    @property
    def inequality_rate(self) -> float:
        return float(np.mean([t.inequality for t in self.trials]))

    @property
    def roundtrip_rate(self) -> float:
        return float(np.mean([t.roundtrip for t in self.trials]))


def random_subset(n: int, m: int, seed: int, trial: int) -> list[int]:
    rng = np.random.default_rng([seed, trial])
    return sorted(rng.choice(n, size=m, replace=False).tolist())


def savings_report(
    protocol: ProtocolHandle | Callable[[int], ProtocolHandle],
    params: LbParams,
    trials: int,
    seed: int = 0,
) -> SavingsReport:
    """Encode ``trials`` random m-subsets; ``protocol`` may be a handle or a per-trial factory."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    n, m = params.n, params.m
    records = []
    for t in range(trials):
        P = protocol(t) if callable(protocol) and not isinstance(protocol, ProtocolHandle) else protocol
        S = random_subset(n, m, seed, t)
        out = enc(S, P, params)
        w = len(out.B)
        records.append(
            TrialRecord(
                trial=t,
                successes=sum(out.b),
                remainder=w,
                total_bits=encoding_bit_length(out),
                inequality=savings_inequality_holds(n, m, w),
                roundtrip=dec(out, P, params) == frozenset(S),
            )
        )
    return SavingsReport(tuple(records), _log2_comb(n, m), params.R)


def _log2_comb(n: int, w: int) -> float:
    c = math.comb(n, w)
    shift = max(c.bit_length() - 60, 0)
    return math.log2(c >> shift) + shift


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@dataclass(frozen=True)
class AdaptivityResult:
    n: int
    t: int
    trials: int
    measured_p: float
    exact_p: float
    mutual_information: float
    analytic_rhs: float
    rhs_unit_entropy: float
    rhs_event_entropy: float

    @property
    def nominal_p(self) -> float:
        return self.t / math.log2(self.n) + 1 / self.n


def mixture_mutual_information(n: int, p_copy: float) -> float:
    """``I(X;Y)`` for X uniform on [n] and Y = X w.p. ``p_copy``, else uniform."""
    a = p_copy + (1 - p_copy) / n
    b = (1 - p_copy) / n
    h_cond = -a * math.log2(a) - ((n - 1) * b * math.log2(b) if b > 0 else 0.0)
    return math.log2(n) - h_cond


def adaptivity_experiment(n: int, t: int, trials: int, seed: int = 0) -> AdaptivityResult:
    """Monte Carlo of ``Pr(X = Y)`` against the entropy bound with failure level ``1/n``.

    ``analytic_rhs`` uses ``(I(X;Y) + H2(1/n)) / log2 n``. Two reference
    variants are reported alongside: one with the entropy term replaced by 1,
    and one with ``H2`` evaluated at the event probability itself.
    """
    if n < 2 or n & (n - 1):
        raise ParameterError(f"n must be a power of two >= 2, got {n}")
    logn = n.bit_length() - 1
    if not 0 <= t <= logn:
        raise ParameterError(f"t must lie in [0, log2 n] = [0, {logn}], got {t}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    p_copy = t / logn
    rng = np.random.default_rng(seed)
    x = rng.integers(0, n, size=trials)
    copy = rng.random(trials) < p_copy
    y = np.where(copy, x, rng.integers(0, n, size=trials))
    measured = float(np.mean(x == y))
    exact = p_copy + (1 - p_copy) / n
    info = mixture_mutual_information(n, p_copy)
    return AdaptivityResult(
        n=n,
        t=t,
        trials=trials,
        measured_p=measured,
        exact_p=exact,
        mutual_information=info,
        analytic_rhs=(info + binary_entropy(1 / n)) / logn,
        rhs_unit_entropy=(info + 1) / logn,
        rhs_event_entropy=(info + binary_entropy(exact)) / logn,
    )


@dataclass(frozen=True)
class PochhammerResult:
    K: int
    J: int
    product: mpmath.mpf
    bound: int

    @property
    def passed(self) -> bool:
        return self.product <= self.bound


def pochhammer_check(K: int, J: int | None = None, dps: int = 40) -> PochhammerResult:
    """``prod_{j=1..J} 1 / (1 - 2**(-j/K))`` in extended precision, against ``2**(5K)``."""
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    J = 200 * K if J is None else J
    if J < 200 * K:
        raise ParameterError(f"J must be >= 200*K = {200 * K}, got {J}")
    with mpmath.workdps(dps):
        ratio = mpmath.power(2, mpmath.mpf(-1) / K)
        term = mpmath.mpf(1)
        prod = mpmath.mpf(1)
        for _ in range(J):
            term *= ratio
            prod /= 1 - term
        return PochhammerResult(K, J, +prod, 2 ** (5 * K))


__all__ = [
    "AdaptivityResult",
    "PochhammerResult",
    "SavingsReport",
    "TrialRecord",
    "adaptivity_experiment",
    "binary_entropy",
    "mixture_mutual_information",
    "pochhammer_check",
    "random_subset",
    "savings_inequality_holds",
    "savings_report",
]
