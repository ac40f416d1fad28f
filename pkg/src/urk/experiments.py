"""Protocol-level experiments: failure rate, message size, sampling uniformity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gfq import pack_base_q
from .prf import derive_seed
from .protocol import ProtocolParams, SketchProtocol, make_protocol, payload_bits, serialize
from .turnstile import TurnstileSketch, l0_sample_k


def promise_instance(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random 0/1 pair with ``support(y)`` a proper subset of ``support(x)``."""
    wx = int(rng.integers(1, n + 1))
    sx = rng.choice(n, size=wx, replace=False)
    wy = int(rng.integers(0, wx))
    sy = rng.choice(sx, size=wy, replace=False)
    x = np.zeros(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.int64)
    x[sx] = 1
    y[sy] = 1
    return x, y


def answer_is_valid(answer, x: np.ndarray, y: np.ndarray, k: int) -> bool:
    if answer is None:
        return False
    diff = x != y
    want = min(k, int(diff.sum()))
    return len(answer) == want == len(set(answer)) and all(0 <= i < len(x) and diff[i] for i in answer)


@dataclass(frozen=True)
class FailureTrial:
    trial: int
    diff_weight: int
    answer: tuple[int, ...] | None
    failed: bool


def failure_trials(
    n: int,
    k: int,
    q: int = 3,
    oversample: int = 4,
    slack: int = 10,
    trials: int = 300,
    seed: int = 0,
    backend: str = "gfq",
) -> list[FailureTrial]:
    """One promise instance and one fresh shared seed per trial; both depend only on ``(seed, trial)``."""
    out = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        x, y = promise_instance(n, rng)
        params = ProtocolParams(n, k, q, oversample, slack, derive_seed(seed, "trial", t), backend)
        answer = make_protocol(params).run(x, y)
        out.append(FailureTrial(t, int((x != y).sum()), answer, not answer_is_valid(answer, x, y, k)))
    return out


def failure_rate(*args, **kwargs) -> float:
    rows = failure_trials(*args, **kwargs)
    return sum(r.failed for r in rows) / len(rows)


@dataclass(frozen=True)
class MessageSizeRow:
    n: int
    k: int
    L: int
    m_rows: int
    payload_bits: int
    formula_bits: int
    serialized_bytes: int
    normalized: float


def message_size(ns, k: int, q: int = 3, oversample: int = 16, slack: int = 10, seed: int = 0) -> list[MessageSizeRow]:
    """Sketch a random input at each n and measure the packed payload."""
    rows = []
    for n in ns:
        params = ProtocolParams(n, k, q, oversample, slack, seed)
        proto = SketchProtocol(params)
        rng = np.random.default_rng([seed, n])
        x = (rng.random(n) < 0.5).astype(np.int64)
        msg = proto.alice(x)
        measured = sum(pack_base_q(v).width for v in msg.vectors)
        data = serialize(msg)
        rows.append(
            MessageSizeRow(
                n=n,
                k=k,
                L=params.L,
                m_rows=params.m_rows,
                payload_bits=measured,
                formula_bits=payload_bits(params.L, params.m_rows, q),
                serialized_bytes=len(data),
                normalized=measured / (k * math.log2(n / k) ** 2),
            )
        )
    return rows


@dataclass(frozen=True)
class UniformityResult:
    support: tuple[int, ...]
    counts: tuple[int, ...]
    failures: int
    chi2: float
    p_value: float


def uniformity(
    n: int = 32,
    weight: int = 8,
    k: int = 1,
    trials: int = 20000,
    seed: int = 0,
    oversample: int = 4,
    q: int = 3,
    slack: int = 10,
) -> UniformityResult:
    """Sample from a fixed-support vector under fresh sketch seeds; chi-square against uniform."""
    rng = np.random.default_rng(seed)
    support = tuple(sorted(rng.choice(n, size=weight, replace=False).tolist()))
    position = {i: t for t, i in enumerate(support)}
    counts = np.zeros(weight, dtype=np.int64)
    failures = 0
    for t in range(trials):
        params = ProtocolParams(n, k, q, oversample, slack, derive_seed(seed, "trial", t))
        sketch = TurnstileSketch(params)
        for i in support:
            sketch.update(i, 1)
        answer = l0_sample_k(sketch, derive_seed(seed, "sample", t))
        if not answer:
            failures += 1
            continue
        for i in answer:
            if i in position:
                counts[position[i]] += 1
            else:
                failures += 1
    chi2, p = stats.chisquare(counts) if counts.sum() else (float("nan"), float("nan"))
    return UniformityResult(support, tuple(int(c) for c in counts), failures, float(chi2), float(p))
