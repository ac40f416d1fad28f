"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal so they show without ``-s``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from urk.experiments import answer_is_valid, failure_trials, message_size, promise_instance, uniformity
from urk.gfq import FieldVec, mat_apply
from urk.lb.experiments import adaptivity_experiment, pochhammer_check, random_subset, savings_inequality_holds
from urk.lb.params import lb_params, lb_params_k
from urk.lb.scheme import dec, dec_k, enc, enc_k, lockstep_partition
from urk.prf import derive_seed
from urk.protocol import ProtocolParams, SketchProtocol, make_protocol, make_stub, serialize
from urk.recovery import build_scheme, exhaustive_decode, verify_injectivity
from urk.turnstile import (
    naive_findup_family,
    naive_suppfind_family,
    turnstile_family,
    ur_from_findup,
    ur_k_from_suppfind,
)

TRIALS = 200
HANDLES = ("oracle", "always_fail", "iid_failure", "sketch")


@pytest.fixture
def report(capsys):
    def emit(tag: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {tag}: {detail}")

    return emit


def _handle(kind: str, n: int, k: int, trial: int):
    seed = derive_seed(0, "trial", trial)
    if kind == "iid_failure":
        return make_stub(kind, n, k, seed, 0.25)
    if kind in ("oracle", "always_fail"):
        return make_stub(kind, n, k, seed)
    if k == 1:
        # GF(3) sketches with recovery sparsity 2 keep the exact decoder fast at n = 4096
        return make_protocol(ProtocolParams(n, 1, q=3, oversample=2, seed=seed))
    # the k-index variant needs sparsity 16, past the exact decoder's budget; use the bucket backend
    return make_protocol(ProtocolParams(n, k, oversample=4, seed=seed, backend="bucket"))


def test_c1_sparse_recovery_oracle(report):
    start = time.perf_counter()
    scheme = build_scheme(12, 2, q=3, slack=10, seed=0)
    injective = verify_injectivity(scheme)
    vectors = []
    for w in range(3):
        for supp in itertools.combinations(range(12), w):
            for vals in itertools.product((1, 2), repeat=w):
                v = np.zeros(12, dtype=np.int64)
                v[list(supp)] = vals
                vectors.append(FieldVec(3, v))
    exact = sum(exhaustive_decode(scheme, mat_apply(scheme.matrix, v)) == v for v in vectors)
    seeds_ok = sum(verify_injectivity(build_scheme(12, 2, 3, 10, seed=s)) for s in range(100))
    elapsed = time.perf_counter() - start
    ok = injective and len(vectors) == 289 and exact == 289 and seeds_ok >= 99 and elapsed < 60
    report("C1 sparse-recovery oracle", ok, f"decoded {exact}/289, injective seeds {seeds_ok}/100, {elapsed:.1f}s")
    assert ok


def test_c2_protocol_roundtrip(report):
    start = time.perf_counter()
    rows4 = failure_trials(64, 1, 3, 4, 10, 300, seed=0)
    rows8 = failure_trials(64, 1, 3, 8, 10, 300, seed=0)
    r4 = sum(r.failed for r in rows4) / 300
    r8 = sum(r.failed for r in rows8) / 300
    elapsed = time.perf_counter() - start
    ok = r4 <= 0.15 and r8 <= r4 and elapsed < 600
    report("C2 protocol round-trip", ok, f"failure rate {r4:.4f} at oversample 4, {r8:.4f} at oversample 8, {elapsed:.1f}s")
    assert ok


def test_c3_message_size(report):
    rows = message_size([2**8, 2**10, 2**12, 2**14], k=4, q=3, oversample=16, slack=10)
    exact = all(r.payload_bits == r.formula_bits == (r.L + 1) * math.ceil(r.m_rows * math.log2(3)) for r in rows)
    sized = all(r.serialized_bytes == 52 + (r.payload_bits + 7) // 8 for r in rows)
    norm = [r.normalized for r in rows]
    band = max(norm) / min(norm)
    ok = exact and sized and band <= 3
    detail = ", ".join(f"n={r.n}: {r.payload_bits} bits ({r.normalized:.1f})" for r in rows)
    report("C3 message-size scaling", ok, f"{detail}; band ratio {band:.2f}")
    assert ok


@pytest.fixture(scope="module")
def c4_runs():
    params = lb_params(4096, 64, seed=0)
    assert (params.m, params.K, params.R) == (512, 4, 20)
    runs = {}
    for kind in HANDLES:
        records = []
        for t in range(TRIALS):
            P = _handle(kind, 4096, 1, t)
            S = random_subset(4096, 512, 0, t)
            et, dt = [], []
            out = enc(S, P, params, et)
            back = dec(out, P, params, dt)
            records.append((back == frozenset(S), lockstep_partition(S, et, dt), out))
        runs[kind] = records
    return runs


def test_c4_harness_totality(report, c4_runs):
    parts = []
    ok = True
    for kind in HANDLES:
        recs = c4_runs[kind]
        rt = sum(r[0] for r in recs)
        ls = sum(r[1] for r in recs)
        ok &= rt == TRIALS and ls == TRIALS
        parts.append(f"{kind} {rt}/{TRIALS} (lockstep {ls})")
    report("C4 harness totality", ok, ", ".join(parts))
    assert ok


def test_c5_k_harness_totality(report):
    params = lb_params_k(4096, 4, seed=0)
    assert (params.m, params.R) == (128, 3)
    parts = []
    ok = True
    for kind in HANDLES:
        rt = ls = 0
        for t in range(TRIALS):
            P = _handle(kind, 4096, 4, t)
            S = random_subset(4096, 128, 1, t)
            et, dt = [], []
            out = enc_k(S, P, params, et)
            rt += dec_k(out, P, params, dt) == frozenset(S)
            ls += lockstep_partition(S, et, dt)
        ok &= rt == TRIALS and ls == TRIALS
        parts.append(f"{kind} {rt}/{TRIALS}")
    report("C5 k-variant totality", ok, ", ".join(parts))
    assert ok


def test_c6_savings_accounting(report, c4_runs):
    oracle = [r[2] for r in c4_runs["oracle"]]
    exact = all(sum(o.b) == 20 and len(o.B) == 492 for o in oracle)
    rates = {}
    for kind in HANDLES:
        outs = [r[2] for r in c4_runs[kind]]
        rates[kind] = sum(savings_inequality_holds(4096, 512, len(o.B)) for o in outs) / len(outs)
    ok = exact and all(v == 1.0 for v in rates.values())
    detail = ", ".join(f"{k} {v:.0%}" for k, v in rates.items())
    report("C6 savings accounting", ok, f"oracle sum(b)=20 and |B|=492 every trial: {exact}; inequality {detail}")
    assert ok


def test_c7_sampling_uniformity(report):
    res = uniformity(n=32, weight=8, k=1, trials=20000, seed=0, oversample=4)
    ok = res.p_value > 0.001
    report("C7 l0-sampling uniformity", ok, f"counts {list(res.counts)}, failures {res.failures}, chi2 {res.chi2:.2f}, p {res.p_value:.4f}")
    assert ok


def test_c8_adaptivity_sharpness(report):
    start = time.perf_counter()
    r = adaptivity_experiment(4096, 3, 10**6, seed=0)
    elapsed = time.perf_counter() - start
    target = 3 / 12 + 1 / 4096
    within = abs(r.measured_p - target) <= 0.2 * target
    below = r.measured_p <= r.analytic_rhs
    ok = within and below and elapsed < 60
    report(
        "C8 adaptivity sharpness",
        ok,
        f"measured {r.measured_p:.6f} (target {target:.6f}, within 20%: {within}); "
        f"analytic rhs {r.analytic_rhs:.6f} (measured <= rhs: {below}); "
        f"rhs with entropy term 1: {r.rhs_unit_entropy:.6f}; {elapsed:.1f}s",
    )
    assert within
    assert below


def test_c9_pochhammer(report):
    results = [pochhammer_check(K) for K in range(1, 65)]
    failing = [r.K for r in results if not r.passed]
    k1 = float(results[0].product)
    ok = not failing and abs(k1 - 3.4627) <= 1e-3
    report("C9 Pochhammer bound", ok, f"all K in 1..64 bounded: {not failing}; K=1 product {k1:.10f}")
    assert ok


def test_c10_reduction_adapters(report):
    rng = np.random.default_rng(2024)
    findup_ok = 0
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        x, y = promise_instance(n, rng)
        findup_ok += answer_is_valid(ur_from_findup(naive_findup_family(n), n).run(x, y), x, y, 1)
    supp_ok = 0
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        k = int(rng.integers(1, n // 2 + 1))
        x, y = promise_instance(n, rng)
        supp_ok += answer_is_valid(ur_k_from_suppfind(naive_suppfind_family(n, k), n, k).run(x, y), x, y, k)
    same = 0
    for t in range(100):
        params = ProtocolParams(64, 1, oversample=4, seed=derive_seed(7, "trial", t))
        direct = SketchProtocol(params)
        via = ur_k_from_suppfind(turnstile_family(params), 64, 1)
        x, y = promise_instance(64, np.random.default_rng([7, t]))
        bytes_equal = via.message_bytes(via.alice(x)) == serialize(direct.alice(x))
        same += bytes_equal and via.run(x, y) == direct.run(x, y)
    ok = findup_ok == 1000 and supp_ok == 1000 and same == 100
    report("C10 reduction adapters", ok, f"findup {findup_ok}/1000, suppfind {supp_ok}/1000, turnstile bit-equal {same}/100")
    assert ok
