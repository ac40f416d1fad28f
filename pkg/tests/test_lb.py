import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urk.errors import FormatError, ParameterError
from urk.lb.codec import SubsetCode, binom_bits, subset_rank, subset_unrank
from urk.lb.experiments import (
    adaptivity_experiment,
    binary_entropy,
    mixture_mutual_information,
    pochhammer_check,
    random_subset,
    savings_inequality_holds,
    savings_report,
)
from urk.lb.params import DELTA_CONSTRAINT, lb_params, lb_params_k
from urk.lb.scheme import (
    EncoderOutput,
    dec,
    dec_k,
    enc,
    enc_k,
    encoding_bit_length,
    lockstep_partition,
)
from urk.protocol import make_stub

# parameters


def test_lb_params_values():
    p = lb_params(4096, 64)
    assert (p.m, p.K, p.R) == (512, 4, 20)
    assert p.sizes[0] == 512 and p.sizes[-1] == 16 and len(p.sizes) == 21
    assert all(a > b for a, b in zip(p.sizes, p.sizes[1:]))
    p = lb_params(65536, 64)
    assert (p.m, p.K, p.R) == (2048, 4, 28)


@pytest.mark.parametrize("n,d", [(4096, 32), (2048, 32), (4096, 65), (1024, 64)])
def test_lb_params_constraint(n, d):
    with pytest.raises(ParameterError, match=DELTA_CONSTRAINT):
        lb_params(n, d)


def test_lb_params_k_values():
    p = lb_params_k(4096, 4)
    assert (p.m, p.R) == (128, 3)
    with pytest.raises(ParameterError):
        lb_params_k(4096, 5)


def test_positions_are_a_permutation():
    p = lb_params(4096, 64, seed=3)
    assert sorted(p.positions.tolist()) == list(range(4096))


def test_k_levels_nested():
    p = lb_params_k(4096, 4, seed=1)
    for r in range(1, p.R + 1):
        assert set(p.level_set(r).tolist()) <= set(p.level_set(r - 1).tolist())


# subset codec


def colex_order(n, w):
    return sorted(itertools.combinations(range(n), w), key=lambda c: c[::-1])


def test_rank_examples():
    assert subset_rank(6, []).rank == 0
    assert subset_rank(6, [0, 1, 2]).rank == 0
    assert subset_rank(6, [2, 4, 5]).rank == 18
    assert subset_rank(6, [3, 4, 5]).rank == 19


def test_rank_matches_enumeration():
    for n in range(1, 9):
        for w in range(n + 1):
            for r, c in enumerate(colex_order(n, w)):
                assert subset_rank(n, c).rank == r
                assert subset_unrank(SubsetCode(n, w, r)) == c


def test_rank_errors():
    with pytest.raises(ParameterError):
        subset_rank(6, [6])
    with pytest.raises(FormatError):
        subset_unrank(SubsetCode(6, 3, 20))


def test_roundtrip_10000_random(rng):
    for _ in range(10_000):
        n = int(rng.integers(1, 300))
        w = int(rng.integers(0, n + 1))
        s = tuple(sorted(rng.choice(n, w, replace=False).tolist()))
        code = subset_rank(n, s)
        assert 0 <= code.rank < math.comb(n, w)
        assert subset_unrank(code) == s


@given(st.integers(1, 5000).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.integers(0, n - 1), max_size=60))))
def test_roundtrip_property(case):
    n, s = case
    assert subset_unrank(subset_rank(n, s)) == tuple(sorted(s))


def test_binom_bits_exact():
    assert binom_bits(4096, 492) == (math.comb(4096, 492) - 1).bit_length()
    assert binom_bits(6, 3) == 5
    assert binom_bits(6, 0) == 0


# encoder / decoder

P64 = lb_params(4096, 64, seed=0)
PK = lb_params_k(4096, 4, seed=0)


def stub(kind, k=1, seed=0):
    return make_stub(kind, 4096, k, seed=seed, delta=0.25 if kind == "iid_failure" else 0.0)


@pytest.mark.parametrize("kind", ["oracle", "always_fail", "iid_failure"])
def test_enc_dec_roundtrip(kind):
    for t in range(5):
        S = random_subset(4096, 512, 1, t)
        et, dt = [], []
        out = enc(S, stub(kind, seed=t), P64, et)
        assert dec(out, stub(kind, seed=t), P64, dt) == frozenset(S)
        assert lockstep_partition(S, et, dt)


def test_oracle_succeeds_every_round():
    S = random_subset(4096, 512, 2, 0)
    out = enc(S, stub("oracle"), P64)
    assert out.b == (1,) * 20 and len(out.B) == 492
    assert encoding_bit_length(out) == 8 * len(out.message) + 20 + 12 + binom_bits(4096, 492)


def test_always_fail_keeps_everything():
    S = random_subset(4096, 512, 2, 1)
    out = enc(S, stub("always_fail"), P64)
    assert out.b == (0,) * 20 and set(out.B) == set(S)
    assert encoding_bit_length(out) - 8 * len(out.message) - 32 == binom_bits(4096, 512)


def test_iid_failure_success_count():
    # per-round calls to the stub are independent coins: sum(b) ~ Binomial(20, 0.75)
    R, trials = 20, 1000
    p = lb_params(4096, 64, seed=0)
    totals = []
    for t in range(trials):
        out = enc(random_subset(4096, 512, 5, t), make_stub("iid_failure", 4096, 1, seed=t, delta=0.25), p)
        totals.append(sum(out.b))
    sigma = math.sqrt(R * 0.25 * 0.75 / trials)
    assert abs(np.mean(totals) - 0.75 * R) <= 3 * sigma


def test_encoder_output_bytes_roundtrip():
    S = random_subset(4096, 512, 3, 0)
    out = enc(S, stub("iid_failure", seed=1), P64)
    data = out.to_bytes()
    assert EncoderOutput.from_bytes(data) == out
    with pytest.raises(FormatError):
        EncoderOutput.from_bytes(data[:-1])
    with pytest.raises(FormatError):
        EncoderOutput.from_bytes(data[:10])


def test_dec_rejects_mismatched_parameters():
    out = enc(random_subset(4096, 512, 3, 0), stub("oracle"), P64)
    with pytest.raises(FormatError):
        dec(out, stub("oracle"), lb_params(65536, 64))


def test_enc_rejects_wrong_size():
    with pytest.raises(ParameterError):
        enc([1, 2, 3], stub("oracle"), P64)


@pytest.mark.parametrize("kind", ["oracle", "always_fail", "iid_failure"])
def test_enc_k_roundtrip(kind):
    for t in range(10):
        S = random_subset(4096, 128, 7, t)
        et, dt = [], []
        P = stub(kind, k=4, seed=t)
        out = enc_k(S, P, PK, et)
        assert dec_k(out, P, PK, dt) == frozenset(S)
        assert lockstep_partition(S, et, dt)


def test_enc_k_always_fail_keeps_everything():
    S = random_subset(4096, 128, 7, 99)
    out = enc_k(S, stub("always_fail", k=4), PK)
    assert set(out.B) == set(S)


def test_enc_k_oracle_removal_rate():
    # each round strips about k/2 = 2 elements on average, so total removed ~ R k / 2 = 6
    removed = [128 - len(enc_k(random_subset(4096, 128, 8, t), stub("oracle", k=4), PK).B) for t in range(200)]
    assert 4.5 <= np.mean(removed) <= 7.5


# savings accounting


def test_savings_inequality_direct():
    # d = 0 is an identity; the bound is tight only when it should be
    assert savings_inequality_holds(4096, 512, 512)
    assert savings_inequality_holds(4096, 512, 492)
    assert savings_inequality_holds(10, 2, 0)


def test_savings_report_oracle():
    rep = savings_report(stub("oracle"), P64, trials=10)
    assert all(t.successes == 20 and t.remainder == 492 for t in rep.trials)
    assert rep.mean_savings == 20 and rep.inequality_rate == 1.0 and rep.roundtrip_rate == 1.0


def test_source_coding_sanity():
    rep = savings_report(lambda t: make_stub("iid_failure", 4096, 1, seed=t, delta=0.25), P64, trials=1000)
    # any injective encoding of uniform m-subsets spends at least the entropy on average
    assert rep.mean_total_bits + 1 >= rep.log2_binom_nm


# numerics


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert abs(binary_entropy(0.11) - 0.4999) < 1e-3


def test_mutual_information_matches_joint_table():
    for n, p in [(8, 0.0), (8, 0.3), (16, 1 / 4), (4, 1.0)]:
        joint = np.full((n, n), (1 - p) / n / n)
        joint[np.diag_indices(n)] += p / n
        px, py = joint.sum(1), joint.sum(0)
        nz = joint > 0
        info = float((joint[nz] * np.log2(joint[nz] / np.outer(px, py)[nz])).sum())
        assert abs(mixture_mutual_information(n, p) - info) < 1e-12


def test_adaptivity_edges():
    assert abs(adaptivity_experiment(64, 0, 200_000, seed=1).measured_p - 1 / 64) < 0.002
    assert adaptivity_experiment(64, 6, 1000, seed=1).measured_p == 1.0
    with pytest.raises(ParameterError):
        adaptivity_experiment(100, 1, 10)
    with pytest.raises(ParameterError):
        adaptivity_experiment(64, 7, 10)


def test_pochhammer_values():
    r = pochhammer_check(1)
    assert abs(float(r.product) - 3.46274661945506) < 1e-10
    assert r.passed and r.bound == 32
    r = pochhammer_check(4)
    assert r.passed and r.bound == 2**20
    with pytest.raises(ParameterError):
        pochhammer_check(2, J=100)
