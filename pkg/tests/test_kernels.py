"""The numba and numpy kernels must agree exactly; both must match literal enumeration."""

import importlib
import itertools

import numpy as np
import pytest

from urk import kernels
from urk.kernels import inverse_table, key_rows, multiples_table, numpy_impl
from urk.prf import TAG_MATRIX, prf, prf_array

numba_impl = None
try:
    numba_impl = importlib.import_module("urk.kernels.numba_impl")
except ImportError:  # pragma: no cover
    pass

backends = [numpy_impl] + ([numba_impl] if numba_impl is not None else [])
ids = ["numpy"] + (["numba"] if numba_impl is not None else [])


def brute_search(cols, q, y, w):
    """First weight-w solution in (colex support, lex values) order, by literal enumeration."""
    n = cols.shape[0]
    for supp in sorted(itertools.combinations(range(n), w), key=lambda c: c[::-1]):
        for vals in itertools.product(range(1, q), repeat=w):
            acc = np.zeros(cols.shape[1], dtype=np.int64)
            for c, v in zip(supp, vals):
                acc += v * cols[c]
            if np.array_equal(acc % q, y % q):
                return True, list(supp), list(vals)
    return False, None, None


def test_env_flag_selects_backend():
    assert kernels.BACKEND in ("numba", "numpy")
    if kernels.BACKEND == "numba":
        assert kernels.active is kernels.numba_impl


def test_prf_array_matches_scalar():
    a = np.arange(50, dtype=np.uint64)
    got = prf_array(77, TAG_MATRIX, a[:, None], a[None, :5])
    for i in range(50):
        for j in range(5):
            assert int(got[i, j]) == prf(77, TAG_MATRIX, i, j)


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_fill_matrix_matches_prf(impl):
    m = impl.fill_matrix(5, 7, 4, 9)
    for r in range(4):
        for c in range(9):
            assert m[r, c] == prf(5, TAG_MATRIX, r, c) % 7


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_rref_identity(impl, rng):
    for _ in range(30):
        q = int(rng.choice([3, 5]))
        m, n = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        a = rng.integers(0, q, (m, n)) * (rng.random((m, n)) < 0.7)
        r, e, piv = impl.rref(a, q, inverse_table(q))
        assert np.array_equal((e @ a) % q, r % q)
        for t, c in enumerate(piv):
            col = np.zeros(m, dtype=np.int64)
            col[t] = 1
            assert np.array_equal(r[:, c], col)
        assert not r[len(piv):].any()


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_sparse_search_matches_brute_force(impl, rng):
    for trial in range(120):
        q = int(rng.choice([3, 5]))
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 6))
        cols = rng.integers(0, q, (n, m)) * (rng.random((n, m)) < 0.6)
        if trial % 5 == 0 and n > 1:
            cols[1] = cols[0]
        if trial % 7 == 0:
            cols[0] = 0
        w = int(rng.integers(0, min(n, 3) + 1))
        y = rng.integers(0, q, m) if trial % 3 else (rng.integers(0, q, n) @ cols) % q
        t = key_rows(n, m, q)
        table = multiples_table(cols, q, t)
        found, supp, vals = impl.sparse_search(np.ascontiguousarray(cols), q, y, w, *table, t)
        ref = brute_search(cols, q, y, w)
        assert bool(found) == ref[0]
        if found:
            assert list(supp) == ref[1] and list(vals) == ref[2]


@pytest.mark.skipif(numba_impl is None, reason="numba not installed")
def test_backends_agree_on_larger_search(rng):
    q, n, m = 3, 40, 14
    cols = np.ascontiguousarray(numpy_impl.fill_matrix(4, q, m, n).T)
    t = key_rows(n, m, q)
    table = multiples_table(cols, q, t)
    for _ in range(20):
        x = np.zeros(n, dtype=np.int64)
        idx = rng.choice(n, 3, replace=False)
        x[idx] = rng.integers(1, q, 3)
        y = (x @ cols) % q
        for w in (1, 2, 3):
            a = numpy_impl.sparse_search(cols, q, y, w, *table, t)
            b = numba_impl.sparse_search(cols, q, y, w, *table, t)
            assert bool(a[0]) == bool(b[0])
            if a[0]:
                assert np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


def test_multiples_table_contents():
    cols = np.array([[1, 2], [0, 0], [2, 1]])
    keys, col, val = multiples_table(cols, 3, 2)
    assert len(keys) == 6
    for k, c, v in zip(keys, col, val):
        vec = (v * cols[c]) % 3
        assert k == vec[0] + 3 * vec[1]
    assert list(keys) == sorted(keys)
