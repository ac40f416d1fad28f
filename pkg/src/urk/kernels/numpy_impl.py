"""Pure-numpy kernels. Reference path and fallback when numba is off."""

import itertools

import numpy as np

from ..prf import TAG_MATRIX, prf_array

_CHUNK = 1 << 14


def inverse_table(q: int) -> np.ndarray:
    """``inv[a]`` is the inverse of ``a`` mod prime ``q``; ``inv[0] = 0``."""
    inv = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        inv[a] = pow(a, q - 2, q)
    return inv


def key_rows(n: int, m: int, q: int) -> int:
    """How many leading rows go into a lookup key.

    Enough that a random residual collides with one of the ``n (q - 1)``
    table entries with probability about ``q**-6`` (a collision only costs a
    full-length check), and few enough that the base-q key fits in 63 bits.
    """
    need = 6
    size = n * (q - 1)
    while size > 1:
        size = -(-size // q)
        need += 1
    cap = 1
    while q ** (cap + 1) < (1 << 63):
        cap += 1
    return max(1, min(m, need, cap))


def key_powers(q: int, t: int) -> np.ndarray:
    return q ** np.arange(t, dtype=np.int64)


def multiples_table(cols: np.ndarray, q: int, t: int):
    """Every nonzero multiple ``v * cols[c]`` keyed by its first ``t`` entries.

    Returns ``(keys, col, val)`` sorted by key, ties in ``(col, val)`` order.
    """
    cols = np.asarray(cols, dtype=np.int64)
    n = cols.shape[0]
    v = np.arange(1, q, dtype=np.int64)
    mult = (v[None, :, None] * cols[:, None, :t]) % q
    keys = (mult @ key_powers(q, t)).reshape(-1)
    col = np.repeat(np.arange(n, dtype=np.int64), q - 1)
    val = np.tile(v, n)
    order = np.argsort(keys, kind="stable")
    return keys[order], col[order], val[order]


def fill_matrix(seed: int, q: int, m: int, n: int) -> np.ndarray:
    rows = np.arange(m, dtype=np.uint64)[:, None]
    cols = np.arange(n, dtype=np.uint64)[None, :]
    out = np.empty((m, n), dtype=np.int64)
    step = max(1, (1 << 20) // max(n, 1))
    for r0 in range(0, m, step):
        h = prf_array(seed, TAG_MATRIX, rows[r0:r0 + step], cols)
        out[r0:r0 + step] = (h % np.uint64(q)).astype(np.int64)
    return out


def mat_apply(mat: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    return (mat @ v) % q


def sparse_search(cols, q, y, w, keys, tcol, tval, t):
    """Canonical first weight-``w`` solution of ``sum_i v_i cols[i] = y`` over GF(q).

    Canonical means: supports in colex order, then values in lex order by
    ascending index. The smallest support element is completed by lookup in
    :func:`multiples_table`; the other ``w - 1`` are enumerated. This version
    scans everything and keeps the minimum.

    Returns ``(found, support, values)``.
    """
    n, m = cols.shape
    y = np.asarray(y, dtype=np.int64) % q
    empty = np.zeros(w, dtype=np.int64)
    if w == 0:
        return (not y.any()), empty, empty.copy()
    if w > n:
        return False, empty, empty.copy()
    p = w - 1
    prods = list(itertools.product(range(1, q), repeat=p))
    vals = np.array(prods, dtype=np.int64).reshape(len(prods), p)
    nv = vals.shape[0]
    powers = key_powers(q, t)
    best_key = None
    best = None
    combos_iter = itertools.combinations(range(n), p)
    while True:
        block = list(itertools.islice(combos_iter, max(1, _CHUNK // nv)))
        if not block:
            break
        tails = np.array(block, dtype=np.int64).reshape(len(block), p)
        nc = tails.shape[0]
        part = np.zeros((nc, nv, m), dtype=np.int64)
        for u in range(p):
            part += vals[None, :, u, None] * cols[tails[:, u]][:, None, :]
        resid = ((y[None, None, :] - part) % q).reshape(nc * nv, m)
        rkey = resid[:, :t] @ powers
        lo = np.searchsorted(keys, rkey, side="left")
        hi = np.searchsorted(keys, rkey, side="right")
        limit = np.repeat(tails[:, 0] if p else np.full(nc, n, dtype=np.int64), nv)
        counts = hi - lo
        rows = np.repeat(np.arange(nc * nv), counts)
        if rows.size == 0:
            continue
        offsets = np.arange(rows.size) - np.repeat(np.cumsum(counts) - counts, counts)
        pos = np.repeat(lo, counts) + offsets
        c1, v1 = tcol[pos], tval[pos]
        keep = c1 < limit[rows]
        rows, c1, v1 = rows[keep], c1[keep], v1[keep]
        ok = ((v1[:, None] * cols[c1]) % q == resid[rows]).all(axis=1)
        for r, c, v in zip(rows[ok].tolist(), c1[ok].tolist(), v1[ok].tolist()):
            ci, vi = divmod(r, nv)
            tail = tails[ci].tolist()
            tv = vals[vi].tolist()
            key = (tuple(reversed(tail)), c, v, tuple(tv))
            if best_key is None or key < best_key:
                best_key = key
                best = ([c] + tail, [v] + tv)
    if best is None:
        return False, empty, empty.copy()
    return True, np.array(best[0], dtype=np.int64), np.array(best[1], dtype=np.int64)


def rref(mat: np.ndarray, q: int, inv: np.ndarray):
    """Reduced row echelon form over GF(q).

    Returns ``(R, E, pivots)`` with ``E @ mat == R (mod q)``.
    """
    a = np.asarray(mat, dtype=np.int64) % q
    m, n = a.shape
    e = np.eye(m, dtype=np.int64)
    pivots = []
    rank = 0
    for col in range(n):
        if rank == m:
            break
        nz = np.nonzero(a[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
            e[[rank, piv]] = e[[piv, rank]]
        s = inv[a[rank, col]]
        a[rank] = (a[rank] * s) % q
        e[rank] = (e[rank] * s) % q
        f = a[:, col].copy()
        f[rank] = 0
        a = (a - f[:, None] * a[rank][None, :]) % q
        e = (e - f[:, None] * e[rank][None, :]) % q
        pivots.append(col)
        rank += 1
    return a, e, np.array(pivots, dtype=np.int64)
