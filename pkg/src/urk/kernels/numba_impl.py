"""numba-compiled kernels; same contracts as :mod:`.numpy_impl`."""

import numpy as np
from numba import njit

from ..prf import GOLDEN, MASK64, MIX1, MIX2, TAG_MATRIX, mix64

_GOLDEN = np.uint64(GOLDEN)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _fill(h0, q, m, n):
    out = np.empty((m, n), dtype=np.int64)
    one = np.uint64(1)
    qq = np.uint64(q)
    for r in range(m):
        hr = _mix(h0 + (np.uint64(r) + one) * _GOLDEN)
        for c in range(n):
            out[r, c] = np.int64(_mix(hr + (np.uint64(c) + one) * _GOLDEN) % qq)
    return out


def fill_matrix(seed: int, q: int, m: int, n: int) -> np.ndarray:
    h0 = np.uint64(mix64((seed & MASK64) ^ TAG_MATRIX))
    return _fill(h0, q, m, n)


@njit(cache=True)
def _mat_apply(mat, v, q):
    m, n = mat.shape
    out = np.zeros(m, dtype=np.int64)
    for c in range(n):
        x = v[c]
        if x != 0:
            for r in range(m):
                out[r] += mat[r, c] * x
    for r in range(m):
        out[r] %= q
    return out


def mat_apply(mat: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    return _mat_apply(np.ascontiguousarray(mat, dtype=np.int64), np.asarray(v, dtype=np.int64), q)


@njit(cache=True)
def _slot(key, bits):
    return np.int64((np.uint64(key) * _GOLDEN) >> np.uint64(64 - bits))


@njit(cache=True)
def _build_slots(keys, bits):
    # open addressing: slot -> position of the first sorted entry carrying that key
    size = 1 << bits
    slots = np.full(size, -1, dtype=np.int64)
    mask = size - 1
    for pos in range(keys.shape[0]):
        if pos > 0 and keys[pos] == keys[pos - 1]:
            continue
        h = _slot(keys[pos], bits)
        while slots[h] >= 0:
            h = (h + 1) & mask
        slots[h] = pos
    return slots


@njit(cache=True)
def _find(slots, bits, keys, key):
    mask = (1 << bits) - 1
    h = _slot(key, bits)
    while True:
        pos = slots[h]
        if pos < 0:
            return -1
        if keys[pos] == key:
            return pos
        h = (h + 1) & mask


@njit(cache=True)
def _refresh(part, negc, tail, vals, top, q, t):
    # part[u] = part[u + 1] - vals[u] * cols[tail[u]] on the key rows, for u = top .. 0
    for u in range(top, -1, -1):
        row = negc[vals[u], tail[u]]
        for i in range(t):
            x = part[u + 1, i] + row[i]
            if x >= q:
                x -= q
            part[u, i] = x


@njit(cache=True)
def _key(part, q, t):
    key = 0
    for i in range(t - 1, -1, -1):
        key = key * q + part[0, i]
    return key


@njit(cache=True)
def _sparse_search(cols, q, y, w, keys, tcol, tval, t, negc, slots, bits):
    n, m = cols.shape
    best_s = np.zeros(w, dtype=np.int64)
    best_v = np.zeros(w, dtype=np.int64)
    if w == 0:
        for i in range(m):
            if y[i] != 0:
                return False, best_s, best_v
        return True, best_s, best_v
    if w > n:
        return False, best_s, best_v
    p = w - 1
    nk = keys.shape[0]
    tail = np.arange(p)
    vals = np.ones(p, dtype=np.int64)
    part = np.empty((p + 1, t), dtype=np.int64)
    for i in range(t):
        part[p, i] = y[i]
    resid = np.empty(m, dtype=np.int64)
    while True:
        # tails in colex order; the completion must precede the tail's smallest element
        limit = tail[0] if p > 0 else n
        found = False
        if limit > 0:
            for u in range(p):
                vals[u] = 1
            _refresh(part, negc, tail, vals, p - 1, q, t)
            while True:
                key = _key(part, q, t)
                pos = _find(slots, bits, keys, key)
                while pos >= 0 and pos < nk and keys[pos] == key:
                    c = tcol[pos]
                    v = tval[pos]
                    pos += 1
                    if c >= limit:
                        continue
                    for i in range(m):
                        resid[i] = y[i] - v * cols[c, i]
                    for u in range(p):
                        cu = tail[u]
                        vu = vals[u]
                        for i in range(m):
                            resid[i] -= vu * cols[cu, i]
                    ok = True
                    for i in range(m):
                        if resid[i] % q != 0:
                            ok = False
                            break
                    if not ok:
                        continue
                    better = not found
                    if found:
                        # compare (c, v, vals) lexicographically against the best so far
                        if c != best_s[0]:
                            better = c < best_s[0]
                        elif v != best_v[0]:
                            better = v < best_v[0]
                        else:
                            for u in range(p):
                                if vals[u] != best_v[u + 1]:
                                    better = vals[u] < best_v[u + 1]
                                    break
                    if better:
                        found = True
                        best_s[0] = c
                        best_v[0] = v
                        for u in range(p):
                            best_s[u + 1] = tail[u]
                            best_v[u + 1] = vals[u]
                # odometer over tail values, position 0 fastest
                u = 0
                while u < p and vals[u] == q - 1:
                    vals[u] = 1
                    u += 1
                if u == p:
                    break
                vals[u] += 1
                _refresh(part, negc, tail, vals, u, q, t)
        if found:
            return True, best_s, best_v
        if p == 0:
            return False, best_s, best_v
        # colex successor
        i = 0
        while i < p - 1 and tail[i] + 1 == tail[i + 1]:
            i += 1
        if i == p - 1 and tail[i] + 1 >= n:
            return False, best_s, best_v
        tail[i] += 1
        for u in range(i):
            tail[u] = u


_PREP_CACHE = {}


def _prepared(cols, q, keys, t):
    """Negated column multiples on the key rows plus a hash index; cached on the table identity."""
    ident = (id(keys), id(cols), q, t)
    hit = _PREP_CACHE.get(ident)
    if hit is not None and hit[0] is keys and hit[1] is cols:
        return hit[2], hit[3], hit[4]
    n = cols.shape[0]
    negc = np.zeros((q, n, t), dtype=np.int64)
    for v in range(1, q):
        negc[v] = (-v * cols[:, :t]) % q
    bits = max(4, int(2 * max(len(keys), 1) - 1).bit_length())
    slots = _build_slots(keys, bits)
    if len(_PREP_CACHE) > 64:
        _PREP_CACHE.clear()
    _PREP_CACHE[ident] = (keys, cols, negc, slots, bits)
    return negc, slots, bits


def sparse_search(cols, q, y, w, keys, tcol, tval, t):
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    negc, slots, bits = _prepared(cols, q, keys, t)
    return _sparse_search(cols, q, np.asarray(y, dtype=np.int64) % q, w, keys, tcol, tval, t, negc, slots, bits)


@njit(cache=True)
def _rref(a, q, inv):
    m, n = a.shape
    e = np.zeros((m, m), dtype=np.int64)
    for r in range(m):
        e[r, r] = 1
    pivots = np.empty(min(m, n), dtype=np.int64)
    rank = 0
    for col in range(n):
        if rank == m:
            break
        piv = -1
        for r in range(rank, m):
            if a[r, col] != 0:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for c in range(n):
                tmp = a[rank, c]
                a[rank, c] = a[piv, c]
                a[piv, c] = tmp
            for c in range(m):
                tmp = e[rank, c]
                e[rank, c] = e[piv, c]
                e[piv, c] = tmp
        s = inv[a[rank, col]]
        for c in range(n):
            a[rank, c] = (a[rank, c] * s) % q
        for c in range(m):
            e[rank, c] = (e[rank, c] * s) % q
        for r in range(m):
            if r != rank:
                f = a[r, col]
                if f != 0:
                    for c in range(n):
                        a[r, c] = (a[r, c] - f * a[rank, c]) % q
                    for c in range(m):
                        e[r, c] = (e[r, c] - f * e[rank, c]) % q
        pivots[rank] = col
        rank += 1
    return a, e, pivots[:rank].copy()


def rref(mat: np.ndarray, q: int, inv: np.ndarray):
    a = np.array(mat, dtype=np.int64) % q
    return _rref(a, q, inv)
