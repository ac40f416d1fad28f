"""Exact sparse recovery over GF(q), plus a bucketed peeling backend.

:func:`exhaustive_decode` returns the first ``w`` with ``Pi w = sketch`` and
``|supp w| <= s`` in a fixed order: weight ascending, then supports in colex
order, then value vectors in lex order (coordinates by ascending index).
Two exact search strategies realize that order and the cheaper one runs:

* sparse enumeration of the first ``w - 1`` coordinates, completing the
  last coordinate by lookup in a table of normalized columns;
* enumeration of the whole affine solution space ``x0 + ker(Pi)``, which is
  small when ``Pi`` has nearly full column rank.

Both return the same vector on every input, including degenerate matrices.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property

import numpy as np

from . import kernels
from .errors import DecodeLimitError, ParameterError
from .gfq import FieldVec, SketchMatrix, check_modulus
from .prf import MASK64, TAG_BUCKET, TAG_FINGERPRINT, prf, prf_array

DEFAULT_SLACK = 10
DEFAULT_WORK_LIMIT = 2_000_000_000
_AFFINE_CHUNK = 1 << 15


def ceil_log(q: int, x: int) -> int:
    """Smallest e >= 0 with q**e >= x."""
    e = 0
    p = 1
    while p < x:
        p *= q
        e += 1
    return e


def recovery_rows(n: int, s: int, q: int, slack: int = DEFAULT_SLACK) -> int:
    """``ceil(2s + log_q C(n, 2s)) + slack``: the union-bound row count plus slack."""
    return 2 * s + ceil_log(q, math.comb(n, 2 * s)) + slack


class RecoveryScheme:
    """A sketch matrix paired with the sparsity it is meant to recover."""

    def __init__(self, matrix: SketchMatrix, s: int, slack: int = DEFAULT_SLACK):
        if s < 1 or 2 * s > matrix.n:
            raise ParameterError(f"sparsity must satisfy 1 <= s <= n/2, got s={s}, n={matrix.n}")
        self.matrix = matrix
        self.s = s
        self.slack = slack

    @property
    def q(self) -> int:
        return self.matrix.q

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def m_rows(self) -> int:
        return self.matrix.m_rows

    @cached_property
    def inv(self) -> np.ndarray:
        return kernels.inverse_table(self.q)

    @cached_property
    def cols(self) -> np.ndarray:
        return np.ascontiguousarray(self.matrix.entries.T)

    @cached_property
    def key_rows(self) -> int:
        return kernels.key_rows(self.n, self.m_rows, self.q)

    @cached_property
    def column_table(self):
        """Every nonzero column multiple, sorted by the base-q key of its leading rows."""
        return kernels.multiples_table(self.cols, self.q, self.key_rows)

    @cached_property
    def echelon(self):
        return kernels.rref(self.matrix.entries, self.q, self.inv)

    # cost model, in rough inner-loop operations

    def sparse_cost(self, max_weight: int) -> int:
        q, n, t = self.q, self.n, self.key_rows
        return sum(math.comb(n, w - 1) * (q - 1) ** (w - 1) * (2 * t + w) for w in range(1, max_weight + 1))

    def affine_cost(self, limit: int) -> int | None:
        """Cost of enumerating the affine solution space, or None if clearly too big."""
        lower = self.q ** max(self.n - self.m_rows, 0) * self.n
        if lower > limit:
            return None
        _, _, pivots = self.echelon
        d = self.n - len(pivots)
        return self.q**d * self.n * max(d, 1)

    def _strategy(self, max_weight: int, limit: int) -> str:
        key = (max_weight, limit)
        cache = self.__dict__.setdefault("_strategies", {})
        if key not in cache:
            cache[key] = self._choose(max_weight, limit)
        name = cache[key]
        if isinstance(name, DecodeLimitError):
            raise name
        return name

    def _choose(self, max_weight: int, limit: int):
        sparse = self.sparse_cost(max_weight)
        affine = self.affine_cost(min(limit, sparse))
        if affine is not None and affine <= sparse:
            cost, name = affine, "affine"
        else:
            cost, name = sparse, "sparse"
        if cost > limit:
            return DecodeLimitError(
                f"search over weight <= {max_weight} vectors in GF({self.q})^{self.n} needs ~{cost:.3g} "
                f"operations, above the limit {limit:.3g}"
            )
        return name

    def _affine_solutions(self, y: np.ndarray, max_weight: int, nonzero: bool):
        """Canonical-first solution of ``Pi v = y`` with ``|supp v| <= max_weight``."""
        q, n = self.q, self.n
        r, e, pivots = self.echelon
        rank = len(pivots)
        yy = (e @ y) % q
        if yy[rank:].any():
            return None
        x0 = np.zeros(n, dtype=np.int64)
        x0[pivots] = yy[:rank]
        free = np.setdiff1d(np.arange(n), pivots)
        d = free.size
        basis = np.zeros((d, n), dtype=np.int64)
        for t, f in enumerate(free):
            basis[t, f] = 1
            basis[t, pivots] = (-r[:rank, f]) % q
        best = None
        best_key = None
        total = q**d
        powers = q ** np.arange(d, dtype=np.int64)
        for start in range(0, total, _AFFINE_CHUNK):
            idx = np.arange(start, min(total, start + _AFFINE_CHUNK), dtype=np.int64)
            coeffs = (idx[:, None] // powers[None, :]) % q
            sols = (x0[None, :] + coeffs @ basis) % q
            weights = np.count_nonzero(sols, axis=1)
            keep = weights <= max_weight
            if nonzero:
                keep &= weights > 0
            for row in sols[keep]:
                supp = np.flatnonzero(row)
                key = (len(supp), tuple(supp[::-1].tolist()), tuple(row[supp].tolist()))
                if best_key is None or key < best_key:
                    best, best_key = row, key
        return best

    def _sparse_solution(self, y: np.ndarray, weights):
        keys, tcol, tval = self.column_table
        for w in weights:
            found, supp, vals = kernels.sparse_search(self.cols, self.q, y, w, keys, tcol, tval, self.key_rows)
            if found:
                out = np.zeros(self.n, dtype=np.int64)
                out[supp] = vals
                return out
        return None

    def __repr__(self):
        return f"RecoveryScheme(n={self.n}, s={self.s}, q={self.q}, m_rows={self.m_rows}, slack={self.slack})"


def build_scheme(n: int, s: int, q: int = 3, slack: int = DEFAULT_SLACK, seed: int = 0) -> RecoveryScheme:
    q = check_modulus(q)
    if n < 2:
        raise ParameterError(f"dimension must be > 1, got n={n}")
    if s < 1 or 2 * s > n:
        raise ParameterError(f"sparsity must satisfy 1 <= s <= n/2, got s={s}, n={n}")
    if slack < 0:
        raise ParameterError(f"slack must be non-negative, got {slack}")
    m = recovery_rows(n, s, q, slack)
    return RecoveryScheme(SketchMatrix.derive(seed & MASK64, q, m, n), s, slack)


def find_kernel_witness(scheme: RecoveryScheme, limit: int = DEFAULT_WORK_LIMIT) -> FieldVec | None:
    """Canonical-first nonzero ``v`` with ``|supp v| <= 2s`` and ``Pi v = 0``, if any."""
    top = 2 * scheme.s
    zero = np.zeros(scheme.m_rows, dtype=np.int64)
    if scheme._strategy(top, limit) == "affine":
        v = scheme._affine_solutions(zero, top, nonzero=True)
    else:
        v = scheme._sparse_solution(zero, range(1, top + 1))
    return None if v is None else FieldVec(scheme.q, v)


def verify_injectivity(scheme: RecoveryScheme, limit: int = DEFAULT_WORK_LIMIT) -> bool:
    """True iff no nonzero vector of weight <= 2s lies in the kernel."""
    return find_kernel_witness(scheme, limit) is None


def split_witness(v: FieldVec, s: int) -> tuple[FieldVec, FieldVec]:
    """Two distinct s-sparse vectors with the same sketch, from a kernel vector."""
    supp = v.support()
    a = np.zeros(len(v), dtype=np.int64)
    a[list(supp[:s])] = v.entries[list(supp[:s])]
    w = FieldVec(v.q, a)
    return w, w - v


def exhaustive_decode(scheme: RecoveryScheme, sketch: FieldVec, limit: int = DEFAULT_WORK_LIMIT) -> FieldVec | None:
    """First s-sparse preimage of ``sketch`` in canonical order, or None."""
    if not isinstance(sketch, FieldVec) or sketch.q != scheme.q:
        raise ParameterError("sketch must be a FieldVec over the scheme's field")
    if len(sketch) != scheme.m_rows:
        raise ParameterError(f"sketch length {len(sketch)} != m_rows {scheme.m_rows}")
    y = sketch.entries
    if not y.any():
        return FieldVec.zeros(scheme.q, scheme.n)
    if scheme._strategy(scheme.s, limit) == "affine":
        v = scheme._affine_solutions(np.asarray(y), scheme.s, nonzero=False)
    else:
        v = scheme._sparse_solution(np.asarray(y), range(1, scheme.s + 1))
    return None if v is None else FieldVec(scheme.q, v)


def brute_force_decode(matrix: SketchMatrix, s: int, sketch) -> np.ndarray | None:
    """Literal enumeration in canonical order. Reference only: exponential."""
    q, n = matrix.q, matrix.n
    y = np.asarray(sketch, dtype=np.int64) % q
    a = matrix.entries
    for w in range(s + 1):
        for supp in sorted(itertools.combinations(range(n), w), key=lambda c: c[::-1]):
            for vals in itertools.product(range(1, q), repeat=w):
                if np.array_equal(a[:, list(supp)] @ np.array(vals, dtype=np.int64) % q, y):
                    v = np.zeros(n, dtype=np.int64)
                    v[list(supp)] = vals
                    return v
    return None


MERSENNE61 = (1 << 61) - 1


class BucketRecovery:
    """Invertible bucket table over integer-valued updates.

    Each index ``i`` hashes to ``hashes`` distinct cells. A cell keeps the
    item count, the index-weighted sum, and a fingerprint
    ``sum(delta * z**(i+1)) mod 2**61 - 1``; all three are linear, so tables
    with the same configuration can be added and subtracted.
    """

    def __init__(self, n: int, buckets: int, seed: int = 0, hashes: int = 3):
        if buckets < hashes or hashes < 1:
            raise ParameterError(f"need buckets >= hashes >= 1, got buckets={buckets}, hashes={hashes}")
        self.n = n
        self.buckets = buckets
        self.hashes = hashes
        self.seed = seed & MASK64
        self.count = [0] * buckets
        self.index_sum = [0] * buckets
        self.fingerprint = [0] * buckets
        self._z = 2 + prf(self.seed, TAG_FINGERPRINT, 0) % (MERSENNE61 - 3)

    def config(self):
        return (self.n, self.buckets, self.hashes, self.seed)

    def cells(self, i: int) -> tuple[int, ...]:
        out = []
        a = 0
        while len(out) < self.hashes:
            c = prf(self.seed, TAG_BUCKET, i, a) % self.buckets
            if c not in out:
                out.append(c)
            a += 1
        return tuple(out)

    def cell_table(self, indices) -> list[tuple[int, ...]]:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return []
        draws = (prf_array(self.seed, TAG_BUCKET, indices[:, None], np.arange(8)[None, :]) % np.uint64(self.buckets)).astype(np.int64)
        out = []
        for i, row in zip(indices.tolist(), draws.tolist()):
            cells = list(dict.fromkeys(row))[: self.hashes]
            out.append(tuple(cells) if len(cells) == self.hashes else self.cells(i))
        return out

    def item_fingerprint(self, i: int) -> int:
        return pow(self._z, i + 1, MERSENNE61)

    def update(self, i: int, delta: int = 1, cells=None):
        if not 0 <= i < self.n:
            raise ParameterError(f"index {i} out of range [0, {self.n})")
        fp = self.item_fingerprint(i) * delta % MERSENNE61
        for c in cells if cells is not None else self.cells(i):
            self.count[c] += delta
            self.index_sum[c] += delta * i
            self.fingerprint[c] = (self.fingerprint[c] + fp) % MERSENNE61

    @classmethod
    def from_items(cls, n, buckets, seed, hashes, items) -> BucketRecovery:
        table = cls(n, buckets, seed, hashes)
        items = [(int(i), int(d)) for i, d in items if d]
        for (i, d), cells in zip(items, table.cell_table([i for i, _ in items])):
            table.update(i, d, cells)
        return table

    def _combine(self, other: BucketRecovery, sign: int) -> BucketRecovery:
        if other.config() != self.config():
            raise ParameterError("bucket tables have different configurations")
        out = BucketRecovery(self.n, self.buckets, self.seed, self.hashes)
        out.count = [a + sign * b for a, b in zip(self.count, other.count)]
        out.index_sum = [a + sign * b for a, b in zip(self.index_sum, other.index_sum)]
        out.fingerprint = [(a + sign * b) % MERSENNE61 for a, b in zip(self.fingerprint, other.fingerprint)]
        return out

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __eq__(self, other):
        if not isinstance(other, BucketRecovery):
            return NotImplemented
        return (
            self.config() == other.config()
            and self.count == other.count
            and self.index_sum == other.index_sum
            and self.fingerprint == other.fingerprint
        )

    def is_empty(self) -> bool:
        return not any(self.count) and not any(self.index_sum) and not any(self.fingerprint)


def bucket_decode(table: BucketRecovery) -> dict[int, int] | None:
    """Peel pure cells to a fixpoint; None when a nonzero residue remains."""
    count = list(table.count)
    isum = list(table.index_sum)
    fp = list(table.fingerprint)
    recovered: dict[int, int] = {}
    stack = list(range(table.buckets))
    while stack:
        c = stack.pop()
        k = count[c]
        if k == 0 or isum[c] % k:
            continue
        i = isum[c] // k
        if not 0 <= i < table.n:
            continue
        fi = table.item_fingerprint(i)
        if fp[c] != k * fi % MERSENNE61:
            continue
        cells = table.cells(i)
        if c not in cells:
            continue
        recovered[i] = recovered.get(i, 0) + k
        delta_fp = k * fi % MERSENNE61
        for cc in cells:
            count[cc] -= k
            isum[cc] -= k * i
            fp[cc] = (fp[cc] - delta_fp) % MERSENNE61
            stack.append(cc)
    if any(count) or any(isum) or any(fp):
        return None
    return {i: v for i, v in sorted(recovered.items()) if v}
