"""Prime-field arithmetic, dense vectors and matrices, and base-q bit packing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import FormatError, ParameterError


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    d = 3
    while d * d <= q:
        if q % d == 0:
            return False
        d += 2
    return True


def check_modulus(q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)) or q < 3:
        raise ParameterError(f"q must be a prime >= 3, got {q!r}")
    return int(q)


def prime_for_bound(bound: int) -> int:
    """Smallest prime q >= max(3, 2*bound + 1).

    Signed entries in [-bound, bound] embed injectively into GF(q).
    """
    q = max(3, 2 * bound + 1)
    while not is_prime(q):
        q += 1
    return q


@dataclass(frozen=True)
class FieldElem:
    value: int
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        object.__setattr__(self, "value", int(self.value) % self.q)

    def _other(self, other):
        if isinstance(other, FieldElem):
            if other.q != self.q:
                raise ParameterError("modulus mismatch")
            return other.value
        return int(other)

    def __add__(self, other):
        return FieldElem(self.value + self._other(other), self.q)

    def __sub__(self, other):
        return FieldElem(self.value - self._other(other), self.q)

    def __mul__(self, other):
        return FieldElem(self.value * self._other(other), self.q)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return FieldElem(-self.value, self.q)

    def inverse(self) -> FieldElem:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return FieldElem(pow(self.value, self.q - 2, self.q), self.q)

    def __int__(self):
        return self.value


class FieldVec:
    """Immutable vector over GF(q).

    Entries are stored as ``int64`` in ``[0, q)``; signed integers passed in
    are reduced mod q, so ``-1`` becomes ``q - 1``.
    """

    __slots__ = ("q", "entries")

    def __init__(self, q: int, entries):
        q = check_modulus(q)
        arr = np.array(entries, dtype=np.int64).reshape(-1) % q
        arr.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("FieldVec is immutable")

    @classmethod
    def zeros(cls, q: int, n: int) -> FieldVec:
        return cls(q, np.zeros(n, dtype=np.int64))

    @classmethod
    def basis(cls, q: int, n: int, i: int) -> FieldVec:
        e = np.zeros(n, dtype=np.int64)
        e[i] = 1
        return cls(q, e)

    def __len__(self):
        return self.entries.shape[0]

    def __getitem__(self, i):
        return int(self.entries[i])

    def __iter__(self):
        return (int(v) for v in self.entries)

    def _check(self, other: FieldVec):
        if not isinstance(other, FieldVec):
            raise ParameterError(f"expected FieldVec, got {type(other).__name__}")
        if other.q != self.q:
            raise ParameterError(f"modulus mismatch: {self.q} vs {other.q}")
        if len(other) != len(self):
            raise ParameterError(f"length mismatch: {len(self)} vs {len(other)}")

    def __add__(self, other: FieldVec) -> FieldVec:
        self._check(other)
        return FieldVec(self.q, self.entries + other.entries)

    def __sub__(self, other: FieldVec) -> FieldVec:
        self._check(other)
        return FieldVec(self.q, self.entries - other.entries)

    def __neg__(self) -> FieldVec:
        return FieldVec(self.q, -self.entries)

    def scale(self, c: int) -> FieldVec:
        return FieldVec(self.q, self.entries * (int(c) % self.q))

    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.entries))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.entries))

    def signed(self) -> np.ndarray:
        """Entries lifted to the symmetric range ``[-(q-1)/2, (q-1)/2]``."""
        e = self.entries.copy()
        e[e > self.q // 2] -= self.q
        return e

    def __eq__(self, other):
        if not isinstance(other, FieldVec):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.q, self.entries.tobytes()))

    def __repr__(self):
        body = self.entries.tolist() if len(self) <= 16 else f"n={len(self)}, support={self.support()[:8]}..."
        return f"FieldVec(q={self.q}, {body})"


def vec_add(a: FieldVec, b: FieldVec) -> FieldVec:
    return a + b


class SketchMatrix:
    """Dense ``m_rows x n`` matrix over GF(q).

    Built from a seed, entry ``(r, c)`` is ``prf(seed, "matrix", r, c) mod q``
    (i.i.d. uniform up to a bias below ``q / 2**64``), so the matrix is a
    pure function of ``(seed, q, m_rows, n)``.
    """

    def __init__(self, q: int, entries, seed: int | None = None):
        q = check_modulus(q)
        arr = np.array(entries, dtype=np.int64) % q
        if arr.ndim != 2:
            raise ParameterError("matrix entries must be two-dimensional")
        arr.setflags(write=False)
        self.q = q
        self.entries = arr
        self.m_rows, self.n = arr.shape
        self.seed = seed

    @classmethod
    def derive(cls, seed: int, q: int, m_rows: int, n: int) -> SketchMatrix:
        q = check_modulus(q)
        if m_rows < 1 or n < 1:
            raise ParameterError(f"matrix shape must be positive, got {m_rows}x{n}")
        return cls(q, kernels.fill_matrix(int(seed), q, int(m_rows), int(n)), seed=int(seed))

    def column(self, i: int) -> FieldVec:
        return FieldVec(self.q, self.entries[:, i])

    def __eq__(self, other):
        if not isinstance(other, SketchMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"SketchMatrix(q={self.q}, {self.m_rows}x{self.n}, seed={self.seed})"


def mat_apply(mat: SketchMatrix, v: FieldVec) -> FieldVec:
    if not isinstance(v, FieldVec):
        raise ParameterError(f"expected FieldVec, got {type(v).__name__}")
    if v.q != mat.q:
        raise ParameterError(f"modulus mismatch: matrix q={mat.q}, vector q={v.q}")
    if len(v) != mat.n:
        raise ParameterError(f"dimension mismatch: matrix has {mat.n} columns, vector length {len(v)}")
    return FieldVec(mat.q, kernels.mat_apply(mat.entries, v.entries, mat.q))


class BitField(NamedTuple):
    """A fixed-width bit string held as an unsigned integer."""

    value: int
    width: int


def packed_width(q: int, m: int) -> int:
    """``ceil(m * log2(q))`` computed exactly."""
    return (q**m - 1).bit_length() if m > 0 else 0


def pack_base_q(v: FieldVec) -> BitField:
    """Pack ``v`` as the integer ``sum(v[i] * q**i)`` in ``ceil(m log2 q)`` bits."""
    value = 0
    for e in reversed(v.entries.tolist()):
        value = value * v.q + e
    return BitField(value, packed_width(v.q, len(v)))


def unpack_base_q(bits: BitField, q: int, m: int) -> FieldVec:
    value, width = bits
    if width != packed_width(q, m):
        raise FormatError(f"expected {packed_width(q, m)} bits for {m} digits base {q}, got {width}")
    if value < 0 or value >= q**m:
        raise FormatError(f"packed value {value} out of range for {m} digits base {q}")
    digits = []
    for _ in range(m):
        value, d = divmod(value, q)
        digits.append(d)
    return FieldVec(q, digits)
