"""One-way public-coin protocol for the k-index universal relation.

Alice sketches ``x`` at every subsampling level; Bob subtracts the sketch of
``y`` recomputed from the shared seed and descends from the sparsest level,
returning the smallest indices of the first usable decoded difference.

Every handle exposes the same stateless interface (``alice``, ``bob``,
``message_bytes``, ``parse_message``) so the lower-bound harness can replay
Bob on a parsed message and get identical answers.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import FormatError, ParameterError
from .gfq import BitField, FieldVec, SketchMatrix, check_modulus, pack_base_q, packed_width, unpack_base_q
from .levels import LevelFamily, max_level
from .prf import MASK64, TAG_COIN, derive_seed, prf
from .recovery import (
    DEFAULT_SLACK,
    DEFAULT_WORK_LIMIT,
    BucketRecovery,
    RecoveryScheme,
    bucket_decode,
    exhaustive_decode,
    recovery_rows,
)

MAGIC = b"URK1"
BUCKET_MAGIC = b"URB1"
STUB_MAGIC = b"URS1"
_HEADER = struct.Struct("<6Q")

Answer = tuple[int, ...] | None
"""Bob's output: sorted distinct indices, or None for Fail."""


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    k: int
    q: int = 3
    oversample: int = 16
    slack: int = DEFAULT_SLACK
    seed: int = 0
    backend: str = "gfq"
    bucket_factor: int = 3
    hashes: int = 3

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"n must be at least 2, got {self.n}")
        if not 1 <= self.k <= self.n // 2:
            raise ParameterError(f"need 1 <= k <= n/2, got k={self.k}, n={self.n}")
        if self.oversample < 1:
            raise ParameterError(f"oversample must be >= 1, got {self.oversample}")
        if self.backend not in ("gfq", "bucket"):
            raise ParameterError(f"unknown backend {self.backend!r}")
        if self.backend == "gfq":
            check_modulus(self.q)
            if 2 * self.sparsity > self.n:
                raise ParameterError(
                    f"recovery sparsity oversample*k = {self.sparsity} exceeds n/2 = {self.n // 2}"
                )
        if self.slack < 0:
            raise ParameterError(f"slack must be non-negative, got {self.slack}")
        object.__setattr__(self, "seed", self.seed & MASK64)

    @property
    def sparsity(self) -> int:
        return self.oversample * self.k

    @property
    def L(self) -> int:
        return max_level(self.n, self.k)

    @property
    def m_rows(self) -> int:
        return recovery_rows(self.n, self.sparsity, self.q, self.slack)

    @property
    def buckets(self) -> int:
        return max(self.hashes, self.bucket_factor * self.sparsity)


def payload_bits(L: int, m_rows: int, q: int) -> int:
    """``(L + 1) * ceil(m_rows * log2 q)``."""
    return (L + 1) * packed_width(q, m_rows)


def _as_vector(x, n: int) -> np.ndarray:
    if isinstance(x, FieldVec):
        x = x.signed()
    arr = np.asarray(x, dtype=np.int64)
    if arr.shape != (n,):
        raise ParameterError(f"expected a length-{n} vector, got shape {arr.shape}")
    return arr


class ProtocolHandle:
    """Stateless protocol interface: ``bob`` must be a pure function of its inputs."""

    n: int
    k: int

    def alice(self, x):
        raise NotImplementedError

    def bob(self, msg, y) -> Answer:
        raise NotImplementedError

    def message_bytes(self, msg) -> bytes:
        raise NotImplementedError

    def parse_message(self, data: bytes):
        raise NotImplementedError

    def run(self, x, y) -> Answer:
        """Alice then Bob, with the message passed through its byte form."""
        return self.bob(self.parse_message(self.message_bytes(self.alice(x))), y)


@dataclass(frozen=True)
class UrMessage:
    n: int
    k: int
    q: int
    L: int
    m_rows: int
    seed: int
    sketches: np.ndarray  # (L + 1, m_rows), entries in [0, q)

    def __post_init__(self):
        arr = np.array(self.sketches, dtype=np.int64) % self.q
        if arr.shape != (self.L + 1, self.m_rows):
            raise ParameterError(f"expected {self.L + 1} sketches of length {self.m_rows}, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "sketches", arr)

    def level(self, j: int) -> FieldVec:
        return FieldVec(self.q, self.sketches[j])

    @property
    def vectors(self) -> tuple[FieldVec, ...]:
        return tuple(self.level(j) for j in range(self.L + 1))

    @property
    def payload_bits(self) -> int:
        return payload_bits(self.L, self.m_rows, self.q)

    def __eq__(self, other):
        if not isinstance(other, UrMessage):
            return NotImplemented
        return (self.n, self.k, self.q, self.L, self.m_rows, self.seed) == (
            other.n,
            other.k,
            other.q,
            other.L,
            other.m_rows,
            other.seed,
        ) and np.array_equal(self.sketches, other.sketches)

    __hash__ = None


def serialize(msg: UrMessage) -> bytes:
    """Header (magic + six little-endian u64) then the level fields packed back to back."""
    width = packed_width(msg.q, msg.m_rows)
    value = 0
    for j in reversed(range(msg.L + 1)):
        value = (value << width) | pack_base_q(msg.level(j)).value
    nbytes = (msg.payload_bits + 7) // 8
    header = MAGIC + _HEADER.pack(msg.n, msg.k, msg.q, msg.L, msg.m_rows, msg.seed)
    return header + value.to_bytes(nbytes, "little")


def deserialize(data: bytes) -> UrMessage:
    if len(data) < 4 + _HEADER.size or data[:4] != MAGIC:
        raise FormatError("not a sketch message (bad magic or truncated header)")
    n, k, q, L, m_rows, seed = _HEADER.unpack_from(data, 4)
    if L > 64 or m_rows > 1 << 20:
        raise FormatError(f"implausible header fields L={L}, m_rows={m_rows}")
    width = packed_width(q, m_rows)
    total = (L + 1) * width
    body = data[4 + _HEADER.size :]
    if len(body) != (total + 7) // 8:
        raise FormatError(f"payload has {len(body)} bytes, expected {(total + 7) // 8}")
    value = int.from_bytes(body, "little")
    if value >> total:
        raise FormatError("nonzero padding bits after payload")
    mask = (1 << width) - 1
    rows = []
    for _ in range(L + 1):
        rows.append(unpack_base_q(BitField(value & mask, width), q, m_rows).entries)
        value >>= width
    return UrMessage(n, k, q, L, m_rows, seed, np.array(rows).reshape(L + 1, m_rows))


def select_answer(support, k: int) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in support)[:k])


class _LevelProtocol(ProtocolHandle):
    """Shared level descent; subclasses supply per-level state and decoding."""

    def __init__(self, params: ProtocolParams):
        self.params = params
        self.n = params.n
        self.k = params.k
        self.L = params.L

    @cached_property
    def levels(self) -> LevelFamily:
        return LevelFamily(derive_seed(self.params.seed, "levels"), self.n, self.L)

    def recover_level(self, diff) -> tuple[int, tuple[int, ...]] | None:
        """``(level, recovered support)`` for the first usable level, or None."""
        for j in range(self.L, -1, -1):
            support = self.decode_level(diff, j)
            if support is None:
                if j == 0:
                    return None
                continue
            if len(support) >= self.k or j == 0:
                return j, support
        return None

    def recover(self, diff) -> Answer:
        found = self.recover_level(diff)
        return None if found is None else select_answer(found[1], self.k)

    def decode_level(self, diff, j: int):
        raise NotImplementedError


class SketchProtocol(_LevelProtocol):
    """Exact GF(q) sparse-recovery sketch at every level."""

    def __init__(self, params: ProtocolParams, work_limit: int = DEFAULT_WORK_LIMIT):
        if params.backend != "gfq":
            raise ParameterError("SketchProtocol needs the gfq backend")
        super().__init__(params)
        self.q = params.q
        self.m_rows = params.m_rows
        self.work_limit = work_limit

    @cached_property
    def scheme(self) -> RecoveryScheme:
        seed = derive_seed(self.params.seed, "matrix")
        matrix = SketchMatrix.derive(seed, self.q, self.m_rows, self.n)
        return RecoveryScheme(matrix, self.params.sparsity, self.params.slack)

    def empty_state(self) -> np.ndarray:
        return np.zeros((self.L + 1, self.m_rows), dtype=np.int64)

    def sketch_state(self, x) -> np.ndarray:
        vals = _as_vector(x, self.n) % self.q
        supp = np.flatnonzero(vals)
        state = self.empty_state()
        if supp.size:
            top = self.levels.top_level[supp]
            cols = self.scheme.matrix.entries[:, supp] * vals[supp]
            for j in range(self.L + 1):
                state[j] = cols[:, top >= j].sum(axis=1) % self.q
        return state

    def state_update(self, state: np.ndarray, i: int, delta: int):
        if not 0 <= i < self.n:
            raise ParameterError(f"index {i} outside [0, {self.n})")
        top = self.levels.top_of(i)
        col = self.scheme.matrix.entries[:, i]
        state[: top + 1] = (state[: top + 1] + delta * col) % self.q

    def message_from_state(self, state: np.ndarray) -> UrMessage:
        p = self.params
        return UrMessage(p.n, p.k, p.q, self.L, self.m_rows, p.seed, state)

    def alice(self, x) -> UrMessage:
        return self.message_from_state(self.sketch_state(x))

    def _check_message(self, msg: UrMessage):
        p = self.params
        if (msg.n, msg.k, msg.q, msg.L, msg.m_rows, msg.seed) != (p.n, p.k, p.q, self.L, self.m_rows, p.seed):
            raise ParameterError("message was produced under different protocol parameters")

    def bob(self, msg: UrMessage, y) -> Answer:
        self._check_message(msg)
        diff = (msg.sketches - self.sketch_state(y)) % self.q
        return self.recover(diff)

    def decode_level(self, diff: np.ndarray, j: int):
        if not diff[j].any():
            return ()
        w = exhaustive_decode(self.scheme, FieldVec(self.q, diff[j]), self.work_limit)
        return None if w is None else w.support()

    def message_bytes(self, msg: UrMessage) -> bytes:
        return serialize(msg)

    def parse_message(self, data: bytes) -> UrMessage:
        msg = deserialize(data)
        self._check_message(msg)
        return msg

    def payload_bits(self) -> int:
        return payload_bits(self.L, self.m_rows, self.q)


@dataclass(frozen=True)
class BucketMessage:
    n: int
    k: int
    L: int
    buckets: int
    hashes: int
    seed: int
    tables: tuple[BucketRecovery, ...]


_CELL = struct.Struct("<qqQ")


class BucketProtocol(_LevelProtocol):
    """Same level descent, with a peeling bucket table per level instead of a GF(q) sketch."""

    def __init__(self, params: ProtocolParams):
        if params.backend != "bucket":
            raise ParameterError("BucketProtocol needs the bucket backend")
        super().__init__(params)

    def _seed(self, j: int) -> int:
        return derive_seed(self.params.seed, "bucket", j)

    def sketch_state(self, x) -> tuple[BucketRecovery, ...]:
        vals = _as_vector(x, self.n)
        supp = np.flatnonzero(vals)
        top = self.levels.top_level[supp]
        p = self.params
        return tuple(
            BucketRecovery.from_items(
                self.n, p.buckets, self._seed(j), p.hashes, zip(supp[top >= j].tolist(), vals[supp[top >= j]].tolist())
            )
            for j in range(self.L + 1)
        )

    def empty_state(self) -> tuple[BucketRecovery, ...]:
        return self.sketch_state(np.zeros(self.n, dtype=np.int64))

    def state_update(self, state, i: int, delta: int):
        for j in range(self.levels.top_of(i) + 1):
            state[j].update(i, delta)

    def alice(self, x) -> BucketMessage:
        p = self.params
        return BucketMessage(p.n, p.k, self.L, p.buckets, p.hashes, p.seed, self.sketch_state(x))

    def bob(self, msg: BucketMessage, y) -> Answer:
        p = self.params
        if (msg.n, msg.k, msg.L, msg.buckets, msg.hashes, msg.seed) != (p.n, p.k, self.L, p.buckets, p.hashes, p.seed):
            raise ParameterError("message was produced under different protocol parameters")
        mine = self.sketch_state(y)
        return self.recover([a - b for a, b in zip(msg.tables, mine)])

    def decode_level(self, diff, j: int):
        found = bucket_decode(diff[j])
        return None if found is None else tuple(found)

    def message_bytes(self, msg: BucketMessage) -> bytes:
        out = [BUCKET_MAGIC, _HEADER.pack(msg.n, msg.k, msg.L, msg.buckets, msg.hashes, msg.seed)]
        for t in msg.tables:
            for c in range(msg.buckets):
                out.append(_CELL.pack(t.count[c], t.index_sum[c], t.fingerprint[c]))
        return b"".join(out)

    def parse_message(self, data: bytes) -> BucketMessage:
        if len(data) < 4 + _HEADER.size or data[:4] != BUCKET_MAGIC:
            raise FormatError("not a bucket message (bad magic or truncated header)")
        n, k, L, buckets, hashes, seed = _HEADER.unpack_from(data, 4)
        p = self.params
        if (n, k, L, buckets, hashes, seed) != (p.n, p.k, self.L, p.buckets, p.hashes, p.seed):
            raise ParameterError("message was produced under different protocol parameters")
        if len(data) != 4 + _HEADER.size + (L + 1) * buckets * _CELL.size:
            raise FormatError("bucket message has the wrong length")
        tables = []
        off = 4 + _HEADER.size
        for j in range(L + 1):
            t = BucketRecovery(n, buckets, self._seed(j), hashes)
            for c in range(buckets):
                t.count[c], t.index_sum[c], t.fingerprint[c] = _CELL.unpack_from(data, off)
                off += _CELL.size
            tables.append(t)
        return BucketMessage(n, k, L, buckets, hashes, seed, tuple(tables))


def make_protocol(params: ProtocolParams, **kwargs) -> _LevelProtocol:
    if params.backend == "bucket":
        return BucketProtocol(params)
    return SketchProtocol(params, **kwargs)


class StubProtocol(ProtocolHandle):
    """Synthetic protocol whose message is ``x`` itself, for exercising the harness.

    ``oracle`` answers with the smallest differing indices; ``always_fail``
    answers with the smallest agreeing indices; ``iid_failure`` behaves like
    ``always_fail`` on a ``delta`` fraction of calls, decided by a coin that is
    a pure function of the seed and the call inputs.
    """

    KINDS = ("oracle", "always_fail", "iid_failure")

    def __init__(self, kind: str, n: int, k: int = 1, seed: int = 0, delta: float = 0.0):
        if kind not in self.KINDS:
            raise ParameterError(f"unknown stub kind {kind!r}; expected one of {self.KINDS}")
        if not 0.0 <= delta <= 1.0:
            raise ParameterError(f"delta must lie in [0, 1], got {delta}")
        if not 1 <= k <= n:
            raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
        self.kind = kind
        self.n = n
        self.k = k
        self.seed = seed & MASK64
        self.delta = delta

    def alice(self, x) -> np.ndarray:
        x = _as_vector(x, self.n)
        out = (x != 0).astype(np.uint8)
        out.setflags(write=False)
        return out

    def message_bytes(self, msg) -> bytes:
        return STUB_MAGIC + np.packbits(msg, bitorder="little").tobytes()

    def parse_message(self, data: bytes) -> np.ndarray:
        if data[:4] != STUB_MAGIC or len(data) != 4 + (self.n + 7) // 8:
            raise FormatError("not a stub message")
        return np.unpackbits(np.frombuffer(data[4:], dtype=np.uint8), count=self.n, bitorder="little")

    def coin_fails(self, x: np.ndarray, y: np.ndarray) -> bool:
        if self.delta <= 0.0:
            return False
        h = hashlib.blake2b(np.packbits(x).tobytes() + b"|" + np.packbits(y).tobytes(), digest_size=8)
        u = prf(self.seed, TAG_COIN, int.from_bytes(h.digest(), "little"))
        return u < math.ldexp(self.delta, 64)

    def bob(self, msg, y) -> Answer:
        x = np.asarray(msg) != 0
        y = _as_vector(y, self.n) != 0
        fail = self.kind == "always_fail" or (self.kind == "iid_failure" and self.coin_fails(x, y))
        if not fail:
            return select_answer(np.flatnonzero(x != y), self.k)
        agree = np.flatnonzero(x == y)
        if agree.size == 0:
            return None
        want = max(1, min(self.k, int(np.count_nonzero(x != y))))
        return select_answer(agree, want)


def make_stub(kind: str, n: int, k: int = 1, seed: int = 0, delta: float = 0.0) -> StubProtocol:
    return StubProtocol(kind, n, k, seed, delta)
