"""Turnstile streaming on top of the level sketches, and reduction adapters.

A :class:`TurnstileSketch` holds exactly the state Alice would send for the
current aggregate vector ``z`` (mod q), so any update order reaching the same
``z`` yields the same bytes, and two sketches of the same parameters merge
by addition.

The adapters turn streaming algorithms into one-way protocols: Alice runs
the algorithm on her part of the stream and ships its memory; Bob resumes it
on his part and reads off the answer.
"""

from __future__ import annotations

from typing import Callable, Iterable, NamedTuple, Protocol

import numpy as np

from .errors import FormatError, ParameterError
from .prf import MASK64, TAG_SAMPLE, prf_array
from .protocol import (
    Answer,
    BucketMessage,
    BucketProtocol,
    ProtocolHandle,
    ProtocolParams,
    SketchProtocol,
    _as_vector,
    make_protocol,
    select_answer,
)


class StreamUpdate(NamedTuple):
    i: int
    delta: int = 1


def parse_stream(lines: Iterable[str]) -> list[StreamUpdate]:
    """Lines of ``"i delta"`` or ``"i"`` (delta = +1); blank lines and ``#`` comments are skipped."""
    out = []
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        try:
            if len(parts) == 1:
                out.append(StreamUpdate(int(parts[0]), 1))
            elif len(parts) == 2:
                out.append(StreamUpdate(int(parts[0]), int(parts[1])))
            else:
                raise ValueError
        except ValueError:
            raise FormatError(f"line {lineno}: expected 'i' or 'i delta', got {line.rstrip()!r}") from None
    return out


class TurnstileSketch:
    """Linear sketch of a vector under signed coordinate updates.

    With ``strict=True`` the running value of every coordinate is tracked and
    kept within ``[-(q-1)/2, (q-1)/2]`` so that reduction mod q stays injective.
    The bucket backend stores integers exactly and skips that check.
    """

    def __init__(self, params: ProtocolParams, strict: bool = True, _protocol=None, _state=None):
        self.params = params
        self.protocol = _protocol if _protocol is not None else make_protocol(params)
        self.state = _state if _state is not None else self.protocol.empty_state()
        self.updates = 0
        self.bound = (params.q - 1) // 2
        strict = strict and params.backend == "gfq"
        self._z: dict[int, int] | None = {} if strict else None

    @property
    def n(self) -> int:
        return self.params.n

    def update(self, i: int, delta: int = 1) -> TurnstileSketch:
        i, delta = int(i), int(delta)
        if not 0 <= i < self.n:
            raise ParameterError(f"index {i} outside [0, {self.n})")
        if self._z is not None:
            value = self._z.get(i, 0) + delta
            if abs(value) > self.bound:
                raise ParameterError(f"coordinate {i} would reach {value}, outside [-{self.bound}, {self.bound}]")
            if value:
                self._z[i] = value
            else:
                self._z.pop(i, None)
        self.protocol.state_update(self.state, i, delta)
        self.updates += 1
        return self

    def extend(self, updates: Iterable[StreamUpdate]) -> TurnstileSketch:
        for u in updates:
            self.update(u.i, u.delta)
        return self

    def copy(self) -> TurnstileSketch:
        out = TurnstileSketch(self.params, strict=False, _protocol=self.protocol, _state=_copy_state(self.state))
        out.updates = self.updates
        out._z = None if self._z is None else dict(self._z)
        return out

    def message(self):
        if isinstance(self.protocol, SketchProtocol):
            return self.protocol.message_from_state(self.state)
        p = self.params
        return BucketMessage(p.n, p.k, self.protocol.L, p.buckets, p.hashes, p.seed, tuple(self.state))

    def to_bytes(self) -> bytes:
        return self.protocol.message_bytes(self.message())

    @classmethod
    def from_bytes(cls, params: ProtocolParams, data: bytes) -> TurnstileSketch:
        proto = make_protocol(params)
        msg = proto.parse_message(data)
        if isinstance(proto, SketchProtocol):
            state = np.array(msg.sketches, dtype=np.int64)
        else:
            state = list(msg.tables)
        return cls(params, strict=False, _protocol=proto, _state=state)

    def support_find(self) -> Answer:
        return self.protocol.recover(self.state)

    def query(self) -> Answer:
        return self.support_find()

    def sample(self, sample_seed: int) -> Answer:
        return l0_sample_k(self, sample_seed)

    def state_equal(self, other: TurnstileSketch) -> bool:
        if self.params != other.params:
            return False
        if isinstance(self.state, np.ndarray):
            return np.array_equal(self.state, other.state)
        return all(a == b for a, b in zip(self.state, other.state))

    def __eq__(self, other):
        if not isinstance(other, TurnstileSketch):
            return NotImplemented
        return self.state_equal(other)

    __hash__ = None


def _copy_state(state):
    if isinstance(state, np.ndarray):
        return state.copy()
    return [t + type(t)(t.n, t.buckets, t.seed, t.hashes) for t in state]


def sketch_update(s: TurnstileSketch, u: StreamUpdate) -> TurnstileSketch:
    """Functional update: returns a new sketch, leaving ``s`` unchanged."""
    return s.copy().update(u.i, u.delta)


def merge(a: TurnstileSketch, b: TurnstileSketch) -> TurnstileSketch:
    if a.params != b.params:
        raise ParameterError("cannot merge sketches built with different parameters")
    if isinstance(a.state, np.ndarray):
        state = (a.state + b.state) % a.params.q
    else:
        state = [x + y for x, y in zip(a.state, b.state)]
    out = TurnstileSketch(a.params, strict=False, _protocol=a.protocol, _state=state)
    out.updates = a.updates + b.updates
    if a._z is not None and b._z is not None:
        z = dict(a._z)
        for i, v in b._z.items():
            z[i] = z.get(i, 0) + v
        z = {i: v for i, v in z.items() if v}
        if all(abs(v) <= out.bound for v in z.values()):
            out._z = z
    return out


def support_find_k(s: TurnstileSketch) -> Answer:
    return s.support_find()


def l0_sample_k(s: TurnstileSketch, sample_seed: int) -> Answer:
    """Decode the first usable level, then keep the support elements with the smallest seeded keys."""
    found = s.protocol.recover_level(s.state)
    if found is None:
        return None
    support = np.array(found[1], dtype=np.int64)
    if support.size == 0:
        return ()
    keys = prf_array(int(sample_seed) & MASK64, TAG_SAMPLE, support.astype(np.uint64))
    chosen = support[np.argsort(keys, kind="stable")[: s.params.k]]
    return select_answer(chosen, s.params.k)


# ---------------------------------------------------------------------------
# streaming interfaces and exact reference algorithms


class DuplicateFinder(Protocol):
    length: int

    def process(self, i: int) -> None: ...

    def result(self) -> int | None: ...

    def to_bytes(self) -> bytes: ...


class SupportFinder(Protocol):
    def update(self, i: int, delta: int) -> None: ...

    def query(self) -> Answer: ...

    def to_bytes(self) -> bytes: ...


class NaiveFindDup:
    """Exact multiset: remembers every count. Reference only."""

    def __init__(self, n: int):
        self.n = n
        self.counts = np.zeros(n, dtype=np.int64)
        self.length = 0

    def process(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise ParameterError(f"stream element {i} outside [0, {self.n})")
        self.counts[i] += 1
        self.length += 1

    def result(self) -> int | None:
        dup = np.flatnonzero(self.counts >= 2)
        return int(dup[0]) if dup.size else None

    def to_bytes(self) -> bytes:
        return self.counts.astype("<i8").tobytes()

    @classmethod
    def from_bytes(cls, n: int, data: bytes) -> NaiveFindDup:
        if len(data) != 8 * n:
            raise FormatError("duplicate-finder state has the wrong length")
        out = cls(n)
        out.counts = np.frombuffer(data, dtype="<i8").astype(np.int64)
        out.length = int(out.counts.sum())
        return out


class NaiveSuppFind:
    """Exact vector; answers with the smallest nonzero coordinates. Reference only."""

    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        self.z = np.zeros(n, dtype=np.int64)

    def update(self, i: int, delta: int = 1) -> None:
        if not 0 <= i < self.n:
            raise ParameterError(f"index {i} outside [0, {self.n})")
        self.z[i] += delta

    def query(self) -> Answer:
        return select_answer(np.flatnonzero(self.z), self.k)

    def to_bytes(self) -> bytes:
        return self.z.astype("<i8").tobytes()

    @classmethod
    def from_bytes(cls, n: int, k: int, data: bytes) -> NaiveSuppFind:
        if len(data) != 8 * n:
            raise FormatError("support-finder state has the wrong length")
        out = cls(n, k)
        out.z = np.frombuffer(data, dtype="<i8").astype(np.int64)
        return out


class NaiveSampler(NaiveSuppFind):
    """Exact vector; ``sample`` draws support elements by seeded random keys."""

    def __init__(self, n: int, k: int, seed: int = 0):
        super().__init__(n, k)
        self.seed = seed & MASK64

    def sample(self) -> Answer:
        support = np.flatnonzero(self.z)
        keys = prf_array(self.seed, TAG_SAMPLE, support.astype(np.uint64))
        return select_answer(support[np.argsort(keys, kind="stable")[: self.k]], self.k)


class StreamFamily(NamedTuple):
    """How to start a fresh instance of a streaming algorithm and how to reload one from bytes."""

    create: Callable[[], object]
    load: Callable[[bytes], object]


def naive_findup_family(n: int) -> StreamFamily:
    return StreamFamily(lambda: NaiveFindDup(n), lambda data: NaiveFindDup.from_bytes(n, data))


def naive_suppfind_family(n: int, k: int) -> StreamFamily:
    return StreamFamily(lambda: NaiveSuppFind(n, k), lambda data: NaiveSuppFind.from_bytes(n, k, data))


def naive_sampler_family(n: int, k: int, seed: int = 0) -> StreamFamily:
    def load(data):
        base = NaiveSuppFind.from_bytes(n, k, data)
        out = NaiveSampler(n, k, seed)
        out.z = base.z
        return out

    return StreamFamily(lambda: NaiveSampler(n, k, seed), load)


def turnstile_family(params: ProtocolParams) -> StreamFamily:
    return StreamFamily(lambda: TurnstileSketch(params), lambda data: TurnstileSketch.from_bytes(params, data))


class _SamplerAsFinder:
    def __init__(self, inner, sample: Callable[[object], Answer]):
        self.inner = inner
        self._sample = sample

    def update(self, i: int, delta: int = 1) -> None:
        self.inner.update(i, delta)

    def query(self) -> Answer:
        return self._sample(self.inner)

    def to_bytes(self) -> bytes:
        return self.inner.to_bytes()


def suppfind_from_sampler(family: StreamFamily, sample: Callable[[object], Answer] | None = None) -> StreamFamily:
    """Use a sampler as a support finder: any uniform sample is in particular a valid answer.

    ``sample`` picks the sampling call; by default ``obj.sample()``.
    """
    draw = sample if sample is not None else (lambda obj: obj.sample())
    return StreamFamily(
        lambda: _SamplerAsFinder(family.create(), draw),
        lambda data: _SamplerAsFinder(family.load(data), draw),
    )


# ---------------------------------------------------------------------------
# reductions from streaming algorithms to one-way protocols


def _indicator_support(x, n: int) -> np.ndarray:
    x = _as_vector(x, n)
    if ((x != 0) & (x != 1)).any():
        raise ParameterError("inputs must be 0/1 vectors")
    return np.flatnonzero(x)


class FindDupProtocol(ProtocolHandle):
    """Alice streams her support; Bob streams fillers outside his support until the stream has length n + 1."""

    def __init__(self, family: StreamFamily, n: int):
        self.family = family
        self.n = n
        self.k = 1

    def alice(self, x):
        alg = self.family.create()
        for i in _indicator_support(x, self.n).tolist():
            alg.process(i)
        return alg

    def message_bytes(self, msg) -> bytes:
        return msg.to_bytes()

    def parse_message(self, data: bytes):
        return self.family.load(data)

    def bob(self, msg, y) -> Answer:
        alg = self.family.load(msg.to_bytes())
        need = self.n + 1 - alg.length
        outside = np.flatnonzero(_as_vector(y, self.n) == 0)
        if need < 1 or outside.size < need:
            raise ParameterError(
                f"stream of length n + 1 = {self.n + 1} cannot be completed: need {need} fillers, "
                f"{outside.size} indices lie outside Bob's support"
            )
        for i in outside[:need].tolist():
            alg.process(i)
        dup = alg.result()
        return None if dup is None else (int(dup),)


def ur_from_findup(family: StreamFamily, n: int) -> FindDupProtocol:
    return FindDupProtocol(family, n)


class SuppFindProtocol(ProtocolHandle):
    """Alice inserts her support with +1; Bob deletes his with -1 and queries the difference."""

    def __init__(self, family: StreamFamily, n: int, k: int):
        self.family = family
        self.n = n
        self.k = k

    def alice(self, x):
        alg = self.family.create()
        for i in _indicator_support(x, self.n).tolist():
            alg.update(i, 1)
        return alg

    def message_bytes(self, msg) -> bytes:
        return msg.to_bytes()

    def parse_message(self, data: bytes):
        return self.family.load(data)

    def bob(self, msg, y) -> Answer:
        alg = self.family.load(msg.to_bytes())
        for i in _indicator_support(y, self.n).tolist():
            alg.update(i, -1)
        return alg.query()


def ur_k_from_suppfind(family: StreamFamily, n: int, k: int) -> SuppFindProtocol:
    return SuppFindProtocol(family, n, k)


__all__ = [
    "BucketProtocol",
    "DuplicateFinder",
    "FindDupProtocol",
    "NaiveFindDup",
    "NaiveSampler",
    "NaiveSuppFind",
    "StreamFamily",
    "StreamUpdate",
    "SuppFindProtocol",
    "SupportFinder",
    "TurnstileSketch",
    "l0_sample_k",
    "merge",
    "naive_findup_family",
    "naive_sampler_family",
    "naive_suppfind_family",
    "parse_stream",
    "sketch_update",
    "suppfind_from_sampler",
    "support_find_k",
    "turnstile_family",
    "ur_from_findup",
    "ur_k_from_suppfind",
]
