"""Set encoder/decoder driven by a black-box protocol.

The encoder spends one protocol message plus an explicit remainder set
``B``; each round in which Bob names a fresh element of the set saves that
element from ``B``. The decoder replays Bob only on the rounds flagged as
successful and reconstructs the same masking sets from shared randomness, so
``dec(enc(S)) == S`` holds for any deterministic protocol, good or bad.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, ParameterError
from ..protocol import ProtocolHandle
from .codec import SubsetCode, binom_bits, ceil_log2, subset_rank, subset_unrank
from .params import LbParams, LbParamsK

_HEAD = struct.Struct("<3Q")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True)
class EncoderOutput:
    n: int
    m: int
    R: int
    message: bytes
    B: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self):
        if len(self.b) != self.R or any(bit not in (0, 1) for bit in self.b):
            raise FormatError(f"round bits must be a 0/1 string of length {self.R}")
        if len(self.B) > self.m:
            raise FormatError(f"remainder set has {len(self.B)} > m = {self.m} elements")

    @property
    def code(self) -> SubsetCode:
        return subset_rank(self.n, self.B)

    def to_bytes(self) -> bytes:
        """Header ``(n, m, R)``, length-prefixed message, round bits, ``|B|``, big-endian rank."""
        rank_bytes = (binom_bits(self.n, len(self.B)) + 7) // 8
        return b"".join(
            [
                _HEAD.pack(self.n, self.m, self.R),
                _U64.pack(len(self.message)),
                self.message,
                np.packbits(np.array(self.b, dtype=np.uint8), bitorder="little").tobytes(),
                _U64.pack(len(self.B)),
                self.code.rank.to_bytes(rank_bytes, "big"),
            ]
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> EncoderOutput:
        try:
            n, m, R = _HEAD.unpack_from(data, 0)
            off = _HEAD.size
            (mlen,) = _U64.unpack_from(data, off)
            off += _U64.size
            message = bytes(data[off : off + mlen])
            if len(message) != mlen:
                raise FormatError("truncated message block")
            off += mlen
            nb = (R + 7) // 8
            raw = np.frombuffer(data[off : off + nb], dtype=np.uint8)
            if raw.size != nb:
                raise FormatError("truncated round bits")
            b = tuple(int(v) for v in np.unpackbits(raw, count=R, bitorder="little"))
            off += nb
            (w,) = _U64.unpack_from(data, off)
            off += _U64.size
        except struct.error as exc:
            raise FormatError(f"truncated encoding: {exc}") from None
        if w > min(n, m):
            raise FormatError(f"remainder size {w} exceeds min(n, m)")
        rank_bytes = (binom_bits(n, w) + 7) // 8
        if len(data) - off != rank_bytes:
            raise FormatError(f"rank field has {len(data) - off} bytes, expected {rank_bytes}")
        rank = int.from_bytes(data[off:], "big")
        return cls(n, m, R, message, subset_unrank(SubsetCode(n, w, rank)), b)


def encoding_bit_length(out: EncoderOutput) -> int:
    """Message bits (whole bytes) + ``R`` + ``ceil(log2 n)`` + ``ceil(log2 C(n, |B|))``."""
    return 8 * len(out.message) + out.R + ceil_log2(out.n) + binom_bits(out.n, len(out.B))


def indicator(n: int, items) -> np.ndarray:
    x = np.zeros(n, dtype=np.int64)
    idx = list(items)
    if idx:
        x[idx] = 1
    return x


def _check_set(S, n: int, m: int) -> frozenset[int]:
    S = frozenset(int(a) for a in S)
    if len(S) != m:
        raise ParameterError(f"set must have exactly m = {m} elements, got {len(S)}")
    if min(S) < 0 or max(S) >= n:
        raise ParameterError(f"set elements must lie in [0, {n})")
    return S


def _check_output(out: EncoderOutput, n: int, m: int, R: int):
    if (out.n, out.m, out.R) != (n, m, R):
        raise FormatError(f"encoding has (n, m, R) = {(out.n, out.m, out.R)}, parameters give {(n, m, R)}")
    if out.B and (min(out.B) < 0 or max(out.B) >= n):
        raise FormatError("remainder set has out-of-range elements")


def _first(answer) -> int | None:
    return int(answer[0]) if answer else None


def enc(S, P: ProtocolHandle, params: LbParams, trace: list | None = None) -> EncoderOutput:
    """Encode an m-subset; ``trace`` (if given) receives the surviving set after every round."""
    n, m, R = params.n, params.m, params.R
    S = _check_set(S, n, m)
    message = P.message_bytes(P.alice(indicator(n, S)))
    msg = P.parse_message(message)
    pos = params.positions
    found: set[int] = set()
    live = set(S)
    bits = []
    for r in range(1, R + 1):
        s_r = _first(P.bob(msg, indicator(n, S - live)))
        if s_r is not None and s_r in live:
            bits.append(1)
            found.add(s_r)
            live.discard(s_r)
        else:
            bits.append(0)
        excess = len(live) - params.sizes[r]
        for a in sorted(live, key=pos.__getitem__)[:excess]:
            live.discard(a)
        if trace is not None:
            trace.append(frozenset(live))
    return EncoderOutput(n, m, R, message, tuple(sorted(S - found)), tuple(bits))


def dec(out: EncoderOutput, P: ProtocolHandle, params: LbParams, trace: list | None = None) -> frozenset[int]:
    """Invert :func:`enc`; ``trace`` receives the covered set after every round."""
    n, m, R = params.n, params.m, params.R
    _check_output(out, n, m, R)
    msg = P.parse_message(out.message)
    pos = params.positions
    B = set(out.B)
    found: set[int] = set()
    covered: set[int] = set()
    for r in range(1, R + 1):
        if out.b[r - 1]:
            s_r = _first(P.bob(msg, indicator(n, covered)))
            if s_r is None or s_r in covered or not 0 <= s_r < n:
                raise FormatError(f"round {r} is flagged successful but Bob's answer is not a new element")
            found.add(s_r)
            covered.add(s_r)
        need = m - params.sizes[r] - len(covered)
        pool = sorted(B - covered, key=pos.__getitem__)
        if need < 0 or len(pool) < need:
            raise FormatError(f"round {r}: cannot restore {need} masked elements from the remainder set")
        covered.update(pool[:need])
        if trace is not None:
            trace.append(frozenset(covered))
    result = frozenset(B | found)
    if len(result) != m:
        raise FormatError(f"decoded set has {len(result)} elements, expected {m}")
    return result


def enc_k(S, P: ProtocolHandle, params: LbParamsK, trace: list | None = None) -> EncoderOutput:
    """Encode an m-subset using a k-index protocol and nested subsampled index sets."""
    n, m, R = params.n, params.m, params.R
    S = _check_set(S, n, m)
    message = P.message_bytes(P.alice(indicator(n, S)))
    msg = P.parse_message(message)
    depth = params.depth
    found: set[int] = set()
    bits = []
    for r in range(1, R + 1):
        live = params.in_level(r - 1, S)
        answer = P.bob(msg, indicator(n, S - live))
        if answer is not None and set(answer) <= live:
            bits.append(1)
            found.update(a for a in answer if depth[a] == r - 1)
        else:
            bits.append(0)
        if trace is not None:
            trace.append(frozenset(params.in_level(r, S)))
    return EncoderOutput(n, m, R, message, tuple(sorted(S - found)), tuple(bits))


def dec_k(out: EncoderOutput, P: ProtocolHandle, params: LbParamsK, trace: list | None = None) -> frozenset[int]:
    n, m, R = params.n, params.m, params.R
    _check_output(out, n, m, R)
    msg = P.parse_message(out.message)
    depth = params.depth
    B = set(out.B)
    found: set[int] = set()
    covered: set[int] = set()
    for r in range(1, R + 1):
        if out.b[r - 1]:
            answer = P.bob(msg, indicator(n, covered))
            if answer is None:
                raise FormatError(f"round {r} is flagged successful but Bob failed")
            fresh = {int(a) for a in answer if 0 <= a < n and depth[a] == r - 1}
            found |= fresh
            covered |= fresh
        covered |= {a for a in B if depth[a] == r - 1}
        if trace is not None:
            trace.append(frozenset(covered))
    result = frozenset(B | found)
    if len(result) != m:
        raise FormatError(f"decoded set has {len(result)} elements, expected {m}")
    return result


def lockstep_partition(S, enc_trace: list, dec_trace: list) -> bool:
    """True iff the surviving and covered sets partition ``S`` after every round."""
    S = frozenset(S)
    if len(enc_trace) != len(dec_trace):
        return False
    return all(not (live & cov) and (live | cov) == S for live, cov in zip(enc_trace, dec_trace))
