"""Command-line driver. Every subcommand writes CSV with a ``#`` config line first.

Exit status: 0 on success, 1 for unusable flags, 2 when parameters violate a
constraint or an input file is malformed.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DecodeLimitError, FormatError, ParameterError
from .experiments import answer_is_valid, failure_trials, message_size, promise_instance, uniformity
from .lb.experiments import adaptivity_experiment, pochhammer_check, random_subset, savings_report
from .lb.params import LbParams, LbParamsK
from .lb.scheme import EncoderOutput, dec, dec_k, enc, enc_k, encoding_bit_length
from .prf import derive_seed
from .protocol import ProtocolParams, make_protocol, make_stub, payload_bits, serialize
from .turnstile import TurnstileSketch, parse_stream


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get("URK_SEED", "0")
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"URK_SEED must be an integer, got {raw!r}") from None


def _answer_text(answer) -> str:
    return "FAIL" if answer is None else " ".join(str(i) for i in answer)


class _Csv:
    def __init__(self, args, stream):
        self.stream = stream
        self.writer = csv.writer(stream, lineterminator="\n")
        config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output")}
        stream.write("# urk " + " ".join(f"{k}={_fmt(v)}" for k, v in config.items()) + "\n")

    def header(self, *cols):
        self.writer.writerow(cols)

    def row(self, *vals):
        self.writer.writerow([_fmt(v) for v in vals])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def _protocol_params(args, n=None, k=None, seed=None) -> ProtocolParams:
    return ProtocolParams(
        n=args.n if n is None else n,
        k=args.k if k is None else k,
        q=args.q,
        oversample=args.oversample,
        slack=args.slack,
        seed=derive_seed(args.seed, "protocol") if seed is None else seed,
        backend=args.backend,
    )


# ---------------------------------------------------------------------------


def cmd_sketch_demo(args, out: _Csv):
    params = _protocol_params(args)
    sketch = TurnstileSketch(params)
    out.header("updates", "query", "answer")
    queried = False
    samples = 0

    def answer(kind):
        nonlocal samples
        if kind == "find":
            out.row(sketch.updates, "find", _answer_text(sketch.support_find()))
        else:
            out.row(sketch.updates, "sample", _answer_text(sketch.sample(derive_seed(args.seed, "sample", samples))))
            samples += 1

    for line in sys.stdin:
        word = line.split("#", 1)[0].strip().lower()
        if word in ("find", "sample"):
            answer(word)
            queried = True
            continue
        for u in parse_stream([line]):
            sketch.update(u.i, u.delta)
    if not queried:
        answer("find")
        answer("sample")


def cmd_ur_run(args, out: _Csv):
    params = _protocol_params(args)
    proto = make_protocol(params)
    rng = np.random.default_rng([args.seed, 0])
    x, y = promise_instance(params.n, rng)
    msg = proto.alice(x)
    data = proto.message_bytes(msg)
    answer = proto.bob(proto.parse_message(data), y)
    bits = payload_bits(params.L, params.m_rows, params.q) if params.backend == "gfq" else 8 * (len(data) - 52)
    out.header("n", "k", "q", "L", "m_rows", "payload_bits", "header_bits", "message_bytes", "diff_weight", "answer", "valid")
    out.row(
        params.n,
        params.k,
        params.q,
        params.L,
        params.m_rows if params.backend == "gfq" else params.buckets,
        bits,
        8 * 52,
        len(data),
        int((x != y).sum()),
        _answer_text(answer),
        answer_is_valid(answer, x, y, params.k),
    )


def _lb_params(args):
    if args.k is not None:
        return LbParamsK(args.n, args.k, args.seed)
    if args.log2_inv_delta is None:
        raise UsageError("one of --log2-inv-delta or --k is required")
    return LbParams(args.n, args.log2_inv_delta, args.seed)


def _lb_protocol(args, params, trial: int | None = None):
    k = getattr(params, "k", 1)
    pseed = derive_seed(args.seed, "protocol") if trial is None else derive_seed(args.seed, "protocol", trial)
    if args.protocol == "oracle":
        return make_stub("oracle", params.n, k, pseed)
    if args.protocol == "always-fail":
        return make_stub("always_fail", params.n, k, pseed)
    if args.protocol == "iid-failure":
        return make_stub("iid_failure", params.n, k, pseed, args.delta)
    backend = "bucket" if args.protocol == "bucket" else "gfq"
    return make_protocol(ProtocolParams(params.n, k, args.q, args.oversample, args.slack, pseed, backend))


def _read_set(path: str) -> list[int]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise FormatError(f"{path}: expected whitespace- or comma-separated integers") from None


def cmd_lb_encode(args, out: _Csv):
    params = _lb_params(args)
    P = _lb_protocol(args, params)
    S = _read_set(args.set) if args.set else random_subset(params.n, params.m, args.seed, 0)
    encoded = (enc_k if isinstance(params, LbParamsK) else enc)(S, P, params)
    Path(args.encoding).write_bytes(encoded.to_bytes())
    out.header("n", "m", "R", "successes", "remainder", "message_bytes", "total_bits")
    out.row(params.n, params.m, params.R, sum(encoded.b), len(encoded.B), len(encoded.message), encoding_bit_length(encoded))


def cmd_lb_decode(args, out: _Csv):
    params = _lb_params(args)
    P = _lb_protocol(args, params)
    encoded = EncoderOutput.from_bytes(Path(args.encoding).read_bytes())
    S = (dec_k if isinstance(params, LbParamsK) else dec)(encoded, P, params)
    out.header("element")
    for a in sorted(S):
        out.row(a)


def cmd_exp_failure_rate(args, out: _Csv):
    out.header("oversample", "trials", "failures", "rate")
    for c in args.oversample:
        rows = failure_trials(args.n, args.k, args.q, c, args.slack, args.trials, args.seed, args.backend)
        fails = sum(r.failed for r in rows)
        out.row(c, args.trials, fails, fails / args.trials)


def cmd_exp_message_size(args, out: _Csv):
    out.header("n", "k", "L", "m_rows", "payload_bits", "formula_bits", "serialized_bytes", "normalized")
    for r in message_size(args.ns, args.k, args.q, args.oversample, args.slack, args.seed):
        out.row(r.n, r.k, r.L, r.m_rows, r.payload_bits, r.formula_bits, r.serialized_bytes, r.normalized)


def cmd_exp_uniformity(args, out: _Csv):
    res = uniformity(args.n, args.weight, args.k, args.trials, args.seed, args.oversample, args.q, args.slack)
    expected = sum(res.counts) / len(res.counts)
    out.header("index", "count", "expected", "failures", "chi2", "p_value")
    for i, c in zip(res.support, res.counts):
        out.row(i, c, expected, res.failures, res.chi2, res.p_value)


def cmd_exp_savings(args, out: _Csv):
    params = LbParams(args.n, args.log2_inv_delta, args.seed)
    rep = savings_report(lambda t: _lb_protocol(args, params, t), params, args.trials, args.seed)
    out.header("trial", "successes", "remainder", "total_bits", "inequality_holds", "roundtrip")
    for t in rep.trials:
        out.row(t.trial, t.successes, t.remainder, t.total_bits, t.inequality, t.roundtrip)


def cmd_exp_adaptivity(args, out: _Csv):
    r = adaptivity_experiment(args.n, args.t, args.trials, args.seed)
    out.header("n", "t", "trials", "measured_p", "exact_p", "mutual_information", "analytic_rhs", "rhs_unit_entropy", "rhs_event_entropy")
    out.row(r.n, r.t, r.trials, r.measured_p, r.exact_p, r.mutual_information, r.analytic_rhs, r.rhs_unit_entropy, r.rhs_event_entropy)


def cmd_exp_pochhammer(args, out: _Csv):
    out.header("K", "product", "bound", "pass")
    for K in range(args.kmin, args.kmax + 1):
        r = pochhammer_check(K)
        out.row(K, float(r.product), r.bound, r.passed)


# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="shared seed (default: $URK_SEED or 0)")
    p.add_argument("--output", "-o", default="-", help="CSV destination (default: stdout)")


def _add_protocol(p, oversample_default=4, multi=False):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--q", type=int, default=3)
    if multi:
        p.add_argument("--oversample", type=int, nargs="+", default=[oversample_default])
    else:
        p.add_argument("--oversample", type=int, default=oversample_default)
    p.add_argument("--slack", type=int, default=10)
    p.add_argument("--backend", choices=("gfq", "bucket"), default="gfq")


def _add_lb(p):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--log2-inv-delta", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="use the k-index variant")
    p.add_argument("--protocol", choices=("oracle", "always-fail", "iid-failure", "sketch", "bucket"), default="oracle")
    p.add_argument("--delta", type=float, default=0.25, help="failure rate of the iid-failure stub")
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--oversample", type=int, default=2)
    p.add_argument("--slack", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="urk", description="Sketch protocols for the universal relation and the set-encoding harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sketch-demo", help="ingest 'i delta' lines from stdin; 'find' or 'sample' lines query")
    _add_protocol(p)
    _add_common(p)
    p.set_defaults(func=cmd_sketch_demo)

    p = sub.add_parser("ur-run", help="one protocol round trip on a random promise instance")
    _add_protocol(p)
    _add_common(p)
    p.set_defaults(func=cmd_ur_run)

    p = sub.add_parser("lb-encode", help="encode a set (or a random one) to a file")
    _add_lb(p)
    p.add_argument("--set", default=None, help="file of indices ('-' for stdin); default: random m-subset")
    p.add_argument("--encoding", required=True, help="output file for the encoding")
    _add_common(p)
    p.set_defaults(func=cmd_lb_encode)

    p = sub.add_parser("lb-decode", help="decode an encoding file back to the set")
    _add_lb(p)
    p.add_argument("--encoding", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_lb_decode)

    exp = sub.add_parser("exp", help="experiments").add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    p = exp.add_parser("failure-rate")
    _add_protocol(p, multi=True)
    p.add_argument("--trials", type=int, default=300)
    _add_common(p)
    p.set_defaults(func=cmd_exp_failure_rate)

    p = exp.add_parser("message-size")
    p.add_argument("--ns", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--oversample", type=int, default=16)
    p.add_argument("--slack", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_exp_message_size)

    p = exp.add_parser("uniformity")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--weight", type=int, default=8)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--oversample", type=int, default=4)
    p.add_argument("--slack", type=int, default=10)
    p.add_argument("--trials", type=int, default=20000)
    _add_common(p)
    p.set_defaults(func=cmd_exp_uniformity)

    p = exp.add_parser("savings")
    _add_lb(p)
    p.add_argument("--trials", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_exp_savings)

    p = exp.add_parser("adaptivity")
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--trials", type=int, default=10**6)
    _add_common(p)
    p.set_defaults(func=cmd_exp_adaptivity)

    p = exp.add_parser("pochhammer")
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=64)
    _add_common(p)
    p.set_defaults(func=cmd_exp_pochhammer)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    stream = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    try:
        args.func(args, _Csv(args, stream))
    except UsageError as exc:
        print(f"urk: error: {exc}", file=sys.stderr)
        return 1
    except (ParameterError, FormatError, DecodeLimitError) as exc:
        print(f"urk: constraint violated: {exc}", file=sys.stderr)
        return 2
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
