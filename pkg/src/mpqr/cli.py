"""Command-line entry point: ``mpqr <subcommand> [options]``.

Exit status is 0 on success, 2 on bad arguments or input and 3 when a
simulated format overflows under the ``signal`` policy.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

import numpy as np

from mpqr import bounds
from mpqr.errors import MPQRError, Overflow
from mpqr.floatsim import FORMATS, PrecisionPair, get_format, require_representable
from mpqr.harness import experiments as ex
from mpqr.harness.measure import CSV_COLUMNS, measure
from mpqr.qr_mixed import REGIMES, factor

ALGS = ("hqr", "bqr", "tsqr")


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    g.add_argument("--out", default=d(None), help="output file or directory for artifacts")
    g.add_argument("--overflow-policy", choices=("signal", "saturate"), default=d("signal"))
    g.add_argument("--c-constant", type=float, default=d(1.0), help="constant c in the gamma terms")
    g.add_argument("--threads", type=int, default=d(None), help="worker processes (default $MPQR_THREADS or 1)")


def _precision_flags(p, with_prec=True):
    if with_prec:
        p.add_argument("--prec", choices=sorted(FORMATS), default="fp32", help="format of the uniform regime")
    p.add_argument("--low", choices=sorted(FORMATS), default="fp16")
    p.add_argument("--high", choices=sorted(FORMATS), default="fp32")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpqr", description="Mixed-precision QR laboratory.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("factor", "factor a CSV matrix and report its errors")
    p.add_argument("--alg", choices=ALGS, required=True)
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--r", type=int, help="block width for bqr")
    p.add_argument("--L", type=int, help="tree levels for tsqr")
    p.add_argument("--input", help="matrix CSV (default: stdin)")
    p.add_argument("--round-input", action="store_true",
                   help="round the input to its storage format instead of rejecting it")
    _precision_flags(p)

    p = add("bounds", "evaluate an error bound")
    p.add_argument("--alg", choices=ALGS, required=True)
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--what", choices=("q", "r", "measurable"), default="q",
                   help="||dQ||_F bound, columnwise R coefficient, or (backward, orth)")
    _precision_flags(p)

    p = add("feasibility", "write the grid of log10 bounds over matrix shapes")
    p.add_argument("--scheme", choices=("hqr", "tsqr"), default="hqr")
    p.add_argument("--L", type=int)
    p.add_argument("--prec", choices=sorted(FORMATS), default="fp32")
    p.add_argument("--log2-m", type=_ints, default=list(range(4, 25)), help="comma list of log2(m)")
    p.add_argument("--log2-n", type=_ints, default=list(range(1, 13)), help="comma list of log2(n)")

    p = add("dot-exp", "relative errors of random inner products")
    p.add_argument("--dist", choices=("normal", "uniform"), default="normal")
    p.add_argument("--count", type=int, default=100000)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--prec", choices=sorted(FORMATS), default="fp16")
    p.add_argument("--mixed", action="store_true", help="use the mixed inner product over --low/--high")
    _precision_flags(p, with_prec=False)

    p = add("size-sweep", "errors of all variants as m grows")
    p.add_argument("--m", type=_ints, default=None, help="comma list (default geometric 1000..13949)")
    p.add_argument("--n", type=int, default=250)
    p.add_argument("--r", type=int, default=63)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--kind", default="gaussian")
    _precision_flags(p, with_prec=False)

    p = add("block-sweep", "uniform bqr vs mp_bqr3 over block widths")
    p.add_argument("--m", type=int, default=2048)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--r", type=_ints, default=None, help="comma list (default 2,4,...,n)")
    p.add_argument("--samples", type=int, default=1)
    _precision_flags(p, with_prec=False)

    p = add("cond-sweep", "mp_hqr2 vs mp_tsqr2 over the condition number")
    p.add_argument("--m", type=int, default=4000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--alpha", type=_floats, default=None, help="comma list (default logspace 1e-4..1)")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--L", type=_ints, default=[1, 2, 3, 4, 5])
    _precision_flags(p, with_prec=False)
    return parser


def _pair(args):
    return PrecisionPair(get_format(args.low), get_format(args.high))


def _target(out, default_name):
    if out is None:
        return None
    p = Path(out)
    if p.suffix:
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / default_name


def _emit(text, out, name, stdout):
    path = _target(out, name)
    if path is None:
        stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        stdout.write(f"wrote {path}\n")


def _matrix_text(M):
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(M), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def _cmd_factor(args, stdin, stdout):
    src = open(args.input) if args.input else stdin
    try:
        A = np.loadtxt(src, delimiter=",", ndmin=2, dtype=np.float64)
    finally:
        if args.input:
            src.close()
    pair = _pair(args) if args.regime != "uniform" else None
    storage = get_format(args.prec) if pair is None else pair.low
    if args.round_input:
        from mpqr.floatsim import round_array
        A = round_array(A, storage, args.overflow_policy, where="input rounding")
    else:
        require_representable(A, storage, "input matrix")
    kw = dict(r=args.r, L=args.L, prec=args.prec, overflow=args.overflow_policy)
    if pair is not None:
        kw["pair"] = pair
    Q, R = factor(A, args.alg, args.regime, **kw)
    m, n = A.shape
    bspec = bounds.BoundSpec(args.alg, args.regime, m, n, r=args.r if args.alg == "bqr" else None,
                             L=args.L if args.alg == "tsqr" else None,
                             prec=args.prec if args.regime == "uniform" else None,
                             low=args.low, high=args.high, c=args.c_constant)
    rep = measure(A, Q, R, bspec, seed=args.seed)
    report = ",".join(CSV_COLUMNS) + "\n" + rep.csv_row() + "\n"
    if args.out is not None:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "Q.csv").write_text(_matrix_text(Q))
        (d / "R.csv").write_text(_matrix_text(R))
        (d / "report.csv").write_text(report)
    stdout.write(report)


def _cmd_bounds(args, stdout):
    spec = bounds.BoundSpec(args.alg, args.regime, args.m, args.n, r=args.r, L=args.L,
                            prec=args.prec if args.regime == "uniform" else None,
                            low=args.low, high=args.high, c=args.c_constant)
    if args.what == "q":
        stdout.write(f"{bounds.bound_q(spec):.6g}\n")
    elif args.what == "r":
        stdout.write(f"{bounds.column_coefficient(spec):.6g}\n")
    else:
        b, o = bounds.measurable_bounds(spec)
        stdout.write(f"{b:.6g} {o:.6g}\n")
    if not bounds.bound_stable(spec):
        sys.stderr.write("warning: some gamma term has c*k*u >= 1/2\n")


def _cmd_feasibility(args, stdout):
    cells = bounds.feasibility_map(args.scheme, [2 ** k for k in args.log2_m], [2 ** k for k in args.log2_n],
                                   prec=get_format(args.prec), L=args.L, c=args.c_constant)
    buf = ["m n value\n"] + [f"{m} {n} {'inf' if math.isinf(v) else repr(float(v))}\n" for m, n, v in cells]
    name = f"feasibility_{args.scheme}{args.L or ''}_{args.prec}.txt"
    _emit("".join(buf), args.out, name, stdout)


def _cmd_dot(args, stdout):
    pair = _pair(args) if args.mixed else None
    summary, text = ex.run_dot_experiment(args.count, args.m, args.dist, pair=pair, seed=args.seed,
                                          prec=get_format(args.prec), threads=args.threads)
    _emit(text, args.out, f"dot_{args.dist}.csv", stdout)
    if args.out is not None:
        stdout.write(" ".join(f"{k}={v:.4g}" for k, v in summary.items()) + "\n")


def run(argv=None, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    common = dict(seed=args.seed, overflow=args.overflow_policy, c=args.c_constant, threads=args.threads)
    try:
        if args.command == "factor":
            _cmd_factor(args, stdin, stdout)
        elif args.command == "bounds":
            _cmd_bounds(args, stdout)
        elif args.command == "feasibility":
            _cmd_feasibility(args, stdout)
        elif args.command == "dot-exp":
            _cmd_dot(args, stdout)
        elif args.command == "size-sweep":
            _, text = ex.run_size_sweep(args.m, args.n, args.r, args.L, args.samples, kind=args.kind,
                                        pair=_pair(args), **common)
            _emit(text, args.out, "size_sweep.csv", stdout)
        elif args.command == "block-sweep":
            _, text = ex.run_block_sweep(args.m, args.n, args.r, args.samples, pair=_pair(args), **common)
            _emit(text, args.out, "block_sweep.csv", stdout)
        elif args.command == "cond-sweep":
            _, text = ex.run_condition_sweep(args.m, args.n, args.alpha, args.samples, args.L,
                                             pair=_pair(args), **common)
            _emit(text, args.out, "cond_sweep.csv", stdout)
    except Overflow as e:
        sys.stderr.write(f"mpqr: {e}\n")
        return 3
    except (MPQRError, ValueError, OSError) as e:
        sys.stderr.write(f"mpqr: error: {e}\n")
        return 2
    return 0


def main(argv=None) -> int:
    return run(argv)
