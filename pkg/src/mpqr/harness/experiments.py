"""Experiment drivers that write CSV tables.

Every trial draws from its own random stream (master seed split by trial
index) and rows are emitted in trial order, so output is byte-identical
for any worker count.  ``MPQR_THREADS`` caps the number of worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from mpqr import _kernels as K
from mpqr.bounds import BoundSpec
from mpqr.errors import Overflow
from mpqr.floatsim import FP16, FP16_FP32, FP32, ArithmeticContext, PrecisionPair, get_format
from mpqr.harness.matrices import MatrixSpec, gen_matrix, trial_rng
from mpqr.harness.measure import CSV_COLUMNS, ErrorReport, measure
from mpqr.qr_mixed import factor

DOT_COLUMNS = ("trial", "relerr", "average", "sd", "maximum", "overflows")


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("MPQR_THREADS", "1") or 1)
    return max(1, int(threads))


def _map(fn, tasks, threads):
    threads = thread_count(threads)
    if threads == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


def _write(out, header, lines):
    text = ",".join(header) + "\n" + "".join(line + "\n" for line in lines)
    if out is not None:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


# --- dot products -----------------------------------------------------------

def _dot_chunk(task):
    seed, trials, m, dist, key = task
    res = []
    for trial in trials:
        rng = trial_rng(seed, trial)
        if dist == "normal":
            xy = rng.standard_normal((2, m))
        else:
            xy = rng.random((2, m))
        t, emin, emax = key[1:4]
        xy = K.round_array(xy, t, emin, emax, False)
        x, y = xy
        fl = K.dot(x, y, key)
        if not math.isfinite(fl):
            res.append(None)
            continue
        prods = x * y  # exact: products of fp16 values fit in fp64
        exact = math.fsum(prods)
        res.append(abs(exact - fl) / math.fsum(np.abs(prods)))
    return res


def dot_errors(count: int, m: int, distribution: str = "normal", pair: PrecisionPair | None = None,
               seed: int = 0, prec=FP16, threads: int | None = None) -> list:
    """Relative errors |x'y - fl(x'y)| / |x|'|y|; ``None`` marks an overflowed trial.

    With ``pair`` the mixed inner product is used, otherwise every operation
    is rounded to ``prec``.
    """
    if count < 1 or m < 1:
        raise ValueError("count and m must be positive")
    dist = {"normal": "normal", "gaussian": "normal", "gaussianstd": "normal",
            "uniform": "uniform", "uniform01": "uniform"}.get(distribution.lower())
    if dist is None:
        raise ValueError(f"unknown distribution {distribution!r}")
    ctx = ArithmeticContext.mixed_inner(pair) if pair else ArithmeticContext.uniform(get_format(prec))
    if ctx.storage.t > 26:
        raise ValueError("the exact reference needs products that fit in fp64")
    chunk = 2000
    tasks = [(seed, range(a, min(count, a + chunk)), m, dist, ctx.key)
             for a in range(0, count, chunk)]
    out = []
    for part in _map(_dot_chunk, tasks, threads):
        out.extend(part)
    return out


def summarize(errors) -> dict:
    ok = np.array([e for e in errors if e is not None], dtype=np.float64)
    return {
        "average": float(ok.mean()) if ok.size else math.nan,
        "sd": float(ok.std(ddof=1)) if ok.size > 1 else math.nan,
        "maximum": float(ok.max()) if ok.size else math.nan,
        "overflows": len(errors) - ok.size,
    }


def run_dot_experiment(count: int, m: int, distribution: str = "normal", pair: PrecisionPair | None = None,
                       out=None, seed: int = 0, prec=FP16, threads: int | None = None):
    """Per-trial relative errors plus one summary row (average, sd, maximum)."""
    errs = dot_errors(count, m, distribution, pair, seed, prec, threads)
    lines = [f"{i},{'overflow' if e is None else repr(e)},,,," for i, e in enumerate(errs)]
    s = summarize(errs)
    lines.append(f"summary,,{s['average']!r},{s['sd']!r},{s['maximum']!r},{s['overflows']}")
    text = _write(out, DOT_COLUMNS, lines)
    return s, text


# --- QR experiments ---------------------------------------------------------

def run_case(A, alg, regime, *, r=None, L=None, prec=FP32, pair=FP16_FP32, overflow="signal",
             c=1, **meta) -> ErrorReport:
    """Factor A with one algorithm x regime and measure it; overflow gives a NaN row."""
    m, n = A.shape
    bspec = BoundSpec(alg, regime, m, n, r=r if alg == "bqr" else None, L=L if alg == "tsqr" else None,
                      prec=prec if regime == "uniform" else None, low=pair.low, high=pair.high, c=c)
    try:
        Q, R = factor(A, alg, regime, r=r, L=L, prec=prec, pair=pair, overflow=overflow)
    except Overflow:
        return ErrorReport(alg, regime, m, n, bspec.r, bspec.L, overflows=1, **meta)
    rep = measure(A, Q, R, bspec, **meta)
    rep.overflows = int(not (np.all(np.isfinite(Q)) and np.all(np.isfinite(R))))
    return rep


def _qr_task(task):
    mspec, cases, kw = task
    A = gen_matrix(mspec)
    meta = {"seed": mspec.trial, "alpha": mspec.alpha}
    return [run_case(A, alg, regime, r=r, L=L, **kw, **meta) for alg, regime, r, L in cases]


def _run_qr(tasks, out, threads):
    reports = [rep for group in _map(_qr_task, tasks, threads) for rep in group]
    text = _write(out, CSV_COLUMNS, [rep.csv_row() for rep in reports])
    return reports, text


def size_sweep_defaults(count: int = 8) -> list[int]:
    """Geometric row counts from 1000 to 13949."""
    return sorted({int(round(x)) for x in np.geomspace(1000, 13949, count)})


def run_size_sweep(m_list=None, n: int = 250, r: int = 63, L: int = 2, samples: int = 1, out=None,
                   seed: int = 0, kind: str = "gaussian", pair: PrecisionPair = FP16_FP32,
                   overflow: str = "signal", c: float = 1, threads: int | None = None):
    """hqr/bqr/tsqr in uniform high precision, mixed inner products and block FMAs."""
    m_list = list(m_list) if m_list is not None else size_sweep_defaults()
    cases = [("hqr", "uniform", None, None), ("bqr", "uniform", r, None), ("tsqr", "uniform", None, L),
             ("hqr", "mixed2", None, None), ("bqr", "mixed2", r, None), ("tsqr", "mixed2", None, L),
             ("bqr", "mixed3", r, None), ("tsqr", "mixed3", None, L)]
    kw = {"prec": pair.high, "pair": pair, "overflow": overflow, "c": c}
    tasks = [(MatrixSpec(kind, m, n, seed, s, storage=pair.low), cases, kw)
             for m in m_list for s in range(samples)]
    return _run_qr(tasks, out, threads)


def run_block_sweep(m: int = 2048, n: int = 256, r_list=None, samples: int = 1, out=None, seed: int = 0,
                    pair: PrecisionPair = FP16_FP32, overflow: str = "signal", c: float = 1,
                    threads: int | None = None):
    """Uniform high-precision bqr against mp_bqr3 over block widths, log-spaced singular values."""
    if r_list is None:
        r_list = [2 ** k for k in range(1, int(math.log2(n)) + 1)]
    cases = []
    for r in r_list:
        cases += [("bqr", "uniform", r, None), ("bqr", "mixed3", r, None)]
    kw = {"prec": pair.high, "pair": pair, "overflow": overflow, "c": c}
    tasks = [(MatrixSpec("logspaced", m, n, seed, s, storage=pair.low), cases, kw) for s in range(samples)]
    return _run_qr(tasks, out, threads)


def run_condition_sweep(m: int = 4000, n: int = 100, alpha_list=None, samples: int = 10, L_list=(1, 2, 3, 4, 5),
                        out=None, seed: int = 0, pair: PrecisionPair = FP16_FP32, overflow: str = "signal",
                        c: float = 1, threads: int | None = None):
    """mp_hqr2 and mp_tsqr2 at each L on Q'(alpha E + I) matrices (cond = n alpha + 1)."""
    if alpha_list is None:
        alpha_list = list(np.logspace(-4, 0, 5))
    cases = [("hqr", "mixed2", None, None)] + [("tsqr", "mixed2", None, int(L)) for L in L_list]
    kw = {"prec": pair.high, "pair": pair, "overflow": overflow, "c": c}
    tasks = []
    for ia, a in enumerate(alpha_list):
        for s in range(samples):
            # one stream per (alpha, sample) so every alpha sees fresh matrices
            trial = ia * samples + s
            tasks.append((MatrixSpec("conditioned", m, n, seed, trial, alpha=float(a), storage=pair.low),
                          cases, kw))
    return _run_qr(tasks, out, threads)


def read_reports(text_or_path) -> list[ErrorReport]:
    text = str(text_or_path)
    if "\n" not in text:
        text = Path(text).read_text()
    lines = text.strip().splitlines()[1:]
    return [ErrorReport.from_csv(line) for line in lines]

