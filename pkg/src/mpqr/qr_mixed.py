"""Mixed-precision QR strategies over a (low, high) precision pair.

* ``hqr_high_castdown``: HQR entirely in high precision, one castdown.
* ``mp_hqr2``, ``mp_bqr2``, ``mp_tsqr2``: the uniform algorithms with every
  inner product taken in high precision and cast down to low.
* ``mp_bqr3``, ``mp_tsqr3``: panel/block factorizations in high precision,
  WY factors stored in low, and all matrix products through block FMAs.

All inputs must be stored in ``pair.low``; Q and R come back in low.
"""

from __future__ import annotations

import numpy as np

from mpqr import qr_core
from mpqr.floatsim import (
    FP16_FP32,
    ArithmeticContext,
    PrecisionPair,
    bfma_gemm,
    get_format,
    require_representable,
    round_array,
)

REGIMES = ("uniform", "mixed2", "mixed3", "high_castdown")


def _low_input(A, pair):
    A = np.array(A, dtype=np.float64, order="C")
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError(f"need an m x n matrix with m >= n, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A has non-finite entries")
    require_representable(A, pair.low, "A")
    return A


def hqr_high_castdown(A, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    """HQR in uniform high precision on the (exactly) cast-up input, then castdown."""
    A = _low_input(A, pair)
    hi = ArithmeticContext.uniform(pair.high, overflow)
    F = qr_core.hqr(A, hi)
    Q = qr_core.build_q(F, hi)
    return (round_array(Q, pair.low, overflow, where="castdown of Q"),
            round_array(F.R, pair.low, overflow, where="castdown of R"))


def mp_hqr2(A, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    ctx = ArithmeticContext.mixed_inner(pair, overflow)
    F = qr_core.hqr(_low_input(A, pair), ctx)
    return qr_core.build_q(F, ctx), F.R


def mp_bqr2(A, r: int, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    ctx = ArithmeticContext.mixed_inner(pair, overflow)
    return qr_core.bqr(_low_input(A, pair), r, ctx)


def mp_tsqr2(A, L: int, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    ctx = ArithmeticContext.mixed_inner(pair, overflow)
    return qr_core.tsqr(_low_input(A, pair), L, ctx)


class _LowWY:
    """Low-precision copies of a block's R, W and V after a high-precision HQR."""

    def __init__(self, block, pair, overflow):
        hi = ArithmeticContext.uniform(pair.high, overflow)
        F = qr_core.hqr(block, hi)
        wy = qr_core.build_wy(F.V, F.beta, hi)
        self.R = round_array(F.R, pair.low, overflow, where="castdown of R")
        self.W = round_array(wy.W, pair.low, overflow, where="castdown of W")
        self.V = round_array(F.V, pair.low, overflow, where="castdown of V")
        self.full_R = F.R


def _apply_wy(X, Y, C, pair, overflow):
    # C - X (Y^T C): two block-FMA products with low outputs, subtraction in low
    T = bfma_gemm(Y.T, C, pair, overflow, check=False)
    U = bfma_gemm(X, T, pair, overflow, check=False)
    return round_array(C - U, pair.low, overflow, where="block update")


def mp_bqr3(A, r: int, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    """Blocked QR with high-precision panels and block-FMA level-3 updates.

    Each panel (including the last) is cast up, factored and turned into WY
    form in high precision; R, W and V are cast down once, and the trailing
    update and the Q build use block-FMA products on the low factors.
    """
    A = _low_input(A, pair)
    m, n = A.shape
    if not 1 <= r <= n:
        raise ValueError(f"block width must satisfy 1 <= r <= n, got {r}")
    parts = qr_core.panels(n, r)
    reps = []
    for c0, c1 in parts:
        blk = _LowWY(A[c0:, c0:c1], pair, overflow)
        A[c0:, c0:c1] = 0.0
        A[c0:c1, c0:c1] = blk.R
        if c1 < n:
            A[c0:, c1:] = _apply_wy(blk.V, blk.W, np.ascontiguousarray(A[c0:, c1:]), pair, overflow)
        reps.append(blk)
    R = np.triu(A[:n])
    Q = np.eye(m, n)
    for (c0, _), blk in zip(reversed(parts), reversed(reps)):
        Q[c0:, c0:] = _apply_wy(blk.W, blk.V, np.ascontiguousarray(Q[c0:, c0:]), pair, overflow)
    return Q, R


def mp_tsqr3(A, L: int, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    """TSQR whose nodes are high-precision HQRs with low-precision WY storage.

    Stacked R factors at inner levels are the cast-down low R's (cast up
    again, exactly, for the node's HQR).  Q is rebuilt top-down with block
    FMAs against the low W, V factors.
    """
    A = _low_input(A, pair)
    m, n = A.shape
    qr_core.check_levels(m, n, L)
    rows = qr_core.block_rows(m, L)
    levels = [[_LowWY(A[a:b], pair, overflow) for a, b in rows]]
    for _ in range(L):
        prev = levels[-1]
        levels.append([_LowWY(np.vstack([prev[2 * j].R, prev[2 * j + 1].R]), pair, overflow)
                       for j in range(len(prev) // 2)])
    top = levels[L][0]
    Qs = [_apply_wy(top.W, top.V, np.eye(2 * n, n), pair, overflow)]
    for i in range(L - 1, -1, -1):
        nxt = []
        for j, blk in enumerate(levels[i], start=1):
            h = qr_core.phi(j)
            B = np.zeros((blk.V.shape[0], n))
            B[:n] = Qs[qr_core.alpha(j) - 1][(h - 1) * n:h * n]
            nxt.append(_apply_wy(blk.W, blk.V, B, pair, overflow))
        Qs = nxt
    return np.vstack(Qs), top.R


def factor(A, alg: str, regime: str, *, r: int | None = None, L: int | None = None,
           prec=None, pair: PrecisionPair = FP16_FP32, overflow: str = "signal"):
    """Dispatch an algorithm x regime combination; returns (Q, R)."""
    alg, regime = alg.lower(), regime.lower()
    if alg not in ("hqr", "bqr", "tsqr"):
        raise ValueError(f"unknown algorithm {alg!r}")
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if alg == "bqr" and r is None:
        raise ValueError("bqr needs a block width r")
    if alg == "tsqr" and L is None:
        raise ValueError("tsqr needs a level count L")
    if regime == "uniform":
        if prec is None:
            raise ValueError("uniform regime needs a precision")
        ctx = ArithmeticContext.uniform(get_format(prec), overflow)
        if alg == "hqr":
            F = qr_core.hqr(A, ctx)
            return qr_core.build_q(F, ctx), F.R
        if alg == "bqr":
            return qr_core.bqr(A, r, ctx)
        return qr_core.tsqr(A, L, ctx)
    if regime == "high_castdown":
        if alg != "hqr":
            raise ValueError("high_castdown is defined for hqr only")
        return hqr_high_castdown(A, pair, overflow)
    if regime == "mixed2":
        if alg == "hqr":
            return mp_hqr2(A, pair, overflow)
        if alg == "bqr":
            return mp_bqr2(A, r, pair, overflow)
        return mp_tsqr2(A, L, pair, overflow)
    if alg == "hqr":
        raise ValueError("there is no block-FMA variant of level-2 HQR")
    if alg == "bqr":
        return mp_bqr3(A, r, pair, overflow)
    return mp_tsqr3(A, L, pair, overflow)
