"""Householder QR and its column-blocked (WY) and row-blocked (TSQR) variants.

Every routine takes an :class:`~mpqr.floatsim.ArithmeticContext` in uniform
or mixed-inner-product mode and runs each FLOP under it.  Inputs must already
be stored in the context's storage format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpqr import _kernels as K
from mpqr.errors import InvalidLevels, RankDeficient, ZeroVector
from mpqr.floatsim import ArithmeticContext, require_representable


@dataclass
class HouseholderFactors:
    """V holds unit-first-element HH vectors (zeros above), beta the constants."""

    V: np.ndarray
    beta: np.ndarray
    R: np.ndarray

    @property
    def shape(self):
        return self.V.shape


@dataclass
class WYRep:
    """I - W Y^T equals P_1 ... P_r; Y is the V block itself."""

    W: np.ndarray
    Y: np.ndarray

    def dense(self) -> np.ndarray:
        return np.eye(self.W.shape[0]) - self.W @ self.Y.T


def alpha(j: int) -> int:
    """Parent block index (1-based) of block j in the TSQR tree."""
    return -(-j // 2)


def phi(j: int) -> int:
    """Which half (1 or 2) of its parent block j lands in."""
    return 2 + j - 2 * alpha(j)


@dataclass
class TsqrTree:
    """levels[i][j] is the HQR of block j+1 at level i; level i has 2^(L-i) blocks."""

    L: int
    n: int
    rows: list
    levels: list = field(default_factory=list)

    @property
    def R(self) -> np.ndarray:
        return self.levels[self.L][0].R


def _key(ctx: ArithmeticContext):
    if ctx.mode == "block_fma":
        raise ValueError("block-FMA contexts are handled by mpqr.qr_mixed")
    return ctx.key


def _prep(A, ctx, what="A"):
    A = np.array(A, dtype=np.float64, order="C")
    if A.ndim != 2:
        raise ValueError(f"{what} must be a matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{what} has non-finite entries")
    require_representable(A, ctx.storage, what)
    return A


def hhvec(x, ctx: ArithmeticContext):
    """HH vector of ``x``: returns (beta, v, sigma) with v[0] = 1 and
    (I - beta v v^T) x = sigma e_1, sigma = -sign(x[0]) ||x||."""
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty vector")
    beta, v, sigma, status = K.hhvec(x, _key(ctx))
    if status == K.ZERO_VECTOR:
        raise ZeroVector("vector norm rounds to zero")
    ctx.check(v, "hhvec")
    ctx.check(np.array([beta, sigma]), "hhvec")
    return beta, v, sigma


def apply_hh(v, beta, B, ctx: ArithmeticContext) -> np.ndarray:
    """(I - beta v v^T) B, as an inner product then a rank-1 update per column."""
    B = np.array(B, dtype=np.float64, order="C")
    vec = B.ndim == 1
    if vec:
        B = B[:, None].copy()
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.size != B.shape[0]:
        raise ValueError("v and B do not conform")
    K.apply_hh(v, float(beta), B, _key(ctx))
    ctx.check(B, "apply_hh")
    return B[:, 0] if vec else B


def _hqr_inplace(A, ctx, col_offset=0):
    V, betas, status, col = K.hqr(A, _key(ctx))
    if status != K.OK:
        raise RankDeficient(col + col_offset)
    ctx.check(A, "hqr")
    return V, betas


def hqr(A, ctx: ArithmeticContext) -> HouseholderFactors:
    """Level-2 Householder QR."""
    A = _prep(A, ctx)
    m, n = A.shape
    if m < n:
        raise ValueError(f"hqr needs m >= n, got {A.shape}")
    V, betas = _hqr_inplace(A, ctx)
    return HouseholderFactors(V, betas, np.triu(A[:n]))


def build_q(F: HouseholderFactors, ctx: ArithmeticContext, thin: bool = True) -> np.ndarray:
    """Q = P_1 ... P_n I, applying P_n first to the identity columns."""
    m, n = F.V.shape
    Q = np.eye(m, n if thin else m)
    if n == 0:
        return Q
    K.hh_mult(np.ascontiguousarray(F.V), np.ascontiguousarray(F.beta), Q, _key(ctx), True)
    return ctx.check(Q, "build_q")


def hh_mult(F: HouseholderFactors, B, ctx: ArithmeticContext) -> np.ndarray:
    """P_1 ... P_n B for a general B."""
    B = np.array(B, dtype=np.float64, order="C")
    K.hh_mult(np.ascontiguousarray(F.V), np.ascontiguousarray(F.beta), B, _key(ctx), False)
    return ctx.check(B, "hh_mult")


def build_wy(V, beta, ctx: ArithmeticContext) -> WYRep:
    """W with I - W V^T = P_1 ... P_r, via z_j = beta_j (v_j - W (V^T v_j))."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != beta.size or beta.size == 0:
        raise ValueError("V must be m x r with r matching beta")
    W = K.build_wy(V, beta, _key(ctx))
    return WYRep(ctx.check(W, "build_wy"), V)


def panels(n: int, r: int) -> list[tuple[int, int]]:
    """Column ranges of width r; the last one is narrower when r does not divide n."""
    return [(c, min(n, c + r)) for c in range(0, n, r)]


def _wy_update(X, Y, C, ctx):
    # C - X (Y^T C), each product under ctx, subtraction rounded
    T = ctx.matmul(Y.T, C)
    return ctx.round(C - ctx.matmul(X, T), where="wy update")


def bqr(A, r: int, ctx: ArithmeticContext, return_factors: bool = False):
    """Blocked HQR with panels of width r; returns (Q, R)."""
    A = _prep(A, ctx)
    m, n = A.shape
    if m < n:
        raise ValueError(f"bqr needs m >= n, got {A.shape}")
    if not 1 <= r <= n:
        raise ValueError(f"block width must satisfy 1 <= r <= n, got {r}")
    reps = []
    for c0, c1 in panels(n, r):
        P = np.ascontiguousarray(A[c0:, c0:c1])
        V, betas = _hqr_inplace(P, ctx, c0)
        A[c0:, c0:c1] = P
        wy = build_wy(V, betas, ctx)
        if c1 < n:
            A[c0:, c1:] = _wy_update(wy.Y, wy.W, np.ascontiguousarray(A[c0:, c1:]), ctx)
        reps.append(wy)
    R = np.triu(A[:n])
    Q = np.eye(m, n)
    for (c0, _), wy in zip(reversed(panels(n, r)), reversed(reps)):
        Q[c0:, c0:] = _wy_update(wy.W, wy.Y, np.ascontiguousarray(Q[c0:, c0:]), ctx)
    if return_factors:
        return Q, R, reps
    return Q, R


def block_rows(m: int, L: int) -> list[tuple[int, int]]:
    """Split m rows into 2^L nearly equal blocks, taller blocks first."""
    p = 2 ** L
    q, rem = divmod(m, p)
    out, start = [], 0
    for j in range(p):
        h = q + (1 if j < rem else 0)
        out.append((start, start + h))
        start += h
    return out


def check_levels(m: int, n: int, L: int) -> None:
    if not isinstance(L, (int, np.integer)) or L < 1:
        raise InvalidLevels(f"need an integer L >= 1, got {L!r}")
    if m < 2 ** L * n:
        raise InvalidLevels(f"{2 ** L} blocks of at least {n} rows need m >= {2 ** L * n}, got {m}")


def tsqr_tree(A, L: int, ctx: ArithmeticContext, qr=None) -> TsqrTree:
    """Factor pass of TSQR: leaf HQRs, then pairwise stacked R factors up L levels.

    ``qr`` overrides the per-node factorization (block, ctx) -> HouseholderFactors.
    """
    A = _prep(A, ctx)
    m, n = A.shape
    check_levels(m, n, L)
    qr = qr or hqr
    rows = block_rows(m, L)
    tree = TsqrTree(L, n, rows)
    tree.levels.append([qr(A[a:b], ctx) for a, b in rows])
    for _ in range(1, L + 1):
        prev = tree.levels[-1]
        tree.levels.append([qr(np.vstack([prev[2 * j].R, prev[2 * j + 1].R]), ctx)
                            for j in range(len(prev) // 2)])
    return tree


def tsqr_q(tree: TsqrTree, ctx: ArithmeticContext, apply=None) -> np.ndarray:
    """Rebuild Q top-down: each node's reflectors act on its share of the
    parent's Q, padded with zeros to the node's block height.

    ``apply`` overrides (factors, B, ctx) -> P_1...P_n B.
    """
    apply = apply or hh_mult
    n, L = tree.n, tree.L
    top = tree.levels[L][0]
    Qs = [apply(top, np.eye(top.V.shape[0], n), ctx)]
    for i in range(L - 1, -1, -1):
        nxt = []
        for j, F in enumerate(tree.levels[i], start=1):
            parent = Qs[alpha(j) - 1]
            h = phi(j)
            B = np.zeros((F.V.shape[0], n))
            B[:n] = parent[(h - 1) * n:h * n]
            nxt.append(apply(F, B, ctx))
        Qs = nxt
    return np.vstack(Qs)


def tsqr(A, L: int, ctx: ArithmeticContext, return_tree: bool = False):
    """Tall-and-skinny QR over a binary tree with L levels; returns (Q, R)."""
    tree = tsqr_tree(A, L, ctx)
    Q = tsqr_q(tree, ctx)
    if return_tree:
        return Q, tree.R, tree
    return Q, tree.R
