"""Compiled inner loops for simulated floating-point arithmetic.

Every value lives in a float64 carrier.  A target format is described by the
integer triple ``(t, emin, emax)`` (significand bits incl. the hidden bit,
IEEE exponent range of normalised numbers).  Arithmetic contexts are passed
to the kernels as a flat integer tuple::

    key = (mode, wt, wemin, wemax, ht, hemin, hemax, saturate)

``mode`` 0 is uniform precision (everything rounded to the working format
``w``), mode 1 is the mixed inner product: products exact, accumulation
rounded to ``h`` and a single castdown to ``w``.

All loops are strictly sequential, so results are bitwise reproducible.
"""

import math

import numpy as np
from numba import njit

UNIFORM = 0
MIXED_INNER = 1

OK = 0
ZERO_VECTOR = 1


@njit(cache=True, inline="always")
def _overflow(x, t, emax, sat):
    if sat:
        return math.copysign(math.ldexp(2.0 - math.ldexp(1.0, 1 - t), emax), x)
    return math.copysign(math.inf, x)


@njit(cache=True, inline="always")
def rnd(x, t, emin, emax, sat):
    """Round a float64 to the nearest value of format (t, emin, emax), ties to even."""
    if t == 53:
        return x
    bits = np.float64(x).view(np.int64)
    be = (bits >> 52) & 0x7FF
    if be == 0x7FF or x == 0.0:
        return x
    e = be - 1023
    if e > emax:
        return _overflow(x, t, emax, sat)
    if e < emin:
        e = emin
    # adding 1.5 * 2**(q + 52) pins the quantum of the sum to 2**q
    cexp = np.int64(1023 + e - t + 1 + 52)
    c = np.int64((cexp << 52) | (np.int64(1) << 51)).view(np.float64)
    r = (x + c) - c
    # rounding up out of the top binade lands exactly on 2**(emax + 1)
    if ((np.float64(r).view(np.int64) >> 52) & 0x7FF) - 1023 > emax:
        return _overflow(x, t, emax, sat)
    return r


@njit(cache=True, inline="always")
def rw(x, key):
    return rnd(x, key[1], key[2], key[3], key[7])


@njit(cache=True, inline="always")
def rh(x, key):
    return rnd(x, key[4], key[5], key[6], key[7])


@njit(cache=True)
def round_array(x, t, emin, emax, sat):
    flat = x.ravel()
    out = np.empty_like(flat)
    for i in range(flat.size):
        out[i] = rnd(flat[i], t, emin, emax, sat)
    return out.reshape(x.shape)


@njit(cache=True)
def dot(x, y, key):
    n = x.size
    if key[0] == MIXED_INNER:
        s = x[0] * y[0]
        for k in range(1, n):
            s = rh(s + x[k] * y[k], key)
        return rw(s, key)
    s = rw(x[0] * y[0], key)
    for k in range(1, n):
        s = rw(s + rw(x[k] * y[k], key), key)
    return s


@njit(cache=True)
def dot_rows(X, Y, key):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = dot(X[i], Y[i], key)
    return out


@njit(cache=True)
def _col_dots(v, B, key, out):
    # out[j] = dot(v, B[:, j]) for every column, row-major sweep
    m, n = B.shape
    if key[0] == MIXED_INNER:
        for j in range(n):
            out[j] = v[0] * B[0, j]
        for k in range(1, m):
            vk = v[k]
            for j in range(n):
                out[j] = rh(out[j] + vk * B[k, j], key)
        for j in range(n):
            out[j] = rw(out[j], key)
    else:
        for j in range(n):
            out[j] = rw(v[0] * B[0, j], key)
        for k in range(1, m):
            vk = v[k]
            for j in range(n):
                out[j] = rw(out[j] + rw(vk * B[k, j], key), key)


@njit(cache=True)
def hhvec(x, key):
    """Householder vector with v[0] = 1; returns (beta, v, sigma, status)."""
    m = x.size
    v = x.copy()
    nrm2 = dot(x, x, key)
    nrm = rw(math.sqrt(nrm2), key)
    if nrm == 0.0:
        return 0.0, v, 0.0, ZERO_VECTOR
    if x[0] >= 0.0:
        sigma = -nrm
    else:
        sigma = nrm
    v1 = rw(x[0] - sigma, key)
    beta = rw(-v1 / sigma, key)
    v[0] = 1.0
    for k in range(1, m):
        v[k] = rw(x[k] / v1, key)
    return beta, v, sigma, OK


@njit(cache=True)
def apply_hh(v, beta, B, key):
    """In place: B <- B - (beta v^T B) v, one rank-1 update per column."""
    m, n = B.shape
    if n == 0 or m == 0:
        return
    w = np.empty(n)
    _col_dots(v, B, key, w)
    for j in range(n):
        w[j] = rw(beta * w[j], key)
    for k in range(m):
        vk = v[k]
        for j in range(n):
            B[k, j] = rw(B[k, j] - rw(w[j] * vk, key), key)


@njit(cache=True)
def hqr(A, key):
    """Level-2 Householder QR, in place on A.  Returns (V, beta, status, col)."""
    m, n = A.shape
    V = np.zeros((m, n))
    betas = np.zeros(n)
    for i in range(n):
        x = A[i:, i].copy()
        beta, v, sigma, status = hhvec(x, key)
        if status != OK:
            return V, betas, status, i
        V[i:, i] = v
        betas[i] = beta
        A[i, i] = sigma
        for k in range(i + 1, m):
            A[k, i] = 0.0
        if i + 1 < n:
            apply_hh(v, beta, A[i:, i + 1:], key)
    return V, betas, OK, -1


@njit(cache=True)
def hh_mult(V, betas, B, key, skip):
    """In place: B <- P_1 ... P_r B, applying P_r first.

    With ``skip`` the columns left of the reflector index are assumed to be
    identity columns, which P_i leaves untouched (used to form Q from I).
    """
    r = betas.size
    for i in range(r - 1, -1, -1):
        start = i if skip else 0
        apply_hh(V[i:, i], betas[i], B[i:, start:], key)


@njit(cache=True)
def matmul(X, Y, key):
    """Every entry is an inner product evaluated under the context."""
    m, p = X.shape
    n = Y.shape[1]
    Z = np.zeros((m, n))
    if p == 0:
        return Z
    acc = np.empty(n)
    for i in range(m):
        if key[0] == MIXED_INNER:
            x0 = X[i, 0]
            for j in range(n):
                acc[j] = x0 * Y[0, j]
            for k in range(1, p):
                xk = X[i, k]
                for j in range(n):
                    acc[j] = rh(acc[j] + xk * Y[k, j], key)
            for j in range(n):
                Z[i, j] = rw(acc[j], key)
        else:
            x0 = X[i, 0]
            for j in range(n):
                acc[j] = rw(x0 * Y[0, j], key)
            for k in range(1, p):
                xk = X[i, k]
                for j in range(n):
                    acc[j] = rw(acc[j] + rw(xk * Y[k, j], key), key)
            for j in range(n):
                Z[i, j] = acc[j]
    return Z


@njit(cache=True)
def build_wy(V, betas, key):
    m, r = V.shape
    W = np.zeros((m, r))
    for k in range(m):
        W[k, 0] = rw(betas[0] * V[k, 0], key)
    t = np.empty(r)
    for j in range(1, r):
        vj = V[:, j].copy()
        for i in range(j):
            t[i] = dot(V[:, i].copy(), vj, key)
        for k in range(m):
            u = dot(W[k, :j].copy(), t[:j].copy(), key)
            W[k, j] = rw(betas[j] * rw(vj[k] - u, key), key)
    return W


@njit(cache=True)
def bfma4(A, B, C, ht, hemin, hemax, sat, rprod):
    """One 4x4 block FMA: D = C + A B, exact products, high-precision adds.

    Each output starts from C and adds the four products in ascending k.
    ``rprod`` rounds each product to high first (degenerate pairs only).
    """
    D = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            s = C[i, j]
            for k in range(4):
                prod = A[i, k] * B[k, j]
                if rprod:
                    prod = rnd(prod, ht, hemin, hemax, sat)
                s = rnd(s + prod, ht, hemin, hemax, sat)
            D[i, j] = s
    return D


@njit(cache=True)
def bfma_gemm(X, Y, lt, lemin, lemax, ht, hemin, hemax, sat, castdown, rprod):
    """Chained 4x4 block FMAs over zero-padded operands.

    Chaining blocks with C-first accumulation is the same as one sequential
    high-precision sum over k, which is what the loop below computes.
    """
    m, p = X.shape
    n = Y.shape[1]
    Z = np.zeros((m, n))
    acc = np.empty(n)
    for i in range(m):
        for j in range(n):
            acc[j] = 0.0
        for k in range(p):
            xk = X[i, k]
            for j in range(n):
                prod = xk * Y[k, j]
                if rprod:
                    prod = rnd(prod, ht, hemin, hemax, sat)
                acc[j] = rnd(acc[j] + prod, ht, hemin, hemax, sat)
        for j in range(n):
            if castdown:
                Z[i, j] = rnd(acc[j], lt, lemin, lemax, sat)
            else:
                Z[i, j] = acc[j]
    return Z
