"""Deterministic rounding-error bounds for the QR variants.

The basic quantity is ``gamma_k = c k u / (1 - c k u)``, the bound on the
relative error accumulated by k rounded operations.  Each algorithm and
arithmetic regime has a columnwise coefficient ``eps`` such that
``||dR[:, j]|| <= eps ||A[:, j]||`` and ``||dQ[:, j]|| <= eps``; the
Frobenius bound on ``dQ`` is ``sqrt(n) * eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mpqr.errors import DomainError
from mpqr.floatsim import FP16, FP32, FpFormat, get_format

ALGORITHMS = ("hqr", "bqr", "tsqr")
REGIMES = ("uniform", "mixed2", "mixed3", "high_castdown")


def _u(u) -> float:
    return u.u if isinstance(u, FpFormat) else float(u)


def gamma(k, u, c=1) -> float:
    """ku/(1-ku) with the constant c folded into k; raises DomainError if cku >= 1."""
    ku = c * k * _u(u)
    if k < 0 or c <= 0:
        raise DomainError(f"gamma needs k >= 0 and c > 0, got k={k}, c={c}")
    if ku >= 1:
        raise DomainError(f"gamma undefined: c*k*u = {ku:.3g} >= 1")
    return ku / (1 - ku)


@dataclass(frozen=True)
class GammaTerm:
    """gamma_k in a given precision; ``stable`` is False once cku >= 1/2."""

    k: float
    u: float
    c: float = 1

    def __post_init__(self):
        object.__setattr__(self, "u", _u(self.u))
        gamma(self.k, self.u, self.c)

    @property
    def value(self) -> float:
        return gamma(self.k, self.u, self.c)

    @property
    def stable(self) -> bool:
        return self.c * self.k * self.u < 0.5


@dataclass(frozen=True)
class GammaSum:
    """Accumulated relative error prod(1 + gamma_i) - 1 over several precisions.

    ``terms`` maps (u, c) to the op count in that precision.  ``value`` keeps
    the cross terms, ``first_order`` is the usual sum-of-gammas shorthand.
    """

    terms: dict = field(default_factory=dict)

    @property
    def gammas(self) -> list[GammaTerm]:
        return [GammaTerm(k, u, c) for (u, c), k in sorted(self.terms.items())]

    @property
    def value(self) -> float:
        p = 1.0
        for g in self.gammas:
            p *= 1.0 + g.value
        return p - 1.0

    @property
    def first_order(self) -> float:
        return sum(g.value for g in self.gammas)

    @property
    def stable(self) -> bool:
        return all(g.stable for g in self.gammas)


def _as_sum(x) -> GammaSum:
    if isinstance(x, GammaSum):
        return x
    return GammaSum({(x.u, x.c): x.k})


def gamma_combine(a, b):
    """Bound for (1 + theta_a)(1 + theta_b) - 1.

    Same precision: gamma_j, gamma_k merge into gamma_{j+k}.  Different
    precisions stay as separate terms of a :class:`GammaSum`.
    """
    for g in (a, b):
        if not g.stable:
            raise DomainError("cannot combine an unstable gamma term")
    terms = dict(_as_sum(a).terms)
    for key, k in _as_sum(b).terms.items():
        terms[key] = terms.get(key, 0) + k
    terms = {key: k for key, k in terms.items() if k > 0} or {next(iter(terms)): 0}
    out = GammaSum(terms)
    if not out.stable:
        raise DomainError("combined gamma term is unstable")
    if len(terms) == 1:
        (u, c), k = next(iter(terms.items()))
        return GammaTerm(k, u, c)
    return out


@dataclass(frozen=True)
class BoundSpec:
    """Which bound to evaluate: algorithm x regime, shape and precisions.

    ``prec`` is the single format for the uniform regime; ``low``/``high``
    describe the pair for the mixed regimes.
    """

    algorithm: str
    regime: str
    m: int
    n: int
    r: int | None = None
    L: int | None = None
    prec: FpFormat | None = None
    low: FpFormat = FP16
    high: FpFormat = FP32
    c: float = 1

    def __post_init__(self):
        alg, reg = self.algorithm.lower(), self.regime.lower()
        object.__setattr__(self, "algorithm", alg)
        object.__setattr__(self, "regime", reg)
        if alg not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if reg not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.prec is not None:
            object.__setattr__(self, "prec", get_format(self.prec))
        object.__setattr__(self, "low", get_format(self.low))
        object.__setattr__(self, "high", get_format(self.high))
        if reg == "uniform" and self.prec is None:
            raise ValueError("uniform regime needs prec")
        if self.n < 1 or self.m < self.n:
            raise ValueError(f"need m >= n >= 1, got m={self.m}, n={self.n}")
        if alg == "bqr":
            if self.r is None or not 1 <= self.r <= self.n:
                raise ValueError("bqr needs 1 <= r <= n")
        if alg == "tsqr":
            if self.L is None or self.L < 1:
                raise ValueError("tsqr needs L >= 1")
            if self.m < 2 ** self.L * self.n:
                raise ValueError(f"tsqr needs m >= 2^L n = {2 ** self.L * self.n}")
        if reg == "mixed3" and alg == "hqr":
            raise ValueError("there is no block-FMA variant of level-2 HQR")

    @property
    def N(self) -> int:
        """Number of column panels for BQR."""
        return -(-self.n // self.r)

    @property
    def leaf_rows(self) -> int:
        """Rows of the tallest level-0 TSQR block, ceil(m / 2^L)."""
        return -(-self.m // 2 ** self.L)


def _uniform_coef(alg, m, n, L, u, c):
    if alg == "tsqr":
        return n * (gamma(-(-m // 2 ** L), u, c) + L * gamma(2 * n, u, c))
    return n * gamma(m, u, c)


def _coef_terms(spec: BoundSpec):
    """Columnwise coefficient and the gamma terms it is made of."""
    alg, m, n, c = spec.algorithm, spec.m, spec.n, spec.c
    ul, uh = spec.low.u, spec.high.u
    L = spec.L
    if spec.regime == "uniform":
        u = spec.prec.u
        if alg == "tsqr":
            ts = [GammaTerm(spec.leaf_rows, u, c), GammaTerm(2 * n, u, c)]
        else:
            ts = [GammaTerm(m, u, c)]
        return _uniform_coef(alg, m, n, L, u, c), ts
    if spec.regime == "high_castdown":
        ch = _uniform_coef(alg, m, n, L, uh, c)
        return ul + ch + ul * ch, [GammaTerm(m, uh, c)]
    if spec.regime == "mixed2":
        if alg == "hqr":
            ts = [GammaTerm(10 * n, ul, c), GammaTerm(m, uh, c)]
            return ts[0].value + n * ts[1].value, ts
        if alg == "bqr":
            ts = [GammaTerm(10 * spec.r, ul, c), GammaTerm(m, uh, c)]
            return spec.N * ts[0].value + n * ts[1].value, ts
        ts = [GammaTerm(10 * n, ul, c), GammaTerm(spec.leaf_rows, uh, c), GammaTerm(2 * n, uh, c)]
        return (L + 1) * ts[0].value + n * (ts[1].value + L * ts[2].value), ts
    # mixed3
    if alg == "bqr":
        ts = [GammaTerm(spec.N, ul, c), GammaTerm(m, uh, c)]
        return ts[0].value + n * ts[1].value, ts
    ts = [GammaTerm(L + 1, ul, c), GammaTerm(2 * n, uh, c), GammaTerm(spec.leaf_rows, uh, c)]
    return ts[0].value + n * (L * ts[1].value + ts[2].value), ts


def column_coefficient(spec: BoundSpec) -> float:
    """eps with ||dR[:,j]|| <= eps ||A[:,j]|| and ||dQ[:,j]|| <= eps."""
    return _coef_terms(spec)[0]


def bound_r_column(spec: BoundSpec, column_norm: float = 1.0) -> float:
    return column_coefficient(spec) * float(column_norm)


def bound_q(spec: BoundSpec) -> float:
    """Bound on ||dQ||_F."""
    return math.sqrt(spec.n) * column_coefficient(spec)


def bound_stable(spec: BoundSpec) -> bool:
    """False when some constituent gamma has cku >= 1/2."""
    return all(t.stable for t in _coef_terms(spec)[1])


def convert_to_measurables(eps_R: float, eps_Q: float, n: int) -> tuple[float, float]:
    """Forward errors to (backward error bound, orthogonality bound)."""
    if eps_R < 0 or eps_Q < 0:
        raise ValueError("error coefficients must be nonnegative")
    return math.sqrt(n) * (eps_R + eps_Q + eps_R * eps_Q), 2.0 * eps_Q


def measurable_bounds(spec: BoundSpec) -> tuple[float, float]:
    """(backward, orth) bounds for a spec; inf where a gamma is undefined."""
    try:
        eps_R = column_coefficient(spec)
        eps_Q = bound_q(spec)
    except DomainError:
        return math.inf, math.inf
    return convert_to_measurables(eps_R, eps_Q, spec.n)


def feasibility_map(scheme: str, m_values, n_values, prec=FP32, L: int | None = None,
                    c: float = 1) -> list[tuple[int, int, float]]:
    """log10 of the uniform ||dQ||_F bound over a grid of shapes.

    Cells with an illegal shape or a bound >= 1 (or undefined) are ``inf``.
    """
    scheme = scheme.lower()
    if scheme not in ("hqr", "tsqr"):
        raise ValueError("scheme must be hqr or tsqr")
    if scheme == "tsqr" and (L is None or L < 1):
        raise ValueError("tsqr scheme needs L >= 1")
    cells = []
    for m in m_values:
        for n in n_values:
            m, n = int(m), int(n)
            val = math.inf
            if n >= 1 and m >= n and (scheme == "hqr" or m >= 2 ** L * n):
                try:
                    b = bound_q(BoundSpec(scheme, "uniform", m, n, L=L, prec=prec, c=c))
                    if b < 1:
                        val = math.log10(b) if b > 0 else -math.inf
                except DomainError:
                    pass
            cells.append((m, n, val))
    return cells


def write_grid(cells, path) -> None:
    """Plain-text grid: header ``m n value``, one cell per line."""
    with open(path, "w") as fh:
        fh.write("m n value\n")
        for m, n, v in cells:
            fh.write(f"{m} {n} {'inf' if math.isinf(v) else repr(float(v))}\n")


def read_grid(path) -> list[tuple[int, int, float]]:
    rows = np.loadtxt(path, skiprows=1, ndmin=2)
    return [(int(a), int(b), float(v)) for a, b, v in rows]
