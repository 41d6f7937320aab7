"""Software emulation of low- and mixed-precision floating-point arithmetic.

Values are carried in float64 arrays and rounded to a target format after
every simulated operation (the "compute wide, round down" scheme used to
emulate fp16 on hardware without native half arithmetic).  For formats with
at most 25 significand bits the float64 carrier holds the correctly rounded
result of any single +, -, *, / or sqrt, so the second rounding is
innocuous and each simulated operation is correctly rounded.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

import numpy as np

from mpqr import _kernels as K
from mpqr.errors import Overflow

OVERFLOW_POLICIES = ("signal", "saturate")

# carrier double rounding is harmless for +,-,*,/,sqrt when 53 >= 2t + 2
_MAX_EMULATED_T = 25


@dataclass(frozen=True)
class FpFormat:
    """Binary floating-point format.

    ``t`` counts significand bits including the hidden bit, ``emin``/``emax``
    are the IEEE exponents of the smallest and largest normalised binades,
    so a normal number is ``m * 2**e`` with ``1 <= m < 2`` and
    ``emin <= e <= emax``.  Subnormals follow IEEE gradual underflow.
    """

    name: str
    t: int
    emin: int
    emax: int
    base: int = 2

    def __post_init__(self):
        if self.base != 2:
            raise ValueError("only binary formats are supported")
        if self.t == 53:
            if (self.emin, self.emax) != (-1022, 1023):
                raise ValueError("t=53 is only available as IEEE double")
        elif not 2 <= self.t <= 51:
            raise ValueError(f"significand bits must be in [2, 51] or 53, got {self.t}")
        elif not (-1000 <= self.emin < 0 < self.emax <= 1000):
            raise ValueError("exponent range must satisfy -1000 <= emin < 0 < emax <= 1000")

    @property
    def u(self) -> float:
        """Unit round-off, half the spacing of numbers just above 1."""
        return 0.5 * 2.0 ** (1 - self.t)

    @property
    def eps(self) -> float:
        return 2.0 ** (1 - self.t)

    @property
    def max_finite(self) -> float:
        return math.ldexp(2.0 - 2.0 ** (1 - self.t), self.emax)

    @property
    def min_normal(self) -> float:
        return 2.0 ** self.emin

    @property
    def min_subnormal(self) -> float:
        return 2.0 ** (self.emin - self.t + 1)

    @property
    def emulable(self) -> bool:
        """True when arithmetic in this format is faithfully emulated."""
        return self.t <= _MAX_EMULATED_T or self.t == 53

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.t, self.emin, self.emax)

    def __str__(self):
        return self.name


FP16 = FpFormat("fp16", 11, -14, 15)
FP32 = FpFormat("fp32", 24, -126, 127)
FP64 = FpFormat("fp64", 53, -1022, 1023)

FORMATS = {f.name: f for f in (FP16, FP32, FP64)}


def get_format(name) -> FpFormat:
    if isinstance(name, FpFormat):
        return name
    try:
        return FORMATS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; expected one of {sorted(FORMATS)}") from None


@dataclass(frozen=True)
class PrecisionPair:
    """A (low, high) precision pair with u_low > u_high.

    ``allow_equal`` admits the degenerate pair (q, q), which is only useful
    for checking that a mixed algorithm collapses onto its uniform parent.
    """

    low: FpFormat
    high: FpFormat
    allow_equal: bool = False

    def __post_init__(self):
        if self.low == self.high:
            if not self.allow_equal:
                raise ValueError("low and high precision must differ")
        elif not self.low.u > self.high.u:
            raise ValueError(f"{self.low} is not lower precision than {self.high}")

    @property
    def ratio(self) -> float:
        """M = u_low / u_high."""
        return self.low.u / self.high.u

    @property
    def products_exact(self) -> bool:
        """Whether every product of two low values is a high value."""
        lo, hi = self.low, self.high
        if 2 * lo.t > hi.t:
            return False
        # largest product must not overflow, smallest must stay on the high grid
        if 2 * (lo.emax + 1) > hi.emax:
            return False
        return 2 * (lo.emin - lo.t + 1) >= hi.emin - hi.t + 1

    @property
    def degenerate(self) -> bool:
        return self.low == self.high


FP16_FP32 = PrecisionPair(FP16, FP32)


def _check_policy(overflow):
    if overflow not in OVERFLOW_POLICIES:
        raise ValueError(f"overflow policy must be one of {OVERFLOW_POLICIES}")


def round_array(x, fmt: FpFormat, overflow: str = "signal", where: str | None = None) -> np.ndarray:
    """Round every entry of ``x`` to ``fmt`` (ties to even)."""
    _check_policy(overflow)
    a = np.ascontiguousarray(x, dtype=np.float64)
    if np.isnan(a).any():
        raise ValueError("cannot round NaN")
    if fmt.t == 53:
        return a.copy()
    out = K.round_array(a, fmt.t, fmt.emin, fmt.emax, overflow == "saturate")
    if overflow == "signal":
        bad = np.isinf(out) & np.isfinite(a)
        if bad.any():
            raise Overflow(fmt, value=float(a[bad].flat[0]), where=where)
    return out


castdown = round_array


def is_representable(x, fmt: FpFormat) -> np.ndarray:
    """Elementwise membership test by round-trip rounding."""
    a = np.asarray(x, dtype=np.float64)
    if fmt.t == 53:
        return ~np.isnan(a)
    r = K.round_array(np.ascontiguousarray(a), fmt.t, fmt.emin, fmt.emax, False)
    return (r == a) | np.isinf(a)


def require_representable(x, fmt: FpFormat, what: str = "input"):
    ok = is_representable(x, fmt)
    if not np.all(ok):
        bad = np.asarray(x, dtype=np.float64)[~ok].flat[0]
        raise ValueError(f"{what} holds {bad!r}, which is not a {fmt.name} value")


def castup(x, fmt: FpFormat) -> np.ndarray:
    """Exact conversion of values already representable in a narrower format."""
    a = np.array(x, dtype=np.float64)
    require_representable(a, fmt, "castup operand")
    return a


@dataclass(frozen=True)
class SimValue:
    """A scalar asserted to be a member of ``format``."""

    carrier: float
    format: FpFormat

    def __post_init__(self):
        c = float(self.carrier)
        object.__setattr__(self, "carrier", c)
        if math.isfinite(c) and not is_representable(c, self.format):
            raise ValueError(f"{c!r} is not a {self.format.name} value")

    def __float__(self):
        return self.carrier

    def __repr__(self):
        return f"SimValue({self.carrier!r}, {self.format.name})"


def round_to_format(x: float, fmt: FpFormat, overflow: str = "signal") -> SimValue:
    """Correctly rounded conversion of a finite real to ``fmt``."""
    x = float(x)
    if math.isnan(x):
        raise ValueError("cannot round NaN")
    if math.isinf(x):
        raise ValueError("round_to_format expects a finite value")
    return SimValue(float(round_array(np.array([x]), fmt, overflow)[0]), fmt)


_OPS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}
_OPS.update({"add": operator.add, "sub": operator.sub, "mul": operator.mul, "div": operator.truediv,
             "×": operator.mul, "÷": operator.truediv, "−": operator.sub})


def _value(x, fmt):
    if isinstance(x, SimValue):
        v = x.carrier
    else:
        v = float(x)
    if math.isfinite(v) and not is_representable(v, fmt):
        raise ValueError(f"operand {v!r} is not a {fmt.name} value")
    return v


def _require_emulable(fmt):
    if not fmt.emulable:
        raise ValueError(
            f"{fmt.name}: arithmetic is only emulated for t <= {_MAX_EMULATED_T} or IEEE double"
        )


def sim_op(op, x, y, fmt: FpFormat, overflow: str = "signal") -> SimValue:
    """One correctly rounded operation ``x op y`` in ``fmt``."""
    _require_emulable(fmt)
    f = _OPS[op] if isinstance(op, str) else op
    a, b = _value(x, fmt), _value(y, fmt)
    if f is operator.truediv and b == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            return SimValue(float(np.float64(a) / np.float64(b)), fmt)
    exact = f(a, b)
    return SimValue(float(round_array(np.array([exact]), fmt, overflow, where=f"sim_op {op}")[0]), fmt)


def _vec(x, fmt, what):
    a = np.ascontiguousarray([float(v) for v in x] if not isinstance(x, np.ndarray) else x,
                             dtype=np.float64).ravel()
    require_representable(a, fmt, what)
    return a


def _finite_or_raise(value, fmt, overflow, where):
    if overflow == "signal" and not np.all(np.isfinite(value)):
        raise Overflow(fmt, where=where)


def dot_uniform(x, y, fmt: FpFormat, overflow: str = "signal") -> SimValue:
    """Left-to-right inner product with every product and sum rounded to ``fmt``."""
    _check_policy(overflow)
    _require_emulable(fmt)
    a, b = _vec(x, fmt, "x"), _vec(y, fmt, "y")
    if a.size != b.size or a.size == 0:
        raise ValueError("dot needs two non-empty vectors of equal length")
    ctx = ArithmeticContext.uniform(fmt, overflow)
    s = K.dot(a, b, ctx.key)
    _finite_or_raise(s, fmt, overflow, "dot_uniform")
    return SimValue(s, fmt)


def dot_mixed(x, y, pair: PrecisionPair, overflow: str = "signal") -> SimValue:
    """Inner product with exact products, high-precision sums, one castdown."""
    _check_policy(overflow)
    ctx = ArithmeticContext.mixed_inner(pair, overflow)
    a, b = _vec(x, pair.low, "x"), _vec(y, pair.low, "y")
    if a.size != b.size or a.size == 0:
        raise ValueError("dot needs two non-empty vectors of equal length")
    s = K.dot(a, b, ctx.key)
    _finite_or_raise(s, pair.low, overflow, "dot_mixed castdown")
    return SimValue(s, pair.low)


def dot_batch(X, Y, ctx: "ArithmeticContext") -> np.ndarray:
    """Row-wise inner products ``X[i] . Y[i]`` under ``ctx`` (no membership checks)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    return K.dot_rows(X, Y, ctx.key)


def _check_bfma_pair(pair):
    if not (pair.degenerate or pair.products_exact):
        raise ValueError(f"products of {pair.low} values are not exact in {pair.high}")
    _require_emulable(pair.low)
    _require_emulable(pair.high)


def bfma_4x4(A, B, C, pair: PrecisionPair = FP16_FP32, overflow: str = "signal") -> np.ndarray:
    """Block FMA ``C + A B`` on 4x4 tiles; result stays in ``pair.high``."""
    _check_policy(overflow)
    _check_bfma_pair(pair)
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    if A.shape != (4, 4) or B.shape != (4, 4) or C.shape != (4, 4):
        raise ValueError("bfma_4x4 works on 4x4 tiles")
    require_representable(A, pair.low, "A")
    require_representable(B, pair.low, "B")
    require_representable(C, pair.high, "C")
    hi = pair.high
    D = K.bfma4(A, B, C, hi.t, hi.emin, hi.emax, overflow == "saturate", pair.degenerate)
    _finite_or_raise(D, hi, overflow, "bfma_4x4")
    return D


def bfma_gemm(X, Y, pair: PrecisionPair = FP16_FP32, overflow: str = "signal",
              castdown: bool = True, check: bool = True) -> np.ndarray:
    """Matrix product through chained 4x4 block FMAs.

    Operands are zero padded to multiples of 4 (padding contributes exact
    zeros, so it is not materialised), each output tile accumulates over the
    k-blocks in ascending order in ``pair.high`` and is cast down once.
    For a degenerate pair (q, q) products cannot be exact and are rounded
    to q, which makes the result match a uniform-q matrix product.
    """
    _check_policy(overflow)
    _check_bfma_pair(pair)
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[0]:
        raise ValueError(f"shapes {X.shape} and {Y.shape} do not conform")
    if check:
        require_representable(X, pair.low, "X")
        require_representable(Y, pair.low, "Y")
    lo, hi = pair.low, pair.high
    Z = K.bfma_gemm(X, Y, lo.t, lo.emin, lo.emax, hi.t, hi.emin, hi.emax,
                    overflow == "saturate", castdown, pair.degenerate)
    _finite_or_raise(Z, lo if castdown else hi, overflow, "bfma_gemm")
    return Z


def bfma_gemm_tiled(X, Y, pair: PrecisionPair = FP16_FP32, overflow: str = "signal") -> np.ndarray:
    """Reference path: explicit padding and a chain of :func:`bfma_4x4` calls."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    m, p = X.shape
    n = Y.shape[1]
    pad = lambda k: -(-k // 4) * 4  # noqa: E731
    Xp = np.zeros((pad(m), pad(p)))
    Yp = np.zeros((pad(p), pad(n)))
    Xp[:m, :p] = X
    Yp[:p, :n] = Y
    Z = np.zeros((pad(m), pad(n)))
    for i in range(0, pad(m), 4):
        for j in range(0, pad(n), 4):
            D = np.zeros((4, 4))
            for k in range(0, pad(p), 4):
                D = bfma_4x4(Xp[i:i + 4, k:k + 4], Yp[k:k + 4, j:j + 4], D, pair, overflow)
            Z[i:i + 4, j:j + 4] = D
    return round_array(Z[:m, :n], pair.low, overflow, where="bfma castdown")


class ArithmeticContext:
    """The arithmetic regime every FLOP of an algorithm runs under.

    * ``uniform(fmt)``: every operation rounded to ``fmt``.
    * ``mixed_inner(pair)``: inner products take low inputs, form products
      exactly, sum in high and cast down once; all other FLOPs in low.
    * ``block_fma(pair)``: matrix products go through :func:`bfma_gemm`;
      level-1/2 work runs in uniform high precision.
    """

    def __init__(self, mode: str, fmt: FpFormat | None = None, pair: PrecisionPair | None = None,
                 overflow: str = "signal"):
        _check_policy(overflow)
        if mode == "uniform":
            if fmt is None:
                raise ValueError("uniform context needs a format")
            _require_emulable(fmt)
        elif mode in ("mixed_inner", "block_fma"):
            if pair is None:
                raise ValueError(f"{mode} context needs a precision pair")
            if pair.degenerate and mode == "mixed_inner":
                raise ValueError("mixed inner products need two distinct precisions")
            _check_bfma_pair(pair)
        else:
            raise ValueError(f"unknown arithmetic mode {mode!r}")
        self.mode = mode
        self.fmt = fmt
        self.pair = pair
        self.overflow = overflow

    @classmethod
    def uniform(cls, fmt, overflow="signal"):
        return cls("uniform", fmt=get_format(fmt), overflow=overflow)

    @classmethod
    def mixed_inner(cls, pair, overflow="signal"):
        return cls("mixed_inner", pair=pair, overflow=overflow)

    @classmethod
    def block_fma(cls, pair, overflow="signal"):
        return cls("block_fma", pair=pair, overflow=overflow)

    @property
    def storage(self) -> FpFormat:
        """Format that inputs and outputs are stored in."""
        return self.fmt if self.mode == "uniform" else self.pair.low

    @property
    def working(self) -> FpFormat:
        """Format of the level-1/2 operations."""
        if self.mode == "uniform":
            return self.fmt
        if self.mode == "mixed_inner":
            return self.pair.low
        return self.pair.high

    @property
    def key(self) -> tuple:
        sat = int(self.overflow == "saturate")
        w = self.working
        if self.mode == "mixed_inner":
            h = self.pair.high
            return (K.MIXED_INNER, *w.key, *h.key, sat)
        return (K.UNIFORM, *w.key, *w.key, sat)

    def level2(self) -> "ArithmeticContext":
        """Context for the non-GEMM operations."""
        if self.mode == "block_fma":
            return ArithmeticContext.uniform(self.pair.high, self.overflow)
        return self

    def round(self, x, where=None):
        return round_array(x, self.working, self.overflow, where=where)

    def check(self, x, where):
        if self.overflow == "signal" and not np.all(np.isfinite(x)):
            raise Overflow(self.working, where=where)
        return x

    def matmul(self, X, Y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        if self.mode == "block_fma":
            return bfma_gemm(X, Y, self.pair, self.overflow, check=False)
        return self.check(K.matmul(X, Y, self.key), "matmul")

    def __repr__(self):
        if self.mode == "uniform":
            return f"ArithmeticContext.uniform({self.fmt.name})"
        return f"ArithmeticContext.{self.mode}({self.pair.low.name}/{self.pair.high.name})"

    def __eq__(self, other):
        return isinstance(other, ArithmeticContext) and (
            self.mode, self.fmt, self.pair, self.overflow) == (other.mode, other.fmt, other.pair, other.overflow)

    def __hash__(self):
        return hash((self.mode, self.fmt, self.pair, self.overflow))
