"""Backward error and loss of orthogonality, measured in fp64."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from mpqr.bounds import BoundSpec, measurable_bounds

CSV_COLUMNS = ("alg", "regime", "m", "n", "r", "L", "alpha", "seed",
               "backward", "orth", "boundBackward", "boundOrth", "overflows")


@dataclass
class ErrorReport:
    alg: str
    regime: str
    m: int
    n: int
    r: int | None = None
    L: int | None = None
    alpha: float | None = None
    seed: int | None = None
    backward: float = math.nan
    orth: float = math.nan
    boundBackward: float = math.inf
    boundOrth: float = math.inf
    overflows: int = 0

    @property
    def within_bounds(self) -> bool:
        """True unless a bound below 1 is violated."""
        ok = True
        if self.boundBackward < 1:
            ok &= self.backward <= self.boundBackward
        if self.boundOrth < 1:
            ok &= self.orth <= self.boundOrth
        return bool(ok)

    def csv_row(self) -> str:
        return ",".join(_fmt(getattr(self, c)) for c in CSV_COLUMNS)

    @classmethod
    def from_csv(cls, line: str) -> "ErrorReport":
        vals = line.strip().split(",")
        out = {}
        for f, v in zip(fields(cls), vals):
            if f.name in ("alg", "regime"):
                out[f.name] = v
            elif v == "":
                out[f.name] = None
            elif f.name in ("m", "n", "r", "L", "seed", "overflows"):
                out[f.name] = int(v)
            else:
                out[f.name] = float(v)
        return cls(**out)

    def as_dict(self):
        return asdict(self)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def backward_error(A, Q, R) -> float:
    A = np.asarray(A, dtype=np.float64)
    nA = np.linalg.norm(A)
    d = np.linalg.norm(A - np.asarray(Q, dtype=np.float64) @ np.asarray(R, dtype=np.float64))
    return float(d / nA) if nA > 0 else float(d)


def orthogonality(Q) -> float:
    Q = np.asarray(Q, dtype=np.float64)
    return float(np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1]), 2))


def measure(A, Q, R, bound: BoundSpec | None = None, **meta) -> ErrorReport:
    """Errors of computed factors plus the matching bounds (inf when unknown)."""
    A = np.asarray(A, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if Q.shape[0] != A.shape[0] or Q.shape[1] != R.shape[0] or R.shape[1] != A.shape[1]:
        raise ValueError(f"shapes {A.shape}, {Q.shape}, {R.shape} do not conform")
    m, n = A.shape
    bb, bo = measurable_bounds(bound) if bound is not None else (math.inf, math.inf)
    meta.setdefault("alg", bound.algorithm if bound else "")
    meta.setdefault("regime", bound.regime if bound else "")
    if bound is not None:
        meta.setdefault("r", bound.r)
        meta.setdefault("L", bound.L)
    return ErrorReport(m=m, n=n, backward=backward_error(A, Q, R), orth=orthogonality(Q),
                       boundBackward=bb, boundOrth=bo, **meta)
