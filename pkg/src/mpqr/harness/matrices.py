"""Random test matrices stored in a simulated format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mpqr.floatsim import FP16, FpFormat, get_format, round_array

KINDS = ("gaussian", "uniform01", "logspaced", "conditioned")
_ALIASES = {
    "gaussianstd": "gaussian",
    "normal": "gaussian",
    "uniform": "uniform01",
    "logspacedsv": "logspaced",
}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """PCG64 stream for one trial, split off the master seed by trial index."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


def canonical_kind(kind: str) -> str:
    k = kind.lower().replace("_", "").replace("-", "")
    k = _ALIASES.get(k, k)
    if k not in KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}; expected one of {KINDS}")
    return k


@dataclass(frozen=True)
class MatrixSpec:
    kind: str
    m: int
    n: int
    seed: int = 0
    trial: int = 0
    alpha: float | None = None
    storage: FpFormat = FP16
    smin: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        object.__setattr__(self, "storage", get_format(self.storage))
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.kind in ("logspaced", "conditioned") and self.m < self.n:
            raise ValueError(f"{self.kind} matrices need m >= n")
        if self.kind == "logspaced" and self.n < 2:
            raise ValueError("logspaced singular values need n >= 2")
        if self.kind == "conditioned" and (self.alpha is None or self.alpha < 0):
            raise ValueError("conditioned matrices need alpha >= 0")


def _orth(rng, m, n):
    q, r = np.linalg.qr(rng.standard_normal((m, n)))
    return q * np.sign(np.diag(r))


def exact_matrix(spec: MatrixSpec) -> np.ndarray:
    """The fp64 matrix before it is rounded to the storage format."""
    rng = trial_rng(spec.seed, spec.trial)
    m, n = spec.m, spec.n
    if spec.kind == "gaussian":
        return rng.standard_normal((m, n))
    if spec.kind == "uniform01":
        return rng.random((m, n))
    if spec.kind == "logspaced":
        s = np.logspace(0.0, np.log10(spec.smin), n)
        return (_orth(rng, m, n) * s) @ _orth(rng, n, n).T
    # Q' (alpha * ones + I), normalised in the Frobenius norm; cond = n alpha + 1
    Qp, _ = np.linalg.qr(rng.random((m, n)))
    A = Qp @ (spec.alpha * np.ones((n, n)) + np.eye(n))
    return A / np.linalg.norm(A)


def gen_matrix(spec: MatrixSpec) -> np.ndarray:
    """Sample the matrix and round it to ``spec.storage``."""
    return round_array(exact_matrix(spec), spec.storage, where="matrix generation")
