"""Test-matrix generators, error measurement and the experiment drivers."""

from mpqr.harness.experiments import (
    run_block_sweep,
    run_condition_sweep,
    run_dot_experiment,
    run_size_sweep,
)
from mpqr.harness.matrices import MatrixSpec, gen_matrix, trial_rng
from mpqr.harness.measure import ErrorReport, measure

__all__ = [
    "ErrorReport",
    "MatrixSpec",
    "gen_matrix",
    "measure",
    "run_block_sweep",
    "run_condition_sweep",
    "run_dot_experiment",
    "run_size_sweep",
    "trial_rng",
]
