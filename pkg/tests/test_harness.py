import math

import numpy as np
import pytest

from mpqr.floatsim import FP16, FP64, is_representable
from mpqr.harness.experiments import (
    dot_errors,
    read_reports,
    run_block_sweep,
    run_condition_sweep,
    run_dot_experiment,
    run_size_sweep,
    size_sweep_defaults,
    summarize,
    thread_count,
)
from mpqr.harness.matrices import MatrixSpec, canonical_kind, exact_matrix, gen_matrix, trial_rng
from mpqr.harness.measure import CSV_COLUMNS, ErrorReport, backward_error, measure, orthogonality
from oracles import dot_fp16_numpy


def test_trial_streams_independent_and_reproducible():
    a = trial_rng(0, 3).random(5)
    assert np.array_equal(a, trial_rng(0, 3).random(5))
    assert not np.array_equal(a, trial_rng(0, 4).random(5))
    assert not np.array_equal(a, trial_rng(1, 3).random(5))


def test_kinds():
    assert canonical_kind("GaussianStd") == "gaussian"
    assert canonical_kind("LogSpacedSV") == "logspaced"
    with pytest.raises(ValueError):
        canonical_kind("hilbert")
    with pytest.raises(ValueError):
        MatrixSpec("conditioned", 10, 3)
    with pytest.raises(ValueError):
        MatrixSpec("logspaced", 3, 10)


def test_gen_matrix_stored_in_format():
    A = gen_matrix(MatrixSpec("gaussian", 50, 10, seed=1))
    assert A.shape == (50, 10) and is_representable(A, FP16).all()
    U = gen_matrix(MatrixSpec("uniform01", 50, 10, seed=1))
    assert U.min() >= 0 and U.max() <= 1


def test_conditioned_condition_number():
    A = exact_matrix(MatrixSpec("conditioned", 200, 100, alpha=0.0, storage=FP64))
    assert np.linalg.cond(A) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(A) == pytest.approx(1.0)
    A = exact_matrix(MatrixSpec("conditioned", 200, 100, alpha=1.0, storage=FP64))
    assert np.linalg.cond(A) == pytest.approx(101.0, rel=1e-10)
    A16 = gen_matrix(MatrixSpec("conditioned", 200, 100, alpha=1.0))
    assert np.linalg.cond(A16) == pytest.approx(101.0, rel=0.05)


def test_logspaced_singular_values():
    A = exact_matrix(MatrixSpec("logspaced", 64, 8, smin=1e-3))
    s = np.linalg.svd(A, compute_uv=False)
    assert np.allclose(s, np.logspace(0, -3, 8), rtol=1e-10)


def test_measure_trivial_and_shapes():
    rep = measure(np.eye(3), np.eye(3), np.eye(3), alg="hqr", regime="uniform")
    assert rep.backward == 0.0 and rep.orth == 0.0
    assert math.isinf(rep.boundBackward) and rep.within_bounds
    with pytest.raises(ValueError):
        measure(np.eye(3), np.eye(2), np.eye(3))
    Q = np.diag([1.0, 1.1])
    assert orthogonality(Q) == pytest.approx(0.21)
    assert backward_error(np.eye(2), Q, np.eye(2)) == pytest.approx(0.1 / math.sqrt(2))


def test_report_csv_roundtrip():
    rep = ErrorReport("bqr", "mixed3", 100, 10, r=5, L=None, alpha=None, seed=2,
                      backward=1.5e-4, orth=2.25e-3, boundBackward=0.5, boundOrth=math.inf)
    row = rep.csv_row()
    assert len(row.split(",")) == len(CSV_COLUMNS)
    assert ErrorReport.from_csv(row) == rep
    assert not ErrorReport("hqr", "uniform", 1, 1, backward=0.6, boundBackward=0.5).within_bounds


def test_dot_errors_match_scalar_reference():
    errs = dot_errors(20, 64, "normal", seed=5)
    for trial, e in enumerate(errs):
        xy = trial_rng(5, trial).standard_normal((2, 64)).astype(np.float16).astype(float)
        fl = float(dot_fp16_numpy(xy[0], xy[1]))
        exact = math.fsum(xy[0] * xy[1])
        assert e == pytest.approx(abs(exact - fl) / math.fsum(np.abs(xy[0] * xy[1])), rel=1e-12)


def test_dot_experiment_layout(tmp_path):
    out = tmp_path / "dot.csv"
    s, text = run_dot_experiment(50, 32, "uniform", out=out, seed=1)
    lines = out.read_text().splitlines()
    assert lines[0] == "trial,relerr,average,sd,maximum,overflows"
    assert len(lines) == 52 and lines[-1].startswith("summary,,")
    assert text == out.read_text()
    assert s["overflows"] == 0 and s["maximum"] >= s["average"] > 0
    assert summarize([0.5, None, 1.5])["overflows"] == 1
    with pytest.raises(ValueError):
        dot_errors(10, 10, "cauchy")


def test_thread_count(monkeypatch):
    monkeypatch.delenv("MPQR_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("MPQR_THREADS", "4")
    assert thread_count() == 4
    assert thread_count(2) == 2


def test_sweeps_deterministic_across_workers(tmp_path):
    a = run_size_sweep([64], n=8, r=4, L=2, samples=2, threads=1)[1]
    b = run_size_sweep([64], n=8, r=4, L=2, samples=2, threads=2)[1]
    assert a == b
    reps = read_reports(a)
    assert len(reps) == 16
    assert {(r.alg, r.regime) for r in reps} == {
        ("hqr", "uniform"), ("bqr", "uniform"), ("tsqr", "uniform"), ("hqr", "mixed2"),
        ("bqr", "mixed2"), ("tsqr", "mixed2"), ("bqr", "mixed3"), ("tsqr", "mixed3")}
    assert all(r.within_bounds for r in reps)


def test_block_and_condition_sweeps(tmp_path):
    reps, text = run_block_sweep(64, 8, [2, 8], samples=1, out=tmp_path / "b.csv")
    assert [(r.r, r.regime) for r in reps] == [(2, "uniform"), (2, "mixed3"), (8, "uniform"), (8, "mixed3")]
    assert read_reports(tmp_path / "b.csv") == reps
    reps, _ = run_condition_sweep(64, 8, [0.1, 1.0], samples=2, L_list=[1, 2])
    assert len(reps) == 2 * 2 * 3
    assert {r.alpha for r in reps} == {0.1, 1.0}


def test_size_sweep_defaults():
    d = size_sweep_defaults()
    assert d[0] == 1000 and d[-1] == 13949
    ratios = np.diff(np.log(d))
    assert np.allclose(ratios, ratios[0], rtol=1e-3)
