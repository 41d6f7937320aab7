import io
import math

import numpy as np
import pytest

from mpqr.cli import run
from mpqr.harness.measure import CSV_COLUMNS, ErrorReport


def call(argv, stdin_text=""):
    out = io.StringIO()
    code = run(argv, stdin=io.StringIO(stdin_text), stdout=out)
    return code, out.getvalue()


def matrix_csv(A):
    return "\n".join(",".join(repr(float(v)) for v in row) for row in A) + "\n"


def test_factor_stdin_report():
    A = np.random.default_rng(0).standard_normal((32, 4)).astype(np.float16).astype(float)
    code, text = call(["factor", "--alg", "hqr", "--regime", "mixed2"], matrix_csv(A))
    assert code == 0
    header, row = text.strip().splitlines()
    assert header == ",".join(CSV_COLUMNS)
    rep = ErrorReport.from_csv(row)
    assert (rep.alg, rep.regime, rep.m, rep.n) == ("hqr", "mixed2", 32, 4)
    assert rep.backward < 1e-2 and rep.within_bounds


def test_factor_writes_artifacts(tmp_path):
    A = np.random.default_rng(1).standard_normal((16, 3)).astype(np.float16).astype(float)
    src = tmp_path / "A.csv"
    src.write_text(matrix_csv(A))
    code, _ = call(["--out", str(tmp_path / "run"), "factor", "--alg", "tsqr", "--L", "1",
                    "--regime", "uniform", "--prec", "fp64", "--input", str(src)])
    assert code == 0
    Q = np.loadtxt(tmp_path / "run" / "Q.csv", delimiter=",")
    R = np.loadtxt(tmp_path / "run" / "R.csv", delimiter=",")
    assert np.allclose(Q @ R, A, atol=1e-12)
    assert (tmp_path / "run" / "report.csv").exists()


def test_factor_input_errors():
    # 0.1 is not an fp16 value
    assert call(["factor", "--alg", "hqr", "--regime", "mixed2"], "0.1,0\n0,1\n")[0] == 2
    code, _ = call(["factor", "--alg", "hqr", "--regime", "mixed2", "--round-input"], "0.1,0\n0,1\n")
    assert code == 0
    assert call(["factor", "--alg", "hqr", "--regime", "mixed3"], "1,0\n0,1\n")[0] == 2
    assert call(["factor", "--alg", "qr", "--regime", "mixed2"], "1\n")[0] == 2
    assert call(["factor", "--alg", "bqr", "--regime", "mixed2"], "1,0\n0,1\n")[0] == 2


def test_factor_overflow_exit_code():
    big = "60000,60000\n60000,1000\n60000,60000\n60000,60000\n"
    assert call(["factor", "--alg", "hqr", "--regime", "high_castdown"], big)[0] == 3
    code, _ = call(["factor", "--alg", "hqr", "--regime", "high_castdown", "--overflow-policy", "saturate"], big)
    assert code == 0


def test_bounds_worked_values():
    code, text = call(["bounds", "--alg", "hqr", "--regime", "uniform", "--m", "32768", "--n", "64"])
    assert code == 0 and float(text) == pytest.approx(1.002, abs=1e-3)
    code, text = call(["bounds", "--alg", "tsqr", "--regime", "uniform", "--m", "32768", "--n", "64", "--L", "8"])
    assert float(text) == pytest.approx(3.516e-2, abs=1e-4)
    code, text = call(["bounds", "--alg", "bqr", "--regime", "mixed3", "--m", "1000", "--n", "50",
                       "--r", "10", "--what", "measurable"])
    b, o = map(float, text.split())
    assert code == 0 and 0 < o < b
    assert call(["bounds", "--alg", "hqr", "--regime", "uniform", "--m", "5000", "--n", "5", "--prec", "fp16"])[0] == 2


def test_bounds_c_constant():
    base = float(call(["bounds", "--alg", "hqr", "--regime", "uniform", "--m", "100", "--n", "4", "--what", "r"])[1])
    scaled = float(call(["bounds", "--alg", "hqr", "--regime", "uniform", "--m", "100", "--n", "4",
                         "--what", "r", "--c-constant", "2"])[1])
    assert scaled == pytest.approx(2 * base, rel=1e-4)


def test_feasibility(tmp_path):
    code, _ = call(["feasibility", "--scheme", "tsqr", "--L", "2", "--log2-m", "6,10", "--log2-n", "2,5",
                    "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "feasibility_tsqr2_fp32.txt").read_text().splitlines()
    assert lines[0] == "m n value" and len(lines) == 5
    m, n, v = lines[2].split()
    assert (m, n, v) == ("64", "32", "inf")


def test_dot_exp(tmp_path):
    code, text = call(["dot-exp", "--count", "30", "--m", "16", "--seed", "3"])
    assert code == 0 and len(text.splitlines()) == 32
    code, text = call(["dot-exp", "--count", "30", "--m", "16", "--mixed", "--out", str(tmp_path / "d.csv")])
    assert code == 0 and "average=" in text


def test_sweeps_smoke(tmp_path):
    code, text = call(["size-sweep", "--m", "64", "--n", "8", "--r", "4", "--L", "1"])
    assert code == 0 and len(text.splitlines()) == 9
    code, text = call(["block-sweep", "--m", "64", "--n", "8", "--r", "4,8"])
    assert code == 0 and len(text.splitlines()) == 5
    code, text = call(["cond-sweep", "--m", "64", "--n", "8", "--alpha", "1", "--samples", "1", "--L", "1", "--seed", "2"])
    assert code == 0
    reps = [ErrorReport.from_csv(line) for line in text.splitlines()[1:]]
    assert [r.alg for r in reps] == ["hqr", "tsqr"] and not math.isnan(reps[1].orth)


def test_bad_arguments():
    assert call([])[0] == 2
    assert call(["nonsense"])[0] == 2
    assert call(["--help"])[0] == 0
