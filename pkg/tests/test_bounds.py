import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpqr.bounds import (
    BoundSpec,
    GammaSum,
    GammaTerm,
    bound_q,
    bound_r_column,
    bound_stable,
    column_coefficient,
    convert_to_measurables,
    feasibility_map,
    gamma,
    gamma_combine,
    measurable_bounds,
    read_grid,
    write_grid,
)
from mpqr.errors import DomainError
from mpqr.floatsim import FP16, FP32, FP64

U16, U32, U64 = FP16.u, FP32.u, FP64.u


def gamma_exact(k, u, c=1):
    ku = Fraction(c) * k * Fraction(u)
    return float(ku / (1 - ku))


def test_gamma_examples():
    assert gamma(0, U16) == 0.0
    assert gamma(2 ** 15, 2.0 ** -24) == pytest.approx(1.956948e-3, rel=1e-6)
    assert gamma(2 ** 15, 2.0 ** -24) == pytest.approx(gamma_exact(2 ** 15, 2.0 ** -24), rel=1e-15)
    assert not GammaTerm(2 ** 10, U16).stable
    assert GammaTerm(2 ** 10 - 1, U16).stable
    with pytest.raises(DomainError):
        gamma(2 ** 11, U16)
    with pytest.raises(DomainError):
        gamma(10, U16, c=300)
    assert gamma(3, U32, c=2) == pytest.approx(gamma(6, U32))


@given(st.integers(0, 10 ** 6), st.sampled_from([U16, U32, U64]))
@settings(max_examples=300, deadline=None)
def test_gamma_monotone_and_above_ku(k, u):
    if k * u >= 0.99:
        return
    g = gamma(k, u)
    assert g >= k * u
    assert g == pytest.approx(gamma_exact(k, u), rel=1e-14)
    if (k + 1) * u < 0.99:
        assert gamma(k + 1, u) >= g
    assert gamma(k, U64) <= gamma(k, u) if k * u < 0.99 else True


@given(st.integers(1, 500), st.integers(1, 500), st.sampled_from([U16, U32, U64]))
@settings(max_examples=300, deadline=None)
def test_n_gamma_k_below_gamma_nk(n, k, u):
    if n * k * u >= 0.5:
        return
    assert n * gamma(k, u) <= gamma(n * k, u) * (1 + 1e-14)
    # (1 + g_j)(1 + g_k) <= 1 + g_{j+k}
    gn, gk = gamma(n, u), gamma(k, u)
    assert gn + gk + gn * gk <= gamma(n + k, u) * (1 + 1e-14)


def test_gamma_combine():
    g = GammaTerm(7, U32)
    assert gamma_combine(g, GammaTerm(0, U32)) == g
    assert gamma_combine(GammaTerm(3, U32), GammaTerm(4, U32)) == g
    m = 1024
    mixed = gamma_combine(GammaTerm(1, U16), GammaTerm(m - 1, U32))
    assert isinstance(mixed, GammaSum)
    target = (1 + U16) * (1 + gamma(m - 1, U32)) - 1
    assert mixed.value == pytest.approx(target, rel=1e-3)
    assert mixed.first_order == pytest.approx(gamma(1, U16) + gamma(m - 1, U32))
    # the product of two gammas is below the smaller one
    assert gamma(1, U16) * gamma(m - 1, U32) <= min(gamma(1, U16), gamma(m - 1, U32))
    with pytest.raises(DomainError):
        gamma_combine(GammaTerm(1500, U16), GammaTerm(1, U32))


@pytest.mark.parametrize("m", [2, 3, 16, 100, 1024, 2047])
def test_mixed_inner_product_ordering(m):
    # gamma^h_m < (1 + u^l)(1 + gamma^h_{m-1}) - 1 < gamma^l_m while gamma^l_m < 1
    mid = (1 + U16) * (1 + gamma(m - 1, U32)) - 1
    assert gamma(m, U32) < mid < gamma(m, U16)


def test_worked_numbers_fp32():
    m, n = 2 ** 15, 2 ** 6
    assert bound_q(BoundSpec("hqr", "uniform", m, n, prec=FP32)) == pytest.approx(1.002, abs=1e-3)
    assert bound_q(BoundSpec("tsqr", "uniform", m, n, L=8, prec=FP32)) == pytest.approx(3.516e-2, abs=1e-4)
    assert bound_q(BoundSpec("hqr", "uniform", 1, 1, prec=FP64)) == pytest.approx(1.11e-16, rel=1e-2)


def test_cells_by_hand():
    m, n, r, L = 4000, 100, 25, 2
    N = 4
    cases = {
        ("hqr", "uniform"): n * gamma(m, U32),
        ("bqr", "uniform"): n * gamma(m, U32),
        ("tsqr", "uniform"): n * (gamma(m // 4, U32) + L * gamma(2 * n, U32)),
        ("hqr", "mixed2"): gamma(10 * n, U16) + n * gamma(m, U32),
        ("bqr", "mixed2"): N * gamma(10 * r, U16) + n * gamma(m, U32),
        ("tsqr", "mixed2"): (L + 1) * gamma(10 * n, U16) + n * (gamma(m // 4, U32) + L * gamma(2 * n, U32)),
        ("bqr", "mixed3"): gamma(N, U16) + n * gamma(m, U32),
        ("tsqr", "mixed3"): gamma(L + 1, U16) + n * (L * gamma(2 * n, U32) + gamma(m // 4, U32)),
    }
    for (alg, regime), coef in cases.items():
        spec = BoundSpec(alg, regime, m, n, r=r, L=L, prec=FP32 if regime == "uniform" else None)
        assert column_coefficient(spec) == pytest.approx(coef, rel=1e-14)
        assert bound_q(spec) == pytest.approx(math.sqrt(n) * coef, rel=1e-14)
        assert bound_r_column(spec, 3.0) == pytest.approx(3.0 * coef, rel=1e-14)


def test_high_castdown_cell():
    m, n = 200, 50
    spec = BoundSpec("hqr", "high_castdown", m, n)
    h = n * gamma(m, U32)
    assert column_coefficient(spec) == pytest.approx(U16 + h + U16 * h)


def test_r_column_examples():
    assert column_coefficient(BoundSpec("hqr", "uniform", 300, 1, prec=FP32)) == pytest.approx(gamma(300, U32))


def test_uneven_tsqr_uses_tallest_leaf():
    spec = BoundSpec("tsqr", "uniform", 1001, 10, L=2, prec=FP32)
    assert spec.leaf_rows == 251
    assert column_coefficient(spec) == pytest.approx(10 * (gamma(251, U32) + 2 * gamma(20, U32)))


def test_spec_validation():
    with pytest.raises(ValueError):
        BoundSpec("hqr", "mixed3", 100, 10)
    with pytest.raises(ValueError):
        BoundSpec("tsqr", "uniform", 100, 10, L=4, prec=FP32)
    with pytest.raises(ValueError):
        BoundSpec("bqr", "mixed2", 100, 10, r=11)
    with pytest.raises(ValueError):
        BoundSpec("hqr", "uniform", 100, 10)
    with pytest.raises(ValueError):
        BoundSpec("qr", "uniform", 100, 10, prec=FP32)
    with pytest.raises(DomainError):
        bound_q(BoundSpec("hqr", "uniform", 5000, 10, prec=FP16))


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5])
def test_hqr_over_tsqr_ratio(L):
    n = 64
    m = 2 ** (L + 1) * n
    ratio = bound_q(BoundSpec("hqr", "uniform", m, n, prec=FP32)) / \
        bound_q(BoundSpec("tsqr", "uniform", m, n, L=L, prec=FP32))
    assert ratio == pytest.approx(2 ** L / (L + 1), rel=0.05)


def test_degenerate_pair_close_to_uniform():
    m, n = 1000, 20
    uni = bound_q(BoundSpec("hqr", "uniform", m, n, prec=FP32))
    for regime in ("mixed2", "high_castdown"):
        b = bound_q(BoundSpec("hqr", regime, m, n, low=FP32, high=FP32))
        assert uni <= b <= 20 * uni


def test_stability_flag():
    assert bound_stable(BoundSpec("hqr", "uniform", 1000, 10, prec=FP32))
    assert bound_stable(BoundSpec("hqr", "mixed2", 2000, 100))  # 10n u = 0.488
    assert not bound_stable(BoundSpec("hqr", "mixed2", 2000, 150))


def test_convert_to_measurables():
    assert convert_to_measurables(0, 0, 7) == (0, 0)
    e = 1e-9
    b, o = convert_to_measurables(e, e, 100)
    assert b == pytest.approx(2 * 10 * e)
    assert o == 2 * e
    with pytest.raises(ValueError):
        convert_to_measurables(-1, 0, 1)


def test_measurable_bounds_infinite_when_undefined():
    assert measurable_bounds(BoundSpec("hqr", "mixed2", 100000, 300)) == (math.inf, math.inf)


def test_feasibility_map(tmp_path):
    cells = feasibility_map("hqr", [2, 4], [8, 16])
    assert all(math.isinf(v) for _, _, v in cells)
    cells = feasibility_map("tsqr", [2 ** k for k in range(4, 16)], [2 ** k for k in range(1, 8)], L=4)
    for m, n, v in cells:
        if m < 16 * n:
            assert math.isinf(v)
    m, n = 2 ** 15, 2 ** 6
    (cell,) = feasibility_map("hqr", [m], [n], prec=FP64)
    assert cell[2] == pytest.approx(math.log10(n ** 1.5 * gamma(m, U64)))
    # bound >= 1 is infeasible
    (cell,) = feasibility_map("hqr", [m], [n], prec=FP32)
    assert math.isinf(cell[2])
    path = tmp_path / "grid.txt"
    write_grid(cells, path)
    text = path.read_text().splitlines()
    assert text[0] == "m n value"
    assert "inf" in text[1] or "inf" in "".join(text)
    back = read_grid(path)
    assert [(a, b) for a, b, _ in back] == [(a, b) for a, b, _ in cells]
    assert np.allclose([v for *_, v in back], [v for *_, v in cells], equal_nan=True)
