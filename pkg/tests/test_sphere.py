import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import beta as beta_fn, gamma

from degentrace.sphere import (
    MeasureError,
    MeasureTable,
    directional_integral,
    lvol_derivative_at_zero,
    lvol_table,
    regularized_bracket,
    sphere_area,
    synthetic_table,
)
from degentrace.symbol import PolynomialSymbol


def cubic(angle=0.0):
    # Re(e^{i angle} (x + i xi)^3)
    c, s = math.cos(angle), math.sin(angle)
    return PolynomialSymbol(1, [((3, 0), c), ((1, 2), -3 * c), ((2, 1), -3 * s), ((0, 3), s)])


def test_sphere_area_values():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("sign", [1, -1])
def test_directional_integral_is_beta(sign):
    est = directional_integral(cubic(), sign, 1, 3)
    assert est.value == pytest.approx(beta_fn(1 / 6, 1 / 2), rel=1e-9)


@given(st.floats(0.0, 2 * math.pi))
@settings(max_examples=8, deadline=None)
def test_directional_integral_rotation_invariant(angle):
    est = directional_integral(cubic(angle), 1, 1, 3)
    assert est.value == pytest.approx(beta_fn(1 / 6, 1 / 2), rel=1e-8)


def test_directional_integral_divergent_rejected():
    quartic = PolynomialSymbol(2, [((4, 0, 0, 0), 1.0), ((0, 0, 4, 0), -1.0)])
    with pytest.raises(ValueError, match="divergent"):
        directional_integral(quartic, 1, 2, 4)


def test_circle_density_and_volume():
    u = np.linspace(-0.9, 0.9, 61)
    table = lvol_table(cubic(), 1, u)
    assert table.method == "exact-roots"
    assert np.allclose(table.lvol, 2 / np.sqrt(1 - u**2), rtol=1e-10)
    assert np.allclose(table.cumulative, 2 * math.pi - 2 * np.arccos(u), atol=1e-10)


def test_sampled_total_on_three_sphere():
    pk = PolynomialSymbol(2, [((4, 0, 0, 0), 1.0), ((0, 4, 0, 0), 1.0), ((0, 0, 4, 0), -1.0), ((0, 0, 0, 4), -1.0)])
    table = lvol_table(pk, 2, np.linspace(-1.01, 1.01, 201), samples=2**16)
    assert table.method == "co-area-sampling"
    assert table.total == pytest.approx(2 * math.pi**2, rel=1e-12)
    # by symmetry V(0) is half the sphere
    assert table.cumulative[100] == pytest.approx(math.pi**2, rel=2e-2)


def test_sampled_table_rejects_tiny_sample():
    pk = PolynomialSymbol(2, [((4, 0, 0, 0), 1.0), ((0, 0, 4, 0), -1.0)])
    with pytest.raises(MeasureError):
        lvol_table(pk, 2, np.linspace(-1, 1, 101), samples=1000)


def test_derivatives_at_zero():
    table = lvol_table(cubic(), 1, np.linspace(-0.5, 0.5, 2001))
    assert lvol_derivative_at_zero(table, 0).value == pytest.approx(2.0, rel=1e-9)
    assert lvol_derivative_at_zero(table, 1).value == pytest.approx(0.0, abs=1e-7)
    assert lvol_derivative_at_zero(table, 2).value == pytest.approx(2.0, rel=1e-6)


def test_derivative_stencil_errors():
    table = synthetic_table(lambda u: 1 + u, np.linspace(0.0, 1.0, 101))
    with pytest.raises(MeasureError):
        lvol_derivative_at_zero(table, 0)
    with pytest.raises(ValueError):
        lvol_derivative_at_zero(table, 5)


def test_regularized_bracket_of_gaussian():
    table = synthetic_table(lambda u: np.exp(-u * u), np.linspace(-7.0, 7.0, 7001))
    val = regularized_bracket(table, 2, 3, 1, cutoff_radius=0.5)
    # finite part of int_0^inf u^{-4/3} e^{-u^2} du
    assert val == pytest.approx(0.5 * gamma(-1 / 6), rel=1e-6)


def test_regularized_bracket_rejects_log_case():
    table = synthetic_table(lambda u: np.exp(-u * u), np.linspace(-3.0, 3.0, 601))
    with pytest.raises(ValueError):
        regularized_bracket(table, 2, 4, 1, cutoff_radius=0.5)


def test_table_csv_roundtrip(tmp_path):
    table = lvol_table(cubic(), 1, np.linspace(-0.8, 0.8, 17))
    path = tmp_path / "lvol.csv"
    table.to_csv(path)
    back = MeasureTable.from_csv(path)
    assert back.method == table.method
    np.testing.assert_array_equal(back.lvol, table.lvol)
    np.testing.assert_array_equal(back.cumulative, table.cumulative)


def test_table_validation():
    with pytest.raises(ValueError):
        MeasureTable(np.array([0.0, 0.0]), np.ones(2), np.ones(2), "synthetic")
    with pytest.raises(ValueError):
        MeasureTable(np.array([0.0, 1.0]), -np.ones(2), np.ones(2), "synthetic")
