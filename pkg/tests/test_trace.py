import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from degentrace import TestFunction
from degentrace.sphere import synthetic_table
from degentrace.symbol import HypothesisError, ModelProblem, PolynomialSymbol
from degentrace.testfn import one_sided_moment
from degentrace.trace import (
    SweepConfig,
    SweepError,
    TracePrediction,
    analyze_sweep,
    gamma_trace,
    h_sweep_experiment,
    predicted_trace_leading,
    subprincipal_shift_check,
    trace_case,
    weyl_law_ratio,
)
from degentrace.weyl import SpectralWindow, basis_size_for, truncation_study


def test_gamma_trace_sums_rescaled_eigenvalues():
    w = SpectralWindow(0.1, np.array([-0.1, 0.0, 0.2]), 0.5)
    assert gamma_trace(w, 0.0, 0.1, lambda t: t**2) == pytest.approx(1.0 + 0.0 + 4.0)
    assert gamma_trace(SpectralWindow(0.1, np.array([]), 0.5), 0.0, 0.1, np.cos) == 0.0
    with pytest.raises(SweepError):
        gamma_trace(w, 0.0, 0.1, np.cos, require_converged=True)


@pytest.mark.parametrize("n", range(1, 5))
@pytest.mark.parametrize("k", range(3, 9))
def test_trace_case_dispatch(n, k):
    q = Fraction(2 * n, k)
    expected = 1 if q < 1 else (2 if q.denominator == 1 else 3)
    assert trace_case(n, k) == expected


def test_prediction_callable_log_and_power():
    p = TracePrediction(Fraction(-1, 3), False, 2.0, 1)
    assert p(1e-3) == pytest.approx(2.0 * 1e1)
    q = TracePrediction(Fraction(0), True, 0.5, 2)
    assert q(1e-2) == pytest.approx(0.5 * math.log(100))


def test_case_one_shift_and_moments(k3_model, even_phi):
    base = predicted_trace_leading(k3_model, even_phi)
    assert base.case == 1 and base.exponent == Fraction(-1, 3)
    ing = base.ingredients
    assert ing["moment_plus"] == pytest.approx(ing["moment_minus"], rel=1e-12)
    # a zero sub-principal value leaves the prediction unchanged
    same = predicted_trace_leading(k3_model.with_subprincipal(0.0), even_phi)
    assert same.leading_coefficient == base.leading_coefficient
    # a sub-principal value c enters as phi(t + c)
    c = 0.3
    shifted = predicted_trace_leading(k3_model.with_subprincipal(c), even_phi)
    direct = predicted_trace_leading(k3_model, even_phi.shifted(-c))
    assert shifted.leading_coefficient == pytest.approx(direct.leading_coefficient, rel=1e-14)
    assert shifted.leading_coefficient != pytest.approx(base.leading_coefficient, rel=1e-3)


def test_shifted_phi_moments_differ(k3_model):
    phi = TestFunction(shift=0.7)
    ing = predicted_trace_leading(k3_model, phi).ingredients
    assert ing["moment_plus"] > ing["moment_minus"]


def test_hypotheses_enforced():
    flat = ModelProblem(1, 2, PolynomialSymbol(1, {(2, 0): 1.0, (0, 2): -1.0}), PolynomialSymbol(1, {}))
    with pytest.raises(HypothesisError):
        predicted_trace_leading(flat, TestFunction())


def test_case_two_closed_form():
    # Re((x + i xi)^2) has Lvol(0) = 2 on the circle; int phi = phi_hat(0) = e^{-1}
    m = ModelProblem(1, 2, PolynomialSymbol(1, {(2, 0): 1.0, (0, 2): -1.0}), PolynomialSymbol(1, {}))
    pred = predicted_trace_leading(m, TestFunction(), check=False)
    assert pred.case == 2 and pred.has_log and pred.exponent == 0
    assert pred.leading_coefficient == pytest.approx(math.exp(-1.0) / (2 * math.pi), rel=1e-8)


def test_case_two_sampled_table():
    pk = PolynomialSymbol(2, {(4, 0, 0, 0): 1.0, (0, 4, 0, 0): 1.0, (0, 0, 4, 0): -1.0, (0, 0, 0, 4): -1.0})
    m = ModelProblem(2, 4, pk, PolynomialSymbol(2, {}))
    pred = predicted_trace_leading(m, TestFunction(), check=False)
    assert pred.ingredients["table_method"] == "co-area-sampling"
    assert pred.exponent == -1 and pred.has_log
    expected = (2 * math.pi) ** -2 / 4 * pred.ingredients["lvol_derivative"] * math.exp(-1.0)
    assert pred.leading_coefficient == pytest.approx(expected, rel=1e-8)


def test_case_three_composes_brackets():
    pk = PolynomialSymbol(2, {(3, 0, 0, 0): 1.0, (0, 0, 0, 3): 1.0})
    m = ModelProblem(2, 3, pk, PolynomialSymbol(2, {}))
    table = synthetic_table(lambda u: np.exp(-u * u), np.linspace(-7.0, 7.0, 7001))
    phi = TestFunction()
    pred = predicted_trace_leading(m, phi, table, check=False, cutoff_radius=0.5)
    M = one_sided_moment(phi, 4 / 3 - 1, 1).value
    expected = (2 * math.pi) ** -2 / 3 * 2 * M * 0.5 * gamma(-1 / 6)
    assert pred.case == 3
    assert pred.leading_coefficient == pytest.approx(expected, rel=1e-6)


@given(st.floats(0.5, 2.0), st.floats(-0.5, 0.5))
@settings(max_examples=10, deadline=None)
def test_analyze_sweep_recovers_synthetic_power(coef, const):
    pred = TracePrediction(Fraction(-1, 3), False, coef, 1)
    h = np.logspace(-2, -4, 10)
    free, pinned, checks, ok = analyze_sweep(h, pred(h) + const, pred, 1)
    assert abs(checks["coefficient_ratio"] - 1) < 5e-3
    assert checks["free_exponent"] == pytest.approx(-1 / 3, abs=1e-4)
    assert ok == (checks["dominance"] >= 5.0)


def test_analyze_sweep_rejects_wrong_coefficient():
    pred = TracePrediction(Fraction(-1, 3), False, 1.0, 1)
    h = np.logspace(-2, -4, 10)
    _, _, checks, ok = analyze_sweep(h, 1.5 * pred(h), pred, 1)
    assert not ok and not checks["coefficient_ok"]


def test_analyze_sweep_log_case():
    pred = TracePrediction(Fraction(0), True, 0.25, 2)
    h = np.logspace(-2, -4, 10)
    _, pinned, checks, ok = analyze_sweep(h, pred(h) + 0.1, pred, 1)
    assert ok and checks["coefficient_ratio"] == pytest.approx(1.0, abs=1e-10)


def test_sweep_input_validation(k3_model, even_phi):
    with pytest.raises(ValueError, match="at least"):
        h_sweep_experiment(k3_model, even_phi, [1e-2, 1e-3])
    with pytest.raises(ValueError, match="decades"):
        h_sweep_experiment(k3_model, even_phi, np.logspace(-2, -2.5, 8))
    with pytest.raises(ValueError, match="admissible"):
        h_sweep_experiment(k3_model, even_phi, np.logspace(-2, -4, 8), eps=0.2)
    two = ModelProblem(2, 4, PolynomialSymbol(2, {(4, 0, 0, 0): 1.0}), PolynomialSymbol(2, {}))
    with pytest.raises(ValueError, match="one degree"):
        h_sweep_experiment(two, even_phi, np.logspace(-2, -4, 8))
    with pytest.raises(ValueError, match="horizon"):
        h_sweep_experiment(k3_model, TestFunction(support_radius=3.0), np.logspace(-2, -4, 8))


def test_short_sweep_report(tmp_path, k3_model, even_phi):
    cfg = SweepConfig(min_points=4, min_decades=0.5)
    rep = h_sweep_experiment(k3_model, even_phi, np.logspace(-2, -2.6, 4), config=cfg)
    assert len(rep.samples) == 4
    assert all(s.movement < 1e-3 * s.h for s in rep.samples)
    # widening the window adds eigenvalues but barely moves the trace
    wide = rep.checks["eps_robustness"]
    assert wide["extra_eigenvalues"] > 0 and wide["relative_change"] < 0.05
    rep.to_json(tmp_path / "r.json")
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().startswith("h,gamma,count,basis_size,movement")


def test_subprincipal_shift_identity(k3_model, even_phi):
    rep = subprincipal_shift_check(k3_model, 0.3, even_phi, 1e-2)
    assert rep.count > 0
    assert rep.difference < 1e-12
    assert rep.max_eigenvalue_shift_error < 1e-13


def test_weyl_law_ratio(k3_model):
    h = 2e-3
    N = basis_size_for(k3_model, h, 0.0, 0.05)
    w = truncation_study(k3_model, h, 0.0, 0.05, [int(0.9 * N), N, int(1.1 * N)])
    assert weyl_law_ratio(w, k3_model) == pytest.approx(1.0, abs=0.05)
