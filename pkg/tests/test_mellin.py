import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degentrace.fiber import standard_amplitude
from degentrace.mellin import (
    DoublePoleError,
    ExpansionPrediction,
    ExpansionTerm,
    bernstein_sato,
    bernstein_sato_roots,
    canonical_constant,
    finite_part_normalization,
    mellin_transform,
    pole_lattice,
    predict_leading_term,
)


@given(st.floats(0.2, 4.0))
@settings(max_examples=15, deadline=None)
def test_mellin_of_exponential_is_gamma(z):
    assert mellin_transform(lambda s: np.exp(-s), z).real == pytest.approx(math.gamma(z), rel=1e-10)


def test_mellin_complex_argument_and_negative_side():
    # Gamma(1 + i) = i Gamma(i)
    val = mellin_transform(lambda s: np.exp(-abs(s)), 1 + 1j)
    assert abs(val - complex(0.49801566811835596, -0.15494982830181069)) < 1e-10
    half = mellin_transform(lambda s: np.exp(-s * s), 1.0, sign=-1)
    assert half.real == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)


def test_mellin_rejects_bad_arguments():
    with pytest.raises(ValueError):
        mellin_transform(np.exp, -0.5)
    with pytest.raises(ValueError):
        mellin_transform(np.exp, 0.5, sign=0)


@pytest.mark.parametrize("n,k", [(1, 3), (2, 3), (2, 5), (3, 4)])
def test_bernstein_roots_match_polynomial(n, k):
    roots = bernstein_sato_roots(k, n)
    poly = bernstein_sato(k, n)
    assert len(roots) == k + 1
    assert all(abs(poly(float(r))) < 1e-9 * abs(poly.coef).max() for r in roots)
    assert poly.coef[-1] == pytest.approx(-((-k) ** k))


def test_pole_lattice_simple_case():
    got = [(e.location, e.order) for e in pole_lattice(1, 3, 2)]
    F = Fraction
    assert got == [(F(2, 3), 1), (F(1), 2), (F(4, 3), 1), (F(5, 3), 1), (F(2), 2)]


def test_pole_lattice_integer_below_leading_stays_simple():
    got = dict((e.location, e.order) for e in pole_lattice(2, 3, 2))
    assert got[Fraction(1)] == 1
    assert got[Fraction(4, 3)] == 1
    assert got[Fraction(2)] == 2
    with pytest.raises(ValueError):
        pole_lattice(1, 3, 11)


def test_canonical_constant():
    assert canonical_constant(1, 3, exact=True) == Fraction(3, 4)
    assert canonical_constant(1, 3) == pytest.approx(0.75)
    with pytest.raises(DoublePoleError):
        canonical_constant(2, 4)
    assert finite_part_normalization(2 / 3, 2) == pytest.approx(9 / 4)


def test_expansion_prediction_ordering():
    a = ExpansionTerm(Fraction(2, 3), 0, 1.0)
    b = ExpansionTerm(Fraction(4, 3), 0, 2.0)
    pred = ExpansionPrediction((a, b), Fraction(2), False)
    assert pred(8.0) == pytest.approx(8 ** (-2 / 3) + 2 * 8 ** (-4 / 3))
    with pytest.raises(ValueError):
        ExpansionPrediction((b, a), Fraction(2), False)


def test_log_case_prediction_closed_form():
    amp = standard_amplitude(2.0)
    pred = predict_leading_term(2, 4, amp)
    # (1/k) b(0,0) int exp(-s^2) ds with b(0,0) = e^{-2}
    expected = 0.25 * math.exp(-2.0) * math.sqrt(math.pi)
    assert pred.leading.log_exponent == 1
    assert pred.leading.coefficient == pytest.approx(expected, rel=1e-9)


def test_prediction_requires_separable_amplitude():
    with pytest.raises(TypeError):
        predict_leading_term(1, 3, lambda s, y1, y2: s)


def test_log_case_q2_uses_signed_moment():
    # asymmetric f and b separate int t f(t) dt from int |t| f(t) dt
    from degentrace._quad import bump
    from degentrace.fiber import SweepSamples, eval_fiber_integral, fit_terms, lambda_grid
    from degentrace.mellin import SeparableAmplitude

    f = lambda s: np.exp(-(np.asarray(s, float) - 0.5) ** 2)
    b = lambda y1, y2: bump(np.asarray(y1, float) / 2) * bump((np.asarray(y2, float) - 0.3) / 2)
    amp = SeparableAmplitude(f, b, 2.0, 2.5)
    pred = predict_leading_term(2, 2, amp)
    lams = lambda_grid(1e3, 3, 8)
    samples = SweepSamples.from_function(lambda lam: eval_fiber_integral(lam, f, b, 2, 2, 2.0, 2.5), lams)
    # 2n > k: the regular lam^{-1} term dominates and is fitted alongside
    coef, _ = fit_terms(samples, [(2, 1), (1, 0), (2, 0), (2.5, 0), (3, 1), (3, 0)])
    assert coef[0] == pytest.approx(pred.leading.coefficient, rel=1e-5)
