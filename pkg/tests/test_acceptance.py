"""Acceptance checks, one printed PASS/FAIL line per criterion (see the terminal summary)."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import beta as beta_fn, gamma

from conftest import record
from degentrace import TestFunction, build_model_symbol
from degentrace._quad import bump, smooth_step
from degentrace.dynamics import germ_residual_slope, integrate_flow, time_additivity_defect
from degentrace.fiber import (
    FiberSweepConfig, SweepSamples, eval_coarea_integral, eval_first_chart, fiber_sweep, first_chart_leading,
    fit_terms,
)
from degentrace.mellin import bernstein_sato, canonical_constant, mellin_transform, pole_lattice
from degentrace.sphere import directional_integral, lvol_table, regularized_bracket, synthetic_table
from degentrace.symbol import leading_model_part
from degentrace.trace import h_sweep_experiment, subprincipal_shift_check
from degentrace.weyl import eigen_window, weyl_matrix

# value of the directional-integral constant as stated in the criteria
STATED_DIRECTIONAL = 14.572


def test_c1_fiber_simple_pole():
    t0 = time.perf_counter()
    samples, pred, summary = fiber_sweep(FiberSweepConfig(1, 3))
    elapsed = time.perf_counter() - t0
    ver = summary["verification"]
    free = summary["free_exponent"]
    ok = ver["constant_spread"] <= 0.2 and abs(free + 2 / 3) <= 0.02 and elapsed <= 60
    record("1 fiber case (1) (n,k)=(1,3)", ok,
           f"C={ver['fitted_constant']:.4g} spread={ver['constant_spread']:.3f} (<=0.2), "
           f"free exponent {free:.4f} (-2/3+-0.02), {elapsed:.1f}s")
    assert ok


def test_c2_fiber_logarithmic():
    t0 = time.perf_counter()
    samples, pred, summary = fiber_sweep(FiberSweepConfig(2, 4))
    elapsed = time.perf_counter() - t0
    # (1/k) int a(t, 0, 0) dt with a = f(t) bump(y1/2) bump(y2/2)
    target = 0.25 * math.sqrt(math.pi) * float(bump(0.0)) ** 2
    ratio = summary["log_coefficient"] / target
    ok = abs(ratio - 1) <= 0.05 and summary["residual_ratio"] >= 10 and elapsed <= 120
    record("2 fiber case (2) (n,k)=(2,4)", ok,
           f"A/target={ratio:.5f} (+-5%), residual ratio {summary['residual_ratio']:.1f} (>=10), {elapsed:.1f}s")
    assert ok


def test_c3_fiber_finite_part():
    n, k = 2, 3
    alpha = 2 * n / k

    def f(s):
        return np.exp(-np.asarray(s) ** 2)

    def L(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1, (1 - u * u) ** 2 * (1 + 0.5 * u), 0.0)

    def rho(r):
        return 1 - smooth_step((np.asarray(r) - 0.5) / 0.5)

    table = synthetic_table(L, np.linspace(-1.2, 1.2, 4801))
    bp = {r: regularized_bracket(table, n, k, 1, r) for r in (0.1, 0.2, 0.3)}
    bm = {r: regularized_bracket(table, n, k, -1, r) for r in (0.1, 0.2, 0.3)}
    spread = max(np.ptp(list(bp.values())), np.ptp(list(bm.values())))
    mp, mm = mellin_transform(f, alpha, 1).real, mellin_transform(f, alpha, -1).real
    d = (mp * bp[0.2] + mm * bm[0.2]) / k
    lams = np.logspace(1, 4, 25)
    samples = SweepSamples.from_function(lambda lam: eval_coarea_integral(lam, f, L, rho, n, k), lams)
    coef, _ = fit_terms(samples, [(1, 0), (alpha, 0), (2, 0), (3, 0)])
    ratio = coef[1] / d
    ok = abs(ratio - 1) <= 0.05 and spread <= 1e-6
    record("3 fiber case (3) (n,k)=(2,3)", ok,
           f"fit/bracket={ratio:.5f} (+-5%), cutoff spread {spread:.2e} (<=1e-6)")
    assert ok


def test_c4_first_chart():
    def f_hat(x):
        return math.sqrt(math.pi) * np.exp(-np.asarray(x) ** 2 / 4)

    def g(eta):
        return bump(np.asarray(eta))

    lines = []
    ok = True
    for k in (3, 4):
        c0 = first_chart_leading(mellin_transform(f_hat, 1 / k).real, float(bump(0.0)), k)
        lam = 1e6
        r = eval_first_chart(lam, f_hat, g, k).value * lam ** (1 / k) / c0
        ok &= abs(r - 1) <= 0.01
        lines.append(f"k={k} ratio {r:.5f}")
    record("4 first-chart leading coefficient at lam=1e6", ok, ", ".join(lines) + " (+-1%)")
    assert ok


@pytest.fixture(scope="module")
def flagship():
    m = build_model_symbol(3, 1.0, 0.05)
    phi = TestFunction(1.0, 0.0)
    t0 = time.perf_counter()
    report = h_sweep_experiment(m, phi, np.logspace(-2, -4, 12), 0.05)
    return report, time.perf_counter() - t0


def test_c5_spectral_flagship_as_stated(flagship):
    report, elapsed = flagship
    mu = report.prediction.ingredients["moment_plus"]
    stated = STATED_DIRECTIONAL / (3 * math.pi) * mu
    c = report.checks
    ratio = c["pinned_coefficient"] / stated
    nmax = max(s.basis_size for s in report.samples)
    parts = {
        "exponent": abs(c["free_exponent"] + 1 / 3) <= 0.05,
        "coefficient": abs(ratio - 1) <= 0.10,
        "dominance": c["dominance"] >= 5,
        "runtime": elapsed <= 900,
        "basis<=4000": nmax <= 4000,
    }
    ok = all(parts.values())
    record("5 spectral flagship (stated coefficient 14.572/(3 pi) mu, N<=4000)", ok,
           f"free exponent {c['free_exponent']:.4f}, pinned/stated {ratio:.4f}, dominance {c['dominance']:.0f}, "
           f"max N {nmax}, {elapsed:.0f}s; failing parts: {[k for k, v in parts.items() if not v]}")
    assert ok


def test_c5_spectral_flagship_derived_coefficient(flagship):
    report, elapsed = flagship
    c = report.checks
    ok = (abs(c["free_exponent"] + 1 / 3) <= 0.05 and abs(c["coefficient_ratio"] - 1) <= 0.10
          and c["dominance"] >= 5 and elapsed <= 900)
    record("5' spectral flagship against the computed prediction", ok,
           f"free exponent {c['free_exponent']:.4f}, pinned/predicted {c['coefficient_ratio']:.4f}, "
           f"prediction {report.prediction.leading_coefficient:.6f}, dominance {c['dominance']:.0f}, {elapsed:.0f}s")
    assert ok


def test_c6_quantizer_exactness(oscillator):
    h = 0.01
    mat = weyl_matrix(oscillator, h, 400)
    win = eigen_window(mat, 2.0, 1.0)  # indices roughly 50..150, away from the basis edge
    idx = np.rint((win.eigenvalues / h - 1) / 2)
    err = float(np.max(np.abs(win.eigenvalues - (2 * idx + 1) * h)))
    shift = subprincipal_shift_check(oscillator, 0.3, TestFunction(), h, eps=0.5, N=200)
    k3 = subprincipal_shift_check(build_model_symbol(3), 0.3, TestFunction(), 1e-2)
    ok = err <= 1e-10 and shift.difference <= 1e-12 and shift.max_eigenvalue_shift_error <= 1e-12
    record("6 quantizer exactness", ok,
           f"oscillator eigenvalue error {err:.1e} (<=1e-10), shift identity {shift.difference:.1e} "
           f"(<=1e-12; k=3 model {k3.difference:.1e})")
    assert ok


def _poly_frac(poly) -> list[Fraction]:
    return [Fraction(round(c)) for c in poly.coef]


def _mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _shift(p, l):
    # p(z - l) by Horner in exact arithmetic
    out = [Fraction(0)]
    for c in reversed(p):
        out = _mul(out, [Fraction(-l), Fraction(1)])
        out[0] += c
    return out


def _multiplicity(p, z0):
    m = 0
    while True:
        # synthetic division by (z - z0)
        q, acc = [], Fraction(0)
        for c in reversed(p):
            acc = acc * z0 + c
            q.append(acc)
        if q[-1] != 0:
            return m
        m += 1
        p = list(reversed(q[:-1]))


def test_c7_mellin_suite():
    def e(s):
        return np.exp(-s)

    ref = {0.5: math.sqrt(math.pi), 1.0: 1.0, 2.0: 1.0, 1 / 3: 2.678938534707747633, 2.5: 1.329340388179137}
    gerr = max(abs(mellin_transform(e, z).real - v) / v for z, v in ref.items())
    zc = 0.7 + 1.3j
    gerr = max(gerr, abs(mellin_transform(e, zc) - complex(gamma(zc))) / abs(gamma(zc)))
    rec = max(abs(mellin_transform(e, z + 1) - z * mellin_transform(e, z)) / abs(mellin_transform(e, z + 1))
              for z in (0.3, 1.7, 0.4 + 2j))
    lattice_ok = True
    for n in range(1, 4):
        for k in range(1, 7):
            z_max = Fraction(3)
            b = _poly_frac(bernstein_sato(k, n))
            prod = [Fraction(1)]
            for l in range(4):
                prod = _mul(prod, _shift(b, l))
            expected = {}
            for j in range(1, 3 * k + 1):
                z0 = Fraction(j, k)
                mult = _multiplicity(prod, z0)
                if mult:
                    expected[z0] = mult
            got = {p.location: p.order for p in pole_lattice(n, k, z_max)}
            lattice_ok &= got == expected
    consts = canonical_constant(1, 3, exact=True) == Fraction(3, 4) and canonical_constant(1, 4, exact=True) == Fraction(1, 3)
    ok = gerr <= 1e-8 and rec <= 1e-8 and lattice_ok and consts
    record("7 Mellin suite", ok,
           f"Gamma rel err {gerr:.1e}, recursion {rec:.1e} (<=1e-8), lattice n<=3,k<=6 {lattice_ok}, "
           f"C(1,3)=3/4 and C(1,4)=1/3 {consts}")
    assert ok


def _geometry():
    # level sets of cos(k theta): V(u) = 2 pi - 2 arccos(u) and Lvol(u) = 2 / sqrt(1 - u^2)
    u = np.linspace(-1.0, 1.0, 4001)
    coarea_err = 0.0
    inner = np.abs(u) <= 0.99
    for k in (3, 4, 5):
        t = lvol_table(leading_model_part(k), 1, u)
        coarea_err = max(coarea_err, float(np.max(np.abs(t.cumulative - (2 * np.pi - 2 * np.arccos(u))))),
                         float(np.max(np.abs(t.lvol[inner] - 2 / np.sqrt(1 - u[inner] ** 2)))))
    pk = leading_model_part(3)
    table = lvol_table(pk, 1, u)
    lvol0 = float(table.lvol[2000])
    tol = 1e-10
    dp = directional_integral(pk, 1, 1, 3, tol)
    dm = directional_integral(pk, -1, 1, 3, tol)
    angle = 0.37
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    dr = directional_integral(pk.compose_linear(rot), 1, 1, 3, tol)
    return coarea_err, lvol0, dp, dm, abs(dr.value - dp.value), tol


def test_c8_geometry_as_stated():
    coarea_err, lvol0, dp, dm, rot_err, tol = _geometry()
    parts = {
        "co-area": coarea_err <= 1e-6,
        "Lvol(0)=2": abs(lvol0 - 2) <= 1e-9,
        "directional 14.572": abs(dp.value / STATED_DIRECTIONAL - 1) <= 1e-3,
        "rotation": rot_err <= 2 * tol,
    }
    ok = all(parts.values())
    record("8 geometry suite (directional integral stated as 14.572)", ok,
           f"co-area {coarea_err:.1e}, Lvol(0)={lvol0:.12f}, D+={dp.value:.6f}, rotation {rot_err:.1e}; "
           f"failing parts: {[k for k, v in parts.items() if not v]}")
    assert ok


def test_c8_geometry_derived_constant():
    coarea_err, lvol0, dp, dm, rot_err, tol = _geometry()
    exact = beta_fn(1 / 6, 1 / 2)
    ok = (coarea_err <= 1e-6 and abs(lvol0 - 2) <= 1e-9 and abs(dp.value - exact) <= 1e-9
          and abs((dp.value + dm.value) / STATED_DIRECTIONAL - 1) <= 1e-3 and rot_err <= 2 * tol)
    record("8' geometry suite with D+ = B(1/6,1/2)", ok,
           f"D+={dp.value:.12f} vs B(1/6,1/2)={exact:.12f}, D+ + D- = {dp.value + dm.value:.5f} (14.572 within 0.1%)")
    assert ok


def test_c9_dynamics_suite():
    slopes = {}
    slopes[3] = germ_residual_slope(build_model_symbol(3), 0.1, np.logspace(-2, -4, 5)).slope
    # the k=4 remainder is O(r^5); smaller radii reach the double-precision floor
    slopes[4] = germ_residual_slope(build_model_symbol(4), 0.1, np.logspace(-1, -2.5, 5)).slope
    m = build_model_symbol(3)
    tol = 1e-12
    drift = max(integrate_flow(m, z, 2.0, tol).energy_drift for z in ([0.3, 0.2], [-0.1, 0.4], [0.45, -0.05]))
    add = time_additivity_defect(m, [0.3, 0.2], 0.7, 0.5, tol)
    ok = all(slopes[k] >= k - 0.1 for k in slopes) and drift <= 1e-10 and add <= 10 * tol
    record("9 dynamics suite", ok,
           f"germ slopes k=3 {slopes[3]:.4f}, k=4 {slopes[4]:.4f} (>=k-0.1), drift {drift:.1e} (<=1e-10), "
           f"additivity {add:.1e} (<=1e-11)")
    assert ok
