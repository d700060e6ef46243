"""Spectral distribution near the critical energy, its predicted leading term, and h-sweeps."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .fiber import SweepSamples, fit_power_log, FitResult
from .sphere import (
    MeasureTable, directional_integral, lvol_derivative_at_zero, lvol_table, regularized_bracket,
)
from .symbol import HypothesisError, ModelProblem, check_hypotheses
from .testfn import TestFunction, one_sided_moment, signed_moment, abs_moment
from .weyl import SpectralWindow, basis_size_for, eigen_window, truncation_study, weyl_matrix


class SweepError(RuntimeError):
    """A sweep point could not be computed reliably."""


def gamma_trace(window: SpectralWindow, E_c: float, h: float, phi: Callable,
                require_converged: bool = False) -> float:
    """``sum_j phi((lambda_j - E_c) / h)`` over the eigenvalues of ``window``."""
    if require_converged and not window.converged:
        raise SweepError("window was not confirmed by a truncation study")
    lam = np.asarray(window.eigenvalues, dtype=float)
    if lam.size == 0:
        return 0.0
    return float(np.sum(phi((lam - E_c) / h)))


# ---------------------------------------------------------------------------
# Prediction


@dataclass
class TracePrediction:
    """Leading term ``coefficient * h^exponent`` (times ``log(1/h)`` when ``has_log``)."""

    exponent: Fraction
    has_log: bool
    leading_coefficient: float
    case: int
    ingredients: dict = field(default_factory=dict)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        out = self.leading_coefficient * h ** float(self.exponent)
        return out * np.log(1.0 / h) if self.has_log else out

    def to_dict(self) -> dict:
        return {
            "exponent": str(self.exponent),
            "has_log": self.has_log,
            "leading_coefficient": self.leading_coefficient,
            "case": self.case,
            "ingredients": self.ingredients,
        }


def trace_case(n: int, k: int) -> int:
    """1 if ``k > 2n``, 2 if ``2n/k`` is an integer, 3 otherwise."""
    q = Fraction(2 * n, k)
    if q < 1:
        return 1
    return 2 if q.denominator == 1 else 3


def default_level_grid(m: ModelProblem, points: int = 2001, samples: int = 4096, seed: int = 0) -> np.ndarray:
    """Symmetric grid covering the values of the leading part on the unit sphere."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((samples, 2 * m.n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    top = 1.05 * float(np.max(np.abs(m.leading(pts))))
    return np.linspace(-top, top, points)


def predicted_trace_leading(m: ModelProblem, phi: TestFunction, table: MeasureTable | None = None, *,
                            check: bool = True, tol: float = 1e-10, cutoff_radius: float | None = None,
                            ) -> TracePrediction:
    """Leading term of ``gamma(E_c, phi, h)`` as ``h -> 0``.

    With ``alpha = 2n/k`` and ``M_pm = <t_pm^{alpha-1}, phi>``:

    * ``k > 2n``: ``(2 pi)^{-n} k^{-1} (M_+ D_+ + M_- D_-) h^{alpha-n}`` with the
      directional integrals ``D_pm`` of ``(p_k)_pm^{-alpha}`` over the sphere.
    * ``alpha = q`` integer: ``(2 pi)^{-n} k^{-1} Lvol^{(q-1)}(0)/(q-1)! int t^{q-1} phi``
      times ``h^{q-n} log(1/h)``.
    * otherwise: as in the first case with ``D_pm`` replaced by the finite-part
      brackets of ``Lvol(pm u)`` against ``u^{-alpha}``.

    A sub-principal value ``c`` enters through ``phi(t + c)``.
    """
    if check:
        report = check_hypotheses(m)
        if not (report.h2_ok and report.h4_ok):
            raise HypothesisError("; ".join(report.messages) or "hypothesis check failed")
    n, k = m.n, m.k
    alpha = Fraction(2 * n, k)
    case = trace_case(n, k)
    c = m.subprincipal_value
    psi = phi.shifted(-c) if c else phi
    norm = (2 * math.pi) ** (-n) / k
    ing: dict = {"alpha": str(alpha), "normalization": norm, "subprincipal_shift": c,
                 "phi_radius": phi.support_radius, "phi_shift": psi.shift}
    exponent = alpha - n
    if case == 1:
        mp = one_sided_moment(psi, float(alpha) - 1.0, 1)
        mm = one_sided_moment(psi, float(alpha) - 1.0, -1)
        dp = directional_integral(m.leading, 1, n, k, tol)
        dm = directional_integral(m.leading, -1, n, k, tol)
        coef = norm * (mp.value * dp.value + mm.value * dm.value)
        ing.update(moment_plus=mp.value, moment_minus=mm.value,
                   directional_plus=dp.value, directional_minus=dm.value,
                   ingredient_error=norm * (abs(mp.error * dp.value) + abs(mm.error * dm.value)
                                            + abs(mp.value * dp.error) + abs(mm.value * dm.error)))
        return TracePrediction(exponent, False, coef, case, ing)
    if table is None:
        table = lvol_table(m.leading, n, default_level_grid(m))
    ing["table_method"] = table.method
    if case == 2:
        q = int(alpha)
        deriv = lvol_derivative_at_zero(table, q - 1)
        mom = signed_moment(psi, q)
        coef = norm * deriv.value / math.factorial(q - 1) * mom.value
        ing.update(q=q, lvol_derivative=deriv.value, derivative_residual=deriv.residual,
                   signed_moment=mom.value, abs_moment=abs_moment(psi, q).value)
        return TracePrediction(exponent, True, coef, case, ing)
    r = cutoff_radius if cutoff_radius is not None else 0.25 * float(table.u_grid[-1])
    mp = one_sided_moment(psi, float(alpha) - 1.0, 1)
    mm = one_sided_moment(psi, float(alpha) - 1.0, -1)
    bp = regularized_bracket(table, n, k, 1, r)
    bm = regularized_bracket(table, n, k, -1, r)
    coef = norm * (mp.value * bp + mm.value * bm)
    ing.update(moment_plus=mp.value, moment_minus=mm.value, bracket_plus=bp, bracket_minus=bm,
               cutoff_radius=r)
    return TracePrediction(exponent, False, coef, case, ing)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepConfig:
    """Settings of an h-sweep.

    ``basis_factors`` scale the estimated basis size for the truncation
    study; the largest one is the production basis. ``horizon`` bounds the
    support radius of the test function (the flow times the trace sees).
    ``eps_widen`` repeats the largest-``h`` point with the window widened by
    that factor (capped halfway to the admissible limit); ``None`` skips it.
    """

    basis_margin: float = 1.2
    basis_factors: tuple[float, ...] = (0.85, 1.0, 1.15)
    convergence_rel_tol: float = 1e-3
    exponent_tol: float = 0.05
    coefficient_tol: float = 0.10
    dominance_min: float = 5.0
    min_points: int = 6
    min_decades: float = 1.5
    workers: int = 1
    horizon: float = 2.0
    eps_widen: float | None = 1.5


@dataclass
class SweepSample:
    h: float
    gamma: float
    count: int
    basis_size: int
    movement: float


def _sweep_point(args) -> SweepSample:
    m, phi, h, eps, cfg = args
    E_c = m.critical_energy
    N0 = basis_size_for(m, h, E_c, eps, margin=cfg.basis_margin)
    sizes = [max(64, int(round(f * N0))) for f in cfg.basis_factors]
    win = truncation_study(m, h, E_c, eps, sizes, rel_tol=cfg.convergence_rel_tol)
    g = gamma_trace(win, E_c, h, phi, require_converged=True)
    return SweepSample(float(h), g, len(win), win.basis_size, float(win.movements[-1][2]))


@dataclass
class SweepReport:
    samples: list[SweepSample]
    prediction: TracePrediction
    free_fit: FitResult
    pinned_fit: FitResult
    checks: dict
    verdict: bool

    def to_dict(self) -> dict:
        return {
            "samples": [asdict(s) for s in self.samples],
            "prediction": self.prediction.to_dict(),
            "free_fit": self.free_fit.to_dict(),
            "pinned_fit": self.pinned_fit.to_dict(),
            "checks": self.checks,
            "verdict": "pass" if self.verdict else "fail",
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "gamma", "count", "basis_size", "movement"])
            for s in self.samples:
                w.writerow([repr(s.h), repr(s.gamma), s.count, s.basis_size, repr(s.movement)])


def analyze_sweep(h: Sequence[float], gamma: Sequence[float], prediction: TracePrediction, n: int,
                  config: SweepConfig = SweepConfig()) -> tuple[FitResult, FitResult, dict, bool]:
    """Fit sweep samples and compare with ``prediction``.

    Fits run in ``lam = 1/h``: ``A lam^{-e} + B`` for power laws and
    ``(A log lam + B) lam^{-e}`` in the logarithmic case, with ``e`` the
    predicted exponent. Returns the free and pinned fits, the check table
    and the overall verdict.
    """
    h = np.asarray(h, dtype=float)
    order = np.argsort(1.0 / h)
    lam = 1.0 / h[order]
    samples = SweepSamples(lam, np.asarray(gamma, dtype=float)[order], None)
    e = float(prediction.exponent)
    model = "log-over-power" if prediction.has_log else "power-plus-constant"
    free = fit_power_log(samples, model, None, config.min_decades, config.min_points)
    pinned = fit_power_log(samples, model, -e, config.min_decades, config.min_points)
    coef = pinned.log_coefficient if prediction.has_log else pinned.coefficient
    ratio = coef / prediction.leading_coefficient
    checks = {
        "free_exponent": -free.exponent,
        "predicted_exponent": e,
        "exponent_ok": abs(-free.exponent - e) <= config.exponent_tol,
        "pinned_coefficient": coef,
        "predicted_coefficient": prediction.leading_coefficient,
        "coefficient_ratio": ratio,
        "coefficient_ok": abs(ratio - 1.0) <= config.coefficient_tol,
    }
    ok = checks["exponent_ok"] and checks["coefficient_ok"]
    if not prediction.has_log:
        lam_max = float(lam[-1])
        dom = abs(pinned.coefficient * lam_max ** (-e)) / max(abs(pinned.constant), 1e-300)
        checks["dominance"] = dom
        checks["dominance_ok"] = dom >= config.dominance_min
        if e < 0:
            ok = ok and checks["dominance_ok"]
    # regular background scale for reference
    checks["regular_background_order"] = 1 - n
    return free, pinned, checks, bool(ok)


def h_sweep_experiment(m: ModelProblem, phi: TestFunction, h_values: Sequence[float], eps: float | None = None,
                       config: SweepConfig = SweepConfig(), prediction: TracePrediction | None = None,
                       progress: Callable[[SweepSample], None] | None = None) -> SweepReport:
    """Spectral h-sweep: truncation study, window, trace and fit for each ``h``."""
    if m.n != 1:
        raise ValueError("spectral sweeps need one degree of freedom")
    h_values = sorted((float(h) for h in h_values), reverse=True)
    if len(h_values) < config.min_points:
        raise ValueError(f"need at least {config.min_points} h values")
    if math.log10(h_values[0] / h_values[-1]) < config.min_decades - 1e-9:
        raise ValueError(f"h values must span at least {config.min_decades} decades")
    eps = m.eps if eps is None else float(eps)
    if eps >= m.admissible_eps:
        raise ValueError(f"eps={eps} outside the admissible window {m.admissible_eps:.4g}")
    if phi.support_radius > config.horizon:
        raise ValueError(f"test function radius {phi.support_radius:g} exceeds the flow horizon {config.horizon:g}")
    if prediction is None:
        prediction = predicted_trace_leading(m, phi)
    jobs = [(m, phi, h, eps, config) for h in h_values]
    samples: list[SweepSample] = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for s in pool.map(_sweep_point, jobs):
                samples.append(s)
                if progress:
                    progress(s)
    else:
        for job in jobs:
            s = _sweep_point(job)
            samples.append(s)
            if progress:
                progress(s)
    free, pinned, checks, ok = analyze_sweep([s.h for s in samples], [s.gamma for s in samples],
                                             prediction, m.n, config)
    if config.eps_widen:
        checks["eps_robustness"] = _widened_window_check(m, phi, samples[0], eps, config)
    return SweepReport(samples, prediction, free, pinned, checks, ok)


def _widened_window_check(m: ModelProblem, phi: TestFunction, base: SweepSample, eps: float,
                          config: SweepConfig) -> dict:
    """Trace change when the energy window grows; informational, not part of the verdict."""
    wide = eps * config.eps_widen
    if wide >= m.admissible_eps:
        wide = 0.5 * (eps + m.admissible_eps)
    s = _sweep_point((m, phi, base.h, wide, config))
    return {"h": base.h, "eps": eps, "widened_eps": wide, "gamma": base.gamma, "widened_gamma": s.gamma,
            "relative_change": abs(s.gamma - base.gamma) / max(abs(base.gamma), 1e-300),
            "extra_eigenvalues": s.count - base.count}


# ---------------------------------------------------------------------------
# Consistency checks


@dataclass
class ShiftCheckReport:
    c: float
    h: float
    gamma_shifted_operator: float
    gamma_shifted_phi: float
    difference: float
    max_eigenvalue_shift_error: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


def subprincipal_shift_check(m: ModelProblem, c: float, phi: TestFunction, h: float,
                             eps: float | None = None, N: int | None = None) -> ShiftCheckReport:
    """Compare the trace of the operator with sub-principal constant ``c`` against
    the unshifted operator traced with ``phi(. + c)``.

    The shifted window is centred at ``E_c + c h`` so both sides sum over the
    same eigenvalue indices.
    """
    base = m.with_subprincipal(0.0)
    E_c = m.critical_energy
    eps = m.eps if eps is None else float(eps)
    if N is None:
        N = basis_size_for(base, h, E_c, eps)
    w0 = eigen_window(weyl_matrix(base, h, N), E_c, eps)
    w1 = eigen_window(weyl_matrix(base.with_subprincipal(c), h, N), E_c + c * h, eps)
    if len(w0) != len(w1):
        raise SweepError("shifted window lost or gained an eigenvalue at the edge")
    g_op = gamma_trace(w1, E_c, h, phi)
    g_phi = gamma_trace(w0, E_c, h, phi.shifted(-c))
    shift_err = float(np.max(np.abs(w1.eigenvalues - w0.eigenvalues - c * h))) if len(w0) else 0.0
    return ShiftCheckReport(float(c), float(h), g_op, g_phi, abs(g_op - g_phi), shift_err, len(w0))


def phase_space_area(m: ModelProblem, E_c: float, eps: float, radial: int = 4000, angular: int = 2048) -> float:
    """Area of ``{|p_0 - E_c| <= eps}`` by the midpoint rule in polar coordinates."""
    if m.n != 1:
        raise ValueError("area diagnostic needs one degree of freedom")
    from .weyl import window_radius
    R = window_radius(m, E_c, eps) * 1.02
    r = (np.arange(radial) + 0.5) * (R / radial)
    th = (np.arange(angular) + 0.5) * (2 * math.pi / angular)
    pts = np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1)
    inside = np.abs(m.principal(pts) - E_c) <= eps
    return float(np.sum(inside * r[:, None]) * (R / radial) * (2 * math.pi / angular))


def weyl_law_ratio(window: SpectralWindow, m: ModelProblem) -> float:
    """Eigenvalue count over ``area / (2 pi h)``; close to 1 for small ``h``."""
    area = phase_space_area(m, window.center, window.epsilon)
    return len(window) / (area / (2 * math.pi * window.h))
