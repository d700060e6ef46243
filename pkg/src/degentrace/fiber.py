"""Numerical oracles for model oscillatory integrals and fits of their sweeps.

All oracles work on the Fourier side: the integrands contain a rapidly
decaying profile ``f`` evaluated at ``lam * (phase)``, never an oscillatory
exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from ._quad import Estimate, bump, composite_legendre, gauss_jacobi_left, gauss_legendre
from .mellin import ExpansionPrediction, SeparableAmplitude, predict_leading_term

LAMBDA_POINTS_PER_DECADE = 12


class QuadratureError(RuntimeError):
    """Requested accuracy was not reached within the node budget."""


def decay_reach(f: Callable, tol: float = 1e-18, start: float = 1.0, limit: float = 1e4) -> float:
    """Smallest ``S`` (doubling from ``start``) with ``|f(+-s)| <= tol max|f|`` for ``s`` in ``[S, 2S]``."""
    probe = np.linspace(-start, start, 201)
    scale = max(float(np.max(np.abs(f(probe)))), 1e-300)
    S = start
    while S < limit:
        s = np.linspace(S, 2 * S, 64)
        if np.max(np.abs(f(s))) <= tol * scale and np.max(np.abs(f(-s))) <= tol * scale:
            return S
        S *= 2.0
    raise QuadratureError("profile does not decay within the search range")


def lambda_grid(lo: float = 1e3, decades: float = 3, per_decade: int = LAMBDA_POINTS_PER_DECADE) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(lo) + decades, int(round(decades * per_decade)) + 1)


# ---------------------------------------------------------------------------
# First chart


def eval_first_chart(lam: float, f_hat: Callable, g: Callable, k: int, support: float = 1.0,
                     order: int = 32, rtol: float = 1e-9, reach: float | None = None) -> Estimate:
    """``int_0^inf f_hat(lam eta^k) g(eta) d eta`` for ``g`` supported in ``[0, support]``.

    In the stretched variable ``v = lam^{1/k} eta`` the integral is
    ``lam^{-1/k} int f_hat(v^k) g(v lam^{-1/k}) dv``, whose integrand is smooth
    and negligible once ``v^k`` passes the decay reach of ``f_hat``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if reach is None:
        reach = decay_reach(f_hat)
    scale = lam ** (1.0 / k)
    top = min(scale * support, reach ** (1.0 / k))
    edges = np.linspace(0.0, top, 33)

    def rule(m):
        v, w = composite_legendre(edges, m)
        return float(np.dot(w, f_hat(v**k) * g(v / scale))) / scale

    fine, coarse = rule(order), rule(order // 2)
    err = abs(fine - coarse)
    if err > rtol * max(abs(fine), 1e-300) and err > 1e-300:
        raise QuadratureError(f"first-chart quadrature did not converge (error {err:.3g})")
    return Estimate(fine, err)


def first_chart_leading(f_hat_mellin: float, g0: float, k: int) -> float:
    """Leading coefficient ``c0 = (1/k) g(0) int_0^inf x^{1/k-1} f_hat(x) dx``."""
    return g0 * f_hat_mellin / k


# ---------------------------------------------------------------------------
# Elementary fiber integrals


def eval_fiber_integral(
    lam: float,
    f: Callable,
    b: Callable,
    n: int,
    k: int,
    y1_support: float = 1.0,
    y2_support: float = 1.0,
    *,
    reach: float | None = None,
    rtol: float = 1e-8,
) -> Estimate:
    """``int_0^inf y1^{2n-1} int f(lam y1^k y2) b(y1, y2) dy2 dy1``.

    The inner integral uses ``y2`` directly while ``f`` varies slowly over the
    support, and ``s = w y2`` (``w = lam y1^k``) once the support of ``b``
    reaches beyond the decay range of ``f``. The outer variable uses panels
    graded geometrically around the boundary layer ``y1 ~ lam^{-1/k}``. The
    error compares against a coarser rule.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if reach is None:
        reach = decay_reach(f)
    Y1, Y2 = float(y1_support), float(y2_support)

    def compute(outer_order: int, inner_order: int) -> float:
        ystar = lam ** (-1.0 / k)
        lo = min(1e-3 * ystar, 1e-3 * Y1)
        edges = np.concatenate([[0.0], np.geomspace(lo, Y1, 120)])
        y1, w1 = composite_legendre(edges, outer_order)
        w = lam * y1**k
        out = np.zeros_like(y1)
        x, wx = gauss_legendre(-1.0, 1.0, inner_order)
        direct = w * Y2 <= reach
        if np.any(direct):
            y2 = Y2 * x
            vals = f(np.outer(w[direct], y2)) * b(y1[direct, None], y2[None, :])
            out[direct] = vals @ (wx * Y2)
        far = ~direct
        if np.any(far):
            S = np.full(far.sum(), reach)
            s = S[:, None] * x[None, :]
            wf = w[far, None]
            vals = f(s) * b(y1[far, None], s / wf)
            out[far] = np.sum(vals * wx[None, :], axis=1) * S / w[far]
        return float(np.dot(w1, y1 ** (2 * n - 1) * out))

    fine = compute(40, 400)
    coarse = compute(30, 300)
    err = abs(fine - coarse)
    if err > rtol * max(abs(fine), 1e-300) and err > 1e-300:
        raise QuadratureError(f"requested relative error {rtol:g} unattainable (estimate {err / abs(fine):.3g})")
    return Estimate(fine, err)


def eval_coarea_integral(
    lam: float,
    f: Callable,
    lvol: Callable,
    rho: Callable,
    n: int,
    k: int,
    u_range: tuple[float, float] = (-1.0, 1.0),
    radius: float = 1.0,
    *,
    reach: float | None = None,
    order: int = 200,
) -> Estimate:
    """``int_{R^{2n}} f(lam pk(z)) rho(|z|) dz`` written through the level-set density.

    In polar coordinates this is ``int Lvol(u) G(lam u) du`` with
    ``G(v) = int_0^R r^{2n-1} rho(r) f(v r^k) dr``. For ``|v| > 1`` the
    substitution ``s = |v| r^k`` gives
    ``G(v) = (1/k) |v|^{-2n/k} int_0^{|v| R^k} s^{2n/k-1} rho((s/|v|)^{1/k}) f(sgn(v) s) ds``.
    Inverse square-root edges of ``Lvol`` at the ends of ``u_range`` are allowed.
    """
    if reach is None:
        reach = decay_reach(f)
    alpha = 2.0 * n / k

    def G(v, m):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.empty_like(v)
        av = np.abs(v)
        small = av <= 1.0
        if np.any(small):
            r, wr = gauss_legendre(0.0, radius, m)
            out[small] = (r ** (2 * n - 1) * rho(r) * f(np.outer(v[small], r**k))) @ wr
        big = ~small
        if np.any(big):
            S = np.minimum(reach, av[big] * radius**k)
            t, wt = gauss_jacobi_left(1.0, alpha - 1.0, m)
            s = S[:, None] * t[None, :]
            ws = wt[None, :] * S[:, None] ** alpha
            vals = rho((s / av[big, None]) ** (1.0 / k)) * f(np.sign(v[big])[:, None] * s)
            out[big] = np.sum(ws * vals, axis=1) / k * av[big] ** (-alpha)
        return out

    def compute(m_outer: int, m_inner: int) -> float:
        total = 0.0
        for side, end in ((1.0, u_range[1]), (-1.0, -u_range[0])):
            if end <= 0:
                continue
            # graded at u = 0; u = end (1 - (1 - s)^2) smooths square-root edges of Lvol
            edges = np.concatenate([[0.0], np.geomspace(min(1e-3 / lam, 1e-3), 1.0, 150)])
            s, ws = composite_legendre(edges, m_outer)
            u = end * (1.0 - (1.0 - s) ** 2)
            wu = ws * 2.0 * end * (1.0 - s)
            total += float(np.dot(wu, lvol(side * u) * G(side * lam * u, m_inner)))
        return total

    fine = compute(40, order)
    coarse = compute(30, order // 2)
    return Estimate(fine, abs(fine - coarse))


# ---------------------------------------------------------------------------
# Sweeps and fits


@dataclass(frozen=True)
class SweepSamples:
    """Oracle values over strictly increasing ``lam``."""

    lam: np.ndarray
    value: np.ndarray
    error: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if np.any(np.diff(lam) <= 0):
            raise ValueError("lambda values must be strictly increasing")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "value", np.asarray(self.value, dtype=float))
        err = np.zeros_like(lam) if self.error is None else np.asarray(self.error, dtype=float)
        object.__setattr__(self, "error", err)

    @classmethod
    def from_function(cls, fn: Callable[[float], Estimate | float], lams: Sequence[float]) -> "SweepSamples":
        vals, errs = [], []
        for lam in lams:
            out = fn(lam)
            if isinstance(out, tuple):
                vals.append(out[0])
                errs.append(out[1])
            else:
                vals.append(out)
                errs.append(0.0)
        return cls(np.asarray(lams, dtype=float), np.array(vals), np.array(errs))

    @property
    def decades(self) -> float:
        return float(np.log10(self.lam[-1] / self.lam[0]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("lambda,value,error\n")
            for row in zip(self.lam, self.value, self.error):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


FIT_MODELS = ("pure-power", "power-plus-constant", "log-over-power")


@dataclass(frozen=True)
class FitResult:
    """Parameters of a fitted model ``(log_coefficient log(lam) + coefficient) lam^exponent + constant``.

    ``pure-power`` and ``power-plus-constant`` have ``log_coefficient = 0``;
    ``log-over-power`` has ``constant = 0`` and reports its non-log
    coefficient in ``coefficient``. ``residual_rms`` is relative to the data.
    """

    model: str
    exponent: float
    coefficient: float
    log_coefficient: float
    constant: float
    residual_rms: float
    lam_range: tuple[float, float]

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.lam_range
        if np.any(lam < lo * (1 - 1e-12)) or np.any(lam > hi * (1 + 1e-12)):
            raise ValueError("fit refuses extrapolation beyond the sampled range")
        return (self.log_coefficient * np.log(lam) + self.coefficient) * lam**self.exponent + self.constant

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "log_coefficient": self.log_coefficient,
            "constant": self.constant,
            "residual_rms": self.residual_rms,
            "lam_range": list(self.lam_range),
        }


def _check_design(lam: np.ndarray, min_points: int = 8, min_decades: float = 2.0):
    if lam.size < min_points:
        raise ValueError(f"fit needs at least {min_points} points")
    if np.log10(lam[-1] / lam[0]) < min_decades - 1e-9:
        raise ValueError(f"fit needs samples over at least {min_decades:g} decades")


def _weighted_lstsq(design: np.ndarray, values: np.ndarray):
    # relative weighting: each row divided by |value|
    scale = np.where(values != 0, np.abs(values), 1.0)
    A = design / scale[:, None]
    rhs = values / scale
    col = np.linalg.norm(A, axis=0)
    if np.any(col == 0):
        raise ValueError("ill-conditioned design: a model function vanishes on the samples")
    As = A / col
    if np.linalg.cond(As) > 1e12:
        raise ValueError("ill-conditioned design: model functions are collinear on the sampled range")
    coef = np.linalg.lstsq(As, rhs, rcond=None)[0] / col
    resid = rhs - A @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def _basis(model: str, lam: np.ndarray, p: float) -> np.ndarray:
    if model == "pure-power":
        return lam[:, None] ** p
    if model == "power-plus-constant":
        return np.column_stack([lam**p, np.ones_like(lam)])
    if model == "log-over-power":
        return np.column_stack([np.log(lam) * lam**p, lam**p])
    raise ValueError(f"unknown model {model!r}; expected one of {FIT_MODELS}")


def fit_power_log(samples: SweepSamples, model: str, exponent: float | None = None,
                  min_decades: float = 2.0, min_points: int = 8) -> FitResult:
    """Least-squares fit of a power/log model with relative residuals.

    The exponent is free unless ``exponent`` pins it; linear parameters are
    eliminated (variable projection) so only the exponent is searched.
    """
    lam, val = samples.lam, samples.value
    _check_design(lam, min_points, min_decades)
    if model not in FIT_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {FIT_MODELS}")

    def solve(p):
        return _weighted_lstsq(_basis(model, lam, p), val)

    if exponent is None:
        if np.all(val > 0) or np.all(val < 0):
            slope = np.polyfit(np.log(lam), np.log(np.abs(val)), 1)[0]
        else:
            slope = -1.0
        scale = np.where(val != 0, np.abs(val), 1.0)

        def resid(pv):
            design = _basis(model, lam, pv[0])
            coef = np.linalg.lstsq(design / scale[:, None], val / scale, rcond=None)[0]
            return val / scale - (design / scale[:, None]) @ coef

        opt = least_squares(resid, x0=[slope], x_scale=[0.1], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        p = float(opt.x[0])
    else:
        p = float(exponent)
    coef, rms = solve(p)
    if model == "pure-power":
        a, c, l = coef[0], 0.0, 0.0
    elif model == "power-plus-constant":
        a, c, l = coef[0], coef[1], 0.0
    else:
        l, a, c = coef[0], coef[1], 0.0
    return FitResult(model, p, float(a), float(l), float(c), rms, (float(lam[0]), float(lam[-1])))


def fit_terms(samples: SweepSamples, terms: Sequence[tuple[float, int]]) -> tuple[np.ndarray, float]:
    """Fit ``sum_j c_j lam^{-power_j} log(lam)^{log_j}`` with relative residuals.

    Returns the coefficients in the order of ``terms`` and the rms residual.
    """
    lam = samples.lam
    design = np.column_stack([lam ** (-float(p)) * np.log(lam) ** m for p, m in terms])
    return _weighted_lstsq(design, samples.value)


@dataclass
class VerificationReport:
    passed: bool
    fitted_constant: float
    constant_spread: float
    relative_error_at_top: float
    per_point: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "fitted_constant": self.fitted_constant,
            "constant_spread": self.constant_spread,
            "relative_error_at_top": self.relative_error_at_top,
            "points": self.per_point,
        }


def verify_against_prediction(samples: SweepSamples, pred: ExpansionPrediction, tol: float = 0.02,
                              stability: float = 0.2) -> VerificationReport:
    """Compare oracle samples with the leading prediction.

    The residual ``oracle - leading`` is divided by the remainder envelope
    ``lam^{-remainder}`` (times ``log lam`` if flagged). The constant ``C``
    is fitted over the top decade; the check passes when the ratios there
    stay within ``stability`` of ``C`` and the relative error of the leading
    term at the largest ``lam`` is below ``tol``.
    """
    lam, val = samples.lam, samples.value
    if lam[-1] < 1e4 * (1 - 1e-12):
        raise ValueError("largest lambda must be at least 1e4 for the asymptotic regime")
    lead = pred(lam)
    resid = val - lead
    ratio = resid / pred.remainder_envelope(lam)
    top = lam >= lam[-1] / 10 * (1 - 1e-12)
    C = float(np.mean(ratio[top]))
    spread = float(np.max(np.abs(ratio[top] - C)) / max(abs(C), 1e-300))
    rel = np.abs(resid) / np.maximum(np.abs(val), 1e-300)
    per_point = []
    for i in range(lam.size):
        ok = abs(ratio[i]) <= abs(C) * (1 + stability) if top[i] else bool(rel[i] <= tol * 10)
        per_point.append({"lambda": float(lam[i]), "value": float(val[i]), "leading": float(lead[i]),
                          "ratio": float(ratio[i]), "relative_error": float(rel[i]), "pass": bool(ok)})
    passed = spread <= stability and rel[-1] <= tol
    return VerificationReport(bool(passed), C, spread, float(rel[-1]), per_point)


# ---------------------------------------------------------------------------
# Standard sweep


@dataclass(frozen=True)
class FiberSweepConfig:
    """Gaussian profile ``exp(-s^2)`` against the tensor bump ``beta(y1/Y) beta(y2/Y)``."""

    n: int = 1
    k: int = 3
    support: float = 2.0
    lam_lo: float = 1e3
    decades: float = 3.0
    per_decade: int = LAMBDA_POINTS_PER_DECADE
    tol: float = 0.02
    stability: float = 0.2


def standard_amplitude(support: float = 2.0) -> SeparableAmplitude:
    Y = float(support)

    def f(s):
        return np.exp(-np.asarray(s, dtype=float) ** 2)

    def b(y1, y2):
        return bump(np.asarray(y1, dtype=float) / Y) * bump(np.asarray(y2, dtype=float) / Y)

    return SeparableAmplitude(f, b, Y, Y)


def fiber_sweep(cfg: FiberSweepConfig = FiberSweepConfig()) -> tuple[SweepSamples, ExpansionPrediction, dict]:
    """Oracle sweep, prediction and a summary of fits for the standard amplitude.

    The summary holds the free pure-power exponent and, in the logarithmic
    case, the pinned log-model coefficient ratio and the residual ratio of
    the pure-power against the log model; otherwise the remainder-envelope
    verification.
    """
    amp = standard_amplitude(cfg.support)
    pred = predict_leading_term(cfg.n, cfg.k, amp)
    lams = lambda_grid(cfg.lam_lo, cfg.decades, cfg.per_decade)
    samples = SweepSamples.from_function(
        lambda lam: eval_fiber_integral(lam, amp.f, amp.b, cfg.n, cfg.k, amp.y1_support, amp.y2_support), lams)
    free = fit_power_log(samples, "pure-power")
    summary: dict = {"n": cfg.n, "k": cfg.k, "free_exponent": free.exponent,
                     "predicted_exponent": -float(pred.leading.power),
                     "predicted_coefficient": pred.leading.coefficient}
    if pred.leading.log_exponent:
        q = int(pred.leading.power)
        logfit = fit_power_log(samples, "log-over-power", exponent=-q)
        summary.update(log_coefficient=logfit.log_coefficient,
                       coefficient_ratio=logfit.log_coefficient / pred.leading.coefficient,
                       residual_ratio=free.residual_rms / max(logfit.residual_rms, 1e-300),
                       log_fit=logfit.to_dict())
        summary["passed"] = bool(abs(summary["coefficient_ratio"] - 1) <= 0.05 and summary["residual_ratio"] >= 10)
    elif 2 * cfg.n > cfg.k:
        # the regular term lam^{-1} dominates; fit it together with the singular one
        alpha = float(pred.leading.power)
        terms = [(1.0, 0), (alpha, 0), ((2 * cfg.n + 1) / cfg.k, 0), (2.0, 0)]
        coef, rms = fit_terms(samples, terms)
        ratio = float(coef[1] / pred.leading.coefficient)
        summary.update(terms=[list(t) for t in terms], term_coefficients=coef.tolist(), term_rms=rms,
                       coefficient_ratio=ratio, passed=bool(abs(ratio - 1) <= 0.05))
    else:
        rep = verify_against_prediction(samples, pred, cfg.tol, cfg.stability)
        summary.update(verification=rep.to_dict(), passed=rep.passed)
    summary["free_fit"] = free.to_dict()
    return samples, pred, summary
