"""Geometry on the unit sphere: directional integrals, level-set densities and
regularized brackets of the density against homogeneous distributions.

``Lvol(u)`` is the co-area density of ``pk`` restricted to the sphere
``S^{2n-1}``: ``int_S F(pk(theta)) dtheta = int F(u) Lvol(u) du``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq
from scipy.stats import norm, qmc

from . import _quad
from ._quad import Estimate, gauss_legendre
from .mellin import finite_part_normalization
from .symbol import PolynomialSymbol


class MeasureError(RuntimeError):
    """A level-set measure cannot be computed reliably."""


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere ``S^dim`` in ``R^{dim+1}``."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / math.gamma((dim + 1) / 2)


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class MeasureTable:
    """Sampled density ``Lvol`` and cumulative volume ``V(u) = |{pk <= u}|``.

    ``method`` is one of ``exact-roots``, ``co-area-sampling`` or ``synthetic``.
    """

    u_grid: np.ndarray
    lvol: np.ndarray
    cumulative: np.ndarray
    method: str
    sample_count: int = 0

    def __post_init__(self):
        u = np.asarray(self.u_grid, dtype=float)
        lv = np.asarray(self.lvol, dtype=float)
        cu = np.asarray(self.cumulative, dtype=float)
        if not (u.shape == lv.shape == cu.shape and u.ndim == 1):
            raise ValueError("table columns must be 1-d arrays of equal length")
        if np.any(np.diff(u) <= 0):
            raise ValueError("u_grid must be strictly ascending")
        if np.any(lv < 0):
            raise ValueError("lvol must be nonnegative")
        for name, arr in (("u_grid", u), ("lvol", lv), ("cumulative", cu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1] - self.cumulative[0])

    def cumulative_interpolant(self):
        if np.all(np.isfinite(self.lvol)):
            return CubicHermiteSpline(self.u_grid, self.cumulative, self.lvol)
        return PchipInterpolator(self.u_grid, self.cumulative)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# method={self.method} sample_count={self.sample_count}\n")
            w = csv.writer(fh)
            w.writerow(["u", "lvol", "cumulative"])
            for row in zip(self.u_grid, self.lvol, self.cumulative):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "MeasureTable":
        path = Path(path)
        meta = {"method": "synthetic", "sample_count": "0"}
        rows = []
        with path.open() as fh:
            for line in fh:
                if line.startswith("#"):
                    for tok in line[1:].split():
                        if "=" in tok:
                            key, val = tok.split("=", 1)
                            meta[key] = val
                    continue
                if line.startswith("u,"):
                    continue
                if line.strip():
                    rows.append([float(x) for x in line.split(",")])
        data = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2], meta["method"], int(meta["sample_count"]))


def synthetic_table(lvol: Callable, u_grid, start_volume: float = 0.0) -> MeasureTable:
    """Table from an explicit density, with the cumulative column by cell-wise quadrature."""
    u = np.asarray(u_grid, dtype=float)
    x, w = gauss_legendre(-1.0, 1.0, 12)
    a, b = u[:-1, None], u[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    cells = (0.5 * (b - a) * w * lvol(nodes)).sum(axis=1)
    cum = start_volume + np.concatenate([[0.0], np.cumsum(cells)])
    return MeasureTable(u, np.asarray(lvol(u), dtype=float), cum, "synthetic", 0)


# ---------------------------------------------------------------------------
# One-angle restriction helpers


class _CircleRestriction:
    def __init__(self, pk: PolynomialSymbol, grid: int = 8192):
        if pk.num_dof != 1:
            raise ValueError("circle restriction needs one degree of freedom")
        self.pk = pk
        self.theta = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        self.values = self(self.theta)
        self.step = 2 * np.pi / grid

    def _points(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    def __call__(self, t):
        return self.pk(self._points(t))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        g = self.pk.gradient(self._points(t))
        return -np.sin(t) * g[..., 0] + np.cos(t) * g[..., 1]

    def taylor(self, a: float, order: int = 16) -> np.ndarray:
        """Normalized Taylor coefficients of ``g`` at ``a`` (exact polynomial jets)."""
        c = np.zeros(order + 1)
        s = np.zeros(order + 1)
        for j in range(order + 1):
            # derivatives of cos and sin cycle with period 4
            c[j] = math.cos(a + 0.5 * math.pi * j) / math.factorial(j)
            s[j] = math.sin(a + 0.5 * math.pi * j) / math.factorial(j)
        total = np.zeros(order + 1)
        for (ex, ey), coeff in self.pk.terms.items():
            mono = np.zeros(order + 1)
            mono[0] = coeff
            for _ in range(ex):
                mono = _quad.jet_mul(mono, c)
            for _ in range(ey):
                mono = _quad.jet_mul(mono, s)
            total += mono
        return total

    def near_root(self, a: float, direction: float, s, switch: float = 0.05):
        """``g(a + direction s)`` with the root residual ``g(a)`` removed for small ``s``."""
        s = np.asarray(s, dtype=float)
        out = self(a + direction * s)
        small = s < switch
        if np.any(small):
            coef = self.taylor(a) * direction ** np.arange(17)
            coef[0] = 0.0
            out[small] = np.polynomial.polynomial.polyval(s[small], coef)
        return out

    def roots(self, level: float) -> np.ndarray:
        """All solutions of ``g(theta) = level`` in [0, 2 pi), ascending."""
        return self.roots_many(np.array([level]))[0]

    def roots_many(self, levels: np.ndarray, chunk: int = 256) -> list[np.ndarray]:
        """Roots for a batch of levels: grid sign changes, then safeguarded Newton."""
        levels = np.asarray(levels, dtype=float)
        out: list[np.ndarray] = []
        for start in range(0, levels.size, chunk):
            lv = levels[start : start + chunk]
            v = self.values[:, None] - lv[None, :]
            nxt = np.roll(v, -1, axis=0)
            ii, jj = np.nonzero(v * nxt < 0.0)
            ei, ej = np.nonzero(v == 0.0)
            a = self.theta[ii]
            b = a + self.step
            fa = v[ii, jj]
            target = lv[jj]
            x = a - fa * (b - a) / (nxt[ii, jj] - fa)
            for _ in range(60):
                fx = self(x) - target
                dx = self.derivative(x)
                with np.errstate(divide="ignore", invalid="ignore"):
                    newton = x - fx / dx
                left = np.sign(fx) == np.sign(fa)
                a = np.where(left, x, a)
                fa = np.where(left, fx, fa)
                b = np.where(left, b, x)
                bad = ~np.isfinite(newton) | (newton <= a) | (newton >= b)
                x_new = np.where(bad, 0.5 * (a + b), newton)
                done = np.all(np.abs(x_new - x) <= 1e-15 * (1 + np.abs(x)))
                x = x_new
                if done:
                    break
            if x.size:
                resid = np.abs(self(x) - target)
                bound = 1e-10 * max(1.0, np.max(np.abs(self.values)))
                if np.any(resid > bound):
                    bad_level = float(target[np.argmax(resid)])
                    raise MeasureError(f"root polishing failed at u={bad_level!r}")
            for j in range(lv.size):
                r = np.concatenate([x[jj == j], self.theta[ei[ej == j]]])
                out.append(np.sort(np.mod(r, 2 * np.pi)))
        return out


def _endpoint_rule(length: float, alpha: float, order: int):
    # theta = v**beta near a simple zero makes |g|^-alpha dtheta bounded
    beta = 1.0 / (1.0 - alpha)
    vmax = length ** (1.0 / beta)
    v, w = gauss_legendre(0.0, vmax, order)
    return v**beta, w * beta * v ** (beta - 1.0)


def _arc_integral(g: _CircleRestriction, a: float, b: float, alpha: float, order: int, root_a: bool, root_b: bool) -> float:
    mid = 0.5 * (a + b)
    total = 0.0
    for start, length, direction, is_root in ((a, mid - a, 1.0, root_a), (b, b - mid, -1.0, root_b)):
        if is_root:
            s, w = _endpoint_rule(length, alpha, order)
            vals = g.near_root(start, direction, s)
        else:
            s, w = gauss_legendre(0.0, length, order)
            vals = g(start + direction * s)
        total += float(np.dot(w, np.abs(vals) ** (-alpha)))
    return total


def _refined(fn: Callable[[int], float], tol: float, start: int = 16, max_order: int = 1024) -> Estimate:
    order = start
    prev = fn(order)
    while True:
        order *= 2
        cur = fn(order)
        err = abs(cur - prev)
        if err <= tol or order >= max_order:
            return Estimate(cur, err)
        prev = cur


def _directional_circle(pk: PolynomialSymbol, sign: int, alpha: float, tol: float) -> Estimate:
    g = _CircleRestriction(pk)
    roots = g.roots(0.0)
    if roots.size == 0:
        if np.sign(g.values[0]) != sign:
            return Estimate(0.0, 0.0)
        return _refined(lambda m: _arc_integral(g, 0.0, 2 * np.pi, alpha, m, False, False), tol)
    arcs = [(roots[i], roots[i + 1]) for i in range(roots.size - 1)] + [(roots[-1], roots[0] + 2 * np.pi)]
    arcs = [(a, b) for a, b in arcs if np.sign(g(0.5 * (a + b))) == sign]

    def total(order):
        return sum(_arc_integral(g, a, b, alpha, order, True, True) for a, b in arcs)

    return _refined(total, tol)


def _sphere_product_rule(dim: int, m: int):
    """Product rule on S^dim from nested polar angles (Legendre in each angle)."""
    if dim == 1:
        t = 2 * np.pi * np.arange(2 * m) / (2 * m)
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(2 * m, np.pi / m)
    sub, sw = _sphere_product_rule(dim - 1, m)
    g, gw = gauss_legendre(0.0, np.pi, m)
    pts = np.concatenate(
        [np.column_stack([np.full(len(sub), np.cos(gi)), np.sin(gi) * sub]) for gi in g]
    )
    wts = np.concatenate([gwi * np.sin(gi) ** (dim - 1) * sw for gi, gwi in zip(g, gw)])
    return pts, wts


def _directional_sliced(pk: PolynomialSymbol, sign: int, alpha: float, tol: float, outer: int) -> Estimate:
    dim = pk.dim - 1  # sphere S^dim
    beta_grid = np.linspace(0.0, np.pi, 257)

    def one(m_outer: int, order: int) -> float:
        w_pts, w_wts = _sphere_product_rule(dim - 1, m_outer)
        e = np.zeros(pk.dim)
        e[-1] = 1.0
        total = 0.0
        for wv, ww in zip(w_pts, w_wts):
            direction = np.concatenate([wv, [0.0]])

            def h(b, direction=direction):
                b = np.asarray(b, dtype=float)
                return pk(np.cos(b)[..., None] * e + np.sin(b)[..., None] * direction)

            vals = h(beta_grid)
            cuts = [0.0]
            flags = [False]
            for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
                cuts.append(brentq(h, beta_grid[i], beta_grid[i + 1], xtol=1e-15))
                flags.append(True)
            cuts.append(np.pi)
            flags.append(False)
            acc = 0.0
            for (a, ra), (b, rb) in zip(zip(cuts, flags), zip(cuts[1:], flags[1:])):
                if np.sign(h(0.5 * (a + b))) != sign:
                    continue
                mid = 0.5 * (a + b)
                for start, length, direc, is_root in ((a, mid - a, 1.0, ra), (b, b - mid, -1.0, rb)):
                    if is_root:
                        s, wq = _endpoint_rule(length, alpha, order)
                    else:
                        s, wq = gauss_legendre(0.0, length, order)
                    bb = start + direc * s
                    acc += float(np.dot(wq * np.sin(bb) ** (dim - 1), np.abs(h(bb)) ** (-alpha)))
            total += ww * acc
        return total

    fine = one(outer, 48)
    coarse = one(outer // 2, 48)
    return Estimate(fine, abs(fine - coarse))


def directional_integral(pk: PolynomialSymbol, sign: int, n: int, k: int, tol: float = 1e-10, *, outer: int = 24) -> Estimate:
    """``int_{sign pk >= 0} |pk(theta)|^{-2n/k} dtheta`` over ``S^{2n-1}``.

    Near each simple zero the substitution ``theta = v^{k/(k-2n)}`` removes the
    endpoint singularity. For ``n >= 2`` the sphere is sliced into great
    semicircles through a pole; ``outer`` sets the resolution of the product
    rule on the space of slices and the reported error compares it with half
    that resolution.
    """
    if k <= 2 * n:
        raise ValueError("divergent directional integral - use case (2)/(3) path")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if pk.num_dof != n or not pk.is_homogeneous(k):
        raise ValueError("pk must be homogeneous of degree k in n degrees of freedom")
    alpha = 2.0 * n / k
    if n == 1:
        return _directional_circle(pk, sign, alpha, tol)
    return _directional_sliced(pk, sign, alpha, tol, outer)


# ---------------------------------------------------------------------------
# Level-set densities


def _lvol_circle(pk: PolynomialSymbol, u_grid: np.ndarray) -> MeasureTable:
    g = _CircleRestriction(pk)
    lo, hi = float(g.values.min()), float(g.values.max())
    if hi - lo <= 1e-12 * (1.0 + abs(hi)):
        inside = u_grid[(u_grid >= lo - 1e-12) & (u_grid <= hi + 1e-12)]
        u = float(inside[0]) if inside.size else lo
        raise MeasureError(f"pk is constant on the circle; no level-set roots at u={u!r}")
    lvol = np.empty_like(u_grid)
    cum = np.empty_like(u_grid)
    for i, (u, r) in enumerate(zip(u_grid, g.roots_many(u_grid))):
        if r.size == 0:
            lvol[i] = 0.0
            cum[i] = 2 * np.pi if g.values[0] < u else 0.0
            continue
        slope = np.abs(g.derivative(r))
        tangent = slope < 1e-9
        lvol[i] = np.inf if np.any(tangent) else float(np.sum(1.0 / slope))
        ext = np.concatenate([r, [r[0] + 2 * np.pi]])
        mids = 0.5 * (ext[:-1] + ext[1:])
        below = g(mids) < u
        cum[i] = float(np.sum(np.diff(ext)[below]))
    # the extremes are attained on a measure-zero set
    cum[u_grid >= hi] = 2 * np.pi
    cum[u_grid < lo] = 0.0
    return MeasureTable(u_grid, lvol, cum, "exact-roots", 0)


def _sphere_samples(dim: int, samples: int, seed: int) -> np.ndarray:
    m = int(math.ceil(math.log2(samples)))
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)
    g = norm.ppf(np.clip(sob, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _local_slope(x: np.ndarray, y: np.ndarray, degree: int) -> float:
    scale = max(np.max(np.abs(x)), 1e-300)
    coef = np.polynomial.polynomial.polyfit(x / scale, y, degree)
    return coef[1] / scale


def _lvol_sampled(pk: PolynomialSymbol, u_grid: np.ndarray, samples: int, seed: int) -> MeasureTable:
    if samples < 50 * u_grid.size:
        raise MeasureError(f"sample_count {samples} too small for a grid of {u_grid.size} points")
    pts = _sphere_samples(pk.dim, samples, seed)
    vals = np.sort(pk(pts))
    count = vals.size
    area = sphere_area(pk.dim - 1)

    def V(u):
        return area * np.searchsorted(vals, u, side="right") / count

    cum = V(u_grid)
    lo, hi = vals[0], vals[-1]
    half = 0.05 * (hi - lo)
    lvol = np.empty_like(u_grid)
    for i, u in enumerate(u_grid):
        a, b = max(u - half, lo), min(u + half, hi)
        if b <= a:
            lvol[i] = 0.0
            continue
        s = np.linspace(a, b, 41)
        lvol[i] = _local_slope(s - u, V(s), 2)
    lvol = np.clip(lvol, 0.0, None)
    lvol[(u_grid < lo) | (u_grid > hi)] = 0.0
    return MeasureTable(u_grid, lvol, cum, "co-area-sampling", count)


def lvol_table(pk: PolynomialSymbol, n: int, u_grid, samples: int = 2**18, seed: int = 0) -> MeasureTable:
    """Level-set density of ``pk`` on ``S^{2n-1}`` over ``u_grid``.

    One degree of freedom uses exact root summation ``sum 1/|d_theta pk|``;
    more degrees of freedom use scrambled Sobol sphere samples for ``V`` and
    a local quadratic fit (half-width 5% of the value range) for ``Lvol``.
    """
    u_grid = np.asarray(u_grid, dtype=float)
    if pk.num_dof != n:
        raise ValueError("pk dimension does not match n")
    if n == 1:
        return _lvol_circle(pk, u_grid)
    return _lvol_sampled(pk, u_grid, samples, seed)


class DerivativeEstimate(NamedTuple):
    value: float
    residual: float
    half_width: float
    degree: int


def _stencil(table: MeasureTable, half_width: float):
    u = table.u_grid
    if u[0] > -half_width or u[-1] < half_width:
        raise MeasureError("stencil exits the table range")
    sel = np.abs(u) <= half_width
    lv = table.lvol[sel]
    if not np.all(np.isfinite(lv)):
        raise MeasureError("stencil exits the smooth neighborhood (non-finite density)")
    return u[sel], lv


def lvol_derivative_at_zero(
    table: MeasureTable,
    order: int,
    half_width: float | None = None,
    degree: int | None = None,
    max_residual: float | None = None,
) -> DerivativeEstimate:
    """``order``-th derivative of ``Lvol`` at ``u = 0`` by a local polynomial fit.

    The stencil is ``|u| <= half_width`` (default 5% of the table range); the
    residual is the rms misfit relative to the largest density in the stencil.
    """
    if order < 0 or order > 4:
        raise ValueError("order must be in 0..4")
    sampled = table.method == "co-area-sampling"
    if half_width is None:
        half_width = 0.05 * (table.u_grid[-1] - table.u_grid[0])
    if degree is None:
        degree = order + (2 if sampled else 8)
    if max_residual is None:
        max_residual = 5e-2 if sampled else 1e-8
    u, lv = _stencil(table, half_width)
    if u.size < degree + 4:
        raise MeasureError("too few table points inside the stencil")
    coef = np.polynomial.polynomial.polyfit(u / half_width, lv, degree)
    fit = np.polynomial.polynomial.polyval(u / half_width, coef)
    scale = max(np.max(np.abs(lv)), 1e-300)
    residual = float(np.sqrt(np.mean((fit - lv) ** 2)) / scale)
    if residual > max_residual:
        raise MeasureError(f"noisy table: fit residual {residual:.3g} above bound {max_residual:.3g}")
    value = coef[order] * math.factorial(order) / half_width**order
    return DerivativeEstimate(float(value), residual, float(half_width), int(degree))


def regularized_bracket(
    table: MeasureTable,
    n: int,
    k: int,
    sign: int,
    cutoff_radius: float,
    degree: int = 16,
    max_residual: float = 1e-9,
) -> float:
    """Pairing of ``Lvol(sign u)`` on ``u > 0`` with the normalized ``2n``-th
    derivative of ``u_+^{2n - 2n/k}``.

    With ``alpha = 2n/k`` and ``N = prod_{j=1..2n} 1/(j - alpha)`` this is

        N int_0^r u^{2n-alpha} d^{2n}/du^{2n} [chi(u) Lvol(sign u)] du
          + int u^{-alpha} (1 - chi(u)) Lvol(sign u) du,

    where ``chi`` is the plateau cutoff of radius ``r``. The first part uses a
    polynomial fit of the table on ``[-r, r]`` and Taylor jets; the second is
    integrated by parts against the cumulative column.
    """
    alpha = 2.0 * n / k
    if 2 * n <= k:
        raise ValueError("regularized bracket needs 2n > k")
    if float(alpha).is_integer():
        raise ValueError("2n/k is an integer: logarithmic case (2)")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r = float(cutoff_radius)
    order = 2 * n

    # near part
    u, lv = _stencil(table, r)
    if u.size < degree + 8:
        raise MeasureError("too few table points inside the cutoff radius")
    coef = np.polynomial.polynomial.polyfit(u / r, lv, degree)
    fit = np.polynomial.polynomial.polyval(u / r, coef)
    scale = max(np.max(np.abs(lv)), 1e-300)
    resid = float(np.sqrt(np.mean((fit - lv) ** 2)) / scale)
    if resid > max_residual:
        raise MeasureError(f"non-smooth table near 0: fit residual {resid:.3g}")
    # L(sign u) in the scaled variable s = u / r
    coef_signed = coef * float(sign) ** np.arange(coef.size)
    # Jacobi weights on the plateau, Legendre panels across the cutoff transition
    t0, w0 = _quad.gauss_jacobi_left(0.5, order - alpha, 40)
    t1, w1 = _quad.composite_legendre(np.linspace(0.5, 1.0, 41), 16)
    t = np.concatenate([t0, t1])
    w = np.concatenate([w0, w1 * t1 ** (order - alpha)])
    lj = _quad.polynomial_jet(coef_signed, t, order)
    cj = _quad.plateau_cutoff_jet(t, 1.0, order)
    top = _quad.jet_mul(lj, cj)[order] * math.factorial(order)
    near = finite_part_normalization(alpha, order) * float(np.dot(w, top)) * r ** (1.0 - alpha)

    # far part: int w(U) dV(U) with w(U) = |U|^-alpha (1 - chi(U)) on the sign side,
    # integrated by parts; boundary terms vanish at |U| = r/2 and at V = 0.
    V = table.cumulative_interpolant()
    ug = table.u_grid
    if sign > 0:
        edges = np.concatenate([[0.5 * r], ug[ug > 0.5 * r]])
    else:
        edges = np.concatenate([ug[ug < -0.5 * r], [-0.5 * r]])
    if edges.size < 2:
        return near
    x, wq = _quad.composite_legendre(edges, 8)
    mag = np.abs(x)
    jet = _quad.plateau_cutoff_jet(mag, r, 1)
    dweight = -alpha * mag ** (-alpha - 1.0) * (1.0 - jet[0]) - mag ** (-alpha) * jet[1]
    dweight_dU = dweight * np.sign(x)
    integral = -float(np.dot(wq, V(x) * dweight_dU))
    if sign > 0:
        end = edges[-1]
        boundary = end ** (-alpha) * (1.0 - _quad.plateau_cutoff(end, r)) * float(V(end))
    else:
        start = edges[0]
        boundary = -abs(start) ** (-alpha) * (1.0 - _quad.plateau_cutoff(start, r)) * float(V(start))
    return near + integral + boundary
