"""Test functions with compactly supported Fourier transform, and their moments.

Convention: ``phi_hat(tau) = int phi(t) exp(-i t tau) dt`` and
``phi(t) = (2 pi)^{-1} int phi_hat(tau) exp(i t tau) dtau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from ._quad import Estimate, bump, gauss_jacobi_left, gauss_legendre

_CHUNK = 4096


@dataclass(frozen=True)
class TestFunction:
    """``phi_a(t) = phi_0(t - a)`` where ``phi_0_hat`` is the bump ``exp(-1/(1-(tau/R)^2))``.

    Parameters
    ----------
    support_radius : float
        ``R``; the Fourier transform vanishes outside ``[-R, R]``.
    shift : float
        Time shift ``a``; ``a = 0`` gives an even function.
    nodes : int
        Trapezoid nodes on ``[0, R)`` used for the Fourier inversion.
    """

    __test__ = False  # not a pytest class

    support_radius: float = 1.0
    shift: float = 0.0
    nodes: int = 3000
    _rule: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")
        # Trapezoid rule on [-R, R]: by Poisson summation its only error is the
        # aliases phi(t + 2 pi m / step), which are negligible for |t| << 2 pi nodes / R.
        step = self.support_radius / self.nodes
        tau = step * np.arange(self.nodes)
        w = np.full(self.nodes, step / math.pi)
        w[0] *= 0.5
        object.__setattr__(self, "_rule", (tau, w * self.hat_profile(tau)))

    def hat_profile(self, tau):
        """The even bump ``phi_0_hat``."""
        return bump(np.asarray(tau, dtype=float) / self.support_radius)

    def hat(self, tau):
        """Fourier transform of the shifted function, ``exp(-i a tau) phi_0_hat(tau)``."""
        tau = np.asarray(tau, dtype=float)
        return np.exp(-1j * self.shift * tau) * self.hat_profile(tau)

    def shifted(self, delta: float) -> "TestFunction":
        """The test function ``t -> phi(t - delta)``."""
        return TestFunction(self.support_radius, self.shift + delta, self.nodes)

    def __call__(self, t):
        return eval_testfn(self, t)

    def decay_envelope(self, t):
        """Bound ``R min(1, u^{-3/4}) exp(-sqrt(u))`` with ``u = R |t - a|``.

        The saddle point of the inversion integral at the edge of the bump
        gives the rate; the constant was checked numerically (the ratio stays
        near 0.63).
        """
        u = self.support_radius * np.abs(np.asarray(t, dtype=float) - self.shift)
        return self.support_radius * np.minimum(1.0, np.maximum(u, 1e-300) ** -0.75) * np.exp(-np.sqrt(u))

    def tail_cutoff(self, tol: float = 1e-16, power: float = 0.0) -> float:
        """Distance from the shift beyond which ``int |t|^power |phi|`` is below ``tol`` (relative).

        Solves ``2 u^{power - 1/4} exp(-sqrt(u)) = tol`` in ``u = R s`` by fixed-point iteration.
        """
        L = math.log(1.0 / tol)
        u = L * L
        for _ in range(30):
            u = (L + math.log(2.0) + max(power - 0.25, 0.0) * math.log(u)) ** 2
        return u / self.support_radius


def eval_testfn(f: TestFunction, t):
    """Evaluate ``phi`` at ``t`` by trapezoidal Fourier inversion.

    Since ``phi_0_hat`` is even, ``phi_0(s) = pi^{-1} int_0^R phi_0_hat cos(s tau) dtau``.
    """
    t = np.asarray(t, dtype=float)
    s = (t - f.shift).ravel()
    tau, w = f._rule
    out = np.empty_like(s)
    for start in range(0, s.size, _CHUNK):
        block = s[start : start + _CHUNK]
        out[start : start + _CHUNK] = np.cos(np.outer(block, tau)) @ w
    return out.reshape(t.shape) if t.ndim else float(out[0])


def _moment_rule(f: TestFunction, alpha: float, sign: int, order: int):
    # Panels in t: a Jacobi panel at the origin, then Legendre panels of
    # width pi/R out to the decay cutoff measured from the far side of a.
    width = math.pi / f.support_radius
    reach = abs(f.shift) + f.tail_cutoff(power=max(alpha, 0.0))
    if reach > 0.5 * f.nodes * width:
        raise ValueError("moment range reaches the aliasing distance of the inversion rule; raise nodes")
    edges = np.arange(width, reach + width, width)
    t0, w0 = gauss_jacobi_left(width, alpha, order)
    nodes = [t0]
    weights = [w0]
    x, w = gauss_legendre(-1.0, 1.0, order)
    a = edges[:-1, None]
    b = edges[1:, None]
    tt = 0.5 * (a + b) + 0.5 * (b - a) * x
    nodes.append(tt.ravel())
    weights.append((0.5 * (b - a) * w * tt**alpha).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def one_sided_moment(f: TestFunction, alpha: float, sign: int = 1) -> Estimate:
    """``int_0^inf t^alpha phi(sign t) dt`` with an error estimate.

    The integrable endpoint power is absorbed into Gauss-Jacobi weights; the
    remaining range is covered by Legendre panels up to the point where the
    decay of ``phi`` makes the tail negligible.
    """
    if not alpha > -1:
        raise ValueError("alpha must exceed -1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    values = []
    reach = abs(f.shift) + f.tail_cutoff(power=max(alpha, 0.0))
    for order in (16, 24):
        t, w = _moment_rule(f, alpha, sign, order)
        values.append(float(np.dot(w, eval_testfn(f, sign * t))))
    # rounding floor of the inversion sums, accumulated over the range
    floor = 1e-16 * reach ** (max(alpha, 0.0) + 1.0) / (max(alpha, 0.0) + 1.0)
    return Estimate(values[1], abs(values[1] - values[0]) + floor)


def abs_moment(f: TestFunction, q: int) -> Estimate:
    """``int |t|^{q-1} phi(t) dt``."""
    if q < 1 or int(q) != q:
        raise ValueError("q must be a positive integer")
    plus = one_sided_moment(f, q - 1, 1)
    minus = one_sided_moment(f, q - 1, -1)
    return Estimate(plus.value + minus.value, plus.error + minus.error)


def signed_moment(f: TestFunction, q: int) -> Estimate:
    """``int t^{q-1} phi(t) dt``."""
    if q < 1 or int(q) != q:
        raise ValueError("q must be a positive integer")
    plus = one_sided_moment(f, q - 1, 1)
    minus = one_sided_moment(f, q - 1, -1)
    return Estimate(plus.value + (-1) ** (q - 1) * minus.value, plus.error + minus.error)


def fourier_one_sided_moment(f: TestFunction, alpha: float, sign: int = 1, order: int = 400) -> float:
    """Independent evaluation of :func:`one_sided_moment` on the Fourier side.

    Uses ``<t_+^alpha, phi> = (2 pi)^{-1} int phi_hat(tau) Gamma(alpha+1) |tau|^{-alpha-1}
    exp(i pi (alpha+1) sgn(tau) / 2) dtau``, valid for ``-1 < alpha < 0``.
    """
    if not -1 < alpha < 0:
        raise ValueError("Fourier-side formula needs -1 < alpha < 0")
    a = sign * f.shift
    tau, w = gauss_jacobi_left(f.support_radius, -alpha - 1.0, order)
    phase = 0.5 * math.pi * (alpha + 1.0) - a * tau
    integrand = f.hat_profile(tau) * np.cos(phase)
    return float(gamma(alpha + 1.0) / math.pi * np.dot(w, integrand))
