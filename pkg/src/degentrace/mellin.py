"""Mellin transforms, Bernstein-Sato pole bookkeeping and leading-term predictions.

The model fiber integral is

    I(lam) = int_0^inf y1^{2n-1} int f(lam y1^k y2) b(y1, y2) dy2 dy1,

whose expansion in ``lam -> inf`` is governed by the poles of Mellin
transforms continued with the weighted Bernstein-Sato polynomial.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import quad

from ._quad import composite_legendre, gauss_jacobi_left


class DoublePoleError(ValueError):
    """The requested quantity belongs to the logarithmic (double-pole) case."""


# ---------------------------------------------------------------------------
# Mellin transforms


def mellin_transform(f: Callable[[float], float], z: complex, sign: int = 1, *, tol: float = 1e-12) -> complex:
    """``M_sign(z) = int_0^inf s^{z-1} f(sign s) ds`` for ``Re z > 0``.

    The unit interval is handled with an algebraic endpoint weight (real
    ``z``) or the substitution ``s = exp(-v)`` (complex ``z``); the tail uses
    adaptive quadrature on ``[1, inf)``.
    """
    z = complex(z)
    if not z.real > 0:
        raise ValueError("Mellin transform requires Re(z) > 0")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    opts = dict(epsabs=tol, epsrel=tol, limit=500)

    def g(s):
        return f(sign * s)

    if z.imag == 0.0:
        head = quad(g, 0.0, 1.0, weight="alg", wvar=(z.real - 1.0, 0.0), **opts)[0]
        tail = quad(lambda s: s ** (z.real - 1.0) * g(s), 1.0, np.inf, **opts)[0]
        return complex(head + tail)
    head = quad(lambda v: np.exp(-z * v) * g(math.exp(-v)), 0.0, np.inf, complex_func=True, **opts)[0]
    tail = quad(lambda s: s ** (z - 1.0) * g(s), 1.0, np.inf, complex_func=True, **opts)[0]
    return complex(head + tail)


# ---------------------------------------------------------------------------
# Bernstein-Sato polynomials and pole lattices


def bernstein_sato(k: int, n: int | None = None) -> np.polynomial.Polynomial:
    """Plain ``(1-z) prod_{j=1..k} (j - k z)`` or, with ``n``, the weighted
    ``(1-z) prod_{j=1..k} (j - k z + 2n - 1)``."""
    if k < 1:
        raise ValueError("k must be positive")
    shift = 0 if n is None else 2 * n - 1
    P = np.polynomial.Polynomial
    out = P([1.0, -1.0])
    for j in range(1, k + 1):
        out = out * P([j + shift, -k])
    return out


def bernstein_sato_roots(k: int, n: int | None = None) -> list[Fraction]:
    """Roots of :func:`bernstein_sato` as exact rationals, with multiplicity."""
    shift = 0 if n is None else 2 * n - 1
    return sorted([Fraction(1)] + [Fraction(j + shift, k) for j in range(1, k + 1)])


@dataclass(frozen=True, order=True)
class PoleEntry:
    location: Fraction
    order: int

    def to_dict(self) -> dict:
        return {"location": [self.location.numerator, self.location.denominator], "order": self.order}


def pole_lattice(n: int, k: int, z_max) -> list[PoleEntry]:
    """Poles of the continued Mellin transform up to ``z_max``.

    These are the roots, counted with multiplicity, of the iterated product
    ``prod_{l=0..p} b(z - l)`` of weighted Bernstein-Sato polynomials: the points
    ``l + (j + 2n - 1)/k`` and the positive integers ``1 + l``. Coincidences
    make integer poles at or above ``2n/k`` double; integers below ``2n/k``
    (possible only when ``2n > k``) stay simple.
    """
    z_max = Fraction(z_max)
    if z_max > 10:
        raise ValueError("z_max must not exceed 10")
    p = max(0, math.ceil(z_max))
    counts: Counter[Fraction] = Counter()
    for l in range(p + 1):
        for root in bernstein_sato_roots(k, n):
            loc = root + l
            if loc <= z_max:
                counts[loc] += 1
    return [PoleEntry(loc, counts[loc]) for loc in sorted(counts)]


def canonical_constant(n: int, k: int, exact: bool = False):
    """``C_{n,k} = (1/k) prod_{j=1..2n} 1/(j - 2n/k)``.

    Raises
    ------
    DoublePoleError
        When ``2n/k`` is an integer and a factor vanishes.
    """
    alpha = Fraction(2 * n, k)
    if alpha.denominator == 1:
        raise DoublePoleError("double-pole case - use logarithmic path")
    value = Fraction(1, k)
    for j in range(1, 2 * n + 1):
        value /= j - alpha
    return value if exact else float(value)


def finite_part_normalization(alpha: float, order: int) -> float:
    """``prod_{j=1..order} 1/(j - alpha)`` relating ``order`` integrations by parts
    of ``u^{order - alpha}`` to the finite part of ``u^{-alpha}``."""
    return float(np.prod([1.0 / (j - alpha) for j in range(1, order + 1)]))


# ---------------------------------------------------------------------------
# Expansion predictions


@dataclass(frozen=True)
class ExpansionTerm:
    """``coefficient * lam**(-power) * log(lam)**log_exponent``."""

    power: Fraction
    log_exponent: int
    coefficient: float

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.coefficient * lam ** (-float(self.power)) * np.log(lam) ** self.log_exponent


@dataclass(frozen=True)
class ExpansionPrediction:
    """Leading asymptotic terms with the order of the remainder.

    Terms are ordered by increasing decay ``power``; the remainder is
    ``O(lam**(-remainder_power))`` (times ``log lam`` if flagged).
    """

    terms: tuple[ExpansionTerm, ...]
    remainder_power: Fraction
    remainder_has_log: bool
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        powers = [t.power for t in self.terms]
        if any(b <= a for a, b in zip(powers, powers[1:])):
            raise ValueError("term powers must be strictly increasing")

    @property
    def leading(self) -> ExpansionTerm:
        return self.terms[0]

    def __call__(self, lam):
        return sum(t(lam) for t in self.terms)

    def remainder_envelope(self, lam):
        lam = np.asarray(lam, dtype=float)
        env = lam ** (-float(self.remainder_power))
        return env * np.log(lam) if self.remainder_has_log else env

    def to_records(self) -> list[dict]:
        rem = {"power": str(self.remainder_power), "log": int(self.remainder_has_log)}
        return [
            {"power": str(t.power), "log": t.log_exponent, "coefficient": t.coefficient, "remainder": rem}
            for t in self.terms
        ]


@dataclass(frozen=True)
class SeparableAmplitude:
    """Amplitude ``a(s, y1, y2) = f(s) b(y1, y2)``.

    ``b`` must be vectorized and supported in ``[0, y1_support] x [-y2_support, y2_support]``.
    """

    f: Callable
    b: Callable
    y1_support: float = 1.0
    y2_support: float = 1.0

    def __call__(self, s, y1, y2):
        return self.f(s) * self.b(y1, y2)


class _SpectralSlice:
    """Trigonometric interpolant of ``y2 -> b(0, y2)`` on a periodic enclosure."""

    def __init__(self, b: Callable, support: float, points: int):
        self.half = 1.5 * support
        self.points = points
        y = -self.half + 2 * self.half * np.arange(points) / points
        vals = np.asarray(b(np.zeros_like(y), y), dtype=float)
        outside = np.abs(y) >= support
        scale = max(np.max(np.abs(vals)), 1e-300)
        if np.any(np.abs(vals[outside]) > 1e-13 * scale):
            raise ValueError("b(0, .) does not vanish outside its declared support")
        self.coeffs = np.fft.rfft(vals) / points
        self.omega = np.pi / self.half * np.arange(self.coeffs.size)
        top = np.abs(self.coeffs[-max(4, self.coeffs.size // 10) :]).max()
        self.resolved = top <= 1e-12 * max(np.abs(self.coeffs).max(), 1e-300)

    def derivative(self, y, order: int):
        y = np.asarray(y, dtype=float)
        weights = np.full(self.coeffs.size, 2.0)
        weights[0] = 1.0
        if self.points % 2 == 0:
            weights[-1] = 1.0
        c = weights * self.coeffs * (1j * self.omega) ** order
        phase = np.exp(1j * np.outer(y + self.half, self.omega))
        return np.real(phase @ c)


def _slice_weighted_integrals(b: Callable, support: float, points: int, exponent: float, order: int):
    sl = _SpectralSlice(b, support, points)
    if not sl.resolved:
        raise ValueError("b not flat enough at boundary for the derivative stencil")
    head = 0.25 * support
    t0, w0 = gauss_jacobi_left(head, exponent, 60)
    t1, w1 = composite_legendre(np.linspace(head, support, 13), 40)
    t = np.concatenate([t0, t1])
    w = np.concatenate([w0, w1 * t1**exponent])
    plus = float(np.dot(w, sl.derivative(t, order)))
    minus = float(np.dot(w, sl.derivative(-t, order)))
    return plus, minus


def _slice_derivative_at_zero(b: Callable, support: float, points: int, order: int) -> float:
    sl = _SpectralSlice(b, support, points)
    if not sl.resolved:
        raise ValueError("b not flat enough at boundary for the derivative stencil")
    return float(sl.derivative(np.zeros(1), order)[0])


def _moment_source(amplitude: SeparableAmplitude, tf_moments):
    """Return ``M(z, sign) = int_0^inf s^{z-1} f(sign s) ds``."""
    from .testfn import TestFunction, one_sided_moment

    if tf_moments is None:
        return lambda z, sign: mellin_transform(amplitude.f, z, sign).real
    if isinstance(tf_moments, TestFunction):
        return lambda z, sign: one_sided_moment(tf_moments, float(z) - 1.0, sign).value
    return tf_moments


def predict_leading_term(
    n: int,
    k: int,
    amplitude: SeparableAmplitude,
    tf_moments=None,
    *,
    points: int = 2048,
) -> ExpansionPrediction:
    """Leading term of the fiber integral for a separable amplitude.

    Non-integer ``alpha = 2n/k``: ``d * lam^{-alpha}`` with

        d = C_{n,k} sum_{+-} M_{+-}(alpha) int_0^Y y^{2n-alpha} (d_y2^{2n} b)(0, +-y) dy.

    Integer ``q = 2n/k``: ``A * lam^{-q} log(lam)`` with

        A = (1/k) (1/(q-1)!) (d_y2^{q-1} b)(0, 0) int t^{q-1} f(t) dt.

    Derivatives of ``b(0, .)`` are spectral (trigonometric interpolation on an
    enclosing periodic interval); the error in ``details`` compares two
    resolutions.

    Parameters
    ----------
    tf_moments : None, TestFunction or callable
        Source of the Mellin moments of ``f``; defaults to numerical Mellin
        transforms of ``amplitude.f``.
    """
    if not isinstance(amplitude, SeparableAmplitude):
        raise TypeError("non-separable amplitude: only f(s) * b(y1, y2) is supported")
    moments = _moment_source(amplitude, tf_moments)
    alpha = Fraction(2 * n, k)
    Y = amplitude.y2_support
    if alpha.denominator != 1:
        C = canonical_constant(n, k)
        a = float(alpha)
        exponent = 2 * n - a
        fine = _slice_weighted_integrals(amplitude.b, Y, points, exponent, 2 * n)
        coarse = _slice_weighted_integrals(amplitude.b, Y, points // 2, exponent, 2 * n)
        m_plus, m_minus = moments(a, 1), moments(a, -1)
        coeff = C * (m_plus * fine[0] + m_minus * fine[1])
        err = abs(C) * (abs(m_plus) * abs(fine[0] - coarse[0]) + abs(m_minus) * abs(fine[1] - coarse[1]))
        term = ExpansionTerm(alpha, 0, coeff)
        remainder = Fraction(2 * n + 1, k)
        details = {"canonical_constant": C, "moments": (m_plus, m_minus), "slice_integrals": fine, "error": err}
    else:
        q = int(alpha)
        fine = _slice_derivative_at_zero(amplitude.b, Y, points, q - 1)
        coarse = _slice_derivative_at_zero(amplitude.b, Y, points // 2, q - 1)
        m_plus, m_minus = moments(q, 1), moments(q, -1)
        signed = m_plus + (-1) ** (q - 1) * m_minus
        scale = 1.0 / (k * math.factorial(q - 1))
        coeff = scale * fine * signed
        term = ExpansionTerm(alpha, 1, coeff)
        remainder = alpha
        details = {"moments": (m_plus, m_minus), "slice_derivative": fine,
                   "error": scale * abs(signed) * abs(fine - coarse)}
    has_log = remainder.denominator == 1 and alpha.denominator != 1
    return ExpansionPrediction((term,), remainder, has_log, details)
