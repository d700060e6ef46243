"""Shared quadrature rules, smooth cutoffs and Taylor-jet arithmetic."""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class Estimate(NamedTuple):
    """A numerical value together with an absolute error estimate."""

    value: float
    error: float


@lru_cache(maxsize=64)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def _jacobi(order: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # weight (1 + x)**beta on [-1, 1]
    x, w = roots_jacobi(order, 0.0, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on [a, b]."""
    x, w = _legendre(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_legendre(edges, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule applied on every panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def gauss_jacobi_left(length: float, beta: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^length t**beta g(t) dt`` with smooth ``g``.

    The returned weights already contain the factor ``t**beta``.
    """
    x, w = _jacobi(order, float(beta))
    t = 0.5 * length * (1.0 + x)
    return t, w * (0.5 * length) ** (beta + 1.0)


def bump(x):
    """Standard bump ``exp(-1/(1-x**2))`` on (-1, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def smooth_step(x):
    """C-infinity step rising from 0 at ``x <= 0`` to 1 at ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    a = np.exp(-1.0 / xm)
    b = np.exp(-1.0 / (1.0 - xm))
    out[mid] = a / (a + b)
    return out


def plateau_cutoff(u, radius: float):
    """Even cutoff equal to 1 on [-r/2, r/2] and 0 outside [-r, r]."""
    s = (np.abs(np.asarray(u, dtype=float)) - 0.5 * radius) / (0.5 * radius)
    return 1.0 - smooth_step(s)


# ---------------------------------------------------------------------------
# Taylor jets: arrays of shape (order + 1, ...) holding normalized Taylor
# coefficients c_j = f^(j)(x0) / j! at a batch of base points.


def jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    order = a.shape[0] - 1
    out = np.zeros_like(a)
    for j in range(order + 1):
        out[j] = np.einsum("i...,i...->...", a[: j + 1], b[j::-1])
    return out


def jet_exp(a: np.ndarray) -> np.ndarray:
    order = a.shape[0] - 1
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for j in range(1, order + 1):
        i = np.arange(1, j + 1).reshape((-1,) + (1,) * (a.ndim - 1))
        out[j] = np.sum(i * a[1 : j + 1] * out[j - 1 :: -1][: j], axis=0) / j
    return out


def jet_reciprocal(a: np.ndarray) -> np.ndarray:
    order = a.shape[0] - 1
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for j in range(1, order + 1):
        out[j] = -np.sum(a[1 : j + 1] * out[j - 1 :: -1][: j], axis=0) / a[0]
    return out


def jet_variable(x0, order: int) -> np.ndarray:
    """Jet of the identity map at the points ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    out = np.zeros((order + 1,) + x0.shape)
    out[0] = x0
    if order >= 1:
        out[1] = 1.0
    return out


def jet_affine(jet: np.ndarray, scale: float, shift: float) -> np.ndarray:
    out = scale * jet
    out[0] = out[0] + shift
    return out


def smooth_step_jet(x: np.ndarray) -> np.ndarray:
    """Jet of :func:`smooth_step` composed with a jet ``x`` whose base lies in (0, 1)."""
    a = jet_exp(-jet_reciprocal(x))
    one_minus = -x
    one_minus[0] = one_minus[0] + 1.0
    b = jet_exp(-jet_reciprocal(one_minus))
    return jet_mul(a, jet_reciprocal(a + b))


def plateau_cutoff_jet(u0, radius: float, order: int) -> np.ndarray:
    """Jet of :func:`plateau_cutoff` at points ``u0`` (any sign)."""
    u0 = np.asarray(u0, dtype=float)
    sgn = np.where(u0 < 0.0, -1.0, 1.0)
    out = np.zeros((order + 1,) + u0.shape)
    s0 = (np.abs(u0) - 0.5 * radius) / (0.5 * radius)
    out[0] = 1.0 - smooth_step(s0)
    mid = (s0 > 0.0) & (s0 < 1.0)
    if np.any(mid):
        var = jet_variable(np.abs(u0[mid]), order)
        # d/du of |u| is sgn(u); odd coefficients pick up the sign
        signs = sgn[mid][None, :] ** np.arange(order + 1)[:, None]
        s = jet_affine(var, 2.0 / radius, -1.0)
        step = smooth_step_jet(s) * signs
        out[:, mid] = -step
        out[0, mid] += 1.0
    return out


def polynomial_jet(coeffs: np.ndarray, x0, order: int) -> np.ndarray:
    """Jet of the power-series polynomial ``sum_i coeffs[i] x**i`` at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    poly = np.polynomial.Polynomial(coeffs)
    out = np.zeros((order + 1,) + x0.shape)
    fact = 1.0
    for j in range(order + 1):
        out[j] = poly(x0) / fact
        poly = poly.deriv()
        fact *= j + 1
    return out
