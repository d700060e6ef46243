"""Weyl quantization of one-degree-of-freedom polynomial symbols in an oscillator basis.

Position and momentum act on the ``h``-scaled harmonic-oscillator basis as
``x = sqrt(h/2) (a + a^dagger)`` and ``p = i sqrt(h/2) (a^dagger - a)``, so a polynomial
symbol quantizes exactly and basis truncation is the only approximation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, eig_banded

from .symbol import ModelProblem, PolynomialSymbol

MAX_DEGREE = 8
MIN_BASIS = 64
SYMMETRY_TOL = 1e-13


class QuantizationError(ValueError):
    """Symbol or basis outside the supported range."""


class EigensolverError(RuntimeError):
    pass


class TruncationError(RuntimeError):
    """Window eigenvalues moved too much under basis growth."""

    def __init__(self, message: str, movements: list[tuple[int, int, float]]):
        super().__init__(message)
        self.movements = movements


def _ladder_pair(size: int, h: float):
    # Real matrices X and Q with momentum p = i Q.
    s = np.sqrt(np.arange(1, size, dtype=float))
    lower = sp.diags(s, -1, shape=(size, size), format="csr")  # a^dagger
    scale = math.sqrt(h / 2.0)
    X = scale * (lower + lower.T)
    Q = scale * (lower - lower.T)
    return X.tocsr(), Q.tocsr()


class _WordSums:
    """Sums over all words with ``a`` letters X and ``b`` letters Q, memoized.

    ``W(a, b) = X W(a-1, b) + Q W(a, b-1)`` (split on the first letter), so the
    Weyl-ordered monomial is ``i^b W(a, b) / binom(a+b, a)``.
    """

    def __init__(self, X, Q):
        self.X, self.Q = X, Q
        self._memo = {(0, 0): sp.identity(X.shape[0], format="csr")}

    def __call__(self, a: int, b: int):
        key = (a, b)
        if key not in self._memo:
            acc = None
            if a > 0:
                acc = self.X @ self(a - 1, b)
            if b > 0:
                term = self.Q @ self(a, b - 1)
                acc = term if acc is None else acc + term
            self._memo[key] = acc.tocsr()
        return self._memo[key]


@lru_cache(maxsize=None)
def _imag_power(b: int) -> complex:
    return (1, 1j, -1, -1j)[b % 4]


@dataclass(frozen=True)
class OperatorMatrix:
    """Truncated matrix of a Weyl-quantized symbol, stored in lower banded form.

    ``bands[d, j]`` holds entry ``(j + d, j)``; ``dense()`` rebuilds the full
    Hermitian array.
    """

    h: float
    basis_size: int
    symbol_degree: int
    bands: np.ndarray
    asymmetry: float = 0.0

    @property
    def bandwidth(self) -> int:
        return self.bands.shape[0] - 1

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.bands)

    def dense(self) -> np.ndarray:
        N = self.basis_size
        out = np.zeros((N, N), dtype=self.bands.dtype)
        for d in range(self.bands.shape[0]):
            diag = self.bands[d, : N - d]
            idx = np.arange(N - d)
            out[idx + d, idx] = diag
            if d:
                out[idx, idx + d] = np.conj(diag)
        return out

    @property
    def entries(self) -> np.ndarray:
        return self.dense()

    def shifted(self, value: float) -> "OperatorMatrix":
        """Matrix plus ``value`` times the identity."""
        bands = self.bands.copy()
        bands[0] += value
        return OperatorMatrix(self.h, self.basis_size, self.symbol_degree, bands, self.asymmetry)

    def save(self, path) -> None:
        np.savez(path, h=self.h, basis_size=self.basis_size, symbol_degree=self.symbol_degree,
                 bands=self.bands, asymmetry=self.asymmetry)

    @classmethod
    def load(cls, path) -> "OperatorMatrix":
        with np.load(path) as d:
            return cls(float(d["h"]), int(d["basis_size"]), int(d["symbol_degree"]), d["bands"],
                       float(d["asymmetry"]))


def weyl_quantize(sym: PolynomialSymbol, h: float, N: int, shift: float = 0.0) -> OperatorMatrix:
    """Weyl quantization of ``sym`` truncated to the first ``N`` oscillator states.

    Products are formed in a basis enlarged by the symbol degree, which makes
    the leading ``N x N`` block exact. ``shift`` is added on the diagonal.
    """
    if sym.num_dof != 1:
        raise QuantizationError("only one degree of freedom is supported")
    if not h > 0:
        raise QuantizationError("h must be positive")
    if N < MIN_BASIS:
        raise QuantizationError(f"basis size must be at least {MIN_BASIS}")
    degree = max(sym.degree, 0) if not sym.is_zero() else 0
    if degree > MAX_DEGREE:
        raise QuantizationError(f"symbol degree {degree} exceeds the cap {MAX_DEGREE}")
    size = N + degree + 1
    words = _WordSums(*_ladder_pair(size, h))
    total = sp.csr_matrix((size, size), dtype=complex)
    for (a, b), coeff in sym.terms.items():
        scale = coeff * _imag_power(b) / math.comb(a + b, a)
        total = total + scale * words(a, b)
    block = total[:N, :N].toarray()
    if not np.any(block.imag):
        block = block.real
    scale = max(np.max(np.abs(block)), 1e-300)
    asym = float(np.max(np.abs(block - block.conj().T)) / scale)
    if asym > SYMMETRY_TOL:
        raise QuantizationError(f"quantized matrix not Hermitian (relative defect {asym:.2e})")
    bw = degree
    bands = np.zeros((bw + 1, N), dtype=block.dtype)
    for d in range(bw + 1):
        bands[d, : N - d] = np.diagonal(block, -d)
    if np.max(np.abs(block - _dense_from_bands(bands, N))) > SYMMETRY_TOL * scale:
        raise QuantizationError("matrix has entries outside the expected bandwidth")
    bands[0] = bands[0].real + shift
    return OperatorMatrix(float(h), int(N), int(degree), bands, asym)


def _dense_from_bands(bands, N):
    return OperatorMatrix(1.0, N, bands.shape[0] - 1, bands).dense()


def weyl_matrix(m: ModelProblem | PolynomialSymbol, h: float, N: int) -> OperatorMatrix:
    """Matrix of ``Op_h^w(p_0) + h p_1(z_0)`` for a model (or of a bare symbol)."""
    if isinstance(m, PolynomialSymbol):
        return weyl_quantize(m, h, N)
    if m.n != 1:
        raise QuantizationError("only one degree of freedom is supported")
    return weyl_quantize(m.principal, h, N, shift=h * m.subprincipal_value)


@dataclass
class SpectralWindow:
    h: float
    eigenvalues: np.ndarray
    epsilon: float
    center: float = 0.0
    basis_size: int = 0
    converged: bool = False
    movements: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.eigenvalues.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "eigenvalue"])
            for lam in self.eigenvalues:
                w.writerow([repr(self.h), repr(float(lam))])


def eigen_window(mat: OperatorMatrix, E_c: float, eps: float) -> SpectralWindow:
    """Eigenvalues of ``mat`` in ``[E_c - eps, E_c + eps]``, ascending."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = E_c - eps, E_c + eps
    # the bisection's interval test is only accurate to rounding; query a padded
    # interval and filter the closed one from the returned values
    pad = 1e-12 * max(abs(lo), abs(hi), eps)
    try:
        vals = eig_banded(mat.bands, lower=True, eigvals_only=True, select="v",
                          select_range=(lo - pad, hi + pad), check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise EigensolverError(f"banded eigensolver failed: {exc}") from exc
    vals = np.sort(np.asarray(vals, dtype=float))
    vals = vals[(vals >= lo) & (vals <= hi)]
    return SpectralWindow(mat.h, vals, float(eps), float(E_c), mat.basis_size)


def _window_movement(a: np.ndarray, b: np.ndarray) -> float:
    if a.size != b.size:
        return math.inf
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def truncation_study(m: ModelProblem | PolynomialSymbol, h: float, E_c: float, eps: float,
                     N_list: Sequence[int], rel_tol: float = 1e-3) -> SpectralWindow:
    """Recompute the window for growing bases and flag convergence.

    Converged means the two largest bases give the same eigenvalue count and
    a maximal movement below ``rel_tol * h``.

    Raises
    ------
    TruncationError
        With the table of ``(N_small, N_large, movement)`` when not converged.
    """
    N_list = sorted(int(N) for N in N_list)
    if len(N_list) < 3:
        raise ValueError("need at least three basis sizes")
    if isinstance(m, ModelProblem) and eps >= m.admissible_eps:
        raise ValueError(f"eps={eps} outside the admissible window {m.admissible_eps:.4g}")
    windows = [eigen_window(weyl_matrix(m, h, N), E_c, eps) for N in N_list]
    movements = [(N_list[i], N_list[i + 1], _window_movement(windows[i].eigenvalues, windows[i + 1].eigenvalues))
                 for i in range(len(N_list) - 1)]
    last = windows[-1]
    last.movements = movements
    if movements[-1][2] >= rel_tol * h:
        table = "; ".join(f"N={a}->{b}: {mv:.3g}" for a, b, mv in movements)
        raise TruncationError(f"window not converged at h={h:g} (threshold {rel_tol * h:.3g}): {table}", movements)
    last.converged = True
    return last


def window_radius(m: ModelProblem, E_c: float, eps: float, *, angles: int = 721, r_max: float = 10.0) -> float:
    """Largest phase-space radius reached by ``{|p_0 - E_c| <= eps}``.

    Scans rays from the origin for the outermost radius where ``p_0 - E_c``
    is at most ``eps``; confinement guarantees this is finite.
    """
    theta = np.linspace(0.0, 2 * math.pi, angles)
    r = np.linspace(0.0, r_max, 4001)
    pts = np.stack([np.outer(r, np.cos(theta)), np.outer(r, np.sin(theta))], axis=-1)
    vals = m.principal(pts) - E_c
    inside = vals <= eps
    if inside[-1].any():
        raise ValueError("energy region is not bounded within the scan radius")
    idx = np.max(np.where(inside.any(axis=1))[0])
    return float(r[min(idx + 1, r.size - 1)])


def basis_size_for(m: ModelProblem, h: float, E_c: float, eps: float, margin: float = 1.2, pad: int = 40) -> int:
    """Oscillator basis size covering the window region with a radial margin.

    State ``j`` lives at radius ``sqrt((2j+1) h)``, so covering radius ``r``
    takes about ``r^2 / (2h)`` states.
    """
    r = window_radius(m, E_c, eps)
    return max(MIN_BASIS, int(math.ceil(margin * r * r / (2.0 * h))) + pad)
