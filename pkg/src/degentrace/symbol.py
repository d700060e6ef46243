"""Polynomial phase-space symbols, model construction and hypothesis checks.

A symbol in ``n`` degrees of freedom is a real polynomial in the ``2n``
variables ``(x_1..x_n, xi_1..xi_n)``, stored as a map from exponent
multi-indices to coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import brentq


DEFAULT_EPS = 0.05
GRADIENT_TOL = 1e-6


class HypothesisError(ValueError):
    """A model violates one of the structural hypotheses."""


class ModelError(ValueError):
    """A model constructor cannot produce an admissible instance."""


Exponent = tuple[int, ...]


def _clean_terms(terms: Mapping[Exponent, float] | Iterable[tuple[Exponent, float]], dim: int):
    items = terms.items() if isinstance(terms, Mapping) else terms
    out: dict[Exponent, float] = {}
    for exps, coeff in items:
        exps = tuple(int(e) for e in exps)
        if len(exps) != dim:
            raise ValueError(f"multi-index {exps} has length {len(exps)}, expected {dim}")
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in {exps}")
        coeff = float(coeff)
        if not math.isfinite(coeff):
            raise ValueError(f"non-finite coefficient for {exps}")
        out[exps] = out.get(exps, 0.0) + coeff
    return {e: c for e, c in sorted(out.items()) if c != 0.0}


@dataclass(frozen=True, eq=False)
class PolynomialSymbol:
    """Real polynomial on ``R^{2n}`` with exact coefficient access.

    Parameters
    ----------
    num_dof : int
        Number of degrees of freedom ``n``; the symbol has ``2n`` variables.
    terms : mapping
        Exponent multi-index (length ``2n``) to coefficient. Zero
        coefficients are dropped, repeated indices summed.
    """

    num_dof: int
    terms: Mapping[Exponent, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.num_dof) < 1:
            raise ValueError("num_dof must be positive")
        object.__setattr__(self, "num_dof", int(self.num_dof))
        object.__setattr__(self, "terms", _clean_terms(self.terms, 2 * self.num_dof))
        exps = np.array(list(self.terms), dtype=np.int64).reshape(-1, self.dim)
        coeffs = np.array(list(self.terms.values()), dtype=float)
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_coeffs", coeffs)
        grad_parts = []
        for i in range(self.dim):
            keep = exps[:, i] > 0
            dexps = exps[keep].copy()
            dexps[:, i] -= 1
            grad_parts.append((dexps, coeffs[keep] * exps[keep, i]))
        object.__setattr__(self, "_grad_parts", grad_parts)

    # -- basic structure -------------------------------------------------
    @property
    def dim(self) -> int:
        return 2 * self.num_dof

    @property
    def degree(self) -> int:
        return int(self._exps.sum(axis=1).max()) if len(self.terms) else 0

    @property
    def min_degree(self) -> int:
        return int(self._exps.sum(axis=1).min()) if len(self.terms) else 0

    def degrees(self) -> list[int]:
        return sorted({sum(e) for e in self.terms})

    def is_zero(self) -> bool:
        return not self.terms

    def homogeneous_part(self, j: int) -> "PolynomialSymbol":
        """Terms of total degree exactly ``j``."""
        return PolynomialSymbol(self.num_dof, {e: c for e, c in self.terms.items() if sum(e) == j})

    def is_homogeneous(self, j: int | None = None) -> bool:
        degs = self.degrees()
        if not degs:
            return True
        return len(degs) == 1 and (j is None or degs[0] == j)

    def __eq__(self, other):
        if not isinstance(other, PolynomialSymbol):
            return NotImplemented
        return self.num_dof == other.num_dof and self.terms == other.terms

    def __hash__(self):
        return hash((self.num_dof, tuple(self.terms.items())))

    def __repr__(self):
        return f"PolynomialSymbol(num_dof={self.num_dof}, terms={dict(self.terms)!r})"

    # -- algebra ----------------------------------------------------------
    def _check(self, other: "PolynomialSymbol"):
        if other.num_dof != self.num_dof:
            raise ValueError("symbols have different numbers of degrees of freedom")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = PolynomialSymbol.constant(self.num_dof, other)
        self._check(other)
        return PolynomialSymbol(self.num_dof, list(self.terms.items()) + list(other.terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return PolynomialSymbol(self.num_dof, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return PolynomialSymbol(self.num_dof, {e: other * c for e, c in self.terms.items()})
        self._check(other)
        out: list[tuple[Exponent, float]] = []
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                out.append((tuple(a + b for a, b in zip(e1, e2)), c1 * c2))
        return PolynomialSymbol(self.num_dof, out)

    __rmul__ = __mul__

    def __pow__(self, power: int):
        result = PolynomialSymbol.constant(self.num_dof, 1.0)
        for _ in range(int(power)):
            result = result * self
        return result

    @classmethod
    def constant(cls, num_dof: int, value: float) -> "PolynomialSymbol":
        return cls(num_dof, {(0,) * (2 * num_dof): value})

    @classmethod
    def variable(cls, num_dof: int, index: int) -> "PolynomialSymbol":
        e = [0] * (2 * num_dof)
        e[index] = 1
        return cls(num_dof, {tuple(e): 1.0})

    def derivative(self, var: int, order: int = 1) -> "PolynomialSymbol":
        out = {}
        for e, c in self.terms.items():
            if e[var] < order:
                continue
            f = math.prod(range(e[var] - order + 1, e[var] + 1))
            e2 = list(e)
            e2[var] -= order
            out[tuple(e2)] = c * f
        return PolynomialSymbol(self.num_dof, out)

    def compose_linear(self, matrix) -> "PolynomialSymbol":
        """Return ``z -> p(M z)`` as a new symbol."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (self.dim, self.dim):
            raise ValueError("matrix shape does not match the symbol dimension")
        rows = [
            PolynomialSymbol(self.num_dof, {tuple(int(i == j) for i in range(self.dim)): matrix[r, j] for j in range(self.dim)})
            for r in range(self.dim)
        ]
        result = PolynomialSymbol(self.num_dof, {})
        for e, c in self.terms.items():
            mono = PolynomialSymbol.constant(self.num_dof, c)
            for r, power in enumerate(e):
                if power:
                    mono = mono * rows[r] ** power
            result = result + mono
        return result

    # -- evaluation -------------------------------------------------------
    def __call__(self, z):
        return eval_symbol(self, z)[0]

    def gradient(self, z):
        return eval_symbol(self, z, want_gradient=True)[1]


def _monomials(exps: np.ndarray, z: np.ndarray) -> np.ndarray:
    # z (..., d), exps (T, d) -> (..., T)
    if exps.shape[0] == 0:
        return np.zeros(z.shape[:-1] + (0,))
    powers = z[..., None, :] ** exps
    return np.prod(powers, axis=-1)


def eval_symbol(sym: PolynomialSymbol, z, want_gradient: bool = False):
    """Evaluate a symbol (and optionally its gradient) at points ``z``.

    Parameters
    ----------
    z : array_like, shape (..., 2n)

    Returns
    -------
    value : ndarray, shape (...)
    gradient : ndarray, shape (..., 2n), or None
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != sym.dim:
        raise ValueError(f"expected last axis of length {sym.dim}")
    if not np.all(np.isfinite(z)):
        raise ValueError("evaluation point is not finite")
    with np.errstate(over="raise", invalid="raise"):
        try:
            value = _monomials(sym._exps, z) @ sym._coeffs
            grad = None
            if want_gradient:
                grad = np.empty(z.shape)
                for i, (dexps, dcoeffs) in enumerate(sym._grad_parts):
                    grad[..., i] = _monomials(dexps, z) @ dcoeffs
        except FloatingPointError as exc:
            raise OverflowError("symbol evaluation overflowed") from exc
    return value, grad


def hamiltonian_field(sym: PolynomialSymbol, z):
    """Hamiltonian vector field ``(d_xi p, -d_x p)`` at ``z``."""
    n = sym.num_dof
    _, grad = eval_symbol(sym, z, want_gradient=True)
    return np.concatenate([grad[..., n:], -grad[..., :n]], axis=-1)


# ---------------------------------------------------------------------------
# Models


@dataclass(frozen=True)
class ModelProblem:
    """A degenerate critical point instance.

    The full principal symbol is ``critical_energy + leading + higher`` with
    ``leading`` homogeneous of degree ``k`` and ``higher`` collecting all
    degrees above ``k``; the critical point sits at the origin.
    """

    n: int
    k: int
    leading: PolynomialSymbol
    higher: PolynomialSymbol
    critical_energy: float = 0.0
    subprincipal_value: float = 0.0
    confinement: float | None = None
    other_critical_values: tuple[float, ...] = ()
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        for part in (self.leading, self.higher):
            if part.num_dof != self.n:
                raise ValueError("symbol dimension does not match n")
        if not self.leading.is_homogeneous(self.k) or self.leading.is_zero():
            raise ValueError(f"leading part must be a nonzero homogeneous polynomial of degree {self.k}")
        if not self.higher.is_zero() and self.higher.min_degree <= self.k:
            raise ValueError("higher part must only contain degrees above k")

    @property
    def critical_point(self) -> np.ndarray:
        return np.zeros(2 * self.n)

    @property
    def principal(self) -> PolynomialSymbol:
        return self.leading + self.higher + self.critical_energy

    @property
    def admissible_eps(self) -> float:
        """Distance from ``E_c`` to the nearest other known critical value.

        Energy windows must be strictly narrower than this.
        """
        if not self.other_critical_values:
            return math.inf
        return min(abs(v - self.critical_energy) for v in self.other_critical_values)

    def with_subprincipal(self, value: float) -> "ModelProblem":
        return replace(self, subprincipal_value=float(value))

    def without_higher(self) -> "ModelProblem":
        return replace(self, higher=PolynomialSymbol(self.n, {}), confinement=None, other_critical_values=())


def leading_model_part(k: int) -> PolynomialSymbol:
    """``Re((x + i xi)**k)`` as a one-degree-of-freedom symbol."""
    terms = {}
    for j in range(0, k + 1, 2):
        terms[(k - j, j)] = math.comb(k, j) * (-1) ** (j // 2)
    return PolynomialSymbol(1, terms)


def confinement_part(k: int, c: float) -> PolynomialSymbol:
    m = (k + 2) // 2  # ceil((k + 1) / 2)
    return PolynomialSymbol(1, {(2 * i, 2 * (m - i)): c * math.comb(m, i) for i in range(m + 1)})


def model_other_critical_value(k: int, c: float) -> float:
    """The nonzero critical value of ``r**k cos(k theta) + c r**(2m)``.

    It is attained at ``cos(k theta) = -1`` and ``r**(2m-k) = k / (2 m c)``.
    """
    m = (k + 2) // 2
    return -(1.0 - k / (2.0 * m)) * (k / (2.0 * m * c)) ** (k / (2.0 * m - k))


def build_model_symbol(k: int, confinement: float = 1.0, eps: float = DEFAULT_EPS) -> ModelProblem:
    """Desk-scale model ``Re((x+i xi)^k) + c (x^2+xi^2)^ceil((k+1)/2)`` with ``E_c = 0``.

    Raises
    ------
    ModelError
        If the competing critical value falls inside the window ``[-eps, eps]``.
    """
    if k not in (3, 4, 5, 6):
        raise ValueError("model constructor supports k in {3, 4, 5, 6}")
    if not confinement > 0:
        raise ValueError("confinement must be positive")
    other = model_other_critical_value(k, confinement)
    model = ModelProblem(
        n=1,
        k=k,
        leading=leading_model_part(k),
        higher=confinement_part(k, confinement),
        confinement=float(confinement),
        other_critical_values=(other,),
        eps=float(eps),
    )
    if eps >= model.admissible_eps:
        raise ModelError(
            f"critical value {other:.6g} is too close to E_c=0 for eps={eps} "
            f"(window must stay below {model.admissible_eps:.4g}); lower the confinement c"
        )
    report = check_hypotheses(model)
    if not (report.h2_ok and report.h4_ok):
        raise ModelError("constructed model fails hypothesis checks: " + "; ".join(report.messages))
    return model


# ---------------------------------------------------------------------------
# Hypothesis checks


@dataclass
class HypothesisReport:
    """Outcome of :func:`check_hypotheses`."""

    h1_plausible: bool
    h1_evidence: list[tuple[float, float]]
    h2_ok: bool
    h4_ok: bool
    extremum: bool
    zero_set_samples: np.ndarray
    min_tangential_gradient: float
    tolerance: float
    messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "h1_plausible": self.h1_plausible,
            "h1_evidence": [{"radius": r, "min_abs_value": v} for r, v in self.h1_evidence],
            "h2_ok": self.h2_ok,
            "h4_ok": self.h4_ok,
            "extremum": self.extremum,
            "zero_set_samples": self.zero_set_samples.tolist(),
            "min_tangential_gradient": self.min_tangential_gradient,
            "tolerance": self.tolerance,
            "messages": list(self.messages),
        }


def _circle_frames(dim: int, count: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    eye = np.eye(dim)
    frames = [(eye[i], eye[j]) for i in range(dim) for j in range(i + 1, dim)]
    while len(frames) < count:
        q, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
        frames.append((q[:, 0], q[:, 1]))
    return frames


def sphere_zero_set(pk: PolynomialSymbol, grid_density: int = 256, n_circles: int | None = None, seed: int = 0):
    """Zeros of ``pk`` on great circles of the unit sphere.

    For one degree of freedom the single circle is the whole sphere; for more,
    the zero set is sampled along coordinate-plane and random great circles.

    Returns
    -------
    points : ndarray, shape (m, 2n)
    values : ndarray
        Samples of ``pk`` used for the sign analysis.
    """
    dim = pk.dim
    rng = np.random.default_rng(seed)
    count = 1 if dim == 2 else (n_circles or 4 * dim * dim)
    theta = np.linspace(0.0, 2 * np.pi, grid_density, endpoint=False)
    pts, vals = [], []
    for e1, e2 in _circle_frames(dim, count, rng):
        def g(t, e1=e1, e2=e2):
            return pk(np.cos(t) * e1 + np.sin(t) * e2)

        z = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
        v = pk(z)
        vals.append(v)
        vnext = np.roll(v, -1)
        for i in np.nonzero(v == 0.0)[0]:
            pts.append(z[i])
        for i in np.nonzero(v * vnext < 0.0)[0]:
            a, b = theta[i], theta[i] + 2 * np.pi / grid_density
            if g(a) * g(b) > 0.0:
                continue  # sign change lost to rounding at the wrap point
            t = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            pts.append(np.cos(t) * e1 + np.sin(t) * e2)
    points = np.array(pts).reshape(-1, dim)
    return points, np.concatenate(vals)


def check_hypotheses(m: ModelProblem, grid_density: int = 256, tol: float = GRADIENT_TOL, seed: int = 0) -> HypothesisReport:
    """Machine checks for the structural hypotheses of a model.

    * flatness: every monomial of ``p0 - E_c`` has degree at least ``k`` and
      the degree-``k`` part is nonzero (exact polynomial arithmetic);
    * principal type: the tangential gradient of ``pk`` on its zero set in the
      unit sphere stays above ``tol``; an empty zero set is an extremum;
    * compactness (plausibility only): ``|p0 - E_c|`` grows along rays.

    Raises
    ------
    HypothesisError
        For ``k <= 2``.
    """
    if m.k <= 2:
        raise HypothesisError(f"(H2) requires k>2; got k={m.k}, outside (H2) scope")
    if grid_density < 64:
        raise ValueError("grid_density must be at least 64")
    messages: list[str] = []

    shifted = m.principal - m.critical_energy
    low = [d for d in shifted.degrees() if d < m.k]
    h2_ok = not low and not m.leading.is_zero()
    if not h2_ok:
        messages.append(f"jet of order < k does not vanish (degrees {low})")

    pk = m.leading
    zeros, samples = sphere_zero_set(pk, grid_density, seed=seed)
    extremum = zeros.shape[0] == 0 and (np.all(samples > 0) or np.all(samples < 0))
    if zeros.shape[0]:
        grad = pk.gradient(zeros)
        radial = np.sum(grad * zeros, axis=1, keepdims=True)
        tangential = grad - radial * zeros
        min_tan = float(np.min(np.linalg.norm(tangential, axis=1)))
    else:
        min_tan = math.inf if extremum else 0.0
    if extremum:
        messages.append("extremum case - zero set of pk on the sphere is empty; the degenerate trace hypotheses are not met")
    h4_ok = (not extremum) and zeros.shape[0] > 0 and min_tan > tol
    if not extremum and not h4_ok:
        messages.append(f"tangential gradient {min_tan:.3g} on the zero set is below tol {tol:g}")

    # Ray growth of |p0 - E_c| as a compactness plausibility check.
    rng = np.random.default_rng(seed + 1)
    dirs = rng.standard_normal((512, m.leading.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    evidence = []
    for r in 2.0 ** np.arange(0, 7):
        evidence.append((float(r), float(np.min(np.abs(shifted(r * dirs))))))
    mins = [v for _, v in evidence]
    h1 = all(b > a for a, b in zip(mins[-4:-1], mins[-3:])) and mins[-1] > 1.0
    if not h1:
        messages.append("sublevel growth along rays is not evident; compactness not plausible")

    return HypothesisReport(
        h1_plausible=bool(h1),
        h1_evidence=evidence,
        h2_ok=bool(h2_ok),
        h4_ok=bool(h4_ok),
        extremum=bool(extremum),
        zero_set_samples=zeros,
        min_tangential_gradient=min_tan,
        tolerance=tol,
        messages=messages,
    )
