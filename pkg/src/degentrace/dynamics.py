"""Hamiltonian flow near the degenerate equilibrium and its Taylor germ."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .symbol import ModelProblem, eval_symbol, hamiltonian_field


class FlowError(RuntimeError):
    """The integrator failed (step-size underflow or non-finite state)."""


class GermRegimeError(ValueError):
    """Sample radii are outside the range where the germ remainder is a clean power."""


@dataclass(frozen=True)
class FlowConfig:
    """Integration settings.

    ``box`` bounds ``|z|`` for starting points (``None`` disables the check)
    and ``horizon`` bounds ``|t|``.
    """

    box: float | None = 0.5
    horizon: float = 2.0
    method: str = "DOP853"
    atol_scale: float = 1e-3


@dataclass
class FlowTrajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), 2n)
    energy: np.ndarray
    energy_drift: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        dim = self.states.shape[1]
        n = dim // 2
        names = [f"x{i + 1}" for i in range(n)] + [f"xi{i + 1}" for i in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *names, "energy"])
            for t, z, e in zip(self.times, self.states, self.energy):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in z), repr(float(e))])


def _check_domain(m: ModelProblem, z: np.ndarray, t_final: float, cfg: FlowConfig):
    if z.shape != (2 * m.n,):
        raise ValueError(f"state must have length {2 * m.n}")
    if cfg.box is not None and np.linalg.norm(z) > cfg.box * (1 + 1e-12):
        raise ValueError(f"|z| = {np.linalg.norm(z):.3g} is outside the validity box {cfg.box}")
    if abs(t_final) > cfg.horizon:
        raise ValueError(f"|t| = {abs(t_final):.3g} exceeds the horizon {cfg.horizon}")


def integrate_flow(m: ModelProblem, z, t_final: float, tol: float = 1e-12,
                   config: FlowConfig = FlowConfig(), atol: float | None = None) -> FlowTrajectory:
    """Integrate ``dz/dt = H_p(z)`` for the principal symbol of ``m``.

    Parameters
    ----------
    tol : float
        Relative tolerance of the embedded pair.
    atol : float, optional
        Absolute tolerance; defaults to ``tol * atol_scale * max(|z|, tiny)``
        so that small starting points keep their relative accuracy.
    """
    z0 = np.asarray(z, dtype=float)
    _check_domain(m, z0, t_final, config)
    p = m.principal
    e0 = float(eval_symbol(p, z0)[0])
    if t_final == 0.0:
        return FlowTrajectory(np.array([0.0]), z0[None, :].copy(), np.array([e0]), 0.0)
    if atol is None:
        atol = tol * config.atol_scale * max(float(np.linalg.norm(z0)), 1e-300)
    sol = solve_ivp(lambda _, y: hamiltonian_field(p, y), (0.0, float(t_final)), z0,
                    method=config.method, rtol=tol, atol=atol)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        last = sol.y[:, -1] if sol.y.size else z0
        raise FlowError(f"integration failed at t={sol.t[-1] if sol.t.size else 0.0:.6g}, "
                        f"state={np.array2string(last, precision=6)}: {sol.message}")
    states = sol.y.T
    energy = eval_symbol(p, states)[0]
    return FlowTrajectory(sol.t, states, energy, float(np.max(np.abs(energy - e0))))


def flow_map(m: ModelProblem, z, t: float, tol: float = 1e-13, config: FlowConfig = FlowConfig(),
             atol: float | None = None) -> np.ndarray:
    """``Phi_t(z)``."""
    return integrate_flow(m, z, t, tol, config, atol).final


def time_additivity_defect(m: ModelProblem, z, t: float, s: float, tol: float = 1e-12,
                           config: FlowConfig = FlowConfig()) -> float:
    """``|Phi_{t+s}(z) - Phi_t(Phi_s(z))|``; the intermediate point may leave the box."""
    loose = FlowConfig(None, config.horizon, config.method, config.atol_scale)
    direct = flow_map(m, z, t + s, tol, config)
    staged = flow_map(m, flow_map(m, z, s, tol, config), t, tol, loose)
    return float(np.linalg.norm(direct - staged))


@dataclass
class GermSlopeReport:
    t: float
    radii: np.ndarray
    residuals: np.ndarray  # mean over directions, per radius
    slope: float
    local_slopes: np.ndarray
    include_field: bool
    directions: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "radii": self.radii.tolist(),
            "residuals": self.residuals.tolist(),
            "slope": self.slope,
            "local_slopes": self.local_slopes.tolist(),
            "include_field": self.include_field,
            "directions": self.directions,
        }


def germ_residual_slope(m: ModelProblem, t: float, radii: Sequence[float], directions: int = 8,
                        seed: int = 0, include_field: bool = True, tol: float = 1e-13,
                        config: FlowConfig = FlowConfig(), max_spread: float = 0.3) -> GermSlopeReport:
    """Log-log slope of ``|Phi_t(r u) - r u - t H_{p_k}(r u)|`` against ``r``.

    With ``include_field=False`` the field term is omitted and the slope
    measures how flat the flow is to first order (expected ``>= k - 1``).

    Raises
    ------
    GermRegimeError
        If the local slopes between consecutive radii disagree by more than
        ``max_spread`` (radii not in the power regime), or the residuals sink
        to the integration noise floor.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(radii <= 0):
        raise ValueError("need at least two positive radii")
    if config.box is not None and radii.max() > config.box:
        raise GermRegimeError(f"radius {radii.max():.3g} outside the validity box {config.box}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((directions, 2 * m.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    res = np.zeros(radii.size)
    for i, r in enumerate(radii):
        vals = []
        for u in dirs:
            z = r * u
            if t == 0.0:
                vals.append(0.0)
                continue
            end = flow_map(m, z, t, tol, config, atol=1e-6 * tol * r)
            pred = z + t * hamiltonian_field(m.leading, z) if include_field else z
            vals.append(np.linalg.norm(end - pred))
        res[i] = np.mean(vals)
    if t == 0.0:
        return GermSlopeReport(t, radii, res, np.inf, np.full(radii.size - 1, np.inf), include_field, directions)
    floor = 1e2 * tol * radii
    if np.any(res <= floor):
        bad = radii[res <= floor]
        raise GermRegimeError(f"residual at the integration noise floor for r = {bad.tolist()}")
    lr, lres = np.log(radii), np.log(res)
    local = np.diff(lres) / np.diff(lr)
    slope = float(np.polyfit(lr, lres, 1)[0])
    if np.ptp(local) > max_spread:
        table = ", ".join(f"{a:.3g}:{s:.3f}" for a, s in zip(radii[:-1], local))
        raise GermRegimeError(f"residual not in a power regime; local slopes {table}")
    return GermSlopeReport(t, radii, res, slope, local, include_field, directions)
