"""Model and experiment files (TOML) and small command-line value parsers.

Model file grammar::

    [model]
    # either a built family member
    family = "rotation-confined"   # Re((x+i xi)^k) + c (x^2+xi^2)^ceil((k+1)/2)
    k = 3
    confinement = 1.0
    # or explicit terms, one "e_1 ... e_2n : coefficient" string each,
    # either split by degree
    # n = 1
    # k = 3
    # leading = ["3 0 : 1.0", "1 2 : -3.0"]
    # higher = ["4 0 : 1.0", "2 2 : 2.0", "0 4 : 1.0"]
    # or as one list, split here into degree k and degrees above k
    # terms = ["3 0 : 1.0", "1 2 : -3.0", "4 0 : 1.0", "2 2 : 2.0", "0 4 : 1.0"]
    # other_critical_values = [-0.10546875]   # optional, bounds eps
    critical_energy = 0.0          # optional, alias E_c
    subprincipal = 0.0             # optional
    eps = 0.05                     # optional energy half-window

Experiment files add an ``[experiment]`` table with ``model`` (path relative
to the experiment file), ``phi`` (``"R=1,a=0"`` or a table
``{hat = "bump", radius = 1.0, shift = 0.0}``), ``h`` (``"1e-2:1e-4:12"``),
``eps`` and tolerance keys matching :class:`degentrace.trace.SweepConfig`
(``eps_widen = false`` skips the widened-window check).

Files use TOML syntax whatever their extension (the shipped ones are ``.cfg``).
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .symbol import DEFAULT_EPS, ModelProblem, PolynomialSymbol, build_model_symbol
from .testfn import TestFunction
from .trace import SweepConfig


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def parse_term(text: str, dim: int | None = None) -> tuple[tuple[int, ...], float]:
    """``"3 0 : 1.0"`` -> ``((3, 0), 1.0)``."""
    try:
        left, right = text.split(":")
        exps = tuple(int(tok) for tok in left.split())
        coeff = float(right)
    except ValueError as exc:
        raise ConfigError(f"bad term {text!r}; expected 'e1 e2 ... : coefficient'") from exc
    if dim is not None and len(exps) != dim:
        raise ConfigError(f"term {text!r} has {len(exps)} exponents, expected {dim}")
    return exps, coeff


def _symbol(n: int, items) -> PolynomialSymbol:
    if not isinstance(items, list):
        raise ConfigError("term lists must be arrays of strings")
    return PolynomialSymbol(n, [parse_term(str(t), 2 * n) for t in items])


def model_from_dict(d: dict) -> ModelProblem:
    d = dict(d)
    eps = float(d.pop("eps", DEFAULT_EPS))
    sub = float(d.pop("subprincipal", 0.0))
    if "E_c" in d and "critical_energy" in d:
        raise ConfigError("give either E_c or critical_energy, not both")
    energy = float(d.pop("E_c", d.pop("critical_energy", 0.0)))
    family = d.pop("family", None)
    if family is not None:
        if family != "rotation-confined":
            raise ConfigError(f"unknown model family {family!r}")
        try:
            k = int(d.pop("k"))
        except KeyError as exc:
            raise ConfigError("family models need k") from exc
        m = build_model_symbol(k, float(d.pop("confinement", 1.0)), eps)
        if d:
            raise ConfigError(f"unknown model keys: {sorted(d)}")
        return replace(m, critical_energy=energy, subprincipal_value=sub)
    try:
        n, k = int(d.pop("n")), int(d.pop("k"))
    except KeyError as exc:
        raise ConfigError(f"explicit models need n and k; missing {exc}") from exc
    if "terms" in d:
        if "leading" in d or "higher" in d:
            raise ConfigError("give either terms or leading/higher, not both")
        full = _symbol(n, d.pop("terms"))
        low = [j for j in full.degrees() if j < k]
        if low:
            raise ConfigError(f"terms of degree {low} below k={k}: the critical point must be degenerate of order k")
        leading = full.homogeneous_part(k)
        higher = full - leading
    else:
        if "leading" not in d:
            raise ConfigError("explicit models need terms or leading")
        leading = _symbol(n, d.pop("leading"))
        higher = _symbol(n, d.pop("higher", []))
    conf = d.pop("confinement", None)
    others = tuple(float(v) for v in d.pop("other_critical_values", []))
    if d:
        raise ConfigError(f"unknown model keys: {sorted(d)}")
    try:
        return ModelProblem(n, k, leading, higher, energy, sub, None if conf is None else float(conf), others, eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _read_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_model(path) -> ModelProblem:
    data = _read_toml(path)
    if "model" not in data:
        raise ConfigError(f"{path}: missing [model] table")
    return model_from_dict(data["model"])


def parse_phi(text: str) -> TestFunction:
    """``"R=1,a=0"`` -> ``TestFunction(support_radius=1, shift=0)``."""
    vals = {"R": 1.0, "a": 0.0}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, value = part.partition("=")
        if key not in vals or not value:
            raise ConfigError(f"bad phi parameter {part!r}; expected R=... or a=...")
        try:
            vals[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad phi value {part!r}") from exc
    if not vals["R"] > 0:
        raise ConfigError("phi support radius must be positive")
    return TestFunction(support_radius=vals["R"], shift=vals["a"])


def phi_from_dict(d: dict) -> TestFunction:
    d = dict(d)
    hat = d.pop("hat", "bump")
    if hat != "bump":
        raise ConfigError(f"unsupported test-function profile {hat!r}; only 'bump'")
    try:
        phi = TestFunction(float(d.pop("radius", 1.0)), float(d.pop("shift", 0.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if d:
        raise ConfigError(f"unknown test-function keys: {sorted(d)}")
    return phi


def parse_range(text: str) -> np.ndarray:
    """``"hi:lo:count"`` (log-spaced, either order) or a comma list."""
    try:
        if ":" in text:
            a, b, c = text.split(":")
            a, b, count = float(a), float(b), int(c)
            if a <= 0 or b <= 0 or count < 1:
                raise ValueError
            return np.logspace(math.log10(a), math.log10(b), count)
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}; expected a:b:count or a comma list") from exc


@dataclass
class ExperimentConfig:
    model: ModelProblem
    phi: TestFunction = field(default_factory=TestFunction)
    h_values: np.ndarray = field(default_factory=lambda: np.logspace(-2, -4, 12))
    eps: float | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)


def load_experiment(path) -> ExperimentConfig:
    data = _read_toml(path)
    exp = dict(data.get("experiment", {}))
    if "model" in exp:
        model = load_model(Path(path).parent / exp.pop("model"))
    elif "model" in data:
        model = model_from_dict(data["model"])
    else:
        raise ConfigError("experiment needs a model path or an inline [model] table")
    phi_spec = exp.pop("phi", "R=1,a=0")
    phi = phi_from_dict(phi_spec) if isinstance(phi_spec, dict) else parse_phi(str(phi_spec))
    h = parse_range(exp.pop("h", "1e-2:1e-4:12"))
    eps = exp.pop("eps", None)
    names = {f.name for f in fields(SweepConfig)}
    unknown = set(exp) - names
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    for key, value in exp.items():
        if isinstance(value, bool):
            if value:
                raise ConfigError(f"{key} = true is not meaningful; give a number")
            exp[key] = None
        elif isinstance(value, (int, float)) and not value > 0:
            raise ConfigError(f"{key} must be positive")
    if "basis_factors" in exp:
        exp["basis_factors"] = tuple(float(v) for v in exp["basis_factors"])
    sweep = SweepConfig(**exp)
    return ExperimentConfig(model, phi, h, None if eps is None else float(eps), sweep)
