"""Batch command line: ``degentrace <subcommand> [options]``.

Exit codes: 0 success, 2 hypothesis or validation failure, 1 internal
error, 64 usage error. Outputs go to ``--out`` (default ``$DEGENTRACE_OUT``
or ``./out``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_USAGE = 0, 1, 2, 64
SUBCOMMANDS = ("check", "lvol", "coeff", "osc", "mellin", "spectrum", "trace", "germ")

log = logging.getLogger("degentrace")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    subcommand: str
    out_dir: Path
    inputs: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    workers: int = 1
    dry_run: bool = False

    def validate(self):
        for name, path in self.inputs.items():
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")
        for key, value in self.tolerances.items():
            if not value > 0:
                raise ConfigError(f"tolerance {key} must be positive")
        if self.workers < 1:
            raise ConfigError("worker count must be at least 1")


def _tolerances(items) -> dict:
    out = {}
    for item in items or []:
        key, _, value = item.partition("=")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance override {item!r}; expected key=value") from exc
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="degentrace", description="Degenerate critical point trace experiments.")
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--dry-run", action="store_true", help="validate inputs, compute nothing")
    common.add_argument("--tol", action="append", metavar="KEY=VALUE", help="tolerance override")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("check", parents=[common], help="hypothesis report for a model")
    s.add_argument("--model", required=True)

    s = sub.add_parser("lvol", parents=[common], help="level-set density table of the leading part")
    s.add_argument("--model", required=True)
    s.add_argument("--points", type=int, default=2001)
    s.add_argument("--samples", type=int, default=2**18)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("coeff", parents=[common], help="predicted leading trace coefficient")
    s.add_argument("--model", required=True)
    s.add_argument("--phi", default="R=1,a=0")
    s.add_argument("--table", default=None, help="level-set table CSV (n >= 2)")

    s = sub.add_parser("osc", parents=[common], help="fiber integral sweep against the prediction")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--lam-lo", type=float, default=1e3)
    s.add_argument("--decades", type=float, default=3.0)
    s.add_argument("--support", type=float, default=2.0)

    s = sub.add_parser("mellin", parents=[common], help="pole lattice and normalization constants")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--z-max", type=float, default=4.0)

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalue window with truncation study")
    s.add_argument("--model", required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--N", default=None, help="comma list of basis sizes (default: automatic)")

    s = sub.add_parser("trace", parents=[common], help="spectral h-sweep against the prediction")
    s.add_argument("--model", default=None)
    s.add_argument("--config", default=None, help="experiment file (TOML syntax)")
    s.add_argument("--phi", default=None)
    s.add_argument("--h", default=None, help="hi:lo:count (log-spaced) or comma list")
    s.add_argument("--eps", type=float, default=None)

    s = sub.add_parser("germ", parents=[common], help="flow germ residual slope")
    s.add_argument("--model", required=True)
    s.add_argument("--t", type=float, default=0.1)
    s.add_argument("--radii", default="1e-2:1e-4:5")
    s.add_argument("--directions", type=int, default=8)
    s.add_argument("--linear", action="store_true", help="omit the field term")
    s.add_argument("--trajectory", default=None, help="comma list start point; dumps a trajectory CSV")
    return p


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get("DEGENTRACE_OUT", "out"))


def _run_config(args) -> RunConfig:
    inputs = {k: getattr(args, k, None) for k in ("model", "config", "table")}
    rc = RunConfig(args.subcommand, _out_dir(args), {k: v for k, v in inputs.items() if v},
                   _tolerances(args.tol), args.workers, args.dry_run)
    rc.validate()
    return rc


# ---------------------------------------------------------------------------
# Subcommands. Each returns an exit code; dry runs stop after validation.


def _cmd_check(args, rc):
    from .symbol import check_hypotheses

    m = cfgmod.load_model(args.model)
    if rc.dry_run:
        return EXIT_OK
    tol = rc.tolerances.get("gradient", 1e-6)
    report = check_hypotheses(m, tol=tol)
    payload = report.to_dict()
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(rc.out_dir / "check.json", payload)
    print(json.dumps({k: payload[k] for k in ("h1_plausible", "h2_ok", "h4_ok", "extremum", "messages")}))
    return EXIT_OK if report.h2_ok and report.h4_ok else EXIT_VALIDATION


def _cmd_lvol(args, rc):
    from .sphere import lvol_table
    from .trace import default_level_grid

    m = cfgmod.load_model(args.model)
    if args.points < 16:
        raise ConfigError("need at least 16 grid points")
    if rc.dry_run:
        return EXIT_OK
    table = lvol_table(m.leading, m.n, default_level_grid(m, args.points), args.samples, args.seed)
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(rc.out_dir / "lvol.csv")
    print(f"wrote {rc.out_dir / 'lvol.csv'} ({table.method}, total {table.total:.10g})")
    return EXIT_OK


def _cmd_coeff(args, rc):
    from .sphere import MeasureTable
    from .trace import predicted_trace_leading

    m = cfgmod.load_model(args.model)
    phi = cfgmod.parse_phi(args.phi)
    if rc.dry_run:
        return EXIT_OK
    table = MeasureTable.from_csv(args.table) if args.table else None
    pred = predicted_trace_leading(m, phi, table)
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(rc.out_dir / "prediction.json", pred.to_dict())
    print(json.dumps({"exponent": str(pred.exponent), "has_log": pred.has_log,
                      "leading_coefficient": pred.leading_coefficient}))
    return EXIT_OK


def _cmd_osc(args, rc):
    from .fiber import FiberSweepConfig, fiber_sweep

    fc = FiberSweepConfig(n=args.n, k=args.k, support=args.support, lam_lo=args.lam_lo, decades=args.decades,
                          tol=rc.tolerances.get("relative", 0.02), stability=rc.tolerances.get("stability", 0.2))
    if fc.n < 1 or fc.k < 3:
        raise ConfigError("need n >= 1 and k >= 3")
    if rc.dry_run:
        return EXIT_OK
    samples, pred, summary = fiber_sweep(fc)
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    samples.to_csv(rc.out_dir / "osc_samples.csv")
    summary["prediction"] = pred.to_records()
    _write_json(rc.out_dir / "osc_report.json", summary)
    print(json.dumps({"free_exponent": summary["free_exponent"], "passed": summary["passed"]}))
    return EXIT_OK


def _cmd_mellin(args, rc):
    from .mellin import bernstein_sato_roots, canonical_constant, pole_lattice

    if args.n < 1 or args.k < 1:
        raise ConfigError("n and k must be positive")
    if rc.dry_run:
        return EXIT_OK
    payload = {
        "n": args.n,
        "k": args.k,
        "bernstein_sato_roots": [str(r) for r in bernstein_sato_roots(args.k, args.n)],
        "poles": [p.to_dict() for p in pole_lattice(args.n, args.k, args.z_max)],
        "canonical_constant": str(canonical_constant(args.n, args.k, exact=True))
        if (2 * args.n) % args.k else None,
    }
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(rc.out_dir / "mellin.json", payload)
    print(json.dumps(payload["poles"]))
    return EXIT_OK


def _cmd_spectrum(args, rc):
    from .weyl import basis_size_for, truncation_study

    m = cfgmod.load_model(args.model)
    eps = m.eps if args.eps is None else args.eps
    if not args.h > 0:
        raise ConfigError("h must be positive")
    if eps >= m.admissible_eps:
        raise ConfigError(f"eps={eps} outside the admissible window {m.admissible_eps:.4g}")
    sizes = [int(v) for v in args.N.split(",")] if args.N else None
    if rc.dry_run:
        return EXIT_OK
    if sizes is None:
        N0 = basis_size_for(m, args.h, m.critical_energy, eps)
        sizes = [int(round(f * N0)) for f in (0.85, 1.0, 1.15)]
    win = truncation_study(m, args.h, m.critical_energy, eps, sizes,
                           rel_tol=rc.tolerances.get("convergence", 1e-3))
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    win.to_csv(rc.out_dir / "window.csv")
    _write_json(rc.out_dir / "truncation.json", {"h": args.h, "eps": eps, "count": len(win),
                                                 "converged": win.converged, "movements": win.movements})
    print(f"{len(win)} eigenvalues in [{m.critical_energy - eps:g}, {m.critical_energy + eps:g}]")
    return EXIT_OK


def _cmd_trace(args, rc):
    from .trace import h_sweep_experiment

    if args.config:
        exp = cfgmod.load_experiment(args.config)
    elif args.model:
        exp = cfgmod.ExperimentConfig(cfgmod.load_model(args.model))
    else:
        raise ConfigError("trace needs --model or --config")
    if args.phi:
        exp.phi = cfgmod.parse_phi(args.phi)
    if args.h:
        exp.h_values = cfgmod.parse_range(args.h)
    if args.eps is not None:
        exp.eps = args.eps
    names = {"exponent": "exponent_tol", "coefficient": "coefficient_tol", "dominance": "dominance_min",
             "convergence": "convergence_rel_tol"}
    overrides = {names[k]: v for k, v in rc.tolerances.items() if k in names}
    unknown = set(rc.tolerances) - set(names)
    if unknown:
        raise ConfigError(f"unknown tolerance keys for trace: {sorted(unknown)}")
    exp.sweep = replace(exp.sweep, workers=rc.workers, **overrides)
    eps = exp.model.eps if exp.eps is None else exp.eps
    if eps >= exp.model.admissible_eps:
        raise ConfigError(f"eps={eps} outside the admissible window {exp.model.admissible_eps:.4g}")
    if len(exp.h_values) < exp.sweep.min_points:
        raise ConfigError(f"need at least {exp.sweep.min_points} h values")
    if rc.dry_run:
        return EXIT_OK
    report = h_sweep_experiment(exp.model, exp.phi, exp.h_values, eps, exp.sweep,
                                progress=lambda s: log.info("h=%.4g gamma=%.10g count=%d N=%d",
                                                            s.h, s.gamma, s.count, s.basis_size))
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(rc.out_dir / "trace_samples.csv")
    report.to_json(rc.out_dir / "trace_report.json")
    with open(rc.out_dir / "trace_loglog.dat", "w") as fh:
        fh.write("# log10(h) log10(gamma)\n")
        for s in report.samples:
            fh.write(f"{np.log10(s.h):.12g} {np.log10(abs(s.gamma)):.12g}\n")
    print(json.dumps({k: report.checks[k] for k in ("free_exponent", "coefficient_ratio")} |
                     {"verdict": "pass" if report.verdict else "fail"}))
    return EXIT_OK


def _cmd_germ(args, rc):
    from .dynamics import germ_residual_slope, integrate_flow

    m = cfgmod.load_model(args.model)
    radii = cfgmod.parse_range(args.radii)
    start = None
    if args.trajectory:
        try:
            start = np.array([float(v) for v in args.trajectory.split(",")])
        except ValueError as exc:
            raise ConfigError("trajectory start must be a comma list of numbers") from exc
    if rc.dry_run:
        return EXIT_OK
    rep = germ_residual_slope(m, args.t, radii, args.directions, include_field=not args.linear)
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    payload = rep.to_dict() | {"k": m.k}
    if start is not None:
        traj = integrate_flow(m, start, args.t, rc.tolerances.get("flow", 1e-12))
        traj.to_csv(rc.out_dir / "trajectory.csv")
        payload["energy_drift"] = traj.energy_drift
    _write_json(rc.out_dir / "germ.json", payload)
    print(json.dumps({"slope": rep.slope, "k": m.k}))
    return EXIT_OK


_COMMANDS = {
    "check": _cmd_check, "lvol": _cmd_lvol, "coeff": _cmd_coeff, "osc": _cmd_osc, "mellin": _cmd_mellin,
    "spectrum": _cmd_spectrum, "trace": _cmd_trace, "germ": _cmd_germ,
}


def run(argv: list[str] | None = None) -> int:
    from .dynamics import GermRegimeError
    from .symbol import HypothesisError, ModelError
    from .weyl import QuantizationError, TruncationError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        rc = _run_config(args)
        return _COMMANDS[args.subcommand](args, rc)
    except (ConfigError, HypothesisError, ModelError, QuantizationError, GermRegimeError, TruncationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - reported as internal error
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
