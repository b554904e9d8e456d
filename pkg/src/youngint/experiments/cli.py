"""Command-line entry point.

Every subcommand writes ``report.json`` (sorted keys, no timings or thread
counts) and ``config.ini`` (the resolved configuration) into ``--out``.
Tabular results go to ``paths.csv`` / ``sweep.csv`` with ``--format csv``
and are inlined into ``report.json`` with ``--format json``.

Exit codes: 0 success, 2 precondition violation, 3 numerical divergence,
4 failed ``--check``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import (
    CalibrationError,
    DomainError,
    ExperimentError,
    NumericalError,
    PreconditionError,
)
from ..integrate import relative_difference, rs_integral, zahle_integral
from ..paths import FbmSpec, GridPath, estimate_holder_exponent, holder_seminorm, sample_fbm_array, sup_norm
from ..solver import solve_young_euler
from . import harness
from .config import COMMANDS, ExperimentConfig, config_fields, load_config, make_field, parse_value, write_config

logger = logging.getLogger("youngint")

EXIT_OK, EXIT_PRECONDITION, EXIT_DIVERGENCE, EXIT_CHECK = 0, 2, 3, 4

# keys that describe how a run was executed rather than what it computed
RUNTIME_KEYS = ("threads", "out", "format")


def clean(obj: Any) -> Any:
    """JSON-safe copy: dataclasses to dicts, arrays to lists, non-finite floats to strings."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return clean(obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj: Any) -> None:
    text = json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n")


def write_rows(path: Path, rows: list[dict[str, Any]]) -> None:
    fieldnames: list[str] = []
    for r in rows:
        fieldnames += [k for k in r if k not in fieldnames]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


class Run:
    """Output directory plus the pieces every command writes."""

    def __init__(self, command: str, cfg: ExperimentConfig, check: bool) -> None:
        self.command, self.cfg, self.check = command, cfg, check
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        write_config(cfg, command, self.dir / "config.ini")

    def finish(self, results: dict[str, Any], passed: bool | None, tables: dict[str, list] | None = None) -> int:
        report: dict[str, Any] = {
            "command": self.command,
            "config": {k: v for k, v in self.cfg.to_dict().items() if k not in RUNTIME_KEYS},
            "results": results,
        }
        for name, rows in (tables or {}).items():
            if self.cfg.format == "json":
                report[name] = rows
            else:
                write_rows(self.dir / f"{name}.csv", rows)
        if self.check:
            report["check"] = {"passed": bool(passed)}
        write_json(self.dir / "report.json", report)
        if self.check and not passed:
            logger.error("%s: check failed", self.command)
            return EXIT_CHECK
        return EXIT_OK


def path_rows(times: np.ndarray, cols: np.ndarray, names: Sequence[str]) -> list[dict[str, Any]]:
    return [
        {"t": float(t), **{n: float(v) for n, v in zip(names, row)}} for t, row in zip(times, cols)
    ]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_fbm(cfg: ExperimentConfig, run: Run, args) -> int:
    spec = FbmSpec(cfg.hurst, cfg.n_points, cfg.horizon, 1, cfg.seed, cfg.fbm_method)
    vals = sample_fbm_array(spec, cfg.gen_paths)[:, :, 0]
    stats = []
    for i, v in enumerate(vals):
        p = GridPath(spec.times, v)
        stats.append(
            {
                "index": i,
                "seminorm": holder_seminorm(p, cfg.beta),
                "sup": sup_norm(p),
                "beta_hat": estimate_holder_exponent(p),
            }
        )
    results = {"method": spec.resolved_method, "n_points": spec.n_points, "paths": stats}
    passed = all(s["beta_hat"] > 0.5 for s in stats)
    names = [f"v{i + 1}" for i in range(cfg.gen_paths)]
    return run.finish(results, passed, {"paths": path_rows(spec.times, vals.T, names)})


def _driver_pair(cfg: ExperimentConfig, args) -> tuple[GridPath, GridPath]:
    if args.f_csv or args.g_csv:
        if not (args.f_csv and args.g_csv):
            raise PreconditionError("--f-csv and --g-csv must be given together")
        return GridPath.from_csv(args.f_csv), GridPath.from_csv(args.g_csv)
    t, b = harness.fbm_on(cfg, cfg.horizon, 1, 0, harness.MC_STREAM, 2)
    return GridPath(t, b[0, :, :1]), GridPath(t, b[0, :, 1:])


def cmd_integrate(cfg: ExperimentConfig, run: Run, args) -> int:
    f, g = _driver_pair(cfg, args)
    trap = rs_integral(f, g, "trapezoid")
    left = rs_integral(f, g, "left")
    z = zahle_integral(f, g, cfg.alpha or None, cfg.oversample)
    results = {
        "rs_trapezoid": {"value": trap.value, "est_error": trap.est_error},
        "rs_left": {"value": left.value, "est_error": left.est_error},
        "zahle": {"value": z.value, "est_error": z.est_error, "order": z.order},
        "rel_diff": relative_difference(z.scalar, trap.scalar) if z.value.size == 1 else None,
        "n_points": len(f),
    }
    gap = float(np.linalg.norm(z.value - trap.value)) / max(float(np.linalg.norm(trap.value)), 1e-300)
    table = path_rows(f.times, np.column_stack([f.values, g.values]),
                      [f"f{j + 1}" for j in range(f.dimension)] + [f"g{j + 1}" for j in range(g.dimension)])
    return run.finish(results, gap <= 1e-2, {"paths": table})


def cmd_solve(cfg: ExperimentConfig, run: Run, args) -> int:
    field = make_field(cfg.field or "bounded_sine")
    if args.driver_csv:
        y = GridPath.from_csv(args.driver_csv)
    else:
        t, b = harness.fbm_on(cfg, cfg.horizon, 1, 0, harness.MC_STREAM, field.m)
        y = GridPath(t, b[0])
    res = solve_young_euler(field, np.full(field.d, cfg.x0), y)
    x = res.path
    results = {
        "field": field.name,
        "beta_hat": res.beta_hat,
        "coarse_gap": res.coarse_gap,
        "converged": res.converged,
        "messages": list(res.messages),
        "sup": sup_norm(x),
        "x_T": x.values[-1],
        "driver_seminorm": holder_seminorm(y, cfg.beta),
    }
    names = [f"x{j + 1}" for j in range(x.dimension)] + [f"y{j + 1}" for j in range(y.dimension)]
    table = path_rows(x.times, np.column_stack([x.values, y.values]), names)
    return run.finish(results, res.converged, {"paths": table})


def cmd_bound_sweep(cfg: ExperimentConfig, run: Run, args) -> int:
    out = harness.run_bound_sweep(cfg.kind, cfg)
    s = out["summary"]
    passed = s["holdout_violations"] == 0 and s.get("closed_form_violations", 0) == 0
    return run.finish(s, passed, {"sweep": [r.flat() for r in out["rows"]]})


def cmd_moments(cfg: ExperimentConfig, run: Run, args) -> int:
    sigma = make_field(cfg.field or "bounded_sine")
    sample = harness.simulate_sups(sigma, cfg.x0, cfg, with_seminorm=False)
    ests = [harness.moment_estimate(sample, p, cfg) for p in cfg.p]
    points = [e.point_estimate for e in ests]
    order = np.argsort(cfg.p, kind="stable")
    # power means (E S^p)^{1/p} are nondecreasing in p on any empirical measure
    means = [points[i] ** (1.0 / cfg.p[i]) for i in order]
    monotone = all(a <= b * (1 + 1e-12) for a, b in zip(means, means[1:]))
    results = {
        "field": sigma.name,
        "x0": cfg.x0,
        "n_paths": sample.n_paths,
        "n_divergent": sample.n_divergent,
        "estimates": [e.to_dict() for e in ests],
        "power_means_monotone": monotone,
    }
    return run.finish(results, monotone, {"sweep": [e.to_dict() for e in ests]})


def cmd_exp_moments(cfg: ExperimentConfig, run: Run, args) -> int:
    sigma = make_field(cfg.field or "bounded_sine")
    rep = harness.mc_exp_moments(sigma, cfg.x0, cfg)
    results = {"field": sigma.name, "x0": cfg.x0, **rep.to_dict()}
    passed = math.isfinite(rep.estimate.point_estimate) and rep.tail.compatible
    return run.finish(results, passed)


def cmd_crossval(cfg: ExperimentConfig, run: Run, args) -> int:
    out = harness.run_crossval(cfg)
    summ = out["summary"]["per_hurst"]
    passed = all(
        s["frac_within_1e-3"] >= 0.95
        and s["max_rel_diff"] <= 1e-2
        and s["max_chain_rs_rel"] <= 1e-3
        and s["max_chain_zahle_rel"] <= 1e-3
        for s in summ.values()
    )
    return run.finish(out["summary"], passed, {"sweep": [asdict(r) for r in out["rows"]]})


HANDLERS: dict[str, Callable] = {
    "gen-fbm": cmd_gen_fbm,
    "integrate": cmd_integrate,
    "solve": cmd_solve,
    "bound-sweep": cmd_bound_sweep,
    "moments": cmd_moments,
    "exp-moments": cmd_exp_moments,
    "crossval": cmd_crossval,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="youngint", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = {"seed", "out", "threads", "format"}
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file; [common] and [%s] sections are read" % name)
        p.add_argument("--seed", type=lambda s: int(s, 0))
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--check", action="store_true", help="exit with code 4 if the run's check fails")
        if name == "integrate":
            p.add_argument("--f-csv")
            p.add_argument("--g-csv")
        if name == "solve":
            p.add_argument("--driver-csv")
        group = p.add_argument_group("config overrides")
        for f in config_fields():
            if f.name not in common:
                group.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar="VALUE")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = {}
        for f in config_fields():
            v = getattr(args, f.name, None)
            if v is None:
                continue
            overrides[f.name] = parse_value(f.name, v) if isinstance(v, str) else v
        cfg = load_config(args.command, args.config, overrides)
        run = Run(args.command, cfg, args.check)
        return HANDLERS[args.command](cfg, run, args)
    except (PreconditionError, DomainError, CalibrationError) as exc:
        logger.error("precondition violated: %s", exc)
        return EXIT_PRECONDITION
    except (NumericalError, ExperimentError) as exc:
        logger.error("numerical divergence: %s", exc)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
