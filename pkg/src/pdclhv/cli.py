"""Command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 numerical
non-convergence, 3 a compare row outside the acceptance threshold.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Any

from . import analytic, feasibility, mc
from .core import CONFIG_KEYS, ConfigError, ExperimentConfig, build_mode_grid, load_config
from .io import dumps_json, format_csv, provenance, write_text

VERBS = ("analytic", "mc", "compare", "histogram", "feasibility", "zpf-oracle")
ANALYTIC_KEYS = ("m", "x", "gamma", "rho_c")
INT_KEYS = ("n_trials", "seed")
EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_THRESHOLD = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parse_value(key: str, text: str) -> Any:
    text = text.strip()
    if text.lower() in ("none", "null"):
        return None
    if "," in text:
        raise UsageError(f"--set {key}: use '.' as the decimal separator, got {text!r}")
    try:
        if key in INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        raise UsageError(f"--set {key}: not a number: {text!r}") from None


def parse_overrides(items: list[str], extra_keys=()) -> tuple[dict, dict]:
    """Split KEY=VALUE items into config overrides and verb-specific values."""
    config, extra = {}, {}
    for item in items or []:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        if key in extra_keys:
            extra[key] = _parse_value(key, value)
        elif key in CONFIG_KEYS:
            config[key] = _parse_value(key, value)
        else:
            raise UsageError(f"--set: unknown key {key!r}")
    return config, extra


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdclhv", description="Hidden-variable photodetection model of PDC light.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json", "table"), default=None,
                   help="csv (default) or json; analytic and feasibility default to json")
    p.add_argument("--scenario", choices=("zpf", "single", "joint"), default="single")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1, help="worker processes, 0 = all cores")
    p.add_argument("--sampler", choices=mc.SAMPLERS, default="auto")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--strictness", type=float, default=feasibility.DEFAULT_STRICTNESS)
    p.add_argument("--bins", type=int, default=50)
    return p


def _table(rows: list[dict], columns) -> str:
    cells = [[str(c) for c in columns]] + [[_short(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) + "\n" for row in cells)


def _short(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _emit(args, fmt: str, meta: dict, columns, rows, payload: dict | None = None):
    if fmt == "json":
        body = {"meta": meta, "rows": rows} if payload is None else {"meta": meta, **payload}
        text = dumps_json(body)
    elif fmt == "table":
        text = _table(rows, columns)
    else:
        text = format_csv(meta, columns, rows)
    write_text(text, args.output)


def _meta(args, config: ExperimentConfig, **extra):
    return provenance(args.verb, config.to_dict(), **extra)


def _run_analytic(args, config, extra):
    rep = analytic.analytic_report(config, **{k: extra.get(k) for k in ANALYTIC_KEYS})
    d = rep.to_dict()
    meta = _meta(args, config)
    _emit(args, args.format or "json", meta, list(d), [d], {"result": d})
    return EXIT_OK


def _trial_args(args, config):
    n = config.n_trials if args.trials is None else args.trials
    seed = config.seed if args.seed is None else args.seed
    if n < 1:
        raise UsageError("--trials must be >= 1")
    return n, seed


def _run_mc(args, config, _extra):
    n, seed = _trial_args(args, config)
    res = mc.simulate(config, args.scenario, n, seed, args.workers, args.sampler)
    rows = [{"quantity": e.quantity, "mean": e.mean, "std_error": e.std_error, "n": e.n}
            for e in res.estimates]
    rows.append({"quantity": "u-min", "mean": res.u_min, "std_error": None, "n": n})
    meta = _meta(args, config, scenario=args.scenario, trials=n, seed=seed, sampler=res.sampler)
    _emit(args, args.format or "csv", meta, ("quantity", "mean", "std_error", "n"), rows)
    return EXIT_OK


def _run_compare(args, config, _extra):
    n, seed = _trial_args(args, config)
    out = mc.compare(config, args.scenario, n, seed, args.workers, args.sampler)
    rows = [r.to_dict() for r in out]
    passed = all(r.passed for r in out)
    meta = _meta(args, config, scenario=args.scenario, trials=n, seed=seed, sampler=args.sampler,
                 z_limit=mc.Z_LIMIT, all_passed=passed)
    cols = ("quantity", "mean", "std_error", "n", "analytic", "z", "passed", "note")
    _emit(args, args.format or "csv", meta, cols, rows)
    return EXIT_OK if passed else EXIT_THRESHOLD


def _run_histogram(args, config, _extra):
    n, seed = _trial_args(args, config)
    if args.bins < 10:
        raise UsageError("--bins must be >= 10")
    h = mc.histogram_u(config, n, seed, args.bins, args.scenario, args.workers, args.sampler)
    rows = [{"bin_left": a, "bin_right": b, "density": d, "expected_density": e}
            for a, b, d, e in h.rows()]
    meta = _meta(args, config, scenario=args.scenario, trials=n, seed=seed, bins=args.bins,
                 chi2=h.chi2, dof=h.dof, mean=h.mean, mean_se=h.mean_se, skewness=h.skewness,
                 skewness_limit=h.skewness_limit, outside=h.outside)
    _emit(args, args.format or "csv", meta,
          ("bin_left", "bin_right", "density", "expected_density"), rows)
    return EXIT_OK


def _run_feasibility(args, config, _extra):
    rep = feasibility.minimal_bounds(config, args.strictness).to_dict()
    sweep = feasibility.sweep_tau(config, feasibility.default_tau_grid(), args.strictness)
    meta = _meta(args, config, strictness=args.strictness)
    fmt = args.format or "json"
    if fmt == "json":
        _emit(args, fmt, meta, (), [], {"report": rep, "sweep": sweep})
    elif fmt == "table":
        rows = [{"quantity": k, "value": v} for k, v in rep.items()]
        write_text(_table(rows, ("quantity", "value")) + "\n"
                   + _table(sweep, feasibility.SWEEP_COLUMNS), args.output)
    else:
        _emit(args, fmt, meta, feasibility.SWEEP_COLUMNS, sweep)
    return EXIT_OK


def _run_zpf_oracle(args, config, _extra):
    grid = build_mode_grid(config)
    idx = sorted({0, grid.n_elements // 2, grid.n_elements - 1})
    rows = []
    for j in idx:
        w = float(grid.frequencies[j])
        q = analytic.zpf_element_quadrature(config, w)
        closed = analytic.zpf_element_intensity_closed(config, w)
        rows.append({"element": j, "omega": w, "closed": closed, "quadrature": q.value,
                     "error_estimate": q.error, "ratio": q.value / closed})
    meta = _meta(args, config, small_radius_ratio=analytic.small_radius_ratio(config))
    _emit(args, args.format or "csv", meta,
          ("element", "omega", "closed", "quadrature", "error_estimate", "ratio"), rows)
    return EXIT_OK


HANDLERS = {"analytic": _run_analytic, "mc": _run_mc, "compare": _run_compare,
            "histogram": _run_histogram, "feasibility": _run_feasibility,
            "zpf-oracle": _run_zpf_oracle}


def run_cli(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.workers < 0:
            raise UsageError("--workers must be >= 0")
        if not (args.strictness >= 1 and math.isfinite(args.strictness)):
            raise UsageError("--strictness must be >= 1")
        extra_keys = ANALYTIC_KEYS if args.verb == "analytic" else ()
        overrides, extra = parse_overrides(args.overrides, extra_keys)
        config = load_config(args.config)
        if overrides:
            config = config.replace(**overrides)
        return HANDLERS[args.verb](args, config, extra)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"pdclhv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except analytic.ConvergenceError as exc:
        print(f"pdclhv: non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except mc.ResourceError as exc:
        print(f"pdclhv: {exc}; no results written", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
