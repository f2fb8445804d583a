"""Command-line interface: ``binfit fit | bench | validate``.

Exit codes: 0 success, 1 partial failure (some units failed or are
invalid), 2 usage, parse or configuration error, 3 every unit failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .bench import ESTIMATORS, PARAM_NAMES, GeneratorFamily, GeneratorSpec, fit_unit, normalize_estimators, run_benchmark
from .comparison import DagumParams, Gb2Params
from .data import DEFAULT_COLUMNS, EligibilityRule, is_eligible, read_samples, validate
from .distributions import EggParams, PowerParams
from .errors import BinfitError, BinValidationError, EmptyEstimatorSet
from .fitting import FitConfig, FitResult
from .moments import MomentSummary, MomentValue
from .selection import BestOfBreed

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_TOTAL = 0, 1, 2, 3

FIT_COLUMNS = ("id", "_DIST_", "mu", "sigma", "lambda", "a", "b", "p", "q",
               "mean", "variance", "sd", "cv", "loglik", "flags", "error")

_CONFIG_KEYS = {"max_iterations", "param_tol", "loglik_tol", "restarts", "pn_grid", "pl_grid",
                "top_bin_factor", "min_total", "min_nonzero_bins"}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None) -> dict:
    """Read a JSON configuration object; errors name the offending line."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _grid(value, key: str):
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be a non-empty list of positive integers or null")
    for v in value:
        if v is not None and not (isinstance(v, int) and not isinstance(v, bool) and v > 0):
            raise ConfigError(f"{key}: {v!r} is not a positive integer or null")
    return tuple(value)


def fit_config(cfg: dict, seed: int) -> FitConfig:
    """Build a :class:`FitConfig` from the ``fit`` settings of a config object."""
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    kw = {k: cfg[k] for k in ("max_iterations", "param_tol", "loglik_tol", "restarts", "top_bin_factor") if k in cfg}
    rule = EligibilityRule(
        min_total=cfg.get("min_total", EligibilityRule.min_total),
        min_nonzero_bins=cfg.get("min_nonzero_bins", EligibilityRule.min_nonzero_bins),
    )
    try:
        return FitConfig(pn_grid=_grid(cfg.get("pn_grid"), "pn_grid"), pl_grid=_grid(cfg.get("pl_grid"), "pl_grid"),
                         seed=seed, eligibility=rule, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output formatting


def format_number(x) -> str:
    """Shortest round-trip text for a float; ``NA`` for anything undefined."""
    if isinstance(x, MomentValue):
        x = x.value if x.is_finite else None
    if x is None:
        return "NA"
    x = float(x)
    return repr(x) if math.isfinite(x) else "NA"


def _param_cells(params) -> dict:
    if isinstance(params, (EggParams, PowerParams)):
        return {"mu": params.mu, "sigma": params.sigma, "lambda": params.lam}
    if isinstance(params, Gb2Params):
        return {"a": params.a, "b": params.b, "p": params.p, "q": params.q}
    if isinstance(params, DagumParams):
        return {"a": params.a, "b": params.b, "p": params.p}
    return {}


def fit_row(uid, model: str, outcome) -> dict:
    """One output row; every column of :data:`FIT_COLUMNS` is present."""
    row = {c: "NA" for c in FIT_COLUMNS}
    row.update(id=str(uid), flags="", error="")
    if isinstance(outcome, Exception):
        row["_DIST_"] = model
        row["error"] = type(outcome).__name__
        return row
    if isinstance(outcome, BestOfBreed):
        outcome = outcome.chosen
    if isinstance(outcome, FitResult):
        row["_DIST_"] = outcome.family.value
        row.update({k: format_number(v) for k, v in _param_cells(outcome.params).items()})
        row["loglik"] = format_number(outcome.loglik)
        row["flags"] = ";".join(sorted(outcome.flags))
        m = outcome.moments
    else:
        row["_DIST_"] = "midpoint"
        m: MomentSummary = outcome
        row["flags"] = ";".join(sorted(m.flags))
    for key in ("mean", "variance", "sd", "cv"):
        row[key] = format_number(getattr(m, key))
    return row


def _table(rows: list[dict], columns) -> str:
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) for c in columns}
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    lines += ["  ".join(r[c].ljust(widths[c]) for c in columns) for r in rows]
    return "\n".join(line.rstrip() for line in lines)


# ---------------------------------------------------------------------------
# commands


def _columns(args) -> dict:
    cols = {"min": args.min, "max": args.max, "n": args.n}
    # a defaulted id column may be absent (single-unit file); a named one must exist
    if args.id != DEFAULT_COLUMNS["id"]:
        cols["id"] = args.id
    return cols


def _fit_job(job):
    sample, model, config = job
    return fit_unit(sample, [model], config)[model]


def cmd_fit(args) -> int:
    config = fit_config(load_config(args.config), args.seed)
    model = normalize_estimators([args.model])[0]
    samples = read_samples(args.data, _columns(args))
    if not samples:
        print("error: no units in input", file=sys.stderr)
        return EXIT_TOTAL
    jobs = [(s, model, config) for s in samples]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_fit_job, jobs))
    else:
        outcomes = [_fit_job(j) for j in jobs]
    rows = [fit_row(s.id, model, o) for s, o in zip(samples, outcomes)]

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FIT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    if args.print == "Y":
        shown = ("id", "_DIST_", "mean", "sd", "cv", "loglik", "error")
        print(_table(rows, shown))

    failed = sum(1 for r in rows if r["error"])
    for r in rows:
        if r["error"]:
            print(f"unit {r['id']}: {r['error']}", file=sys.stderr)
    if failed == len(rows):
        return EXIT_TOTAL
    return EXIT_PARTIAL if failed else EXIT_OK


def _parse_params(text: str) -> dict:
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"parameter {item!r} is not of the form name=value")
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"parameter {key.strip()!r}: {value!r} is not a number") from exc
    return out


def _generator_spec(args, cfg: dict) -> GeneratorSpec:
    gen = dict(cfg.get("generator", {}))
    if args.family is not None:
        gen["family"] = args.family
    if args.params is not None:
        gen["params"] = _parse_params(args.params)
    if args.units is not None:
        gen["n_units"] = args.units
    if args.size is not None:
        gen["unit_size"] = args.size
    if args.no_rounding:
        gen["apply_census_rounding"] = False
    if args.scale_sd is not None:
        gen["scale_sd"] = args.scale_sd
    gen["seed"] = args.seed
    if "family" not in gen:
        raise ConfigError("a generator family is required (--family or generator.family)")
    try:
        family = GeneratorFamily(gen["family"])
    except ValueError as exc:
        choices = ", ".join(f.value for f in GeneratorFamily)
        raise ConfigError(f"unknown generator family {gen['family']!r}; choose from {choices}") from exc
    gen["family"] = family
    if "params" not in gen:
        raise ConfigError(f"{family.value} needs parameters {', '.join(PARAM_NAMES[family])}")
    gen.setdefault("n_units", 100)
    try:
        return GeneratorSpec(**gen)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    unknown = set(cfg) - {"generator", "fit", "models", "truth", "smoothing_span"}
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    spec = _generator_spec(args, cfg)
    config = fit_config(cfg.get("fit", {}), args.seed)
    models = args.models.split(",") if args.models else cfg.get("models", ["best"])
    try:
        estimators = normalize_estimators(m.strip() for m in models if m.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_benchmark(spec, estimators, config, truth=cfg.get("truth", "analytic"),
                           smoothing_span=cfg.get("smoothing_span", 0.2), workers=args.workers)
    result.write_metrics(args.metrics)
    result.write_scatter(args.scatter)
    rows = []
    for name in estimators:
        r = result.reports[name]
        rows.append({"estimator": name, "bias": format_number(r.relative_bias), "rmsre": format_number(r.rmsre),
                     "undefined_mean": format_number(r.undefined_mean_share),
                     "undefined_var": format_number(r.undefined_variance_share)})
    print(_table(rows, ("estimator", "bias", "rmsre", "undefined_mean", "undefined_var")))
    return EXIT_OK


def cmd_validate(args) -> int:
    rule = EligibilityRule(min_total=args.min_total, min_nonzero_bins=args.min_bins)
    samples = read_samples(args.data, _columns(args))
    if not samples:
        print("error: no units in input", file=sys.stderr)
        return EXIT_TOTAL
    bad = 0
    for s in samples:
        try:
            s = validate(s)
        except BinValidationError as exc:
            bad += 1
            print(f"{s.id}\tinvalid\t{type(exc).__name__}: {exc}")
            continue
        if is_eligible(s, rule):
            print(f"{s.id}\tok\ttotal={s.total} nonzero_bins={s.nonzero_bins}")
        else:
            bad += 1
            print(f"{s.id}\tineligible\ttotal={s.total} nonzero_bins={s.nonzero_bins} "
                  f"(needs total >= {rule.min_total} and >= {rule.min_nonzero_bins} nonzero bins)")
    return EXIT_OK if bad == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# argument parsing


def _yes_no(text: str) -> str:
    t = text.strip().upper()
    if t in ("Y", "YES"):
        return "Y"
    if t in ("N", "NO"):
        return "N"
    raise argparse.ArgumentTypeError(f"expected Y or N, got {text!r}")


def _model(text: str) -> str:
    try:
        return normalize_estimators([text])[0]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="comma-separated input file with a header row")
    p.add_argument("--id", default=DEFAULT_COLUMNS["id"],
                   help="unit id column; may be absent for single-unit files (default: %(default)s)")
    p.add_argument("--min", default=DEFAULT_COLUMNS["min"], help="bin lower bound column (default: %(default)s)")
    p.add_argument("--max", default=DEFAULT_COLUMNS["max"],
                   help="bin upper bound column; blank or inf marks the open top bin (default: %(default)s)")
    p.add_argument("--n", default=DEFAULT_COLUMNS["n"], help="bin count column (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binfit", description="Estimate income moments from binned counts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to every unit of a binned data file")
    _add_data_args(p)
    p.add_argument("--model", required=True, type=_model, help=f"one of {', '.join(ESTIMATORS)}")
    p.add_argument("--out", help="estimates file (default: standard output)")
    p.add_argument("--print", type=_yes_no, default="N", help="print a summary table (Y/N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with optimizer settings, grid overrides, top_bin_factor")
    p.add_argument("--workers", type=int, default=1, help="worker processes (output order is unaffected)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="simulate binned districts and score estimators")
    p.add_argument("--family", help="generator family: " + ", ".join(f.value for f in GeneratorFamily))
    p.add_argument("--params", help="generator parameters, e.g. mu=10.8,sigma=0.7")
    p.add_argument("--units", type=int, help="number of simulated units (default 100)")
    p.add_argument("--size", type=int, nargs=2, metavar=("MIN", "MAX"), help="range of unit sizes")
    p.add_argument("--scale-sd", type=float, help="log-sd of the per-unit scale multiplier")
    p.add_argument("--no-rounding", action="store_true", help="skip census rounding of counts")
    p.add_argument("--models", help=f"comma-separated estimators from {', '.join(ESTIMATORS)} (default best)")
    p.add_argument("--metrics", required=True, help="metrics output file")
    p.add_argument("--scatter", required=True, help="per-unit scatter output file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with generator, fit, models, truth, smoothing_span")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="check bin structure and eligibility of every unit")
    _add_data_args(p)
    p.add_argument("--min-total", type=int, default=EligibilityRule.min_total)
    p.add_argument("--min-bins", type=int, default=EligibilityRule.min_nonzero_bins)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EmptyEstimatorSet) as exc:
        print(f"binfit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BinfitError, OSError) as exc:
        print(f"binfit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
