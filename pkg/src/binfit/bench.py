"""Synthetic districts and the evaluation harness.

Districts are simulated from a known income distribution, binned on the
census scheme, optionally census-rounded, and then handed to each
estimator. Per-unit randomness derives from ``(seed, unit index)`` only, so
results do not depend on processing order or worker count.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special as sc

from .comparison import DagumParams, dagum_moment, dagum_pdf
from .data import CENSUS_2000_EDGES, BinnedSample, census_round_sample
from .errors import BinfitError, EmptyEstimatorSet
from .fitting import FitConfig, FitResult, check_sample, fit_dagum, fit_egg, fit_gb2, fit_power, midpoint_estimate
from .moments import MomentSummary, MomentValue
from .selection import BestOfBreed, EvalReport, UnitOutcome, aggregate, best_of_breed

ESTIMATORS = ("EGG", "PN", "PL", "best", "dagum", "gb2", "midpoint")


class GeneratorFamily(str, enum.Enum):
    LOGNORMAL = "Lognormal"
    GAMMA = "Gamma"
    WEIBULL = "Weibull"
    DAGUM = "Dagum"


PARAM_NAMES = {
    GeneratorFamily.LOGNORMAL: ("mu", "sigma"),
    GeneratorFamily.GAMMA: ("shape", "scale"),
    GeneratorFamily.WEIBULL: ("shape", "scale"),
    GeneratorFamily.DAGUM: ("a", "b", "p"),
}


@dataclass(frozen=True)
class GeneratorSpec:
    """What to simulate.

    ``scale_sd`` spreads districts across income levels: each unit's scale
    is multiplied by ``exp(scale_sd * N(0, 1))`` (0 keeps every unit
    identically distributed).
    """

    family: GeneratorFamily
    params: Mapping[str, float]
    n_units: int
    unit_size: tuple[int, int] = (40, 2000)
    bin_edges: tuple[float, ...] = CENSUS_2000_EDGES
    apply_census_rounding: bool = True
    seed: int = 0
    scale_sd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", GeneratorFamily(self.family))
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "unit_size", tuple(int(v) for v in self.unit_size))
        object.__setattr__(self, "bin_edges", tuple(float(e) for e in self.bin_edges))
        expected = set(PARAM_NAMES[self.family])
        if set(self.params) != expected:
            raise ValueError(f"{self.family.value} needs parameters {sorted(expected)}, got {sorted(self.params)}")
        if self.n_units < 1:
            raise ValueError("n_units must be at least 1")
        lo, hi = self.unit_size
        if not 1 <= lo <= hi:
            raise ValueError("unit sizes must satisfy 1 <= min <= max")
        e = self.bin_edges
        if e[0] != 0 or not math.isinf(e[-1]) or any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("bin edges must start at 0, increase strictly and end at inf")
        if self.scale_sd < 0:
            raise ValueError("scale_sd must be nonnegative")


@dataclass(frozen=True)
class GeneratedUnit:
    sample: BinnedSample
    true_mean: float
    true_variance: float
    sample_mean: float  # mean of the simulated incomes before binning
    size: int


def raw_moment(family: GeneratorFamily, params: Mapping[str, float], k: int) -> float:
    """Analytic ``E(X**k)`` of a generating distribution."""
    family = GeneratorFamily(family)
    if family is GeneratorFamily.LOGNORMAL:
        return math.exp(k * params["mu"] + 0.5 * (k * params["sigma"]) ** 2)
    if family is GeneratorFamily.GAMMA:
        return params["scale"] ** k * math.exp(sc.gammaln(params["shape"] + k) - sc.gammaln(params["shape"]))
    if family is GeneratorFamily.WEIBULL:
        return params["scale"] ** k * math.gamma(1 + k / params["shape"])
    m = dagum_moment(k, DagumParams(params["a"], params["b"], params["p"]))
    return m.as_float()


def density(family: GeneratorFamily, params: Mapping[str, float]):
    """Vectorized density of a generating distribution on ``x > 0``."""
    family = GeneratorFamily(family)

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
            if family is GeneratorFamily.LOGNORMAL:
                mu, s = params["mu"], params["sigma"]
                return np.exp(-0.5 * ((np.log(x) - mu) / s) ** 2) / (x * s * math.sqrt(2 * math.pi))
            if family is GeneratorFamily.GAMMA:
                k, th = params["shape"], params["scale"]
                logf = (k - 1) * np.log(x) - x / th - sc.gammaln(k) - k * math.log(th)
                return np.where(np.isfinite(logf), np.exp(logf), 0.0)
            if family is GeneratorFamily.WEIBULL:
                k, lam = params["shape"], params["scale"]
                y = x / lam
                return np.where(x > 0, (k / lam) * y ** (k - 1) * np.exp(-(y ** k)), 0.0)
            return dagum_pdf(DagumParams(params["a"], params["b"], params["p"]), x)

    return f


def _scaled_params(family: GeneratorFamily, params: Mapping[str, float], factor: float) -> dict:
    out = dict(params)
    if family is GeneratorFamily.LOGNORMAL:
        out["mu"] += math.log(factor)
    elif family is GeneratorFamily.DAGUM:
        out["b"] *= factor
    else:
        out["scale"] *= factor
    return out


def _draw(family: GeneratorFamily, params: Mapping[str, float], size: int, rng: np.random.Generator) -> np.ndarray:
    if family is GeneratorFamily.LOGNORMAL:
        return rng.lognormal(params["mu"], params["sigma"], size)
    if family is GeneratorFamily.GAMMA:
        return rng.gamma(params["shape"], params["scale"], size)
    if family is GeneratorFamily.WEIBULL:
        return params["scale"] * rng.weibull(params["shape"], size)
    # Dagum inverse CDF: x = b (u**(-1/p) - 1)**(-1/a)
    u = rng.uniform(size=size)
    return params["b"] * (u ** (-1.0 / params["p"]) - 1.0) ** (-1.0 / params["a"])


def bin_values(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    """Counts per half-open bin ``[edges[i], edges[i+1])``."""
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.bincount(idx, minlength=len(edges) - 1)[: len(edges) - 1]


def generate_unit(spec: GeneratorSpec, index: int) -> GeneratedUnit:
    rng = np.random.default_rng([spec.seed, index])
    lo, hi = spec.unit_size
    size = int(rng.integers(lo, hi + 1))
    factor = math.exp(spec.scale_sd * rng.standard_normal()) if spec.scale_sd > 0 else 1.0
    params = _scaled_params(spec.family, spec.params, factor)
    values = _draw(spec.family, params, size, rng)
    counts = bin_values(values, spec.bin_edges)
    sample = BinnedSample.from_edges(f"{spec.family.value.lower()}-{index:04d}", spec.bin_edges, counts)
    if spec.apply_census_rounding:
        sample = census_round_sample(sample)
    m1 = raw_moment(spec.family, params, 1)
    m2 = raw_moment(spec.family, params, 2)
    return GeneratedUnit(sample, m1, m2 - m1 * m1, float(values.mean()), size)


def generate(spec: GeneratorSpec) -> list[GeneratedUnit]:
    """Simulate ``spec.n_units`` binned districts; deterministic given the seed."""
    return [generate_unit(spec, i) for i in range(spec.n_units)]


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class UnitFits:
    """Everything estimated for one unit; values are results or exceptions."""

    unit: GeneratedUnit
    results: dict = field(default_factory=dict)

    def moments(self, estimator: str) -> MomentSummary | Exception:
        r = self.results.get(estimator)
        if isinstance(r, FitResult):
            return r.moments
        if isinstance(r, BestOfBreed):
            return r.chosen.moments
        return r


def normalize_estimators(estimators: Iterable[str]) -> tuple[str, ...]:
    lookup = {e.lower(): e for e in ESTIMATORS}
    out = []
    for e in estimators:
        key = lookup.get(str(e).lower())
        if key is None:
            raise ValueError(f"unknown estimator {e!r}; choose from {', '.join(ESTIMATORS)}")
        if key not in out:
            out.append(key)
    if not out:
        raise EmptyEstimatorSet("at least one estimator is required")
    return tuple(out)


def fit_unit(sample: BinnedSample, estimators: Sequence[str], config: FitConfig = FitConfig()) -> dict:
    """Run the requested estimators on one sample, sharing work between them.

    Failures are stored as the exception instance rather than raised. An
    invalid or ineligible sample fails every estimator, the midpoint one
    included.
    """
    estimators = normalize_estimators(estimators)
    try:
        sample = check_sample(sample, config)
    except BinfitError as exc:
        return {name: exc for name in estimators}
    needed = set(estimators)
    if "best" in needed:
        needed |= {"EGG", "PN", "PL"}
    if "gb2" in needed:
        needed.add("dagum")
    out: dict = {}

    def attempt(name, fn):
        try:
            out[name] = fn()
        except BinfitError as exc:
            out[name] = exc

    if "EGG" in needed:
        attempt("EGG", lambda: fit_egg(sample, config))
    if "PN" in needed:
        attempt("PN", lambda: fit_power(sample, "PN", config))
    if "PL" in needed:
        attempt("PL", lambda: fit_power(sample, "PL", config))
    if "best" in needed:
        parts = [out[f] if isinstance(out[f], FitResult) else None for f in ("EGG", "PN", "PL")]
        attempt("best", lambda: best_of_breed(*parts))
    if "dagum" in needed:
        attempt("dagum", lambda: fit_dagum(sample, config))
    if "gb2" in needed:
        d = out["dagum"]
        attempt("gb2", lambda: fit_gb2(sample, config, dagum=d if isinstance(d, FitResult) else None))
    if "midpoint" in needed:
        out["midpoint"] = midpoint_estimate(sample, config.top_bin_factor)
    return {k: out[k] for k in estimators}


def _fit_unit_job(args):
    unit, estimators, config = args
    return UnitFits(unit, fit_unit(unit.sample, estimators, config))


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average with a window that shrinks at the ends."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    half = max(window, 1) // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass
class BenchResult:
    spec: GeneratorSpec
    estimators: tuple[str, ...]
    reports: dict[str, EvalReport]
    units: list[UnitFits]
    scatter: list[dict]

    def write_metrics(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "n_units", "n_defined", "relative_bias", "rmsre",
                        "undefined_mean_share", "undefined_variance_share"])
            for name in self.estimators:
                r = self.reports[name]
                w.writerow([name, r.n_units, r.n_defined, _fmt(r.relative_bias), _fmt(r.rmsre),
                            _fmt(r.undefined_mean_share), _fmt(r.undefined_variance_share)])

    def write_scatter(self, path: str | Path) -> None:
        cols = ["estimator", "unit", "true_mean", "estimate", "relative_error", "smoothed_error"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.scatter:
                w.writerow([row["estimator"], row["unit"]] + [_fmt(row[c]) for c in cols[2:]])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "NA"
    return repr(float(x))


def run_benchmark(spec: GeneratorSpec, estimators: Iterable[str], config: FitConfig = FitConfig(),
                  truth: str = "analytic", smoothing_span: float = 0.2,
                  workers: int = 1, units: list[GeneratedUnit] | None = None) -> BenchResult:
    """Fit every estimator to every generated unit and score the means.

    Parameters
    ----------
    truth : {"analytic", "sample"}
        Compare against the generating distribution's mean or against the
        mean of the simulated (unbinned) incomes.
    smoothing_span : float
        Fraction of units in the moving-average window used for the
        smoothed-error column of the scatter data.
    units : list of GeneratedUnit, optional
        Pre-generated units (must come from ``spec``); generated if omitted.
    """
    estimators = normalize_estimators(estimators)
    if truth not in ("analytic", "sample"):
        raise ValueError("truth must be 'analytic' or 'sample'")
    if units is None:
        units = generate(spec)
    jobs = [(u, estimators, config) for u in units]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(_fit_unit_job, jobs, chunksize=4))
    else:
        fitted = [_fit_unit_job(j) for j in jobs]

    reports, scatter = {}, []
    for name in estimators:
        outcomes = []
        for uf in fitted:
            true_mean = uf.unit.true_mean if truth == "analytic" else uf.unit.sample_mean
            m = uf.moments(name)
            if isinstance(m, Exception):
                nd = MomentValue.indeterminate()
                outcomes.append(UnitOutcome(uf.unit.sample.id, true_mean, nd, nd, type(m).__name__))
            else:
                outcomes.append(UnitOutcome(uf.unit.sample.id, true_mean, m.mean, m.variance))
        report = aggregate(outcomes)
        reports[name] = report
        rows = [(u.true_mean, i, u) for i, u in enumerate(report.per_unit)]
        rows.sort(key=lambda r: (math.log(r[0]), r[1]))
        defined = [r for r in rows if r[2].relative_error is not None]
        window = max(3, int(round(smoothing_span * len(defined))))
        smooth = dict(zip((r[1] for r in defined), moving_average([r[2].relative_error for r in defined], window)))
        for true_mean, i, u in rows:
            scatter.append({
                "estimator": name, "unit": u.id, "true_mean": true_mean,
                "estimate": u.estimate.value if u.estimate.is_finite else None,
                "relative_error": u.relative_error, "smoothed_error": smooth.get(i),
            })
    return BenchResult(spec, estimators, reports, fitted, scatter)
