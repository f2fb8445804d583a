"""Maximum-likelihood fitting of distributions to binned data.

The likelihood of a binned sample is ``prod_b (F(M_b) - F(m_b))**n_b``.
Every family is fitted by Nelder-Mead on an unconstrained, sample-scaled
parameterization: locations are measured in units of an initial spread
estimate and positive parameters enter through their logs. The scaling
makes the optimizer path, and hence the fit, equivariant under a change
of currency unit.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import special as sc
from scipy.optimize import minimize

from .comparison import (
    DagumParams,
    Gb2Params,
    dagum_cdf_array,
    dagum_sf_array,
    dagum_summary,
    gb2_cdf_array,
    gb2_sf_array,
    gb2_summary,
)
from .data import BinnedSample, EligibilityRule, is_eligible, validate
from .distributions import (
    EggParams,
    PowerFamily,
    PowerParams,
    default_grid,
    egg_cdf_array,
    egg_sf_array,
    egg_summary,
    power_summary,
    transform_array,
)
from .errors import AllGridPointsFailed, IneligibleSample
from .moments import MomentSummary, MomentValue
from .special import std_logistic_pdf, std_normal_pdf

log = logging.getLogger(__name__)

CONVERGENCE_WARNING = "ConvergenceWarning"
CONVERGENCE_FAILURE = "ConvergenceFailure"
ENDPOINT_SUBSTITUTED = "EndpointSubstituted"

# A lower bound of 0 is replaced by this fraction of the first bin's upper
# bound before fitting the EGG: half a dollar on a $10,000 first bin, and
# proportionally on any other scale so fits stay scale equivariant.
EGG_ZERO_FRACTION = 0.5 / 10_000

# |lam| beyond this makes the EGG numerically degenerate; treated as infeasible.
_EGG_LAMBDA_LIMIT = 25.0


class Family(str, enum.Enum):
    EGG = "EGG"
    PN = "PN"
    PL = "PL"
    DAGUM = "Dagum"
    GB2 = "GB2"


Params = Union[EggParams, PowerParams, DagumParams, Gb2Params]


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings shared by every family.

    ``pn_grid`` / ``pl_grid`` override the exponent grids (``None`` entries
    mean the log transform). ``seed`` drives the random restart
    perturbations.
    """

    max_iterations: int = 2000
    param_tol: float = 1e-8
    loglik_tol: float = 1e-8
    restarts: int = 3
    pn_grid: tuple | None = None
    pl_grid: tuple | None = None
    top_bin_factor: float = 1.5
    seed: int = 0
    eligibility: EligibilityRule = field(default_factory=EligibilityRule)

    def __post_init__(self):
        if not (self.param_tol > 0 and self.loglik_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be at least 1")

    def grid(self, family: PowerFamily) -> tuple:
        override = self.pn_grid if PowerFamily(family) is PowerFamily.PN else self.pl_grid
        return tuple(override) if override is not None else default_grid(family)


@dataclass(frozen=True)
class FitResult:
    family: Family
    params: Params
    loglik: float
    moments: MomentSummary
    flags: frozenset = frozenset()
    profile: tuple = ()  # (lambda_inv, loglik) per grid point, power families only
    baseline: "FitResult | None" = None  # nested fit used as a start (lognormal for EGG, Dagum for GB2)

    @property
    def variance_is_finite(self) -> bool:
        return self.moments.variance.is_finite


# ---------------------------------------------------------------------------
# likelihood


def _edge_probs(edges: np.ndarray, cdf, sf=None) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        F = np.asarray(cdf(edges), dtype=float)
        F = np.where(np.isposinf(edges), 1.0, F)
        p = np.diff(F)
        if sf is not None:
            # upper-tail bins lose precision as 1 - small; difference survivals there
            S = np.asarray(sf(edges), dtype=float)
            S = np.where(np.isposinf(edges), 0.0, S)
            upper = F[:-1] > 0.5
            if np.any(upper):
                p = np.where(upper, S[:-1] - S[1:], p)
    return p


def loglik_from_edges(edges: np.ndarray, counts: np.ndarray, cdf, sf=None) -> float:
    p = _edge_probs(edges, cdf, sf)
    used = counts > 0
    pu = p[used]
    if not np.all(pu > 0):
        return -math.inf
    return float(np.dot(counts[used], np.log(pu)))


def binned_loglik(sample: BinnedSample, cdf: Callable, sf: Callable | None = None) -> float:
    """Log-likelihood ``sum_b n_b ln(F(M_b) - F(m_b))`` of a binned sample.

    Parameters
    ----------
    sample : BinnedSample
        Validated (contiguous) sample.
    cdf : callable
        Vectorized CDF accepting the bin edges, including ``0`` and ``inf``.
        ``F(inf)`` is taken to be 1 regardless of what ``cdf`` returns.
    sf : callable, optional
        Matching survival function, used for bins in the upper half of the
        distribution where ``1 - F`` would lose digits.

    Returns
    -------
    float
        ``-inf`` if a bin with a nonzero count has zero probability.
    """
    return loglik_from_edges(sample.edges, sample.counts, cdf, sf)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class _Search:
    """Best-point bookkeeping for a multi-start maximization."""

    objective: Callable[[np.ndarray], float]
    best_x: np.ndarray | None = None
    best_ll: float = -math.inf
    evaluations: int = 0

    def __call__(self, x) -> float:
        self.evaluations += 1
        try:
            ll = self.objective(np.asarray(x, dtype=float))
        except (ValueError, ZeroDivisionError, OverflowError):
            ll = -math.inf
        if not math.isfinite(ll) and not ll == -math.inf:
            ll = -math.inf
        if ll > self.best_ll:
            self.best_ll, self.best_x = ll, np.array(x, dtype=float)
        return ll


def _nelder_mead(search: _Search, x0: np.ndarray, step: np.ndarray, config: FitConfig):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * step[i] for i in range(len(x0))])
    res = minimize(
        lambda x: -search(x),
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "maxiter": config.max_iterations,
            "maxfev": 2 * config.max_iterations,
            "xatol": config.param_tol,
            "fatol": config.loglik_tol,
        },
    )
    return res


def _maximize(objective, starts: Sequence[np.ndarray], step, config: FitConfig,
              rng: np.random.Generator, restarts: int | None = None):
    """Multi-start Nelder-Mead; returns ``(x, loglik, flags)``.

    Each start is evaluated and searched from; then ``restarts`` runs begin
    at random perturbations of the incumbent, and a final run restarts at
    the incumbent itself. The returned point is the best ever evaluated,
    so it can never be worse than any start.
    """
    search = _Search(objective)
    step = np.asarray(step, dtype=float)
    for x0 in starts:
        if search(x0) == -math.inf:
            continue
        _nelder_mead(search, x0, step, config)
    if search.best_x is None:
        return None, -math.inf, frozenset({CONVERGENCE_FAILURE})
    n_restarts = config.restarts if restarts is None else restarts
    for _ in range(n_restarts):
        x0 = search.best_x + rng.normal(scale=step)
        if search(x0) == -math.inf:
            continue
        _nelder_mead(search, x0, step, config)

    before_x, before_ll = search.best_x.copy(), search.best_ll
    final = _nelder_mead(search, before_x, step, config)
    flags = set()
    if final.status != 0:
        flags.add(CONVERGENCE_FAILURE)
    moved = float(np.max(np.abs(search.best_x - before_x)))
    if search.best_ll - before_ll > max(config.loglik_tol, 1e-9 * abs(before_ll)) and moved > 1e3 * config.param_tol:
        flags.add(CONVERGENCE_WARNING)
    return search.best_x, search.best_ll, frozenset(flags)


def _rng(config: FitConfig, salt: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, salt])


# ---------------------------------------------------------------------------
# initial values


def _representative_points(sample: BinnedSample, top_bin_factor: float) -> np.ndarray:
    lo, hi = sample.lowers, sample.uppers
    return np.where(np.isinf(hi), top_bin_factor * lo, 0.5 * (lo + hi))


def midpoint_estimate(sample: BinnedSample, top_bin_factor: float = 1.5) -> MomentSummary:
    """Moments of the discrete distribution putting each bin's count at its midpoint.

    The unbounded top bin is represented by ``top_bin_factor`` times its
    lower bound.
    """
    x = _representative_points(sample, top_bin_factor)
    n = sample.counts
    total = n.sum()
    if total <= 0:
        nd = MomentValue.indeterminate()
        return MomentSummary(nd, nd, nd, nd, nd)
    mean = float(np.dot(n, x) / total)
    var = float(np.dot(n, (x - mean) ** 2) / total)
    second = float(np.dot(n, x * x) / total)
    sd = math.sqrt(var)
    cv = MomentValue.finite(sd / mean) if mean > 0 else MomentValue.indeterminate()
    return MomentSummary(MomentValue.finite(mean), MomentValue.finite(second), MomentValue.finite(var),
                         MomentValue.finite(sd), cv)


def _weighted_moments(values: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    ok = np.isfinite(values) & (counts > 0)
    w = counts[ok]
    v = values[ok]
    m = float(np.dot(w, v) / w.sum())
    s = math.sqrt(float(np.dot(w, (v - m) ** 2) / w.sum()))
    return m, s


def _transformed_start(sample: BinnedSample, top_bin_factor: float, lambda_inv) -> tuple[float, float]:
    """Location and spread of the transformed representative points."""
    x = _representative_points(sample, top_bin_factor)
    m, s = _weighted_moments(transform_array(x, lambda_inv), sample.counts)
    if not s > 0:
        s = abs(m) * 0.1 or 1.0
    return m, s


def check_sample(sample: BinnedSample, config: FitConfig) -> BinnedSample:
    sample = validate(sample)
    if not is_eligible(sample, config.eligibility):
        raise IneligibleSample(
            f"sample {sample.id!r}: total {sample.total}, {sample.nonzero_bins} nonzero bins"
        )
    return sample


def _with_flags(summary: MomentSummary, flags) -> frozenset:
    return frozenset(flags) | frozenset(summary.flags)


# ---------------------------------------------------------------------------
# EGG


def egg_edges(sample: BinnedSample) -> tuple[np.ndarray, bool]:
    edges = sample.edges.copy()
    substituted = edges[0] == 0
    if substituted:
        edges[0] = EGG_ZERO_FRACTION * edges[1] if math.isfinite(edges[1]) else 0.5
    return edges, substituted


def fit_egg(sample: BinnedSample, config: FitConfig = FitConfig(), fixed_lambda: float | None = None) -> FitResult:
    """Fit the extended generalized gamma by maximum likelihood.

    A lower bound of 0 is replaced first by ``EGG_ZERO_FRACTION`` times the
    first upper bound (0.5 on the census scheme). With ``fixed_lambda`` the
    shape is held constant (``fixed_lambda=0`` gives the lognormal fit).
    Otherwise the search starts from the lognormal fit and from moment
    matches at ``lam`` in {-0.5, 0, 0.5, 1}, so the returned likelihood is
    never below the lognormal one.
    """
    sample = check_sample(sample, config)
    edges, substituted = egg_edges(sample)
    counts = sample.counts
    x = _representative_points(sample, config.top_bin_factor)
    m0, s0 = _weighted_moments(np.log(np.maximum(x, edges[0])), counts)
    if not s0 > 0:
        s0 = 1.0
    base_flags = {ENDPOINT_SUBSTITUTED} if substituted else set()

    def unpack(theta):
        return m0 + s0 * theta[0], s0 * math.exp(theta[1])

    if fixed_lambda is not None:
        lam = float(fixed_lambda)

        def objective2(theta):
            mu, sigma = unpack(theta)
            return loglik_from_edges(edges, counts, lambda e: egg_cdf_array(mu, sigma, lam, e),
                                     lambda e: egg_sf_array(mu, sigma, lam, e))

        start = _moment_match_egg(m0, s0, lam)
        theta, ll, flags = _maximize(objective2, [start[:2]], [0.1, 0.1], config, _rng(config, 11), restarts=1)
        if theta is None:
            raise AllGridPointsFailed(f"EGG fit with lambda={lam} found no feasible point")
        mu, sigma = unpack(theta)
        params = EggParams(float(mu), float(sigma), lam)
        summary = egg_summary(params)
        return FitResult(Family.EGG, params, ll, summary, _with_flags(summary, base_flags | flags))

    def objective(theta):
        lam = theta[2]
        if abs(lam) > _EGG_LAMBDA_LIMIT:
            return -math.inf
        mu, sigma = unpack(theta)
        return loglik_from_edges(edges, counts, lambda e: egg_cdf_array(mu, sigma, lam, e),
                                 lambda e: egg_sf_array(mu, sigma, lam, e))

    lognormal = fit_egg(sample, config, fixed_lambda=0.0)
    ln_theta = np.array([(lognormal.params.mu - m0) / s0, math.log(lognormal.params.sigma / s0), 0.0])
    starts = [ln_theta] + [_moment_match_egg(m0, s0, lam) for lam in (-0.5, 0.0, 0.5, 1.0)]
    theta, ll, flags = _maximize(objective, starts, [0.1, 0.1, 0.1], config, _rng(config, 12))
    mu, sigma = unpack(theta)
    params = EggParams(float(mu), float(sigma), float(theta[2]))
    summary = egg_summary(params)
    return FitResult(Family.EGG, params, ll, summary, _with_flags(summary, base_flags | flags), baseline=lognormal)


def _moment_match_egg(mean_log: float, sd_log: float, lam: float) -> np.ndarray:
    """Scaled start ``(mu, ln sigma, lam)`` matching the mean and sd of ln X."""
    if lam == 0:
        return np.array([0.0, 0.0, 0.0])
    shape = lam ** -2
    # omega = (ln X - mu)/sigma has mean (psi(k) - ln k)/lam and variance psi'(k)/lam^2
    e_omega = (sc.digamma(shape) - math.log(shape)) / lam
    sd_omega = math.sqrt(sc.polygamma(1, shape)) / abs(lam)
    sigma = sd_log / sd_omega
    mu = mean_log - sigma * e_omega
    return np.array([(mu - mean_log) / sd_log, math.log(sigma / sd_log), lam])


# ---------------------------------------------------------------------------
# PN / PL


def _kernel(family: PowerFamily):
    if family is PowerFamily.PN:
        return sc.ndtr, std_normal_pdf
    return sc.expit, std_logistic_pdf


def _location_scale_objective(t: np.ndarray, counts: np.ndarray, family: PowerFamily,
                              m0: float, s0: float, scale0: float):
    """Negative log-likelihood and gradient of a location-scale model for
    intervals with (already transformed) edges ``t``, in scaled coordinates
    ``theta = ((mu - m0)/s0, ln(sigma/scale0))``."""
    cdf, pdf = _kernel(family)
    used = counts > 0
    n = counts[used]

    def fun(theta):
        mu = m0 + s0 * theta[0]
        sigma = scale0 * math.exp(theta[1])
        with np.errstate(invalid="ignore", over="ignore"):
            z = (t - mu) / sigma
            G, S = cdf(z), cdf(-z)
            p = np.where(G[:-1] > 0.5, S[:-1] - S[1:], G[1:] - G[:-1])[used]
            if not np.all(p > 0):
                return math.inf, np.zeros(2)
            g = pdf(z)
            zg = np.where(np.isfinite(z), z * g, 0.0)
        dmu = -((g[1:] - g[:-1])[used]) / (sigma * p)
        dls = -((zg[1:] - zg[:-1])[used]) / p
        ll = float(np.dot(n, np.log(p)))
        grad = np.array([s0 * np.dot(n, dmu), np.dot(n, dls)])
        return -ll, -grad

    return fun


def _fit_power_point(sample: BinnedSample, family: PowerFamily, lambda_inv, config: FitConfig):
    """Fit (mu, sigma) at one exponent by quasi-Newton with an analytic gradient.

    The interval-censored normal and logistic likelihoods are log-concave
    in (mu/sigma, 1/sigma), so a single well-started local search finds
    the maximum.
    """
    t = transform_array(sample.edges, lambda_inv)
    counts = sample.counts
    m0, s0 = _transformed_start(sample, config.top_bin_factor, lambda_inv)
    scale0 = s0 if family is PowerFamily.PN else s0 * math.sqrt(3.0) / math.pi
    fun = _location_scale_objective(t, counts, family, m0, s0, scale0)
    f0, _ = fun(np.zeros(2))
    if not math.isfinite(f0):
        return None
    res = minimize(fun, np.zeros(2), jac=True, method="BFGS",
                   options={"maxiter": config.max_iterations, "gtol": 1e-9 * max(1.0, counts.sum())})
    theta, f = (res.x, res.fun) if res.fun <= f0 else (np.zeros(2), f0)
    flags = set()
    if res.status == 1:
        flags.add(CONVERGENCE_FAILURE)
    elif res.status != 0 and np.max(np.abs(res.jac)) > 1e-5 * max(1.0, counts.sum()):
        flags.add(CONVERGENCE_WARNING)
    params = PowerParams(float(m0 + s0 * theta[0]), float(scale0 * math.exp(theta[1])), lambda_inv, family)
    return params, -float(f), frozenset(flags)


def fit_power(sample: BinnedSample, family: PowerFamily | str, config: FitConfig = FitConfig()) -> FitResult:
    """Profile fit of the power-normal or power-logistic family.

    For every exponent on the grid the bin edges are transformed and a
    normal (PN) or logistic (PL) location-scale model is fitted to them.
    The grid point with the highest likelihood wins, except that a PL
    log-case fit whose second moment is not finite is excluded.
    """
    family = PowerFamily(family)
    sample = check_sample(sample, config)
    best = None
    profile = []
    for lambda_inv in config.grid(family):
        fitted = _fit_power_point(sample, family, lambda_inv, config)
        if fitted is None:
            profile.append((lambda_inv, -math.inf))
            continue
        params, ll, flags = fitted
        profile.append((lambda_inv, ll))
        summary = power_summary(params)
        if family is PowerFamily.PL and params.is_log and not summary.second_moment.is_finite:
            continue
        if best is None or ll > best[1]:
            best = (params, ll, flags, summary)
    if best is None:
        raise AllGridPointsFailed(f"sample {sample.id!r}: no usable {family.value} grid point")
    params, ll, flags, summary = best
    return FitResult(Family(family.value), params, ll, summary, _with_flags(summary, flags), tuple(profile))


def fit_pn(sample: BinnedSample, config: FitConfig = FitConfig()) -> FitResult:
    return fit_power(sample, PowerFamily.PN, config)


def fit_pl(sample: BinnedSample, config: FitConfig = FitConfig()) -> FitResult:
    return fit_power(sample, PowerFamily.PL, config)


# ---------------------------------------------------------------------------
# Dagum / GB2


def _scale_start(sample: BinnedSample, config: FitConfig) -> float:
    x = _representative_points(sample, config.top_bin_factor)
    order = np.argsort(x)
    cum = np.cumsum(sample.counts[order])
    median = x[order][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(median) if median > 0 else float(np.max(x))


def fit_dagum(sample: BinnedSample, config: FitConfig = FitConfig()) -> FitResult:
    """Fit the Dagum distribution on ``(ln a, ln(b/b0), ln p)``."""
    sample = check_sample(sample, config)
    edges, counts = sample.edges, sample.counts
    b0 = _scale_start(sample, config)

    def unpack(theta):
        return math.exp(theta[0]), b0 * math.exp(theta[1]), math.exp(theta[2])

    def objective(theta):
        if np.any(np.abs(theta) > 30):
            return -math.inf
        a, b, p = unpack(theta)
        return loglik_from_edges(edges, counts, lambda e: dagum_cdf_array(a, b, p, e),
                                 lambda e: dagum_sf_array(a, b, p, e))

    grid = [np.array([math.log(a), 0.0, math.log(p)]) for a in (1.5, 3.0, 5.0) for p in (0.5, 1.0, 2.0)]
    scored = sorted(grid, key=objective, reverse=True)
    theta, ll, flags = _maximize(objective, scored[:2], [0.1, 0.1, 0.1], config, _rng(config, 21))
    if theta is None:
        raise AllGridPointsFailed(f"sample {sample.id!r}: Dagum fit found no feasible point")
    params = DagumParams(*map(float, unpack(theta)))
    summary = dagum_summary(params)
    return FitResult(Family.DAGUM, params, ll, summary, _with_flags(summary, flags))


def _gb2_from_log_moments(m: float, s: float, p: float, q: float) -> tuple[float, float]:
    """``(a, b)`` giving ln X mean ``m`` and sd ``s`` for shapes ``p``, ``q``."""
    # ln X = ln b + ln(Y)/a with ln Y ~ logit of Beta(p, q): mean psi(p)-psi(q), var psi'(p)+psi'(q)
    a = math.sqrt(sc.polygamma(1, p) + sc.polygamma(1, q)) / s
    return a, math.exp(m - (sc.digamma(p) - sc.digamma(q)) / a)


def fit_gb2(sample: BinnedSample, config: FitConfig = FitConfig(), dagum: FitResult | None = None) -> FitResult:
    """Fit the GB2 distribution, seeded from the Dagum optimum.

    Since GB2(-a, b, p, q) and GB2(a, b, q, p) coincide, ``a > 0`` is
    assumed. The search runs over the mean and log sd of ln X (relative to
    a scale anchor) and ``ln p``, ``ln q``. This keeps the likelihood well
    conditioned near the lognormal limit (``p, q`` large, ``a`` small),
    where the natural parameters drift along a flat ridge. The Dagum
    optimum (``q = 1``) is always among the starts, and it is returned as
    a GB2 if nothing better is found, so the GB2 likelihood is never below
    the Dagum one. Pass ``dagum`` to reuse an existing Dagum fit.
    """
    sample = check_sample(sample, config)
    if dagum is None:
        dagum = fit_dagum(sample, config)
    edges, counts = sample.edges, sample.counts
    log_b0 = math.log(_scale_start(sample, config))

    def unpack(theta):
        p, q = math.exp(theta[2]), math.exp(theta[3])
        a, b = _gb2_from_log_moments(log_b0 + theta[0], math.exp(theta[1]), p, q)
        return a, b, p, q

    def objective(theta):
        if np.any(np.abs(theta) > 30):
            return -math.inf
        a, b, p, q = unpack(theta)
        if not (a > 0 and 0 < b < math.inf):
            return -math.inf
        return loglik_from_edges(edges, counts, lambda e: gb2_cdf_array(a, b, p, q, e),
                                 lambda e: gb2_sf_array(a, b, p, q, e))

    def pack(a, b, p, q):
        s = math.sqrt(sc.polygamma(1, p) + sc.polygamma(1, q)) / a
        m = math.log(b) + (sc.digamma(p) - sc.digamma(q)) / a
        return np.array([m - log_b0, math.log(s), math.log(p), math.log(q)])

    d = dagum.params
    seed = pack(d.a, d.b, d.p, 1.0)
    others = [pack(d.a, d.b, d.p, 2.0), pack(d.a, d.b, 1.0, 1.0)]
    # one screened start plus one restart keeps the 4-parameter search affordable
    best_start = max([seed] + others, key=objective)
    theta, ll, flags = _maximize(objective, [best_start], [0.1, 0.1, 0.1, 0.1], config, _rng(config, 31),
                                 restarts=1)
    if theta is None or not ll >= dagum.loglik:
        params, ll = Gb2Params(d.a, d.b, d.p, 1.0), dagum.loglik
        flags = set(dagum.flags) - set(dagum.moments.flags)
    else:
        params = Gb2Params(*map(float, unpack(theta)))
    summary = gb2_summary(params)
    return FitResult(Family.GB2, params, ll, summary, _with_flags(summary, flags), baseline=dagum)


def fit_family(sample: BinnedSample, family: Family | str, config: FitConfig = FitConfig()) -> FitResult:
    family = Family(family)
    if family is Family.EGG:
        return fit_egg(sample, config)
    if family in (Family.PN, Family.PL):
        return fit_power(sample, family.value, config)
    if family is Family.DAGUM:
        return fit_dagum(sample, config)
    return fit_gb2(sample, config)
