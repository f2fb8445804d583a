"""Dagum and GB2 (generalized beta of the second kind) income distributions.

These serve as comparison estimators. Both have power-law right tails, so
their moments can be undefined for fitted parameters.

GB2 density: ``|a| x**(a p - 1) / (b**(a p) B(p, q) (1 + (x/b)**a)**(p + q))``.
With ``u = y / (1 + y)`` and ``y = (x/b)**a``, ``u`` is Beta(p, q). Dagum
is the ``q = 1`` member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError
from .moments import MomentSummary, MomentValue, summarize_moments


@dataclass(frozen=True)
class DagumParams:
    a: float
    b: float
    p: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.p > 0):
            raise DomainError(f"Dagum parameters must be positive, got {self}")


@dataclass(frozen=True)
class Gb2Params:
    a: float
    b: float
    p: float
    q: float

    def __post_init__(self):
        if not (self.a != 0 and math.isfinite(self.a)):
            raise DomainError(f"GB2 requires a nonzero finite a, got {self.a}")
        if not (self.b > 0 and self.p > 0 and self.q > 0):
            raise DomainError(f"GB2 requires b, p, q > 0, got {self}")


def _log_ratio(x, a: float, b: float) -> np.ndarray:
    # a * ln(x/b), the log of (x/b)**a, kept in logs to avoid overflow
    with np.errstate(divide="ignore", invalid="ignore"):
        return a * (np.log(np.asarray(x, dtype=float)) - math.log(b))


def dagum_cdf_array(a: float, b: float, p: float, x) -> np.ndarray:
    """``(1 + (x/b)**-a)**-p`` computed as ``exp(-p log1p(exp(-a ln(x/b))))``."""
    s = -_log_ratio(x, a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        # log1p(e^s) = logaddexp(0, s), safe for large s
        return np.exp(-p * np.logaddexp(0.0, s))


def dagum_sf_array(a: float, b: float, p: float, x) -> np.ndarray:
    s = -_log_ratio(x, a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return -np.expm1(-p * np.logaddexp(0.0, s))


def dagum_cdf(params: DagumParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"Dagum CDF is defined for x > 0, got {x}")
    return float(dagum_cdf_array(params.a, params.b, params.p, x))


def dagum_pdf(params: DagumParams, x):
    a, b, p = params.a, params.b, params.p
    x = np.asarray(x, dtype=float)
    ly = _log_ratio(x, a, b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        logf = math.log(a * p) + (a * p - 1) * np.log(x) - a * p * math.log(b) - (p + 1) * np.logaddexp(0.0, ly)
        return np.where(np.isfinite(logf), np.exp(logf), 0.0)


def dagum_moment(k: int, params: DagumParams) -> MomentValue:
    """``b**k Γ(1 - k/a) Γ(k/a + p) / Γ(p)`` when ``k < a``, else undefined."""
    a, b, p = params.a, params.b, params.p
    if not k < a:
        return MomentValue.indeterminate()
    log_m = k * math.log(b) + sc.gammaln(1 - k / a) + sc.gammaln(k / a + p) - sc.gammaln(p)
    return MomentValue.finite(math.exp(log_m)) if log_m < 709.7 else MomentValue.plus_infinity()


def dagum_summary(params: DagumParams) -> MomentSummary:
    return summarize_moments(dagum_moment(1, params), dagum_moment(2, params))


def _gb2_u(a: float, b: float, x):
    # u and 1-u of the beta variable, each from the log ratio for precision
    ly = _log_ratio(x, a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return sc.expit(ly), sc.expit(-ly)


def _beta_cdf(p: float, q: float, u, v) -> np.ndarray:
    # I_u(p, q) with 1 - u = v; the complement form keeps digits once u rounds toward 1
    u, v = np.asarray(u), np.asarray(v)
    with np.errstate(invalid="ignore"):
        return np.where(u <= 0.5, sc.betainc(p, q, u), 1.0 - sc.betainc(q, p, v))


def gb2_cdf_array(a: float, b: float, p: float, q: float, x) -> np.ndarray:
    u, v = _gb2_u(a, b, x)
    # for a < 0, u falls as x grows, so F(x) = P(U >= u) = I_{1-u}(q, p)
    return _beta_cdf(p, q, u, v) if a > 0 else _beta_cdf(q, p, v, u)


def gb2_sf_array(a: float, b: float, p: float, q: float, x) -> np.ndarray:
    u, v = _gb2_u(a, b, x)
    return _beta_cdf(q, p, v, u) if a > 0 else _beta_cdf(p, q, u, v)


def gb2_cdf(params: Gb2Params, x: float) -> float:
    if not x > 0:
        raise DomainError(f"GB2 CDF is defined for x > 0, got {x}")
    return float(gb2_cdf_array(params.a, params.b, params.p, params.q, x))


def gb2_pdf(params: Gb2Params, x):
    a, b, p, q = params.a, params.b, params.p, params.q
    x = np.asarray(x, dtype=float)
    ly = _log_ratio(x, a, b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        logf = (math.log(abs(a)) + (a * p - 1) * np.log(x) - a * p * math.log(b) - sc.betaln(p, q)
                - (p + q) * np.logaddexp(0.0, ly))
        return np.where(np.isfinite(logf), np.exp(logf), 0.0)


def gb2_moment_exists(k: float, params: Gb2Params) -> bool:
    """Both beta arguments ``p + k/a`` and ``q - k/a`` must be positive."""
    return params.p + k / params.a > 0 and params.q - k / params.a > 0


def gb2_moment(k: int, params: Gb2Params) -> MomentValue:
    """``b**k B(p + k/a, q - k/a) / B(p, q)`` where it exists, else undefined."""
    a, b, p, q = params.a, params.b, params.p, params.q
    if not gb2_moment_exists(k, params):
        return MomentValue.indeterminate()
    log_m = k * math.log(b) + sc.betaln(p + k / a, q - k / a) - sc.betaln(p, q)
    return MomentValue.finite(math.exp(log_m)) if log_m < 709.7 else MomentValue.plus_infinity()


def gb2_summary(params: Gb2Params) -> MomentSummary:
    return summarize_moments(gb2_moment(1, params), gb2_moment(2, params))
