"""The three-parameter families fitted to binned data: EGG, PN and PL.

* EGG, the extended generalized gamma. ``omega = (ln x - mu) / sigma`` is
  standard normal when ``lam == 0`` and otherwise a rescaled log-gamma
  variable. Nests the lognormal, gamma, Weibull and exponential.
* PN / PL, power-normal and power-logistic. ``t(x) = x**(1/n)`` (or ``ln x``
  in the log case) is normal / logistic with location ``mu`` and scale
  ``sigma``. The exponent ``1/n`` is restricted to reciprocals of positive
  integers so the back-transform ``z**n`` is real.

CDF helpers whose names end in ``_array`` are vectorized and accept the
boundary points ``0`` and ``inf``; the public scalar versions enforce
``x > 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError
from .moments import MomentKind, MomentSummary, MomentValue, summarize_moments
from .special import (
    _stirling_tail,
    logistic_raw_moment,
    normal_raw_moment,
    std_logistic_pdf,
    std_normal_pdf,
)

__all__ = [
    "MomentKind", "MomentValue", "MomentSummary", "summarize_moments",
    "EggParams", "PowerFamily", "PowerParams", "PN_GRID", "PL_GRID",
    "egg_cdf", "egg_pdf", "egg_moment", "egg_summary",
    "power_transform", "power_cdf", "power_pdf", "power_moment", "power_summary",
]

MOMENT_FALLBACK_USED = "MomentFallbackUsed"

# Below this |lam| the EGG shape lam**-2 exceeds 1e15; moments switch to the
# linear-in-lam correction of the lognormal values and the CDF to the lognormal.
EGG_FALLBACK_SHAPE = 1e15
_EGG_SMALL_LAMBDA = EGG_FALLBACK_SHAPE ** -0.5


@dataclass(frozen=True)
class EggParams:
    mu: float
    sigma: float
    lam: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def _egg_is_lognormal(lam: float) -> bool:
    return abs(lam) < _EGG_SMALL_LAMBDA


def egg_cdf_array(mu: float, sigma: float, lam: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        omega = (np.log(x) - mu) / sigma
        if _egg_is_lognormal(lam):
            return sc.ndtr(omega)
        shape = lam ** -2
        arg = shape * np.exp(lam * omega)
        return sc.gammainc(shape, arg) if lam > 0 else sc.gammaincc(shape, arg)


def egg_sf_array(mu: float, sigma: float, lam: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        omega = (np.log(x) - mu) / sigma
        if _egg_is_lognormal(lam):
            return sc.ndtr(-omega)
        shape = lam ** -2
        arg = shape * np.exp(lam * omega)
        return sc.gammaincc(shape, arg) if lam > 0 else sc.gammainc(shape, arg)


def egg_cdf(params: EggParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"EGG CDF is defined for x > 0, got {x}")
    return float(egg_cdf_array(params.mu, params.sigma, params.lam, x))


def egg_pdf(params: EggParams, x):
    """EGG density on ``x > 0`` (log-gamma kernel evaluated in log space)."""
    x = np.asarray(x, dtype=float)
    mu, sigma, lam = params.mu, params.sigma, params.lam
    with np.errstate(divide="ignore", over="ignore", invalid="ignore", under="ignore"):
        omega = (np.log(x) - mu) / sigma
        if lam == 0:
            return std_normal_pdf(omega) / (sigma * x)
        shape = lam ** -2
        logf = (math.log(abs(lam)) - np.log(sigma * x) + shape * (lam * omega + math.log(shape))
                - shape * np.exp(lam * omega) - sc.gammaln(shape))
        return np.where(np.isfinite(logf), np.exp(logf), 0.0)


def _egg_log_moment(k: int, mu: float, sigma: float, lam: float) -> float:
    shape = lam ** -2
    h = k * sigma / lam
    b = shape + h
    if min(shape, b) < 1e3:
        return k * mu + h * math.log(lam * lam) + float(sc.gammaln(b) - sc.gammaln(shape))
    # Stirling difference: the h*ln(lam^2) term cancels against lnΓ growth exactly
    x = k * sigma * lam
    return k * mu + (shape - 0.5 + h) * math.log1p(x) - h + (_stirling_tail(b) - _stirling_tail(shape))


def egg_moment(k: int, params: EggParams) -> MomentValue:
    """k-th raw moment of the EGG distribution.

    ``+inf`` whenever ``k*lam*sigma <= -1``; otherwise the log-gamma form
    ``exp(k mu + (k sigma/lam) ln lam^2 + lnΓ(lam^-2 + k sigma/lam) - lnΓ(lam^-2))``.
    For ``|lam|`` so small that ``lam**-2 > 1e15`` the lognormal moment
    plus ``lam/2`` (k=1) or ``3 lam/2`` (k=2) is returned instead; see
    :func:`egg_uses_fallback`.
    """
    mu, sigma, lam = params.mu, params.sigma, params.lam
    lognormal = math.exp(k * mu + 0.5 * (k * sigma) ** 2) if k * mu + 0.5 * (k * sigma) ** 2 < 709 else math.inf
    if lam == 0:
        return MomentValue.finite(lognormal)
    if k * lam * sigma <= -1:
        return MomentValue.plus_infinity()
    if egg_uses_fallback(params):
        return MomentValue.finite(lognormal + {1: 0.5, 2: 1.5}[k] * lam)
    log_m = _egg_log_moment(k, mu, sigma, lam)
    return MomentValue.finite(math.exp(log_m)) if log_m < 709.7 else MomentValue.plus_infinity()


def egg_uses_fallback(params: EggParams) -> bool:
    return params.lam != 0 and params.lam ** -2 > EGG_FALLBACK_SHAPE


def egg_summary(params: EggParams) -> MomentSummary:
    s = summarize_moments(egg_moment(1, params), egg_moment(2, params))
    if egg_uses_fallback(params):
        s = MomentSummary(s.mean, s.second_moment, s.variance, s.sd, s.cv, s.flags | {MOMENT_FALLBACK_USED})
    return s


class PowerFamily(str, enum.Enum):
    PN = "PN"
    PL = "PL"


LOG_CASE = None  # lambda_inv token for the logarithmic (lam = 0) transform

PN_GRID: tuple[int | None, ...] = (LOG_CASE, *range(1, 21), 25, 33, 50)
PL_GRID: tuple[int | None, ...] = (LOG_CASE, *range(1, 21), 25, 50)


def default_grid(family: PowerFamily) -> tuple[int | None, ...]:
    return PN_GRID if PowerFamily(family) is PowerFamily.PN else PL_GRID


@dataclass(frozen=True)
class PowerParams:
    """Power-normal / power-logistic parameters.

    ``lambda_inv`` is the positive integer ``n`` of the transform
    ``x**(1/n)``, or ``None`` for the log transform.
    """

    mu: float
    sigma: float
    lambda_inv: int | None
    family: PowerFamily = PowerFamily.PN

    def __post_init__(self):
        object.__setattr__(self, "family", PowerFamily(self.family))
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.lambda_inv is not None and (int(self.lambda_inv) != self.lambda_inv or self.lambda_inv < 1):
            raise DomainError(f"lambda_inv must be a positive integer or None, got {self.lambda_inv}")

    @property
    def is_log(self) -> bool:
        return self.lambda_inv is None

    @property
    def lam(self) -> float:
        return 0.0 if self.lambda_inv is None else 1.0 / self.lambda_inv


def transform_array(x, lambda_inv: int | None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        if lambda_inv is None:
            return np.log(x)
        if lambda_inv == 1:
            return x
        return np.power(x, 1.0 / lambda_inv)


def power_transform(x, params: PowerParams):
    """``ln x`` (with ``ln 0 = -inf``) or ``x**(1/n)``; ``inf`` maps to ``inf``."""
    if np.any(np.asarray(x) < 0):
        raise DomainError("power transform requires x >= 0")
    out = transform_array(x, params.lambda_inv)
    return float(out) if np.ndim(out) == 0 else out


def _kernel_cdf(family: PowerFamily, z):
    return sc.ndtr(z) if family is PowerFamily.PN else sc.expit(z)


def power_cdf_array(family: PowerFamily, mu: float, sigma: float, lambda_inv: int | None, x) -> np.ndarray:
    """``G((t(x) - mu)/sigma)``; at ``x = 0`` with an integer exponent this is
    the kernel mass below zero, which the fit treats as lying outside every bin."""
    z = (transform_array(x, lambda_inv) - mu) / sigma
    return _kernel_cdf(PowerFamily(family), z)


def power_sf_array(family: PowerFamily, mu: float, sigma: float, lambda_inv: int | None, x) -> np.ndarray:
    z = (transform_array(x, lambda_inv) - mu) / sigma
    return _kernel_cdf(PowerFamily(family), -z)


def power_cdf(params: PowerParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"power CDF is defined for x > 0, got {x}")
    return float(power_cdf_array(params.family, params.mu, params.sigma, params.lambda_inv, x))


def power_pdf(params: PowerParams, x):
    """Density on ``x > 0`` implied by :func:`power_cdf`."""
    x = np.asarray(x, dtype=float)
    kernel = std_normal_pdf if params.family is PowerFamily.PN else std_logistic_pdf
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = transform_array(x, params.lambda_inv)
        if params.is_log:
            dt = 1.0 / x
        else:
            n = params.lambda_inv
            dt = np.power(x, 1.0 / n - 1.0) / n
        return kernel((t - params.mu) / params.sigma) * dt / params.sigma


def power_moment(k: int, params: PowerParams) -> MomentValue:
    """k-th raw moment of a PN or PL variable.

    With an integer exponent ``1/n`` this is the ``k*n``-th raw moment of
    the normal or logistic kernel, always finite. In the log case PN is
    lognormal, and PL is log-logistic with ``E(X**k) = e**(k mu) * pi k
    sigma / sin(pi k sigma)``, undefined unless ``k*sigma < 1``.
    """
    mu, sigma = params.mu, params.sigma
    if params.is_log:
        if params.family is PowerFamily.PN:
            e = k * mu + 0.5 * (k * sigma) ** 2
            return MomentValue.finite(math.exp(e)) if e < 709.7 else MomentValue.plus_infinity()
        ks = k * sigma
        if ks >= 1:
            return MomentValue.indeterminate()
        e = k * mu + math.log(math.pi * ks / math.sin(math.pi * ks))
        return MomentValue.finite(math.exp(e)) if e < 709.7 else MomentValue.plus_infinity()
    order = k * params.lambda_inv
    raw = normal_raw_moment if params.family is PowerFamily.PN else logistic_raw_moment
    with np.errstate(over="ignore"):
        return MomentValue.finite(raw(order, mu, sigma))


def power_summary(params: PowerParams) -> MomentSummary:
    return summarize_moments(power_moment(1, params), power_moment(2, params))
