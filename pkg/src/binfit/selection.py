"""Best-of-breed selection and accuracy metrics for mean estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable

from .data import BinnedSample
from .errors import BinfitError, DomainError, EmptyInput, NoViableCandidate
from .fitting import Family, FitConfig, FitResult, fit_egg, fit_power
from .moments import MomentValue

# Order in which exactly tied likelihoods are resolved (PN is always finite).
TIE_BREAK = (Family.PN, Family.EGG, Family.PL)


@dataclass(frozen=True)
class Candidate:
    family: Family
    loglik: float
    variance_finite: bool


@dataclass(frozen=True)
class BestOfBreed:
    chosen: FitResult
    candidates: tuple[Candidate, ...]
    eliminated: tuple[tuple[Family, str], ...]

    @property
    def family(self) -> Family:
        return self.chosen.family


def best_of_breed(egg: FitResult | None, pn: FitResult | None, pl: FitResult | None) -> BestOfBreed:
    """Pick the highest-likelihood fit among those with a finite variance.

    A ``None`` argument stands for a fit that raised. Exact ties go to PN,
    then EGG, then PL.
    """
    fits = {Family.EGG: egg, Family.PN: pn, Family.PL: pl}
    candidates, eliminated = [], []
    best = None
    for family in TIE_BREAK:
        fit = fits[family]
        if fit is None:
            eliminated.append((family, "fit failed"))
            continue
        finite = fit.moments.variance.is_finite
        candidates.append(Candidate(family, fit.loglik, finite))
        if not finite:
            eliminated.append((family, f"variance is {fit.moments.variance.kind.value}"))
            continue
        if not math.isfinite(fit.loglik):
            eliminated.append((family, "log-likelihood is not finite"))
            continue
        if best is None or fit.loglik > best.loglik:
            best = fit
    if best is None:
        raise NoViableCandidate("no EGG, PN or PL fit has a finite variance")
    return BestOfBreed(best, tuple(candidates), tuple(eliminated))


def fit_best(sample: BinnedSample, config: FitConfig = FitConfig()) -> tuple[BestOfBreed, dict]:
    """Fit EGG, PN and PL and select among them.

    Returns the selection and a dict of the individual outcomes (a
    :class:`FitResult` or the exception raised) keyed by family.
    """
    outcomes = {}
    for family, fit in ((Family.EGG, lambda: fit_egg(sample, config)),
                        (Family.PN, lambda: fit_power(sample, "PN", config)),
                        (Family.PL, lambda: fit_power(sample, "PL", config))):
        try:
            outcomes[family] = fit()
        except BinfitError as exc:
            outcomes[family] = exc
    picked = best_of_breed(*(o if isinstance(o, FitResult) else None
                             for o in (outcomes[Family.EGG], outcomes[Family.PN], outcomes[Family.PL])))
    return picked, outcomes


def relative_error(estimate: float, truth: float) -> float:
    if not truth > 0:
        raise DomainError(f"true value must be positive, got {truth}")
    return (estimate - truth) / truth


@dataclass(frozen=True)
class UnitOutcome:
    """One unit's estimate as fed to :func:`aggregate`."""

    id: Hashable
    true_mean: float
    mean: MomentValue
    variance: MomentValue
    error: str | None = None


@dataclass(frozen=True)
class UnitEval:
    id: Hashable
    true_mean: float
    estimate: MomentValue
    relative_error: float | None


@dataclass(frozen=True)
class EvalReport:
    """Accuracy summary over units.

    ``relative_bias`` and ``rmsre`` are computed over units with a finite
    mean estimate and are ``None`` when there are none.
    """

    per_unit: tuple[UnitEval, ...]
    relative_bias: float | None
    rmsre: float | None
    undefined_mean_share: float
    undefined_variance_share: float

    @property
    def n_units(self) -> int:
        return len(self.per_unit)

    @property
    def n_defined(self) -> int:
        return sum(1 for u in self.per_unit if u.relative_error is not None)


def aggregate(units: Iterable[UnitOutcome]) -> EvalReport:
    units = list(units)
    if not units:
        raise EmptyInput("aggregate needs at least one unit")
    per_unit = []
    errors = []
    undefined_mean = undefined_var = 0
    for u in units:
        defined = u.error is None and u.mean.is_finite
        if not defined:
            undefined_mean += 1
        if u.error is not None or not u.variance.is_finite:
            undefined_var += 1
        rel = relative_error(u.mean.value, u.true_mean) if defined else None
        if rel is not None:
            errors.append(rel)
        per_unit.append(UnitEval(u.id, u.true_mean, u.mean, rel))
    n = len(units)
    if errors:
        bias = math.fsum(errors) / len(errors)
        rmsre = math.sqrt(math.fsum(e * e for e in errors) / len(errors))
    else:
        bias = rmsre = None
    return EvalReport(tuple(per_unit), bias, rmsre, undefined_mean / n, undefined_var / n)
