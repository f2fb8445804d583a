"""Moment estimation for binned (grouped) income data.

Fits flexible parametric distributions to counts in income brackets by
maximum likelihood and reports the implied mean, variance and coefficient
of variation, with explicit handling of moments that do not exist.
"""

__version__ = "0.1.0"

from .data import BinnedSample, Bin, EligibilityRule, census_round, read_samples, validate, load_two_districts
from .moments import MomentKind, MomentValue, MomentSummary
from .fitting import Family, FitConfig, FitResult, binned_loglik, fit_egg, fit_power, fit_dagum, fit_gb2, fit_family, midpoint_estimate
from .selection import best_of_breed, fit_best, aggregate
from .quadrature import QuadratureSpec, moment_by_quadrature

__all__ = [
    "Bin", "BinnedSample", "EligibilityRule", "census_round", "read_samples", "validate", "load_two_districts",
    "MomentKind", "MomentValue", "MomentSummary",
    "Family", "FitConfig", "FitResult", "binned_loglik", "fit_egg", "fit_power", "fit_dagum", "fit_gb2",
    "fit_family", "midpoint_estimate",
    "best_of_breed", "fit_best", "aggregate",
    "QuadratureSpec", "moment_by_quadrature",
]
