import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special as sc

from binfit.distributions import (
    EGG_FALLBACK_SHAPE, LOG_CASE, MOMENT_FALLBACK_USED, PL_GRID, PN_GRID, EggParams, PowerFamily, PowerParams,
    default_grid, egg_cdf, egg_cdf_array, egg_moment, egg_sf_array, egg_summary, power_cdf, power_cdf_array,
    power_moment, power_summary, power_transform,
)
from binfit.errors import DomainError
from binfit.moments import MomentKind

from moment_oracle import egg_checks, power_checks


class TestEggCdf:
    def test_lognormal_median(self):
        assert egg_cdf(EggParams(0, 1, 0), 1.0) == 0.5

    def test_exponential_reduction(self):
        assert egg_cdf(EggParams(0, 1, 1), 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_negative_lambda_oracle(self):
        # mpmath quadrature of the density over (0, 5]
        assert egg_cdf(EggParams(2, 0.7, -0.5), 5.0) == pytest.approx(0.22701349764240037213, rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -2.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            egg_cdf(EggParams(0, 1, 0.3), x)

    def test_sf_complements(self):
        x = np.geomspace(1e-3, 1e3, 40)
        for lam in (-1.2, 0.0, 0.4):
            total = egg_cdf_array(0.3, 0.9, lam, x) + egg_sf_array(0.3, 0.9, lam, x)
            np.testing.assert_allclose(total, 1.0, rtol=1e-13)

    def test_small_lambda_continuity(self):
        x = np.geomspace(0.05, 20, 25)
        base = sc.ndtr(np.log(x) / 0.8)
        np.testing.assert_allclose(egg_cdf_array(0, 0.8, 1e-6, x), base, atol=2e-6)
        np.testing.assert_allclose(egg_cdf_array(0, 0.8, -1e-9, x), base, atol=1e-8)


class TestEggMoment:
    def test_lognormal_mean(self):
        m = egg_moment(1, EggParams(0, 1, 0))
        assert m.value == pytest.approx(math.exp(0.5), rel=1e-15)

    def test_infinite(self):
        assert egg_moment(1, EggParams(3.3, 1.5, -1)).kind is MomentKind.PLUS_INFINITY

    def test_boundary_is_infinite(self):
        assert egg_moment(2, EggParams(0, 0.5, -1)).kind is MomentKind.PLUS_INFINITY

    def test_unit_case(self):
        # Γ(2)/Γ(1) * e^0 * 1
        assert egg_moment(1, EggParams(0, 1, 1)).value == pytest.approx(1.0, rel=1e-14)

    @settings(max_examples=100)
    @given(st.floats(-2, 2), st.floats(0.1, 2), st.floats(0.05, 3).flatmap(lambda a: st.sampled_from([a, -a])),
           st.sampled_from([1, 2]))
    def test_log_gamma_form_matches_naive(self, mu, sigma, lam, k):
        if k * lam * sigma <= -1:
            return
        shape = lam ** -2
        if shape > 150 or shape + k * sigma / lam > 150:
            return  # naive Γ ratio overflows
        naive = math.exp(k * mu) * (lam * lam) ** (k * sigma / lam) * math.gamma(shape + k * sigma / lam) / math.gamma(shape)
        assert egg_moment(k, EggParams(mu, sigma, lam)).value == pytest.approx(naive, rel=1e-9)

    def test_large_shape_is_stable(self):
        # lam = 1e-4 sits between the exact log-gamma form and the fallback
        p = EggParams(10.0, 0.8, 1e-4)
        lognormal = math.exp(10.0 + 0.32)
        assert egg_moment(1, p).value == pytest.approx(lognormal, rel=1e-3)
        assert MOMENT_FALLBACK_USED not in egg_summary(p).flags

    def test_fallback(self):
        lam = 0.5 * EGG_FALLBACK_SHAPE ** -0.5
        p = EggParams(1.0, 0.5, lam)
        s = egg_summary(p)
        assert MOMENT_FALLBACK_USED in s.flags
        assert s.mean.value == pytest.approx(math.exp(1.125) + lam / 2, rel=1e-15)
        assert s.second_moment.value == pytest.approx(math.exp(2.5) + 1.5 * lam, rel=1e-15)

    def test_oracle_draws(self):
        checks = egg_checks(np.random.default_rng(7), 40)
        assert all(c.ok for c in checks)


class TestPowerTransform:
    def test_square_root(self):
        assert power_transform(9.0, PowerParams(0, 1, 2)) == 3.0

    def test_log_zero(self):
        assert power_transform(0.0, PowerParams(0, 1, LOG_CASE)) == -math.inf

    def test_identity(self):
        assert power_transform(12.5, PowerParams(0, 1, 1)) == 12.5

    def test_inf(self):
        assert power_transform(math.inf, PowerParams(0, 1, 3)) == math.inf

    def test_negative(self):
        with pytest.raises(DomainError):
            power_transform(-1.0, PowerParams(0, 1, 3))


class TestPowerParams:
    def test_grids(self):
        assert PN_GRID == (None, *range(1, 21), 25, 33, 50)
        assert PL_GRID == (None, *range(1, 21), 25, 50)
        assert default_grid(PowerFamily.PL) == PL_GRID

    @pytest.mark.parametrize("bad", [0, -2, 1.5])
    def test_exponent_must_be_positive_integer(self, bad):
        with pytest.raises(DomainError):
            PowerParams(0, 1, bad)

    def test_sigma_positive(self):
        with pytest.raises(DomainError):
            PowerParams(0, 0, 2)

    def test_lam(self):
        assert PowerParams(0, 1, 4).lam == 0.25 and PowerParams(0, 1, None).lam == 0.0


class TestPowerCdf:
    def test_identity_is_normal(self):
        assert power_cdf(PowerParams(2.0, 0.5, 1), 2.5) == pytest.approx(sc.ndtr(1.0), rel=1e-15)

    def test_log_logistic_median(self):
        assert power_cdf(PowerParams(0, 1, None, "PL"), 1.0) == 0.5

    def test_cube_root(self):
        assert power_cdf(PowerParams(2, 0.5, 3), 8.0) == pytest.approx(0.5, abs=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            power_cdf(PowerParams(2, 0.5, 3), 0.0)

    def test_mass_below_zero_for_integer_exponent(self):
        # the fitted variable lives on the transformed scale; mass below 0 is not redistributed
        F0 = power_cdf_array("PN", 1.0, 1.0, 2, 0.0)
        assert F0 == pytest.approx(sc.ndtr(-1.0), rel=1e-15)
        assert power_cdf_array("PN", 1.0, 1.0, None, 0.0) == 0.0


class TestPowerMoment:
    def test_identity_mean(self):
        assert power_moment(1, PowerParams(3.2, 0.4, 1)).value == 3.2

    def test_pl_identity_second(self):
        assert power_moment(2, PowerParams(0, 1, 1, "PL")).value == pytest.approx(math.pi**2 / 3, rel=1e-14)

    def test_pn_log_second(self):
        assert power_moment(2, PowerParams(0, 1, None)).value == pytest.approx(math.e**2, rel=1e-14)

    def test_pl_log_condition(self):
        assert power_moment(1, PowerParams(0, 0.6, None, "PL")).is_finite
        assert power_moment(2, PowerParams(0, 0.6, None, "PL")).kind is MomentKind.INDETERMINATE
        assert power_moment(2, PowerParams(0, 0.5, None, "PL")).kind is MomentKind.INDETERMINATE

    def test_pl_log_value(self):
        s = 0.25
        assert power_moment(1, PowerParams(1.0, s, None, "PL")).value == pytest.approx(
            math.e * math.pi * s / math.sin(math.pi * s), rel=1e-14)

    @given(st.floats(-50, 50), st.floats(0.01, 20), st.sampled_from([g for g in PN_GRID if g is not None]))
    def test_pn_variance_always_finite(self, mu, sigma, n):
        s = power_summary(PowerParams(mu, sigma, n))
        assert s.second_moment.is_finite

    def test_oracle_draws(self):
        rng = np.random.default_rng(8)
        checks = power_checks(rng, 30, "PN") + power_checks(rng, 30, "PL")
        assert all(c.ok for c in checks)


class TestCdfProperties:
    """Monotone, limits 0 and 1, on quantile-spaced points."""

    @staticmethod
    def _check(cdf_values, F0=0.0):
        assert np.all(np.diff(cdf_values) >= 0)
        assert cdf_values[0] == pytest.approx(F0, abs=1e-6)
        assert cdf_values[-1] == pytest.approx(1.0, abs=1e-6)

    U = np.linspace(1e-9, 1 - 1e-9, 50)

    @settings(max_examples=60)
    @given(st.floats(-2, 12), st.floats(0.1, 2), st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
    def test_egg(self, mu, sigma, lam):
        shape = lam ** -2
        g = sc.gammaincinv(shape, self.U) if lam > 0 else sc.gammainccinv(shape, self.U)
        x = np.exp(mu + sigma * np.log(g / shape) / lam)
        F = egg_cdf_array(mu, sigma, lam, x)
        np.testing.assert_allclose(F, self.U, rtol=1e-6, atol=1e-12)
        self._check(egg_cdf_array(mu, sigma, lam, np.concatenate([[1e-300], x, [1e300]])))

    @settings(max_examples=60)
    @given(st.sampled_from(["PN", "PL"]), st.sampled_from(PL_GRID), st.floats(0.1, 40), st.floats(0.02, 0.5))
    def test_power(self, family, n, mu, rel_sigma):
        sigma = rel_sigma * mu
        z = sc.ndtri(self.U) if family == "PN" else sc.logit(self.U)
        t = mu + sigma * z
        with np.errstate(over="ignore"):
            x = np.exp(t) if n is None else np.where(t > 0, np.abs(t) ** n, 0.0)
        x = np.concatenate([[0.0], x, [np.inf]])
        F0 = 0.0 if n is None else float(power_cdf_array(family, mu, sigma, n, 0.0))
        self._check(power_cdf_array(family, mu, sigma, n, x), F0)

    def test_egg_lambda_zero_equals_pn_log(self):
        x = np.geomspace(1e-4, 1e6, 200)
        np.testing.assert_allclose(egg_cdf_array(1.3, 0.8, 0.0, x), power_cdf_array("PN", 1.3, 0.8, None, x),
                                   rtol=0, atol=1e-12)
