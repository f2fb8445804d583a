import csv
import math

import numpy as np
import pytest

from binfit.bench import (
    ESTIMATORS, GeneratorFamily, GeneratorSpec, bin_values, density, fit_unit, generate, moving_average,
    normalize_estimators, raw_moment, run_benchmark,
)
from binfit.data import CENSUS_2000_EDGES, is_eligible
from binfit.errors import EmptyEstimatorSet, IneligibleSample
from binfit.quadrature import moment_by_quadrature

FAMILIES = {
    GeneratorFamily.LOGNORMAL: {"mu": 10.8, "sigma": 0.75},
    GeneratorFamily.GAMMA: {"shape": 2.0, "scale": 25000.0},
    GeneratorFamily.WEIBULL: {"shape": 1.5, "scale": 55000.0},
    GeneratorFamily.DAGUM: {"a": 3.5, "b": 50000.0, "p": 0.8},
}


class TestGeneratorSpec:
    def test_defaults(self):
        s = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 3)
        assert s.bin_edges == CENSUS_2000_EDGES and s.unit_size == (40, 2000) and s.apply_census_rounding

    @pytest.mark.parametrize("kw", [
        {"n_units": 0}, {"unit_size": (0, 5)}, {"unit_size": (10, 5)}, {"bin_edges": (0, 10, 5, math.inf)},
        {"bin_edges": (0, 10, 20)}, {"bin_edges": (1, 10, math.inf)}, {"scale_sd": -1.0},
    ])
    def test_invalid(self, kw):
        base = dict(family="Lognormal", params={"mu": 10, "sigma": 1}, n_units=2)
        base.update(kw)
        with pytest.raises(ValueError):
            GeneratorSpec(**base)

    def test_wrong_params(self):
        with pytest.raises(ValueError):
            GeneratorSpec("Weibull", {"mu": 1, "sigma": 1}, 2)


class TestGenerate:
    def test_large_unit_sample_mean(self):
        spec = GeneratorSpec("Lognormal", {"mu": 11.0, "sigma": 0.7}, 1, unit_size=(10**6, 10**6),
                             apply_census_rounding=False, seed=4)
        (u,) = generate(spec)
        truth = math.exp(11 + 0.245)
        assert u.true_mean == pytest.approx(truth, rel=1e-14)
        assert abs(u.sample_mean - truth) / truth < 0.005
        assert u.sample.total == 10**6

    def test_fixed_size_meets_threshold(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 25, unit_size=(40, 40),
                             apply_census_rounding=False)
        for u in generate(spec):
            assert u.sample.total == 40
            assert u.sample.total >= 40

    def test_deterministic(self):
        spec = GeneratorSpec("Weibull", FAMILIES[GeneratorFamily.WEIBULL], 5, seed=9)
        assert generate(spec) == generate(spec)
        other = GeneratorSpec("Weibull", FAMILIES[GeneratorFamily.WEIBULL], 5, seed=10)
        assert generate(spec) != generate(other)

    def test_unit_independent_of_batch_size(self):
        a = generate(GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 3, seed=2))
        b = generate(GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 6, seed=2))
        assert a == b[:3]

    def test_rounding_applied(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 5, seed=1)
        for u in generate(spec):
            assert all(c == 0 or c == 4 or c % 5 == 0 for c in u.sample.counts)

    def test_bin_values_half_open(self):
        counts = bin_values(np.array([0.0, 9999.99, 10000.0, 250000.0]), CENSUS_2000_EDGES)
        assert counts[0] == 2 and counts[1] == 1 and counts[-1] == 1 and counts.sum() == 4

    @pytest.mark.parametrize("family", list(GeneratorFamily))
    @pytest.mark.parametrize("k", [1, 2])
    def test_true_moments_match_quadrature(self, family, k):
        params = FAMILIES[family]
        q = moment_by_quadrature(density(family, params), k, split=5e4).value
        assert q == pytest.approx(raw_moment(family, params, k), rel=1e-6)


class TestFitUnit:
    def test_shared_work(self, mcnary):
        out = fit_unit(mcnary, ["best", "gb2"])
        assert set(out) == {"best", "gb2"}
        assert out["gb2"].baseline is not None

    def test_ineligible_recorded(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 1, unit_size=(5, 5))
        (u,) = generate(spec)
        out = fit_unit(u.sample, ESTIMATORS)
        assert all(isinstance(v, IneligibleSample) for v in out.values())

    def test_normalize(self):
        assert normalize_estimators(["egg", "Best", "MIDPOINT", "egg"]) == ("EGG", "best", "midpoint")
        with pytest.raises(EmptyEstimatorSet):
            normalize_estimators([])
        with pytest.raises(ValueError):
            normalize_estimators(["histospline"])


class TestRunBenchmark:
    def test_empty_estimators(self):
        with pytest.raises(EmptyEstimatorSet):
            run_benchmark(GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 1), [])

    def test_fault_isolation(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 6, unit_size=(10, 60),
                             apply_census_rounding=False, seed=3)
        res = run_benchmark(spec, ["PN", "midpoint"])
        bad = [u for u in generate(spec) if not is_eligible(u.sample)]
        assert bad  # the size range straddles the threshold
        for name in ("PN", "midpoint"):
            r = res.reports[name]
            assert r.n_units == 6 and r.undefined_mean_share == pytest.approx(len(bad) / 6)

    def test_midpoint_worse_on_heavy_tail(self):
        # units large enough that the midpoint bias, not sampling noise, dominates
        spec = GeneratorSpec("Lognormal", {"mu": 10.8, "sigma": 1.0}, 30, unit_size=(1000, 5000), seed=5)
        res = run_benchmark(spec, ["best", "midpoint"])
        assert res.reports["midpoint"].rmsre > res.reports["best"].rmsre

    def test_outputs_and_determinism(self, tmp_path):
        spec = GeneratorSpec("Lognormal", FAMILIES[GeneratorFamily.LOGNORMAL], 8, seed=12, scale_sd=0.3)
        paths = []
        for run in range(2):
            res = run_benchmark(spec, ["best", "dagum"])
            m, s = tmp_path / f"m{run}.csv", tmp_path / f"s{run}.csv"
            res.write_metrics(m)
            res.write_scatter(s)
            paths.append((m, s))
        assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
        assert paths[0][1].read_bytes() == paths[1][1].read_bytes()
        rows = list(csv.DictReader(paths[0][0].open()))
        assert [r["estimator"] for r in rows] == ["best", "dagum"]
        assert set(rows[0]) == {"estimator", "n_units", "n_defined", "relative_bias", "rmsre",
                                "undefined_mean_share", "undefined_variance_share"}
        scatter = list(csv.DictReader(paths[0][1].open()))
        assert len(scatter) == 16
        assert list(scatter[0]) == ["estimator", "unit", "true_mean", "estimate", "relative_error", "smoothed_error"]
        best = [float(r["true_mean"]) for r in scatter if r["estimator"] == "best"]
        assert best == sorted(best)

    def test_workers_do_not_change_results(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 4, seed=8)
        a = run_benchmark(spec, ["PN"], workers=1)
        b = run_benchmark(spec, ["PN"], workers=2)
        assert a.scatter == b.scatter

    def test_sample_truth(self):
        spec = GeneratorSpec("Gamma", FAMILIES[GeneratorFamily.GAMMA], 3, seed=8)
        res = run_benchmark(spec, ["midpoint"], truth="sample")
        units = generate(spec)
        assert [u.true_mean for u in res.reports["midpoint"].per_unit] == [u.sample_mean for u in units]

    def test_consistency_across_sizes(self):
        medians = []
        for n in (100, 1000, 10000):
            spec = GeneratorSpec("Lognormal", FAMILIES[GeneratorFamily.LOGNORMAL], 20, unit_size=(n, n),
                                 apply_census_rounding=False, seed=6)
            r = run_benchmark(spec, ["best"]).reports["best"]
            medians.append(float(np.median([abs(u.relative_error) for u in r.per_unit])))
        assert medians[0] > medians[1] > medians[2]


def test_moving_average():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4, 5], 3), [1.5, 2, 3, 4, 4.5])
    np.testing.assert_allclose(moving_average([2.0], 5), [2.0])


def test_error_shrinks_with_unit_size():
    # consistency: median absolute error of best-of-breed falls across size tiers
    medians = []
    for size in (100, 1000, 10000):
        spec = GeneratorSpec("Lognormal", {"mu": 10.8, "sigma": 0.75}, 15, unit_size=(size, size),
                             apply_census_rounding=False, seed=77, scale_sd=0.3)
        report = run_benchmark(spec, ["best"]).reports["best"]
        medians.append(float(np.median([abs(u.relative_error) for u in report.per_unit])))
    assert medians[0] > medians[1] > medians[2]
