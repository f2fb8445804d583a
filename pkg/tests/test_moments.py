import math

import pytest

from binfit.moments import VARIANCE_CLAMPED, MomentKind, MomentValue, summarize_moments

F = MomentValue.finite
INF = MomentValue.plus_infinity()
ND = MomentValue.indeterminate()


class TestMomentValue:
    def test_finite(self):
        m = F(2.0)
        assert m.is_finite and m.as_float() == 2.0 and str(m) == "2.0"

    def test_nonfinite_inputs_are_reclassified(self):
        assert F(math.inf).kind is MomentKind.PLUS_INFINITY
        assert F(math.nan).kind is MomentKind.INDETERMINATE

    def test_kinds(self):
        assert INF.as_float() == math.inf and math.isnan(ND.as_float())
        assert str(INF) == "PlusInfinity" and str(ND) == "Indeterminate"


class TestSummarize:
    def test_arithmetic(self):
        s = summarize_moments(F(2.0), F(10.0))
        assert s.variance.value == 6.0
        assert s.sd.value == pytest.approx(math.sqrt(6))
        assert s.cv.value == pytest.approx(math.sqrt(6) / 2)

    def test_infinite_second_moment(self):
        s = summarize_moments(F(2.0), INF)
        assert s.variance.kind is MomentKind.PLUS_INFINITY
        assert s.sd.kind is MomentKind.PLUS_INFINITY
        assert s.cv.kind is MomentKind.PLUS_INFINITY

    def test_indeterminate_mean(self):
        s = summarize_moments(ND, F(3.0))
        assert all(v.kind is MomentKind.INDETERMINATE for v in (s.mean, s.variance, s.sd, s.cv))

    def test_infinite_mean(self):
        s = summarize_moments(INF, INF)
        assert s.mean.kind is MomentKind.PLUS_INFINITY
        assert not s.variance.is_finite and not s.cv.is_finite

    def test_clamp(self):
        s = summarize_moments(F(1.0), F(1.0 - 1e-15))
        assert s.variance.value == 0.0 and VARIANCE_CLAMPED in s.flags

    def test_nonpositive_mean_has_no_cv(self):
        s = summarize_moments(F(-1.0), F(2.0))
        assert s.variance.value == 1.0 and s.cv.kind is MomentKind.INDETERMINATE
