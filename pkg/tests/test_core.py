"""Tests for the test-retest data model and within-subject SD estimation."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from repeatkit.core import (
    LongitudinalPair,
    RepeatabilityCoefficient,
    WsdEstimate,
    decide_change,
    design_degrees_of_freedom,
    estimate_wsd,
    ratio_density_exact,
    ratio_density_normal,
    ratio_support_exact,
    ratio_support_normal,
    repeatability_coefficient,
    symmetric_coverage_quantile,
)
from repeatkit.core import TestRetestData as RetestData
from repeatkit.errors import DataValidationError, DomainError
from repeatkit.numerics import integrate

Z_95 = 1.9599639845400536


def make_data(*subjects):
    return RetestData(tuple(
        (f"s{i}", tuple(vals)) for i, vals in enumerate(subjects)))


class TestSymmetricCoverageQuantile:
    def test_reference_value(self):
        assert symmetric_coverage_quantile(0.95) == pytest.approx(Z_95, abs=1e-14)

    def test_half_coverage(self):
        # central 50% of a standard normal spans +-0.674489...
        assert symmetric_coverage_quantile(0.5) == pytest.approx(
            0.6744897501960817, abs=1e-13)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 2.0])
    def test_rejects_boundary(self, p):
        with pytest.raises(DomainError):
            symmetric_coverage_quantile(p)

    @given(st.floats(min_value=0.01, max_value=0.999))
    @settings(max_examples=100, deadline=None)
    def test_monotone(self, p):
        assert symmetric_coverage_quantile(p + 0.0009) > symmetric_coverage_quantile(p)


class TestDesignDegreesOfFreedom:
    def test_values(self):
        assert design_degrees_of_freedom(54, 2) == 54
        assert design_degrees_of_freedom(27, 3) == 54
        assert design_degrees_of_freedom(1, 5) == 4

    @pytest.mark.parametrize("n,m", [(0, 2), (5, 1), (-3, 2), (5, 0)])
    def test_rejects_degenerate(self, n, m):
        with pytest.raises(DomainError):
            design_degrees_of_freedom(n, m)

    @pytest.mark.parametrize("n,m", [(2.0, 2), (5, 2.5), (True, 2), (5, True)])
    def test_rejects_non_integer(self, n, m):
        with pytest.raises(DomainError):
            design_degrees_of_freedom(n, m)


class TestTestRetestData:
    def test_duplicate_subject_ids(self):
        with pytest.raises(DataValidationError):
            RetestData((("a", (1.0, 2.0)), ("a", (3.0, 4.0))))

    def test_single_replicate_names_subject(self):
        with pytest.raises(DataValidationError, match="lonely"):
            RetestData((("ok", (1.0, 2.0)), ("lonely", (5.0,))))

    def test_non_finite_rejected(self):
        with pytest.raises(DataValidationError):
            make_data((1.0, math.nan))
        with pytest.raises(DataValidationError):
            make_data((1.0, math.inf))

    def test_empty_rejected(self):
        with pytest.raises(DataValidationError):
            RetestData(())


class TestEstimateWsd:
    def test_three_subject_fixture(self):
        # pairs (0,2), (5,5), (10,14): pooled SS/2 = (2 + 0 + 8), nu = 3
        data = make_data((0.0, 2.0), (5.0, 5.0), (10.0, 14.0))
        with pytest.warns(UserWarning):
            est = estimate_wsd(data)
        assert est.nu == 3
        assert est.wsd_hat == pytest.approx(math.sqrt(10.0 / 3.0), rel=1e-15)

    def test_unequal_replicate_counts_pool(self):
        # subject A: 3 reps (0, 3, 6), centered SS = 18, 2 dof
        # subject B: 2 reps (1, 3), centered SS = 2, 1 dof
        data = make_data((0.0, 3.0, 6.0), (1.0, 3.0))
        with pytest.warns(UserWarning):
            est = estimate_wsd(data)
        assert est.nu == 3
        assert est.wsd_hat == pytest.approx(math.sqrt(20.0 / 3.0), rel=1e-14)

    def test_fixed_bias_per_subject_cancels(self):
        base = make_data((0.0, 2.0), (5.0, 5.0), (10.0, 14.0))
        shifted = make_data((100.0, 102.0), (5.0, 5.0), (-90.0, -86.0))
        with pytest.warns(UserWarning):
            a = estimate_wsd(base)
        with pytest.warns(UserWarning):
            b = estimate_wsd(shifted)
        assert b.wsd_hat == pytest.approx(a.wsd_hat, rel=1e-14)

    def test_zero_spread_warns(self):
        import warnings
        data = make_data((5.0, 5.0), (7.0, 7.0))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = estimate_wsd(data)
        messages = [str(w.message) for w in caught]
        assert any("zero" in msg for msg in messages)
        assert any("degrees of freedom" in msg for msg in messages)
        assert est.wsd_hat == 0.0

    def test_large_nu_no_warning(self):
        import warnings
        data = make_data(*[(float(i), float(i) + 1.0) for i in range(12)])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            est = estimate_wsd(data)
        assert est.nu == 12

    @given(st.floats(min_value=0.01, max_value=100.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_equivariance(self, c):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = estimate_wsd(make_data((0.0, 2.0), (5.0, 8.0), (1.0, 1.5)))
            b = estimate_wsd(make_data((0.0, 2.0 * c), (5.0 * c, 8.0 * c),
                                       (1.0 * c, 1.5 * c)))
        assert b.wsd_hat == pytest.approx(c * a.wsd_hat, rel=1e-12)


class TestRepeatabilityCoefficient:
    def test_unit_wsd_reference(self):
        rc = repeatability_coefficient(1.0, 0.95)
        assert rc.value == pytest.approx(2.771807648699355, abs=1e-14)
        assert rc.target_specificity == 0.95
        assert not rc.estimated

    def test_scales_linearly_in_wsd(self):
        assert repeatability_coefficient(3.0, 0.95).value == pytest.approx(
            3.0 * repeatability_coefficient(1.0, 0.95).value, rel=1e-15)

    def test_estimate_method_matches_function(self):
        est = WsdEstimate(wsd_hat=2.0, nu=10)
        rc = est.repeatability_coefficient(0.95)
        assert rc.value == pytest.approx(2.0 * 2.771807648699355, rel=1e-14)
        assert rc.estimated

    def test_rejects_negative_wsd(self):
        with pytest.raises(DomainError):
            repeatability_coefficient(-1.0, 0.95)

    def test_zero_wsd_gives_zero(self):
        assert repeatability_coefficient(0.0, 0.95).value == 0.0


class TestDecideChange:
    def test_strictly_outside_flags_change(self):
        rc = RepeatabilityCoefficient(value=2.0, target_specificity=0.95)
        assert decide_change(LongitudinalPair(0.0, 2.5), rc)
        assert decide_change(LongitudinalPair(2.5, 0.0), rc)

    def test_boundary_is_no_change(self):
        # the no-change region is closed: |difference| == RC stays negative
        rc = RepeatabilityCoefficient(value=2.0, target_specificity=0.95)
        assert not decide_change(LongitudinalPair(0.0, 2.0), rc)
        assert not decide_change(LongitudinalPair(0.0, -2.0), rc)
        assert not decide_change(LongitudinalPair(1.0, 1.0), rc)

    def test_rejects_non_finite(self):
        rc = RepeatabilityCoefficient(value=2.0, target_specificity=0.95)
        with pytest.raises(DataValidationError):
            decide_change(LongitudinalPair(0.0, math.nan), rc)


class TestRatioDensities:
    @pytest.mark.parametrize("nu", [1, 2, 5, 35, 139])
    def test_exact_density_normalizes(self, nu):
        lo, hi = ratio_support_exact(nu)
        mass = integrate(lambda w: ratio_density_exact(w, nu), lo, hi)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_exact_density_mean_near_one(self):
        nu = 139
        lo, hi = ratio_support_exact(nu)
        mean = integrate(lambda w: w * ratio_density_exact(w, nu), lo, hi)
        # E[W] = sqrt(2/nu) Gamma((nu+1)/2) / Gamma(nu/2), slightly below 1
        assert 0.99 < mean < 1.0

    @pytest.mark.parametrize("nu", [30, 139, 1000])
    def test_normal_density_normalizes(self, nu):
        lo, hi = ratio_support_normal(nu)
        mass = integrate(lambda w: ratio_density_normal(w, nu), lo, hi)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_normal_matches_exact_for_large_nu(self):
        nu = 5000
        for w in (0.97, 1.0, 1.02):
            assert ratio_density_normal(w, nu) == pytest.approx(
                ratio_density_exact(w, nu), rel=2e-2)

    def test_exact_density_rejects_nonpositive_w(self):
        with pytest.raises(DomainError):
            ratio_density_exact(0.0, 10)
        with pytest.raises(DomainError):
            ratio_density_exact(-0.5, 10)

    def test_support_orders(self):
        lo, hi = ratio_support_exact(10)
        assert 0.0 < lo < 1.0 < hi
