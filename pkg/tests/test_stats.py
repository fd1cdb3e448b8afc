import numpy as np
import pytest
from scipy import stats as sps

from msalab.stats import (
    clopper_pearson,
    clopper_pearson_lower,
    fit_exponential,
    fit_power_law,
    mean_interval,
)


class TestClopperPearson:
    def test_all_successes_one_sided(self):
        assert clopper_pearson_lower(10, 10, 0.95) == pytest.approx(0.05 ** 0.1, rel=1e-12)

    def test_endpoints(self):
        lo, hi = clopper_pearson(0, 20)
        assert lo == 0.0 and hi < 1.0
        lo, hi = clopper_pearson(20, 20)
        assert lo > 0.0 and hi == 1.0

    def test_contains_point_estimate(self):
        for k, n in [(3, 10), (47, 100), (1, 1000)]:
            lo, hi = clopper_pearson(k, n)
            assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_exactness_against_binomial_tail(self):
        # lower endpoint p solves P(Bin(n, p) >= k) = alpha/2
        k, n = 7, 25
        lo, hi = clopper_pearson(k, n)
        assert 1 - sps.binom.cdf(k - 1, n, lo) == pytest.approx(0.025, abs=1e-10)
        assert sps.binom.cdf(k, n, hi) == pytest.approx(0.025, abs=1e-10)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            clopper_pearson(5, 4)
        with pytest.raises(ValueError):
            clopper_pearson(1, 10, confidence=1.5)


class TestFits:
    def test_power_law_exact(self):
        x = np.array([2.0, 4.0, 8.0, 16.0])
        slope, intercept = fit_power_law(x, 3.0 * x ** -2.5)
        assert slope == pytest.approx(-2.5, abs=1e-12)
        assert np.exp(intercept) == pytest.approx(3.0, rel=1e-10)

    def test_exponential_exact(self):
        x = np.arange(1, 9, dtype=float)
        slope, _ = fit_exponential(x, np.exp(-0.7 * x))
        assert slope == pytest.approx(-0.7, abs=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            fit_power_law([1.0], [1.0])


class TestMeanInterval:
    def test_degenerate_single_sample(self):
        assert mean_interval([2.0]) == (2.0, 2.0, 2.0)

    def test_contains_truth_mostly(self, rng):
        hits = 0
        for _ in range(200):
            draw = rng.normal(1.0, 2.0, size=30)
            m, lo, hi = mean_interval(draw)
            assert lo <= m <= hi
            hits += lo <= 1.0 <= hi
        assert hits >= 180
