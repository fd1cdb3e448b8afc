import numpy as np
import pytest
from scipy import integrate, stats

from msalab.disorder import (
    Configuration,
    DisorderModel,
    ModelParseError,
    SingleSiteMeasure,
    UndefinedTailError,
    holder_mass_check,
    measure_tail_exponent,
    model_from_text,
    model_to_text,
    potential,
    sample_configuration,
    site_uniform,
)


class TestMeasures:
    def test_uniform_support(self):
        m = SingleSiteMeasure.uniform(0, 4)
        values = [m.sample(u) for u in np.linspace(0, 0.999, 100)]
        assert all(0 <= v <= 4 for v in values)

    def test_bernoulli_atoms(self):
        m = SingleSiteMeasure.bernoulli(0.5)
        model = DisorderModel.anderson(1, m)
        cfg = sample_configuration(model, 9)
        assert {cfg.coupling(k) for k in range(-30, 30)} <= {0.0, 1.0}

    def test_pointlist_single_atom_constant(self):
        model = DisorderModel.anderson(1, SingleSiteMeasure.pointlist([(0.7, 1.0)]))
        cfg = sample_configuration(model, 5)
        assert all(cfg.coupling(k) == 0.7 for k in range(-10, 10))

    def test_pointlist_weights_must_sum(self):
        with pytest.raises(ValueError):
            SingleSiteMeasure.pointlist([(0.0, 0.4), (1.0, 0.4)])

    def test_hoelder_cdf_matches_quadrature(self):
        # density ~ x on [0, 1]: mass of [0, h] is exactly h^2
        m = SingleSiteMeasure.hoelder(2.0, 0.0, 1.0)
        for h in (0.05, 0.2, 0.7):
            quad, _ = integrate.quad(m.density, 0.0, h)
            assert m.left_mass(h) == pytest.approx(h ** 2, rel=1e-12)
            assert quad == pytest.approx(m.left_mass(h), rel=1e-9)

    def test_hoelder_small_interval_bound(self):
        m = SingleSiteMeasure.hoelder(0.5, 0.0, 2.0)
        assert holder_mass_check(m, 0.5, max_len=0.05) <= 0.0

    def test_sampling_marginal_ks(self):
        # per-site values must be distributed like the measure itself
        for m in (SingleSiteMeasure.uniform(0, 4), SingleSiteMeasure.hoelder(2.0)):
            model = DisorderModel.anderson(1, m)
            cfg = sample_configuration(model, 31415)
            draws = [cfg.coupling(k) for k in range(2000)]
            stat = stats.kstest(draws, m.cdf)
            assert stat.pvalue > 0.01


class TestTailExponent:
    def test_uniform_tail_is_one(self):
        fit = measure_tail_exponent(SingleSiteMeasure.uniform(0, 1))
        assert fit.exponent == pytest.approx(1.0, abs=1e-9)
        assert not fit.violated

    def test_linear_density_tail_is_two(self):
        fit = measure_tail_exponent(SingleSiteMeasure.hoelder(2.0, 0.0, 1.0))
        assert fit.exponent == pytest.approx(2.0, abs=1e-9)

    def test_bernoulli_undefined(self):
        with pytest.raises(UndefinedTailError):
            measure_tail_exponent(SingleSiteMeasure.bernoulli(0.5))

    def test_single_atom_undefined(self):
        with pytest.raises(UndefinedTailError):
            measure_tail_exponent(SingleSiteMeasure.pointlist([(1.0, 1.0)]))

    def test_violation_flagged(self):
        # uniform on a narrow support has mass h/width > h near the edge
        fit = measure_tail_exponent(SingleSiteMeasure.uniform(0, 0.5))
        assert fit.violated


class TestConfiguration:
    def test_determinism_across_instances(self, anderson_w4):
        a = sample_configuration(anderson_w4, 123)
        b = sample_configuration(anderson_w4, 123)
        sites = [0, -7, 52, 1000, -999]
        assert [a.coupling(s) for s in sites] == [b.coupling(s) for s in sites]

    def test_order_independence(self, anderson_w4):
        a = sample_configuration(anderson_w4, 5)
        b = sample_configuration(anderson_w4, 5)
        forward = [a.coupling(s) for s in range(-20, 20)]
        backward = [b.coupling(s) for s in reversed(range(-20, 20))]
        assert forward == backward[::-1]

    def test_different_seeds_differ(self, anderson_w4):
        a = sample_configuration(anderson_w4, 1)
        b = sample_configuration(anderson_w4, 2)
        assert any(a.coupling(k) != b.coupling(k) for k in range(10))

    def test_stationarity_of_moments(self, anderson_w4):
        # translated windows must carry the same marginal statistics
        cfg = sample_configuration(anderson_w4, 2718)
        windows = [range(a, a + 400) for a in (-600, -200, 200)]
        means = [np.mean([cfg.coupling(k) for k in w]) for w in windows]
        for m in means:
            assert abs(m - 2.0) < 3 * (4 / np.sqrt(12)) / np.sqrt(400)

    def test_pair_correlation_small(self, anderson_w4):
        n = 400
        seeds = range(1000, 1000 + n)
        qa = np.array([sample_configuration(anderson_w4, s).coupling(3) for s in seeds])
        qb = np.array([sample_configuration(anderson_w4, s).coupling(40) for s in seeds])
        corr = np.corrcoef(qa, qb)[0, 1]
        assert abs(corr) <= 3 / np.sqrt(n)

    def test_wrong_dimension_rejected(self, anderson_w4):
        cfg = sample_configuration(anderson_w4, 3)
        with pytest.raises(ValueError):
            cfg.coupling((1, 2))

    def test_site_uniform_in_unit_interval(self):
        values = [site_uniform(9, (k,)) for k in range(100)]
        assert all(0.0 <= v < 1.0 for v in values)


class TestPotential:
    def test_on_site_weight(self):
        model = DisorderModel.anderson(1, SingleSiteMeasure.pointlist([(0.3, 1.0)]))
        cfg = sample_configuration(model, 0)
        assert potential(model, cfg, 4) == pytest.approx(0.3)

    def test_periodic_background(self):
        model = DisorderModel(
            dim=1, measure=SingleSiteMeasure.pointlist([(0.0, 1.0)]),
            background=(0.0, 1.0), background_shape=(2,))
        cfg = sample_configuration(model, 0)
        assert potential(model, cfg, 0) == 0.0
        assert potential(model, cfg, -2) == 0.0
        assert potential(model, cfg, 3) == 1.0

    def test_atom_times_weight(self):
        model = DisorderModel(dim=1, measure=SingleSiteMeasure.pointlist([(0.5, 1.0)]),
                              site_weight=2.0, background=(1.0,), background_shape=(1,))
        cfg = sample_configuration(model, 0)
        assert potential(model, cfg, 11) == pytest.approx(1.0 + 0.5 * 2.0)

    def test_weight_must_be_positive(self):
        with pytest.raises(ValueError):
            DisorderModel(dim=1, measure=SingleSiteMeasure.uniform(0, 1), site_weight=0.0)


class TestModelText:
    def test_round_trip(self, anderson_w4):
        text = model_to_text(anderson_w4)
        back = model_from_text(text)
        assert back == anderson_w4

    def test_round_trip_pointlist_background(self):
        model = DisorderModel(
            dim=2, measure=SingleSiteMeasure.pointlist([(0.0, 0.25), (1.5, 0.75)]),
            site_weight=0.5, background=(0.0, 1.0, 2.0, 3.0), background_shape=(2, 2))
        assert model_from_text(model_to_text(model)) == model

    def test_unknown_key_rejected(self):
        with pytest.raises(ModelParseError):
            model_from_text("dim = 1\nmeasure = uniform\nsupport = 0, 1\nwat = 3\n")

    def test_missing_key_rejected(self):
        with pytest.raises(ModelParseError):
            model_from_text("dim = 1\n")
