import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import harvestmc as hm


class TestStationaryDistribution:
    def test_symmetric_two_state(self, gen_sym):
        nu = hm.stationary_distribution(gen_sym)
        assert nu == pytest.approx((0.5, 0.5), abs=1e-14)

    def test_single_state(self):
        nu = hm.stationary_distribution(hm.SwitchingGenerator([[0.0]]))
        assert nu == pytest.approx((1.0,))

    def test_asymmetric(self):
        # solve nu Q = 0 by hand: -0.2 nu1 + 0.1 nu2 = 0, nu1 + nu2 = 1
        gen = hm.SwitchingGenerator([[-0.2, 0.2], [0.1, -0.1]])
        nu = hm.stationary_distribution(gen)
        assert nu == pytest.approx((1 / 3, 2 / 3), abs=1e-14)

    def test_reducible_raises(self):
        gen = hm.SwitchingGenerator([[0.0, 0.0], [0.1, -0.1]])
        with pytest.raises(hm.ReducibleGenerator):
            hm.stationary_distribution(gen)

    @given(rate=st.floats(min_value=1e-6, max_value=1e3))
    @settings(max_examples=30, deadline=None)
    def test_symmetric_rates_are_uniform(self, rate):
        nu = hm.stationary_distribution(hm.symmetric_two_state(rate))
        assert nu == pytest.approx((0.5, 0.5), abs=1e-12)

    @given(st.lists(st.floats(min_value=0.01, max_value=10), min_size=6,
                    max_size=6))
    @settings(max_examples=30, deadline=None)
    def test_residual_and_normalization(self, offdiag):
        q = np.zeros((3, 3))
        q[np.where(~np.eye(3, dtype=bool))] = offdiag
        q -= np.diag(q.sum(axis=1))
        nu = hm.stationary_distribution(hm.SwitchingGenerator(q))
        assert np.max(np.abs(nu @ q)) <= 1e-12
        assert nu.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(nu > 0)


class TestGrowthRates:
    def test_regime_rates(self, verhulst2):
        # r(alpha) = mu(alpha) - sigma^2(alpha)/2 with mu = (3, 2), sigma = 1
        assert hm.stochastic_growth_rate(verhulst2, 1) == pytest.approx(2.5)
        assert hm.stochastic_growth_rate(verhulst2, 2) == pytest.approx(1.5)

    def test_null_recurrent_boundary(self):
        m = hm.catalog("verhulst", mu=0.5, kappa=1, sigma=1, regimes=1)
        assert hm.stochastic_growth_rate(m, 1) == pytest.approx(0.0)

    def test_not_per_capita(self):
        m = hm.catalog("gompertz", mu=(3, 2), sigma=1)
        with pytest.raises(hm.NotPerCapitaModel):
            hm.stochastic_growth_rate(m, 1)

    def test_persistence_criterion(self, verhulst2, gen_sym):
        assert hm.persistence_criterion(verhulst2, gen_sym) == pytest.approx(2.0)

    def test_persistence_single_regime(self):
        m = hm.catalog("verhulst", mu=2.5, kappa=2, sigma=1, regimes=1)
        g = hm.SwitchingGenerator([[0.0]])
        assert hm.persistence_criterion(m, g) == pytest.approx(2.0)

    def test_persistence_negative(self, gen_sym):
        m = hm.catalog("verhulst", mu=(1.0, 0.0), kappa=1,
                       sigma=np.sqrt(2.0))
        assert hm.persistence_criterion(m, gen_sym) == pytest.approx(-0.5)


class TestAveragedModel:
    def test_verhulst_average(self, verhulst2, gen_sym):
        avg = hm.averaged_model(verhulst2, gen_sym)
        assert avg.regimes == 1
        xs = np.linspace(0, 4, 9)
        ref = hm.catalog("verhulst", mu=2.5, kappa=2, sigma=1, regimes=1)
        np.testing.assert_allclose(avg.drift(0.0, xs, 1), ref.drift(0.0, xs, 1))
        np.testing.assert_allclose(avg.diffusion(0.0, xs, 1),
                                   ref.diffusion(0.0, xs, 1))

    def test_identical_regimes_idempotent(self, gen_sym):
        m = hm.catalog("verhulst", mu=(2.5, 2.5), kappa=2, sigma=1)
        avg = hm.averaged_model(m, gen_sym)
        xs = np.linspace(0, 4, 9)
        np.testing.assert_allclose(avg.drift(0.0, xs, 1), m.drift(0.0, xs, 1))
        # averaging an already averaged (single-regime) model changes nothing
        again = hm.averaged_model(avg, hm.SwitchingGenerator([[0.0]]))
        np.testing.assert_allclose(again.drift(0.0, xs, 1),
                                   avg.drift(0.0, xs, 1))
        np.testing.assert_allclose(again.diffusion(0.0, xs, 1),
                                   avg.diffusion(0.0, xs, 1))

    def test_quadrature_diffusion(self, gen_sym):
        m = hm.catalog("custom",
                       drift=lambda t, x, a: 0.0 * np.asarray(x),
                       diffusion=lambda t, x, a: float(a) * np.asarray(x),
                       regimes=2)
        avg = hm.averaged_model(m, gen_sym)
        xs = np.linspace(0, 4, 5)
        np.testing.assert_allclose(avg.diffusion(0.0, xs, 1),
                                   np.sqrt(2.5) * xs)

    def test_growth_rate_survives_averaging(self, verhulst2, gen_sym):
        avg = hm.averaged_model(verhulst2, gen_sym)
        assert hm.stochastic_growth_rate(avg, 1) == pytest.approx(2.0)


class TestCatalog:
    def test_verhulst_example(self):
        m = hm.catalog("verhulst", mu=(3, 2), kappa=2, sigma=1)
        assert m.drift(0.0, 1.0, 1) == pytest.approx(1.0)

    def test_gompertz_origin_and_value(self):
        m = hm.catalog("gompertz", mu=(3, 2), sigma=1)
        assert m.drift(0.0, 0.0, 1) == 0.0
        assert m.drift(0.0, 1.0, 1) == pytest.approx(3 * np.log(2.0))

    def test_nisbet_gurney_value(self):
        m = hm.catalog("nisbet_gurney", mu=(3, 2), sigma=1)
        assert m.drift(0.0, 1.0, 1) == pytest.approx(3 * np.exp(-1) - 1)

    @pytest.mark.parametrize("kind,params", [
        ("verhulst", dict(mu=(3, 2), kappa=2, sigma=1)),
        ("gompertz", dict(mu=(3, 2), sigma=1)),
        ("nisbet_gurney", dict(mu=(3, 2), sigma=1)),
        ("seasonal_verhulst", dict(mu=(3, 2), kappa=2, sigma=1, period=1.0)),
    ])
    def test_absorbing_origin(self, kind, params):
        m = hm.catalog(kind, **params)
        for t in (0.0, 0.3, 0.75):
            for a in (1, 2):
                assert m.drift(t, 0.0, a) == 0.0
                assert m.diffusion(t, 0.0, a) == 0.0

    def test_seasonal_periodicity_and_sign(self):
        m = hm.catalog("seasonal_verhulst", mu=(3, 2), kappa=2, sigma=1,
                       period=1.0)
        xs = np.linspace(0, 2, 7)
        for t in np.linspace(0, 1, 11):
            np.testing.assert_allclose(m.drift(t, xs, 1),
                                       m.drift(t + 1.0, xs, 1), atol=1e-12)
        # default forcing sign is +sin
        assert m.drift(0.25, 1.0, 1) == pytest.approx(1.0 * (3 + 1 - 2))
        flipped = hm.catalog("seasonal_verhulst", mu=(3, 2), kappa=2, sigma=1,
                             period=1.0, sine_sign=-1.0)
        assert flipped.drift(0.25, 1.0, 1) == pytest.approx(1.0 * (3 - 1 - 2))

    def test_unknown_model(self):
        with pytest.raises(hm.UnknownModel):
            hm.catalog("lotka_volterra", mu=1)

    def test_negative_sigma_rejected(self):
        with pytest.raises(hm.InvalidParams):
            hm.catalog("verhulst", mu=(3, 2), kappa=2, sigma=-1)

    def test_generator_validation(self):
        with pytest.raises(hm.InvalidParams):
            hm.SwitchingGenerator([[-0.1, 0.2], [0.1, -0.1]])
        with pytest.raises(hm.InvalidParams):
            hm.SwitchingGenerator([[0.1, -0.1], [0.1, -0.1]])

    def test_price_dynamics_catalog(self):
        pd = hm.catalog_price_dynamics("logistic", cap=0.4, noise=0.5)
        assert pd.phi_max == 0.4
        assert pd.drift0(0.2, 1) == pytest.approx(0.04)
        assert pd.diffusion0(0.2, 1) == pytest.approx(0.02)
        for phi in (0.0, 0.4):
            assert pd.drift0(phi, 1) == 0.0
            assert pd.diffusion0(phi, 1) == 0.0
