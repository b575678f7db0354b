import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lexphylo.errors import DomainError
from lexphylo.phylo.model import BinaryCTMC, GammaRates, discretize_gamma, transition_matrix

from oracles import expm_transition, gamma_rates_by_quadrature, rate_matrix

# category means from adaptive quadrature (oracles.gamma_rates_by_quadrature), frozen
QUADRATURE_RATES = {
    0.5: (0.0333877534, 0.2519159176, 0.820268482, 2.894427847),
    1.0: (0.1369537826, 0.4767518562, 1.0, 2.3862943611),
    5.0: (0.5020776092, 0.8039602644, 1.0833017373, 1.6106603891),
    50.0: (0.8264000435, 0.9485506418, 1.0400328577, 1.185016457),
    100.0: (0.875905739, 0.9647389207, 1.0295491138, 1.1298062264),
}


class TestCTMC:
    def test_mu(self):
        assert BinaryCTMC().mu == 2.0
        assert BinaryCTMC.from_pi1(0.2).mu == pytest.approx(1 / 0.32)

    def test_invalid(self):
        for pi in ((0.0, 1.0), (0.6, 0.6), (-0.1, 1.1)):
            with pytest.raises(DomainError):
                BinaryCTMC(*pi)

    def test_rate_matrix_normalized(self):
        m = BinaryCTMC.from_pi1(0.3)
        q = m.rate_matrix()
        assert np.allclose(q, rate_matrix(0.3))
        assert -float(m.pi @ np.diag(q)) == pytest.approx(1.0)

    def test_identity_at_zero(self):
        assert np.array_equal(transition_matrix(BinaryCTMC.from_pi1(0.3), 0.0), np.eye(2))

    def test_stationary_limit(self):
        m = BinaryCTMC.from_pi1(0.3)
        p = transition_matrix(m, 1e9)
        assert np.allclose(p, [[0.7, 0.3], [0.7, 0.3]], atol=1e-12, rtol=0)

    def test_p01_value(self):
        p = transition_matrix(BinaryCTMC(), 0.5)
        assert p[0, 1] == pytest.approx(0.3160602794142788, abs=1e-12)
        assert p[0, 1] == pytest.approx(0.5 * (1 - math.exp(-1)), abs=1e-15)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            transition_matrix(BinaryCTMC(), -1.0)


class TestGamma:
    @pytest.mark.parametrize("alpha", sorted(QUADRATURE_RATES))
    def test_frozen_quadrature(self, alpha):
        assert discretize_gamma(alpha).rates == pytest.approx(QUADRATURE_RATES[alpha], abs=1e-8)

    def test_alpha_one(self):
        assert discretize_gamma(1.0).rates == pytest.approx((0.1369, 0.4768, 1.0, 2.3863), abs=1e-4)

    def test_alpha_hundred_near_one(self):
        assert all(abs(r - 1) < 0.2 for r in discretize_gamma(100.0).rates)

    @pytest.mark.parametrize("alpha", [0.0201, 0.05, 0.3, 2.0, 20.0])
    def test_against_live_quadrature(self, alpha):
        assert np.allclose(discretize_gamma(alpha).rates, gamma_rates_by_quadrature(alpha), atol=1e-6)

    def test_errors(self):
        with pytest.raises(DomainError):
            discretize_gamma(0.0)
        with pytest.raises(DomainError):
            discretize_gamma(1.0, 0)

    def test_single_category_and_uniform(self):
        assert discretize_gamma(0.5, 1).rates == (1.0,)
        g = GammaRates.uniform()
        assert (g.k, g.weights) == (1, (1.0,))

    def test_weights(self):
        assert discretize_gamma(1.0, 8).weights == (0.125,) * 8


class TestProperties:
    @given(st.floats(0.01, 0.99), st.floats(0.0, 20.0), st.floats(0.0, 5.0))
    @settings(max_examples=150, deadline=None)
    def test_matches_expm_and_detailed_balance(self, pi1, t, r):
        m = BinaryCTMC.from_pi1(pi1)
        p = transition_matrix(m, t, r)
        assert np.allclose(p, expm_transition(pi1, t, r), rtol=1e-10, atol=1e-12)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-14)
        assert abs(m.pi0 * p[0, 1] - m.pi1 * p[1, 0]) < 1e-12

    @given(st.floats(0.0201, 100.0), st.integers(2, 8))
    @settings(max_examples=100, deadline=None)
    def test_mean_one_and_increasing(self, alpha, k):
        rates = np.array(discretize_gamma(alpha, k).rates)
        assert abs(rates.mean() - 1.0) < 1e-8
        assert np.all(np.diff(rates) > 0)
