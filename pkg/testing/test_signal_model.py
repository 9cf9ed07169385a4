"""Host generation, variance estimation, perceptual weights and spreading codes."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hiding.errors import InvalidParameterError
from hiding.signal_model import (
    Message,
    ProfileKind,
    SiteModel,
    SpreadingCode,
    VarianceProfile,
    WeightRule,
    estimate_site_variances,
    gen_host,
    message_bits,
    perceptual_weights,
    spreading_code,
)


class TestGenHost:
    def test_zero_variance_host_is_zero(self):
        x, model = gen_host(4, VarianceProfile.constant(0.0), seed=1)
        assert np.array_equal(x, np.zeros(4))
        assert np.array_equal(model.sigma_x, np.zeros(4))

    def test_sample_variance_of_constant_profile(self):
        x, _ = gen_host(100000, VarianceProfile.constant(2.0), seed=7)
        assert 3.9 <= x.var() <= 4.1

    def test_ramp_endpoints(self):
        _, model = gen_host(2, VarianceProfile.ramp(1.0, 3.0), seed=5)
        assert np.array_equal(model.sigma_x, [1.0, 3.0])

    def test_reproducible(self):
        profile = VarianceProfile.parse('piecewise:1,2,4')
        a, model_a = gen_host(999, profile, seed=3)
        b, model_b = gen_host(999, profile, seed=3)
        assert np.array_equal(a, b)
        assert np.array_equal(model_a.phi, model_b.phi)

    def test_normality(self):
        x, _ = gen_host(10000, VarianceProfile.constant(3.0), seed=21)
        assert stats.kstest(x / 3.0, 'norm').pvalue > 0.01

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidParameterError):
            gen_host(0, VarianceProfile.constant(1.0), seed=1)
        with pytest.raises(InvalidParameterError):
            gen_host(10, VarianceProfile.ramp(-1.0, 1.0), seed=1)

    def test_unit_weight_rule(self):
        _, model = gen_host(10, VarianceProfile.constant(5.0), seed=1, rule=WeightRule.UNIT)
        assert np.array_equal(model.phi, np.ones(10))


class TestVarianceProfile:
    def test_parse_forms(self):
        assert VarianceProfile.parse('constant:2') == VarianceProfile.constant(2.0)
        assert VarianceProfile.parse('ramp:1:3') == VarianceProfile.ramp(1.0, 3.0)
        assert VarianceProfile.parse('piecewise:1,2,3').params == (1.0, 2.0, 3.0)
        assert VarianceProfile.parse('powerlaw:0.5').kind is ProfileKind.POWERLAW
        assert VarianceProfile.parse('powerlaw:0.5:4').params == (0.5, 4.0)

    @pytest.mark.parametrize('text', ['gauss:1', 'ramp:1', 'constant:a', 'constant:-1', 'piecewise:'])
    def test_parse_rejects(self, text):
        with pytest.raises(InvalidParameterError):
            VarianceProfile.parse(text)

    def test_piecewise_blocks(self):
        sigma = VarianceProfile.piecewise([1.0, 5.0]).sigmas(5)
        assert np.array_equal(sigma, [1.0, 1.0, 1.0, 5.0, 5.0])

    def test_power_law(self):
        sigma = VarianceProfile.power_law(1.0, 6.0).sigmas(3)
        assert np.allclose(sigma, [6.0, 3.0, 2.0])

    def test_describe_round_trips(self):
        for text in ('ramp:1.0:3.0', 'piecewise:1.0,2.0'):
            profile = VarianceProfile.parse(text)
            assert VarianceProfile.parse(profile.describe()) == profile


class TestEstimateSiteVariances:
    def test_floor_on_zeros(self):
        assert np.array_equal(estimate_site_variances(np.zeros(7), 3, 1e-6), np.full(7, 1e-6))

    def test_floor_on_constant(self):
        assert np.array_equal(estimate_site_variances(np.full(11, 4.2), 5, 1e-3), np.full(11, 1e-3))

    def test_hand_value(self):
        sigma = estimate_site_variances(np.array([0.0, 0.0, 3.0, 0.0, 0.0]), 3, 1e-6)
        assert sigma[2] == pytest.approx(np.sqrt(2.0))
        assert sigma[1] == pytest.approx(np.sqrt(2.0))
        assert sigma[0] == pytest.approx(1e-6)

    def test_two_dimensional_window(self):
        band = np.zeros((5, 5))
        band[2, 2] = 9.0
        sigma = estimate_site_variances(band, 3)
        assert sigma[2, 2] == pytest.approx(np.std([9.0] + [0.0] * 8))
        assert sigma.shape == (5, 5)

    @pytest.mark.parametrize('window', [0, 2, -3])
    def test_rejects_bad_window(self, window):
        with pytest.raises(InvalidParameterError):
            estimate_site_variances(np.zeros(10), window)

    def test_rejects_window_longer_than_signal(self):
        with pytest.raises(InvalidParameterError):
            estimate_site_variances(np.zeros(4), 5)

    @given(shift=st.floats(min_value=-100.0, max_value=100.0))
    @settings(max_examples=25, deadline=None)
    def test_shift_invariant(self, shift):
        x, _ = gen_host(200, VarianceProfile.ramp(1.0, 4.0), seed=2)
        base = estimate_site_variances(x, 9)
        moved = estimate_site_variances(x + shift, 9)
        assert np.allclose(base, moved, rtol=0.0, atol=1e-9)


class TestPerceptualWeights:
    def test_values(self):
        phi = perceptual_weights(np.array([0.0, 3.0, 10.0]))
        assert phi[0] == 1.0
        assert phi[1] == 0.5
        assert phi[2] == pytest.approx(0.301511, abs=1e-6)

    def test_unit_rule(self):
        assert np.array_equal(perceptual_weights(np.array([0.0, 7.0]), WeightRule.UNIT), [1.0, 1.0])

    def test_rejects_negative(self):
        with pytest.raises(InvalidParameterError):
            perceptual_weights(np.array([-1.0]))


class TestSpreadingCode:
    def test_deterministic(self):
        assert np.array_equal(spreading_code(3, 4, 500).matrix(), spreading_code(3, 4, 500).matrix())

    def test_balanced_rows_and_uncorrelated_columns(self):
        g = spreading_code(3, 2, 100000).matrix().astype(np.float64)
        assert set(np.unique(g)) == {-1.0, 1.0}
        assert np.all(np.abs(g.mean(axis=0)) <= 0.02)
        assert abs(np.mean(g[:, 0] * g[:, 1])) <= 0.02

    def test_value_accessor_matches_matrix(self):
        code = spreading_code(17, 3, 20)
        g = code.matrix()
        assert all(code.value(i, j) == g[i, j] for i in range(20) for j in range(3))

    def test_chunked_products_match_dense(self):
        code = SpreadingCode(seed=5, n=6, m=101, chunk_sites=7)
        g = code.matrix().astype(np.float64)
        bits = message_bits(1, 6).bits
        v = np.linspace(-1.0, 1.0, 101)
        assert np.allclose(code.spread(bits), g @ bits)
        assert np.allclose(code.correlate(v), v @ g)

    def test_rejects_empty(self):
        with pytest.raises(InvalidParameterError):
            spreading_code(1, 0, 10)


class TestModelTypes:
    def test_site_model_invariants(self):
        with pytest.raises(InvalidParameterError):
            SiteModel(sigma_x=np.array([1.0, -1.0]), phi=np.ones(2))
        with pytest.raises(InvalidParameterError):
            SiteModel(sigma_x=np.ones(2), phi=np.array([1.0, 0.0]))
        with pytest.raises(InvalidParameterError):
            SiteModel(sigma_x=np.ones(3), phi=np.ones(2))

    def test_message(self):
        bits = message_bits(8, 32)
        assert bits.n == 32
        assert set(np.unique(bits.bits)) <= {-1, 1}
        assert np.array_equal(bits.bits, message_bits(8, 32).bits)
        with pytest.raises(InvalidParameterError):
            Message(np.array([1, 0, -1]))
