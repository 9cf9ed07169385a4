"""Hider strengths per regime, equilibrium assembly and multiplier calibration."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiding.attack_channel import (
    Regime,
    attack_objective,
    classify_domain,
    mu_threshold,
    site_attack_distortion,
)
from hiding.embedder import postfilter_gain
from hiding.errors import InfeasibleBudgetError, InvalidParameterError
from hiding.game_solver import (
    _calibrate_decreasing,
    alpha_erase,
    alpha_intermediate,
    alpha_postfilter,
    alpha_wiener,
    alpha_wiener_stationary,
    boundary_roots,
    calibrate_attack,
    calibrate_embedding,
    calibrate_multipliers,
    distortion_ceiling,
    optimal_alpha,
    quartic,
    site_payoff,
    solve_equilibrium,
)
from hiding.oracle import grid_alpha_search
from hiding.signal_model import SiteModel, VarianceProfile, gen_host, message_bits

FIG_LAM, FIG_CHI, FIG_N = 0.002, 0.0028, 100
PAYOFF_FLOOR = 1e-9


def _perceptual(sigma_x):
    return (1.0 + sigma_x) ** -0.5


class TestPerRegimeStrengths:
    def test_erase(self):
        assert alpha_erase(1.0, 1.0, 1.0) == 1.0
        assert alpha_erase(FIG_LAM, _perceptual(10.0), 10.0) == pytest.approx(1.34840, rel=1e-5)
        assert alpha_erase(1.0, 1.0, 0.0) == 0.0

    def test_intermediate_unit_site(self):
        root = alpha_intermediate(1.0, 0.1, 1.0, 1.0, 1)
        assert root == pytest.approx(0.9263, abs=1e-4)
        assert abs(quartic(root, 1.0, 0.1, 1.0, 1)) < 1e-10
        assert classify_domain(root, 1.0, 1.0, 1.0, 1) is Regime.INTERMEDIATE

    def test_intermediate_tends_to_mu_as_chi_vanishes(self):
        assert alpha_intermediate(0.3, 1e-14, 0.8, 2.0, 4) == pytest.approx(float(mu_threshold(0.3, 0.8, 2.0)),
                                                                           rel=1e-6)

    @given(sigma_x=st.floats(min_value=0.3, max_value=3.0),
           lam=st.floats(min_value=1e-3, max_value=1.0),
           chi=st.floats(min_value=1e-4, max_value=0.1),
           n=st.integers(min_value=1, max_value=200))
    @settings(max_examples=300, deadline=None)
    def test_intermediate_root_or_boundary(self, sigma_x, lam, chi, n):
        phi = _perceptual(sigma_x)
        s = sigma_x ** 2
        mu = float(mu_threshold(lam, phi, sigma_x))
        a = alpha_intermediate(lam, chi, phi, sigma_x, n)
        assert 0.0 < a <= mu
        p_scale = mu ** 2 + mu * a + chi * n * phi ** 2 * a ** 4
        b_scale = mu * (s + n * a * a) + a * (s + n * a * a) + mu * a * a
        on_root = abs(quartic(a, mu, chi, phi, n)) <= 1e-10 * p_scale
        on_boundary = abs((a - mu) * (s + n * a * a) + mu * a * a) <= 1e-10 * b_scale
        assert on_root or on_boundary

    def test_wiener_closed_form(self):
        alpha = alpha_wiener(FIG_LAM, FIG_CHI, _perceptual(10.0), 10.0, FIG_N)
        assert alpha == pytest.approx(0.22849, rel=1e-4)

    def test_wiener_clamps_textured_sites(self):
        assert alpha_wiener(FIG_LAM, FIG_CHI, _perceptual(40.0), 40.0, FIG_N) == 0.0

    def test_wiener_small_lambda_limit(self):
        sigma_x, phi, n = 2.0, 0.5, 10
        embeddable_chi = 0.5 / (n * (phi * sigma_x) ** 2)
        blocked_chi = 2.0 / (n * (phi * sigma_x) ** 2)
        assert alpha_wiener(1e-14, embeddable_chi, phi, sigma_x, n) > 0.0
        assert alpha_wiener(1e-14, blocked_chi, phi, sigma_x, n) == 0.0

    def test_postfilter(self):
        sigma = np.linspace(0.0, 40.0, 101)
        alpha = alpha_postfilter(FIG_LAM, _perceptual(sigma), sigma)
        assert np.array_equal(alpha, alpha_erase(FIG_LAM, _perceptual(sigma), sigma))
        assert alpha[0] == 0.0
        assert np.all(np.diff(alpha) > 0)

    def test_rejects_non_positive_multipliers(self):
        with pytest.raises(InvalidParameterError):
            alpha_erase(0.0, 1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            alpha_wiener(1.0, 0.0, 1.0, 1.0, 1)

    def test_wiener_stationary_is_a_local_maximum(self):
        phi = _perceptual(10.0)
        alpha = alpha_wiener_stationary(FIG_LAM, FIG_CHI, phi, 10.0, FIG_N)
        mu = float(mu_threshold(FIG_LAM, phi, 10.0))
        assert 0.0 < alpha < mu
        payoff = site_payoff(alpha, FIG_LAM, FIG_CHI, phi, 10.0, FIG_N)
        for nearby in (alpha * (1 - 1e-3), alpha * (1 + 1e-3)):
            assert site_payoff(nearby, FIG_LAM, FIG_CHI, phi, 10.0, FIG_N) < payoff

    def test_wiener_stationary_ends(self):
        assert alpha_wiener_stationary(1.0, 1e6, 0.5, 2.0, 10) == 0.0
        assert alpha_wiener_stationary(1.0, 1.0, 1.0, 0.0, 10) == 0.0
        # a vanishing penalty pushes the maximiser onto the erase threshold
        assert alpha_wiener_stationary(0.5, 1e-15, 0.7, 2.0, 8) == pytest.approx(
            float(mu_threshold(0.5, 0.7, 2.0)), rel=1e-9)

    @pytest.mark.parametrize('sigma_x, n', [(0.5, 100), (1.0, 1), (2.0, 16), (10.0, 200)])
    def test_single_boundary_root(self, sigma_x, n):
        lam, phi = 1.0, 1.0
        mu = np.array(float(mu_threshold(lam, phi, sigma_x)))
        roots = [float(r) for r in boundary_roots(mu, np.array(sigma_x ** 2), n)]
        finite = [r for r in roots if math.isfinite(r)]
        assert len(set(finite)) == 1
        root = finite[0]
        assert 0.0 < root < float(mu)
        assert classify_domain(root * (1 - 1e-6), sigma_x, phi, lam, n) is Regime.WIENER
        assert classify_domain(root * (1 + 1e-6), sigma_x, phi, lam, n) is Regime.INTERMEDIATE


class TestOptimalAlpha:
    def test_figure_point_wiener_regime(self):
        alpha, regime = optimal_alpha(FIG_LAM, FIG_CHI, _perceptual(10.0), 10.0, FIG_N, closed_form_only=True)
        assert alpha == pytest.approx(0.22849, rel=1e-4)
        assert regime is Regime.WIENER

    def test_exact_strength_beats_closed_form(self):
        phi = _perceptual(10.0)
        closed, _ = optimal_alpha(FIG_LAM, FIG_CHI, phi, 10.0, FIG_N, closed_form_only=True)
        exact, regime = optimal_alpha(FIG_LAM, FIG_CHI, phi, 10.0, FIG_N)
        assert regime is Regime.WIENER
        assert exact == pytest.approx(closed, rel=1e-2)
        assert site_payoff(exact, FIG_LAM, FIG_CHI, phi, 10.0, FIG_N) >= \
            site_payoff(closed, FIG_LAM, FIG_CHI, phi, 10.0, FIG_N)

    def test_figure_point_flat_site(self):
        alpha, _ = optimal_alpha(FIG_LAM, FIG_CHI, _perceptual(1.0), 1.0, FIG_N)
        assert alpha == pytest.approx(float(mu_threshold(FIG_LAM, _perceptual(1.0), 1.0)), rel=1e-3)

    def test_figure_point_too_textured(self):
        alpha, _ = optimal_alpha(FIG_LAM, FIG_CHI, _perceptual(40.0), 40.0, FIG_N)
        assert alpha == 0.0

    def test_figure_shape(self):
        sigma = np.linspace(0.1, 40.0, 400)
        alpha, _ = optimal_alpha(FIG_LAM, FIG_CHI, _perceptual(sigma), sigma, FIG_N)
        peak = int(np.argmax(alpha))
        assert 0 < peak < sigma.size - 1
        assert alpha[0] > 0.0
        assert alpha[-1] == 0.0

    def test_prohibitive_chi(self):
        sigma = np.linspace(0.1, 10.0, 50)
        alpha, regime = optimal_alpha(1.0, 1e6, _perceptual(sigma), sigma, 16)
        assert np.all(alpha == 0.0)
        assert np.all(regime == Regime.WIENER)

    def test_postfilter_closed_form_returns_mu(self):
        alpha, _ = optimal_alpha(0.5, 0.01, 0.7, 2.0, 8, postfilter=True, closed_form_only=True)
        assert alpha == pytest.approx(float(mu_threshold(0.5, 0.7, 2.0)))

    def test_postfilter_stops_short_of_mu(self):
        mu = float(mu_threshold(0.5, 0.7, 2.0))
        alpha, regime = optimal_alpha(0.5, 0.01, 0.7, 2.0, 8, postfilter=True)
        assert 0.0 < alpha < mu
        assert regime is not Regime.ERASE
        assert site_payoff(alpha, 0.5, 0.01, 0.7, 2.0, 8, postfilter=True) > \
            site_payoff(mu, 0.5, 0.01, 0.7, 2.0, 8, postfilter=True)

    @given(sigma_x=st.floats(min_value=0.3, max_value=10.0),
           lam=st.floats(min_value=3e-4, max_value=0.3),
           chi=st.floats(min_value=1e-4, max_value=0.1),
           n=st.integers(min_value=50, max_value=200))
    @settings(max_examples=40, deadline=None)
    def test_matches_alpha_grid(self, sigma_x, lam, chi, n):
        phi = _perceptual(sigma_x)
        alpha, _ = optimal_alpha(lam, chi, phi, sigma_x, n)
        payoff = site_payoff(alpha, lam, chi, phi, sigma_x, n)
        _, grid_payoff = grid_alpha_search(lam, chi, phi, sigma_x, n)
        assert grid_payoff - payoff <= 1e-4 * max(abs(grid_payoff), PAYOFF_FLOOR)

    @pytest.mark.parametrize('case', [(0.3, 0.02, 0.0005, 120), (8.0, 0.001, 0.01, 60), (2.5, 0.1, 0.0002, 200)])
    def test_payoff_relative_gap(self, case):
        sigma_x, lam, chi, n = case
        phi = _perceptual(sigma_x)
        alpha, _ = optimal_alpha(lam, chi, phi, sigma_x, n)
        payoff = site_payoff(alpha, lam, chi, phi, sigma_x, n)
        mu = float(mu_threshold(lam, phi, sigma_x))
        dense = site_payoff(np.linspace(0.0, 3.0 * mu, 20001), lam, chi, phi, sigma_x, n)
        assert dense.max() - payoff <= 1e-6 * max(abs(payoff), PAYOFF_FLOOR)


class TestEquilibrium:
    def test_report_is_sum_of_sites(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, FIG_LAM, FIG_CHI)
        alpha = report.alpha
        assert report.d_xy == pytest.approx(np.sum(model.phi ** 2 * 16 * alpha ** 2), rel=1e-12)
        assert report.eb_n0 == pytest.approx(np.sum(report.rho), rel=1e-12)
        assert sum(report.regime_counts().values()) == model.m

    def test_separable(self):
        left = SiteModel.from_sigmas(np.linspace(0.5, 3.0, 30))
        right = SiteModel.from_sigmas(np.linspace(3.0, 9.0, 20))
        both = SiteModel(sigma_x=np.concatenate([left.sigma_x, right.sigma_x]),
                         phi=np.concatenate([left.phi, right.phi]))
        parts = [solve_equilibrium(mdl, 12, 0.01, 0.005) for mdl in (left, right, both)]
        assert np.allclose(parts[2].alpha, np.concatenate([parts[0].alpha, parts[1].alpha]),
                           rtol=1e-10, atol=1e-13)
        assert parts[2].eb_n0 == pytest.approx(parts[0].eb_n0 + parts[1].eb_n0, rel=1e-12)
        assert parts[2].d_xy_prime == pytest.approx(parts[0].d_xy_prime + parts[1].d_xy_prime, rel=1e-12)

    def test_prohibitive_chi_embeds_nothing(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, 1.0, 1e6)
        assert report.d_xy == 0.0
        assert report.eb_n0 == 0.0

    def test_plans(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, FIG_LAM, FIG_CHI)
        plan = report.embedding_plan(message_bits(1, 16), code_seed=3)
        assert np.array_equal(plan.alpha, report.alpha)
        attack = report.attack_plan(noise_seed=9)
        assert np.array_equal(attack.gamma, report.gamma)
        with pytest.raises(InvalidParameterError):
            report.embedding_plan(message_bits(1, 8), code_seed=3)

    def test_saddle_consistency(self):
        model = SiteModel.from_sigmas(np.array([0.4, 1.0, 2.5, 6.0, 15.0]))
        lam, chi, n = 0.05, 0.004, 20
        report = solve_equilibrium(model, n, lam, chi)
        gammas, deltas = np.meshgrid(np.linspace(0.0, 1.5, 151), np.linspace(0.0, 4.0, 151), indexing='ij')
        for i in range(model.m):
            sigma_x, phi, alpha = model.sigma_x[i], model.phi[i], report.alpha[i]
            at_eq = float(attack_objective(report.gamma[i], report.sigma_delta_sq[i], alpha, sigma_x, phi, lam, n))
            other = attack_objective(gammas, deltas * sigma_x ** 2, alpha, sigma_x, phi, lam, n)
            assert other.min() >= at_eq - 1e-4 * max(abs(at_eq), 1e-12)

            payoff = site_payoff(alpha, lam, chi, phi, sigma_x, n)
            mu = float(mu_threshold(lam, phi, sigma_x))
            grid = site_payoff(np.linspace(0.0, 3.0 * mu, 1001), lam, chi, phi, sigma_x, n)
            assert grid.max() <= payoff + 1e-4 * max(abs(payoff), PAYOFF_FLOOR)


class TestPostfilterEquilibrium:
    @pytest.mark.parametrize('lam', [0.002, 0.01, 0.3])
    def test_mark_survives_the_attack(self, ramp_host, lam):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, lam, FIG_CHI, postfilter=True)
        assert report.postfilter
        assert np.all(report.alpha < mu_threshold(lam, model.phi, model.sigma_x))
        assert report.regime_counts()['erase'] == 0
        assert report.eb_n0 > 0.0
        assert report.eb_n0 == pytest.approx(math.fsum(report.rho), rel=1e-12)

    def test_filter_gain_and_restored_wiener_sites(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, 0.01, FIG_CHI, postfilter=True)
        gain = postfilter_gain(model.sigma_x_sq, 16 * report.alpha ** 2)
        assert np.allclose(report.filter_gain, gain, rtol=1e-15, atol=0.0)
        wiener = report.regime == Regime.WIENER
        assert np.any(wiener)
        assert np.allclose(report.gamma[wiener], 1.0, rtol=1e-12)

    def test_attack_distortion_sees_the_filter(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, 0.01, FIG_CHI, postfilter=True)
        filtered = site_attack_distortion(report.gamma, report.sigma_delta_sq, report.alpha,
                                          model.sigma_x, model.phi, 16, report.filter_gain)
        assert report.d_xy_prime == pytest.approx(math.fsum(filtered), rel=1e-12)
        unfiltered = site_attack_distortion(report.gamma, report.sigma_delta_sq, report.alpha,
                                            model.sigma_x, model.phi, 16)
        assert math.fsum(unfiltered) != pytest.approx(report.d_xy_prime, rel=1e-6)

    def test_plain_report_has_unit_gain(self, ramp_host):
        _, model = ramp_host
        report = solve_equilibrium(model, 16, FIG_LAM, FIG_CHI)
        assert np.array_equal(report.filter_gain, np.ones(model.m))


class TestCalibration:
    def test_budgets_met(self, ramp_host):
        _, model = ramp_host
        lam, chi, report = calibrate_multipliers(model, 16, d_xy_max=4096.0, d_xy_prime_max=8192.0)
        assert lam > 0 and chi > 0
        assert abs(report.d_xy - 4096.0) / 4096.0 <= 1e-3
        assert abs(report.d_xy_prime - 8192.0) / 8192.0 <= 1e-3
        assert report.eb_n0 > 0.0
        assert report.lam == lam and report.chi == chi

    @pytest.mark.slow
    def test_desk_scale_protocol(self):
        _, model = gen_host(65536, VarianceProfile.ramp(1.0, 10.0), seed=3)
        _, _, report = calibrate_multipliers(model, 156, d_xy_max=65536.0, d_xy_prime_max=2 * 65536.0)
        assert abs(report.d_xy / 65536.0 - 1.0) <= 1e-3
        assert abs(report.d_xy_prime / (2 * 65536.0) - 1.0) <= 1e-3
        assert report.eb_n0 > 0.0
        assert report.eb_n0 == pytest.approx(math.fsum(report.rho), rel=1e-12)

    def test_infeasible_attack_budget(self, ramp_host):
        _, model = ramp_host
        with pytest.raises(InfeasibleBudgetError) as info:
            calibrate_multipliers(model, 16, d_xy_max=4096.0, d_xy_prime_max=1e9)
        assert info.value.multiplier == 'lambda'

    def test_rejects_non_positive_budgets(self, ramp_host):
        _, model = ramp_host
        with pytest.raises(InvalidParameterError):
            calibrate_multipliers(model, 16, d_xy_max=0.0, d_xy_prime_max=1.0)

    def test_attack_only_calibration(self, ramp_host):
        _, model = ramp_host
        alpha = np.full(model.m, 0.3)
        lam, report = calibrate_attack(alpha, model, 16, d_xy_prime_max=2 * 4096.0)
        assert abs(report.d_xy_prime / (2 * 4096.0) - 1.0) <= 1e-3
        assert np.array_equal(report.alpha, alpha)
        assert math.isnan(report.chi)

    def test_distortion_ceiling(self, ramp_host):
        _, model = ramp_host
        ceiling = distortion_ceiling(model, 16, FIG_LAM)
        assert ceiling == pytest.approx(16 * FIG_LAM * math.fsum(model.phi ** 4 * model.sigma_x ** 4), rel=1e-12)
        near_free = solve_equilibrium(model, 16, FIG_LAM, 1e-12)
        assert 0.99 * ceiling <= near_free.d_xy <= ceiling * (1 + 1e-12)
        assert distortion_ceiling(model, 16, FIG_LAM, postfilter=True) < ceiling

    def test_embedding_calibration_raises_lambda_above_the_ceiling(self, ramp_host, caplog):
        _, model = ramp_host
        budget = 1.5 * distortion_ceiling(model, 16, FIG_LAM)
        with caplog.at_level(logging.INFO, logger='hiding.game_solver'):
            lam, chi, report = calibrate_embedding(model, 16, FIG_LAM, budget)
        # the ceiling is linear in lambda: two doublings give 4x >= 2 * 1.5x
        assert lam == pytest.approx(4 * FIG_LAM, rel=1e-12)
        assert chi > 0
        assert abs(report.d_xy - budget) / budget <= 1e-3
        assert report.lam == lam
        assert 'Raised lambda' in caplog.text

    def test_embedding_calibration_keeps_lambda_when_it_fits(self, ramp_host):
        _, model = ramp_host
        budget = distortion_ceiling(model, 16, FIG_LAM) / 4
        lam, _, report = calibrate_embedding(model, 16, FIG_LAM, budget)
        assert lam == FIG_LAM
        assert abs(report.d_xy - budget) / budget <= 1e-3

    def test_out_of_range_target_reports_range(self):
        with pytest.raises(InfeasibleBudgetError) as info:
            _calibrate_decreasing('x', lambda x: (1.0 / (1.0 + x), None), 5.0)
        low, high = info.value.achievable
        assert low < high < 5.0

    def test_nothing_feasible(self):
        def evaluate(x):
            raise InfeasibleBudgetError('never', 'inner')

        with pytest.raises(InfeasibleBudgetError) as info:
            _calibrate_decreasing('x', evaluate, 1.0)
        assert info.value.achievable is None
        assert info.value.target == 1.0

    def test_nothing_feasible_reports_closest_inner_range(self):
        def evaluate(x):
            raise InfeasibleBudgetError('inner miss', 'inner', (x, 2.0 * x), target=5.0)

        with pytest.raises(InfeasibleBudgetError) as info:
            _calibrate_decreasing('x', evaluate, 1.0)
        low, high = info.value.achievable
        assert low <= 5.0 <= high
        assert low == pytest.approx(math.sqrt(10.0), rel=1e-9)
        assert 'closest inner range' in str(info.value)

    def test_unreachable_embedding_budget_keeps_a_range(self):
        model = SiteModel.from_sigmas(np.linspace(1.0, 10.0, 64))
        with pytest.raises(InfeasibleBudgetError) as info:
            calibrate_multipliers(model, 16, d_xy_max=1e30, d_xy_prime_max=1e3)
        assert info.value.multiplier == 'lambda'
        low, high = info.value.achievable
        assert 0.0 <= low < high < 1e30

    def test_feasibility_edge_joins_the_range(self):
        edge = 0.0123

        def evaluate(x):
            if x < edge:
                raise InfeasibleBudgetError('below edge', 'inner')
            return 1e3 / (1.0 + 1e4 * (x - edge)), x

        x, value, payload = _calibrate_decreasing('x', evaluate, 500.0)
        assert value == pytest.approx(500.0, rel=1e-3)
        assert x == pytest.approx(edge + 1e-4, rel=1e-3)
        assert payload == x

    def test_monotone_bisection(self):
        x, value, payload = _calibrate_decreasing('x', lambda x: (1.0 / (1.0 + x), x), 0.3)
        assert value == pytest.approx(0.3, rel=1e-3)
        assert payload == x

    def test_golden_fallback_on_non_monotone_response(self, caplog):
        def evaluate(x):
            return (math.log10(x) - 2.0) ** 2, None

        with caplog.at_level(logging.WARNING, logger='hiding.game_solver'):
            x, value, _ = _calibrate_decreasing('x', evaluate, 4.3)
        assert value == pytest.approx(4.3, rel=1e-3)
        assert 'not monotone' in caplog.text
