"""
Figure-data sweeps.
Features:
- Regime map over (alpha, sigma_x) with the attacker's costs and best responses
- Optimal strength against host deviation, with and without post-filter
- Attack-strength sweep comparing the game-optimal strengths to constant and
  proportional (c |x_i|) strengths at equal embedding distortion
"""

import logging
import math
import os
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from hiding.attack_channel import (
    Regime,
    attack_cost,
    classify_domains,
    domain_boundaries,
    optimal_attack_params,
    quantization_attack,
)
from hiding.counter_rng import STREAM_CODE, STREAM_HOST, STREAM_TRIAL, counter_normal, derive_seed
from hiding.embedder import EmbeddingPlan, embed, empirical_weighted_mse
from hiding.errors import InfeasibleBudgetError, InvalidParameterError
from hiding.extractor import ChannelAssumption, eb_n0, map_decode, predicted_ber
from hiding.game_solver import (
    alpha_postfilter,
    calibrate_attack,
    calibrate_embedding,
    calibrate_multipliers,
    optimal_alpha,
)
from hiding.signal_model import SiteModel, gen_host, message_bits, perceptual_weights
from harness.config import ExperimentConfig
from harness.csv_output import write_csv

logger = logging.getLogger(__name__)

SCHEMES = ('proposed', 'const_alpha', 'prop_alpha')


def build_host(config: ExperimentConfig) -> Tuple[np.ndarray, SiteModel]:
    return gen_host(config.m, config.variance_profile(), config.seed, config.rule())


def companion_path(path: str, suffix: str) -> str:
    stem, ext = os.path.splitext(path)
    return f"{stem}_{suffix}{ext or '.csv'}"


def cmd_sweep_domains(config: ExperimentConfig) -> pd.DataFrame:
    """Regime map; also writes <output>_boundaries.csv with both boundary curves."""
    alphas = np.linspace(config.alpha_min, config.alpha_max, config.grid_points)
    sigmas = np.linspace(config.sigma_x_min, config.sigma_x_max, config.grid_points)
    sigma_x, alpha = (g.ravel() for g in np.meshgrid(sigmas, alphas, indexing='ij'))
    phi = perceptual_weights(sigma_x, config.rule())
    lam, n = config.lam, config.n

    regime = classify_domains(alpha, sigma_x, phi, lam, n)
    gamma, sigma_delta_sq, _ = optimal_attack_params(alpha, sigma_x, phi, lam, n)
    j_intermediate = np.full(alpha.shape, np.nan)
    mid = regime == Regime.INTERMEDIATE
    if np.any(mid):
        j_intermediate[mid] = attack_cost(Regime.INTERMEDIATE, alpha[mid], sigma_x[mid], phi[mid], lam, n)

    frame = pd.DataFrame({
        'alpha': alpha,
        'sigma_x': sigma_x,
        'regime': [Regime(int(r)).label for r in regime],
        'J_E': attack_cost(Regime.ERASE, alpha, sigma_x, phi, lam, n),
        'J_W': attack_cost(Regime.WIENER, alpha, sigma_x, phi, lam, n),
        'J_I': j_intermediate,
        'gamma_star': gamma,
        'sigma_delta_sq_star': sigma_delta_sq,
    })
    header = config.resolved() + [('command', 'sweep-domains')]
    write_csv(config.output, frame, header)

    boundary_phi = perceptual_weights(sigmas, config.rule())
    upper, lower = domain_boundaries(sigmas, boundary_phi, lam, n)
    boundaries = pd.DataFrame({'sigma_x': sigmas, 'phi': boundary_phi,
                               'alpha_d1_d2': upper, 'alpha_d2_d3': lower})
    write_csv(companion_path(config.output, 'boundaries'), boundaries, header)
    logger.info(f"Regime map: {dict(zip(*np.unique(frame['regime'], return_counts=True)))}")
    return frame


def cmd_sweep_alpha(config: ExperimentConfig) -> pd.DataFrame:
    """Closed-form strength curves plus the exact equilibrium strength."""
    sigma_x = np.linspace(config.sigma_x_min, config.sigma_x_max, config.grid_points)
    phi = perceptual_weights(sigma_x, config.rule())
    alpha, regime = optimal_alpha(config.lam, config.chi, phi, sigma_x, config.n, closed_form_only=True)
    exact, _ = optimal_alpha(config.lam, config.chi, phi, sigma_x, config.n)
    frame = pd.DataFrame({
        'sigma_x_sq': sigma_x ** 2,
        'alpha_no_postfilter': alpha,
        'alpha_postfilter': alpha_postfilter(config.lam, phi, sigma_x),
        'regime': [Regime(int(r)).label for r in regime],
        'sigma_x': sigma_x,
        'phi': phi,
        'alpha_exact': exact,
    })
    write_csv(config.output, frame, config.resolved() + [('command', 'sweep-alpha')])
    return frame


def comparator_alphas(x: np.ndarray, model: SiteModel, n: int, d_xy_max: float) -> Dict[str, np.ndarray]:
    """alpha = const and alpha = c |x|, each spending exactly d_xy_max."""
    phi_sq = model.phi ** 2
    const = math.sqrt(d_xy_max / (n * math.fsum(phi_sq)))
    energy = math.fsum(phi_sq * x ** 2)
    if energy <= 0:
        raise InvalidParameterError("proportional comparator needs a non-zero host")
    c = math.sqrt(d_xy_max / (n * energy))
    return {'const_alpha': np.full(model.m, const), 'prop_alpha': c * np.abs(x)}


def _with_ber(row: Dict[str, float]) -> Dict[str, float]:
    for scheme in SCHEMES:
        ebn0 = row.get(f'ebn0_{scheme}', math.nan)
        row[f'ber_{scheme}'] = predicted_ber(1.0 / ebn0) if ebn0 > 0 else (0.5 if ebn0 == 0 else math.nan)
    return row


def _sawgn_rows(config: ExperimentConfig, x: np.ndarray, model: SiteModel, d_xy_max: float) -> List[Dict]:
    m, n = model.m, config.n
    erase_total = math.fsum(model.phi ** 2 * model.sigma_x_sq)
    lo, hi = 1.05 * d_xy_max / m, 0.9 * erase_total / m
    if not lo < hi:
        raise InvalidParameterError(
            f"attack budget range is empty: D_xy/m={d_xy_max / m:.6g} leaves nothing below 0.9 * erase cost {hi:.6g}")
    comparators = comparator_alphas(x, model, n, d_xy_max)

    rows = []
    first_alpha, first_gain = None, None
    for budget in np.linspace(lo, hi, config.attack_points):
        row = {'attack_distortion_per_site': float(budget)}
        try:
            lam, chi, report = calibrate_multipliers(model, n, d_xy_max, budget * m, config.postfilter)
            row.update(ebn0_proposed=report.eb_n0, lambda_proposed=lam, chi_proposed=chi)
            if first_alpha is None:
                first_alpha, first_gain = report.alpha, (report.filter_gain if report.postfilter else None)
        except InfeasibleBudgetError as e:
            logger.warning(f"Proposed scheme infeasible at D'/m={budget:.6g}: {e}")
            row.update(ebn0_proposed=math.nan, lambda_proposed=math.nan, chi_proposed=math.nan)
        for name, alpha in comparators.items():
            try:
                _, response = calibrate_attack(alpha, model, n, budget * m)
                row[f'ebn0_{name}'] = response.eb_n0
            except InfeasibleBudgetError as e:
                logger.warning(f"{name} infeasible at D'/m={budget:.6g}: {e}")
                row[f'ebn0_{name}'] = math.nan
        rows.append(_with_ber(row))
        logger.info(f"D'/m={budget:.6g}: " + ", ".join(f"{s}={row[f'ebn0_{s}']:.6g}" for s in SCHEMES))

    # identity channel: the mark is the only distortion the "attack" leaves
    identity = {'attack_distortion_per_site': d_xy_max / m, 'lambda_proposed': math.nan, 'chi_proposed': math.nan}
    schemes = dict(comparators, proposed=first_alpha)
    for name, alpha in schemes.items():
        gain = first_gain if name == 'proposed' else None
        identity[f'ebn0_{name}'] = (eb_n0(ChannelAssumption.unattacked(alpha, model, n, filter_gain=gain))
                                    if alpha is not None else math.nan)
    return [_with_ber(identity)] + rows


def _quantization_rows(config: ExperimentConfig, model: SiteModel, d_xy_max: float) -> List[Dict]:
    m, n = model.m, config.n
    lam, chi, report = calibrate_embedding(model, n, config.lam, d_xy_max, config.postfilter)
    message = message_bits(config.effective_message_seed, n)
    sites = np.arange(m, dtype=np.uint64)
    steps = np.concatenate([[0.0], np.linspace(config.step_max / config.attack_points, config.step_max,
                                               config.attack_points)])
    rows = []
    for step in steps:
        residual_sq = {s: 0.0 for s in SCHEMES}
        errors = {s: 0 for s in SCHEMES}
        distortion = 0.0
        for t in range(config.trials):
            trial_seed = derive_seed(config.seed, STREAM_TRIAL, t)
            x = model.sigma_x * counter_normal(trial_seed, STREAM_HOST, sites)
            code_seed = int(derive_seed(trial_seed, STREAM_CODE, 0))
            alphas = dict(comparator_alphas(x, model, n, d_xy_max), proposed=report.alpha)
            for name, alpha in alphas.items():
                filtered = report.postfilter and name == 'proposed'
                plan = EmbeddingPlan(message=message, alpha=alpha, code_seed=code_seed, postfilter=filtered)
                y = embed(x, plan, model)
                y_prime = quantization_attack(y, step) if step > 0 else y
                if name == 'proposed':
                    distortion += empirical_weighted_mse(y_prime, x, model.phi) / m
                assumption = ChannelAssumption.unattacked(alpha, model, n, sigma_delta=step / math.sqrt(12.0),
                                                          filter_gain=report.filter_gain if filtered else None)
                decoded = map_decode(y_prime, plan.code(), assumption).with_truth(message.bits)
                residual_sq[name] += float(np.sum((decoded.soft - message.bits) ** 2))
                errors[name] += int(round(decoded.ber * n))
        samples = config.trials * n
        row = {'step': float(step), 'attack_distortion_per_site': distortion / config.trials,
               'lambda_proposed': lam, 'chi_proposed': chi}
        for name in SCHEMES:
            row[f'ebn0_{name}'] = samples / residual_sq[name] if residual_sq[name] > 0 else math.inf
            row[f'ber_{name}'] = errors[name] / samples
        rows.append(row)
        logger.info(f"step={step:.6g}: " + ", ".join(f"{s}={row[f'ber_{s}']:.4g}" for s in SCHEMES))
    return rows


def cmd_sweep_attack(config: ExperimentConfig) -> pd.DataFrame:
    x, model = build_host(config)
    d_xy_max = config.d_xy_max if config.d_xy_max is not None else float(model.m)
    spec = config.attack_spec()
    if spec.kind == 'quantization':
        rows = _quantization_rows(config, model, d_xy_max)
        mode = 'quantization'
    else:
        rows = _sawgn_rows(config, x, model, d_xy_max)
        mode = 'sawgn'
    frame = pd.DataFrame(rows)
    leading = ['step', 'attack_distortion_per_site'] + [f'ebn0_{s}' for s in SCHEMES] + [f'ber_{s}' for s in SCHEMES]
    ordered = [c for c in leading if c in frame.columns]
    frame = frame[ordered + [c for c in frame.columns if c not in ordered]]
    header = config.resolved() + [('command', 'sweep-attack'), ('mode', mode), ('d_xy_total', d_xy_max)]
    write_csv(config.output, frame, header)
    return frame
