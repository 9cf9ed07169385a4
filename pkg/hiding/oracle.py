"""
Brute-force oracle for the closed forms.
Features:
- Refined 2-D grid search of the attacker's Lagrangian, evaluated from definitions
- Grid search of the hider's payoff over alpha
- Vectorised Monte Carlo of host draw -> embed -> attack -> decode

The attack grid never calls the closed-form solvers. The alpha grid uses the
closed-form best response only when asked to (after the attack grid has been
checked against it).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from hiding.attack_channel import AttackPlan, attack_objective, optimal_attack_params
from hiding.counter_rng import STREAM_CODE, STREAM_HOST, STREAM_NOISE, STREAM_TRIAL, counter_normal, \
    counter_sign, derive_seed
from hiding.embedder import EmbeddingPlan, postfilter_gain
from hiding.errors import InvalidParameterError
from hiding.extractor import ChannelAssumption, channel_variances, eb_n0
from hiding.signal_model import SiteModel

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 400
DEFAULT_REFINE_ROUNDS = 3
DEFAULT_ALPHA_POINTS = 1001
ZOOM = 10.0
MAX_RECENTER = 25
MIN_TRIALS = 1000
CHUNK_BUDGET = 2_000_000


@dataclass(frozen=True)
class GridSpec:
    gamma_range: Tuple[float, float]
    sigma_delta_sq_range: Tuple[float, float]
    gamma_points: int = DEFAULT_GRID_POINTS
    sigma_delta_sq_points: int = DEFAULT_GRID_POINTS
    refine_rounds: int = DEFAULT_REFINE_ROUNDS

    def __post_init__(self):
        for name, (lo, hi) in (("gamma", self.gamma_range), ("sigma_delta_sq", self.sigma_delta_sq_range)):
            if not lo <= hi:
                raise InvalidParameterError(f"{name} range must satisfy lo <= hi, got [{lo}, {hi}]")
        if self.gamma_points < 2 or self.sigma_delta_sq_points < 2:
            raise InvalidParameterError("grid point counts must be >= 2")
        if self.refine_rounds < 0:
            raise InvalidParameterError("refine_rounds must be >= 0")

    @classmethod
    def for_site(cls, alpha: float, sigma_x: float, n: int,
                 points: int = DEFAULT_GRID_POINTS, refine_rounds: int = DEFAULT_REFINE_ROUNDS) -> "GridSpec":
        """gamma in [0, 2 gamma_w], sigma_delta^2 in [0, 4 sigma_x^2]."""
        sigma_x_sq = sigma_x ** 2
        total = sigma_x_sq + n * alpha ** 2
        gamma_w = sigma_x_sq / total if total > 0 else 1.0
        return cls(gamma_range=(0.0, 2.0 * gamma_w), sigma_delta_sq_range=(0.0, 4.0 * sigma_x_sq),
                   gamma_points=points, sigma_delta_sq_points=points, refine_rounds=refine_rounds)


class GridOptimum(NamedTuple):
    gamma: float
    sigma_delta_sq: float
    value: float


class MonteCarloResult(NamedTuple):
    mean: np.ndarray
    variance: np.ndarray
    ber: float
    mean_stderr: np.ndarray
    variance_stderr: np.ndarray
    trials: int
    samples: Optional[np.ndarray] = None


def _lagrangian(gamma, sigma_delta_sq, alpha, sigma_x_sq, phi_sq, lam, n):
    """rho + lambda * distortion, straight from the channel definitions."""
    signal = gamma * gamma * alpha * alpha
    variance = gamma * gamma * (sigma_x_sq + alpha * alpha * (n - 1)) + sigma_delta_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(signal > 0, signal / variance, 0.0)
    distortion = phi_sq * (sigma_x_sq * (1.0 - gamma) ** 2 + n * gamma * gamma * alpha * alpha + sigma_delta_sq)
    return rho + lam * distortion


def _window(center: float, width: float, lo: float, hi: float) -> Tuple[float, float]:
    width = min(width, hi - lo)
    start = min(max(center - width / 2.0, lo), hi - width)
    return start, start + width


def grid_attack_search(alpha: float, sigma_x: float, phi: float, lam: float, n: int,
                       spec: Optional[GridSpec] = None, trace: Optional[List[float]] = None) -> GridOptimum:
    """
    Minimise J(gamma, sigma_delta^2) on the grid, then zoom 10x around the incumbent
    each refinement round. An incumbent on an inner window edge moves the window
    (same zoom) before zooming further. `trace` collects the incumbent per round.
    """
    spec = spec or GridSpec.for_site(alpha, sigma_x, n)
    sigma_x_sq, phi_sq = sigma_x ** 2, phi ** 2
    (g_lo, g_hi), (d_lo, d_hi) = spec.gamma_range, spec.sigma_delta_sq_range
    g_win, d_win = (g_lo, g_hi), (d_lo, d_hi)
    best = GridOptimum(math.nan, math.nan, math.inf)

    for round_index in range(spec.refine_rounds + 1):
        for _ in range(MAX_RECENTER + 1):
            gammas = np.linspace(*g_win, spec.gamma_points)
            deltas = np.linspace(*d_win, spec.sigma_delta_sq_points)
            values = _lagrangian(gammas[:, None], deltas[None, :], alpha, sigma_x_sq, phi_sq, lam, n)
            ig, id_ = np.unravel_index(int(np.argmin(values)), values.shape)
            if values[ig, id_] < best.value:
                best = GridOptimum(float(gammas[ig]), float(deltas[id_]), float(values[ig, id_]))

            edge_g = (ig == 0 and g_win[0] > g_lo) or (ig == gammas.size - 1 and g_win[1] < g_hi)
            edge_d = (id_ == 0 and d_win[0] > d_lo) or (id_ == deltas.size - 1 and d_win[1] < d_hi)
            if not (edge_g or edge_d):
                break
            g_win = _window(best.gamma, g_win[1] - g_win[0], g_lo, g_hi)
            d_win = _window(best.sigma_delta_sq, d_win[1] - d_win[0], d_lo, d_hi)

        if trace is not None:
            trace.append(best.value)
        logger.debug(f"attack grid round {round_index}: gamma={best.gamma:.9g} "
                     f"sigma_delta_sq={best.sigma_delta_sq:.9g} J={best.value:.12g}")
        g_win = _window(best.gamma, (g_win[1] - g_win[0]) / ZOOM, g_lo, g_hi)
        d_win = _window(best.sigma_delta_sq, (d_win[1] - d_win[0]) / ZOOM, d_lo, d_hi)
    return best


def _best_response_value(alpha: float, sigma_x: float, phi: float, lam: float, n: int,
                         use_closed_form: bool, spec_points: int, refine_rounds: int) -> float:
    if use_closed_form:
        gamma, sigma_delta_sq, _ = optimal_attack_params(alpha, sigma_x, phi, lam, n)
        return float(attack_objective(gamma, sigma_delta_sq, alpha, sigma_x, phi, lam, n))
    spec = GridSpec.for_site(alpha, sigma_x, n, points=spec_points, refine_rounds=refine_rounds)
    return grid_attack_search(alpha, sigma_x, phi, lam, n, spec).value


def grid_alpha_search(lam: float, chi: float, phi: float, sigma_x: float, n: int,
                      alpha_grid: Optional[np.ndarray] = None,
                      refine_rounds: int = 2,
                      use_closed_form_attack: bool = True,
                      attack_points: int = 100,
                      attack_refine_rounds: int = 2) -> Tuple[float, float]:
    """(alpha_dagger, payoff_dagger) maximising J_chi over alpha in [0, 3 mu]."""
    mu = math.sqrt(lam) * phi * sigma_x ** 2
    if alpha_grid is None:
        alpha_grid = np.linspace(0.0, 3.0 * mu, DEFAULT_ALPHA_POINTS)
    alpha_grid = np.asarray(alpha_grid, dtype=np.float64)
    if np.any(alpha_grid < 0):
        raise InvalidParameterError("alpha grid must be >= 0")

    def payoffs(alphas: np.ndarray) -> np.ndarray:
        if use_closed_form_attack:
            gamma, sigma_delta_sq, _ = optimal_attack_params(alphas, sigma_x, phi, lam, n)
            attacker = attack_objective(gamma, sigma_delta_sq, alphas, sigma_x, phi, lam, n)
        else:
            attacker = np.array([_best_response_value(a, sigma_x, phi, lam, n, False,
                                                      attack_points, attack_refine_rounds) for a in alphas])
        return attacker - chi * n * phi ** 2 * alphas ** 2

    values = payoffs(alpha_grid)
    k = int(np.argmax(values))
    best_alpha, best_value = float(alpha_grid[k]), float(values[k])
    step = float(alpha_grid[1] - alpha_grid[0]) if alpha_grid.size > 1 else 0.0
    hi_limit = float(alpha_grid.max())
    for _ in range(refine_rounds):
        if step <= 0:
            break
        lo, hi = max(0.0, best_alpha - step), min(hi_limit, best_alpha + step)
        local = np.linspace(lo, hi, 201)
        local_values = payoffs(local)
        j = int(np.argmax(local_values))
        if local_values[j] > best_value:
            best_alpha, best_value = float(local[j]), float(local_values[j])
        step = (hi - lo) / 200.0
    return best_alpha, best_value


def monte_carlo_channel(model: SiteModel,
                        plan: EmbeddingPlan,
                        attack: AttackPlan,
                        assumption: ChannelAssumption,
                        trials: int,
                        seed: int,
                        keep_samples: bool = False) -> MonteCarloResult:
    """
    Redraw host, spreading code and attack noise for every trial from per-trial
    sub-seeds; the message stays fixed. Chunks of trials run as array operations
    and are reduced in trial order.
    """
    if trials < MIN_TRIALS:
        raise InvalidParameterError(f"monte carlo needs at least {MIN_TRIALS} trials, got {trials}")
    m, n = model.m, plan.n
    if not (plan.m == attack.m == assumption.m == m) or assumption.n != n:
        raise InvalidParameterError("model, plan, attack and assumption disagree on m or n")

    total = eb_n0(assumption)
    if total <= 0:
        raise InvalidParameterError("assumption carries no watermark energy")
    variance = channel_variances(assumption)
    gain = assumption.gamma * assumption.alpha
    weights = np.divide(gain, variance, out=np.zeros_like(gain), where=gain > 0)
    filter_gain = postfilter_gain(model.sigma_x_sq, plan.watermark_power()) if plan.postfilter else None

    bits = plan.message.bits.astype(np.float64)
    sites = np.arange(m, dtype=np.uint64)
    bit_index = np.arange(n, dtype=np.uint64)
    chunk = max(1, CHUNK_BUDGET // (m * n))

    residual_sum = np.zeros(n)
    residual_sq_sum = np.zeros(n)
    errors = 0
    samples = [] if keep_samples else None
    for start in range(0, trials, chunk):
        t = np.arange(start, min(start + chunk, trials), dtype=np.uint64)
        trial_seeds = derive_seed(seed, STREAM_TRIAL, t)[:, None]
        code_seeds = derive_seed(trial_seeds, STREAM_CODE, 0)

        x = model.sigma_x * counter_normal(trial_seeds, STREAM_HOST, sites[None, :])
        codes = counter_sign(code_seeds[:, :, None], STREAM_CODE, sites[None, :, None], bit_index[None, None, :])
        y = x + plan.alpha * (codes @ bits)
        if filter_gain is not None:
            y = filter_gain * y
        y_prime = attack.gamma * y + attack.sigma_delta * counter_normal(trial_seeds, STREAM_NOISE, sites[None, :])
        soft = np.einsum("tm,tmn->tn", weights * y_prime, codes.astype(np.float64)) / total

        residual = soft - bits
        residual_sum += residual.sum(axis=0)
        residual_sq_sum += (residual ** 2).sum(axis=0)
        errors += int(np.count_nonzero(np.where(soft >= 0, 1.0, -1.0) != bits))
        if samples is not None:
            samples.append(soft)

    mean_residual = residual_sum / trials
    var = (residual_sq_sum - trials * mean_residual ** 2) / (trials - 1)
    logger.info(f"Monte Carlo over {trials} trials: mean var(b_hat)={var.mean():.6g}, "
                f"predicted sigma_b^2={1.0 / total:.6g}")
    return MonteCarloResult(
        mean=bits + mean_residual,
        variance=var,
        ber=errors / (trials * n),
        mean_stderr=np.sqrt(var / trials),
        variance_stderr=var * math.sqrt(2.0 / (trials - 1)),
        trials=trials,
        samples=np.vstack(samples) if samples is not None else None,
    )
