"""
SAWGN attack channel and the attacker's side of the game.
Features:
- y'_i = gamma_i y_i + delta_i with counter-keyed Gaussian noise
- Expected attack distortion (weighted MSE against the host)
- Domain classification D1/D2/D3 and closed-form optimal attack per site
- Cost functions J_E, J_W, J_I
- Uniform quantization as a deterministic compression stand-in

With mu = sqrt(lambda) phi sigma_x^2, a site is Erase (D1) iff mu < alpha,
Intermediate (D2) iff (alpha - mu)(sigma_x^2 + n alpha^2) + mu alpha^2 >= 0,
otherwise Wiener (D3). Ties fall into D2, where the closed form degenerates
to the neighbouring pure attack. alpha = 0 is always Wiener with unit gain.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple, Union

import numpy as np
from scipy import optimize

from hiding.counter_rng import STREAM_NOISE, counter_normal
from hiding.errors import InvalidParameterError
from hiding.signal_model import SiteModel

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray]


class Regime(IntEnum):
    CUSTOM = 0
    ERASE = 1
    INTERMEDIATE = 2
    WIENER = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def domain(self) -> str:
        return {Regime.ERASE: "D1", Regime.INTERMEDIATE: "D2", Regime.WIENER: "D3"}.get(self, "custom")


@dataclass(frozen=True)
class GameParams:
    lam: float
    chi: float
    n: int

    def __post_init__(self):
        if not self.lam > 0 or not self.chi > 0:
            raise InvalidParameterError(f"multipliers must be > 0 (lambda={self.lam}, chi={self.chi})")
        if self.n < 1:
            raise InvalidParameterError(f"message length must be >= 1, got {self.n}")


@dataclass(frozen=True)
class AttackPlan:
    gamma: np.ndarray
    sigma_delta: np.ndarray
    regime: np.ndarray
    noise_seed: int = 0

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        sigma_delta = np.asarray(self.sigma_delta, dtype=np.float64).reshape(-1)
        regime = np.broadcast_to(np.asarray(self.regime, dtype=np.int8), gamma.shape).copy()
        if gamma.size < 1 or gamma.shape != sigma_delta.shape:
            raise InvalidParameterError("gamma and sigma_delta must share a length >= 1")
        if np.any(gamma < 0) or np.any(sigma_delta < 0):
            raise InvalidParameterError("gamma and sigma_delta must be >= 0")
        erase = regime == Regime.ERASE
        if np.any(gamma[erase] != 0) or np.any(sigma_delta[erase] != 0):
            raise InvalidParameterError("erase sites must have gamma = 0 and sigma_delta = 0")
        if np.any(sigma_delta[regime == Regime.WIENER] != 0):
            raise InvalidParameterError("wiener sites must have sigma_delta = 0")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma_delta", sigma_delta)
        object.__setattr__(self, "regime", regime)

    @property
    def m(self) -> int:
        return int(self.gamma.size)

    @property
    def sigma_delta_sq(self) -> np.ndarray:
        return self.sigma_delta ** 2

    @classmethod
    def identity(cls, m: int, noise_seed: int = 0) -> "AttackPlan":
        return cls.custom(m, 1.0, 0.0, noise_seed)

    @classmethod
    def custom(cls, m: int, gamma: Scalar, sigma_delta: Scalar, noise_seed: int = 0) -> "AttackPlan":
        """Arbitrary (gamma, sigma_delta) broadcast to m sites, tagged Custom."""
        return cls(gamma=np.broadcast_to(np.asarray(gamma, dtype=np.float64), (m,)),
                   sigma_delta=np.broadcast_to(np.asarray(sigma_delta, dtype=np.float64), (m,)),
                   regime=np.full(m, Regime.CUSTOM, dtype=np.int8),
                   noise_seed=noise_seed)

    def regime_counts(self) -> dict:
        return {r.label: int(np.count_nonzero(self.regime == r)) for r in Regime}


def apply_attack(y: np.ndarray, plan: AttackPlan) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != plan.m:
        raise InvalidParameterError(f"signal has {y.size} sites, attack plan has {plan.m}")
    noisy = plan.sigma_delta > 0
    out = plan.gamma * y
    if np.any(noisy):
        sites = np.flatnonzero(noisy).astype(np.uint64)
        out[noisy] += plan.sigma_delta[noisy] * counter_normal(plan.noise_seed, STREAM_NOISE, sites)
    return out


def site_attack_distortion(gamma: Scalar, sigma_delta_sq: Scalar, alpha: Scalar,
                           sigma_x: Scalar, phi: Scalar, n: int, gain: Scalar = 1.0) -> np.ndarray:
    """
    phi^2 (sigma_x^2 (1 - gamma)^2 + n gamma^2 alpha^2 + sigma_delta^2).
    gain is the hider's post-filter gain; the attacker then acts on gain * y,
    so the channel sees gamma * gain.
    """
    gamma = np.asarray(gamma, dtype=np.float64) * np.asarray(gain, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    sigma_x_sq = np.asarray(sigma_x, dtype=np.float64) ** 2
    return np.asarray(phi, dtype=np.float64) ** 2 * (
        sigma_x_sq * (1.0 - gamma) ** 2 + n * gamma ** 2 * alpha ** 2 + np.asarray(sigma_delta_sq))


def expected_attack_distortion(plan: AttackPlan, alpha: np.ndarray, model: SiteModel, n: int,
                               gain: Scalar = 1.0) -> float:
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if not (alpha.size == plan.m == model.m):
        raise InvalidParameterError(f"length mismatch: alpha {alpha.size}, plan {plan.m}, model {model.m}")
    return float(np.sum(site_attack_distortion(plan.gamma, plan.sigma_delta_sq, alpha,
                                               model.sigma_x, model.phi, n, gain)))


def site_rho(gamma: Scalar, sigma_delta_sq: Scalar, alpha: Scalar, sigma_x: Scalar, n: int,
             gain: Scalar = 1.0) -> np.ndarray:
    """rho = gamma^2 alpha^2 / V; zero where gamma alpha = 0, inf where V = 0 otherwise."""
    gamma = np.asarray(gamma, dtype=np.float64) * np.asarray(gain, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    signal = gamma ** 2 * alpha ** 2
    variance = gamma ** 2 * (np.asarray(sigma_x, dtype=np.float64) ** 2 + alpha ** 2 * (n - 1)) \
        + np.asarray(sigma_delta_sq, dtype=np.float64)
    shape = np.broadcast(signal, variance).shape
    rho = np.zeros(shape)
    signal, variance = np.broadcast_to(signal, shape), np.broadcast_to(variance, shape)
    live = signal > 0
    with np.errstate(divide="ignore"):
        rho[live] = signal[live] / variance[live]
    return rho


def attack_objective(gamma: Scalar, sigma_delta_sq: Scalar, alpha: Scalar, sigma_x: Scalar,
                     phi: Scalar, lam: float, n: int, gain: Scalar = 1.0) -> np.ndarray:
    """Attacker's Lagrangian J = rho + lambda * distortion, evaluated directly."""
    return site_rho(gamma, sigma_delta_sq, alpha, sigma_x, n, gain) \
        + lam * site_attack_distortion(gamma, sigma_delta_sq, alpha, sigma_x, phi, n, gain)


def filtered_attack_params(alpha: Scalar, sigma_x: Scalar, phi: Scalar, lam: float, n: int,
                           gain: Scalar) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Best response when the hider post-filters with gain g. The attacker's
    channel gain on the filtered signal is gamma* / g; on Wiener sites that is
    exactly 1 (the signal is already restored).
    """
    effective, sigma_delta_sq, regime = optimal_attack_params(alpha, sigma_x, phi, lam, n)
    gain = np.broadcast_to(np.asarray(gain, dtype=np.float64), effective.shape)
    gamma = np.divide(effective, gain, out=effective.copy(), where=gain > 0)
    return gamma, sigma_delta_sq, regime


def wiener_gain(sigma_x_sq: Scalar, sigma_w_sq: Scalar) -> Scalar:
    sigma_x_sq = np.asarray(sigma_x_sq, dtype=np.float64)
    sigma_w_sq = np.asarray(sigma_w_sq, dtype=np.float64)
    if np.any(sigma_x_sq < 0) or np.any(sigma_w_sq < 0):
        raise InvalidParameterError("variances must be >= 0")
    total = sigma_x_sq + sigma_w_sq
    if np.any(total == 0):
        raise InvalidParameterError("wiener gain undefined when both variances are zero")
    gain = sigma_x_sq / total
    return float(gain) if gain.ndim == 0 else gain


def mu_threshold(lam: float, phi: Scalar, sigma_x: Scalar) -> Scalar:
    """mu = sqrt(lambda) phi sigma_x^2."""
    return np.sqrt(lam) * np.asarray(phi, dtype=np.float64) * np.asarray(sigma_x, dtype=np.float64) ** 2


def _check_game_inputs(alpha, sigma_x, phi, lam):
    if np.any(np.asarray(alpha) < 0) or np.any(np.asarray(sigma_x) < 0):
        raise InvalidParameterError("alpha and sigma_x must be >= 0")
    if np.any(np.asarray(phi) <= 0):
        raise InvalidParameterError("phi must be > 0")
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be > 0, got {lam}")


def classify_domains(alpha: Scalar, sigma_x: Scalar, phi: Scalar, lam: float, n: int) -> np.ndarray:
    """Vectorised classification; returns int8 Regime codes."""
    _check_game_inputs(alpha, sigma_x, phi, lam)
    alpha, sigma_x, phi = np.broadcast_arrays(np.asarray(alpha, dtype=np.float64),
                                              np.asarray(sigma_x, dtype=np.float64),
                                              np.asarray(phi, dtype=np.float64))
    sigma_x_sq = sigma_x ** 2
    mu = mu_threshold(lam, phi, sigma_x)
    boundary = (alpha - mu) * (sigma_x_sq + n * alpha ** 2) + mu * alpha ** 2
    regime = np.where(mu - alpha < 0, Regime.ERASE,
                      np.where(boundary >= 0, Regime.INTERMEDIATE, Regime.WIENER))
    regime = np.where(alpha == 0, Regime.WIENER, regime)
    return regime.astype(np.int8)


def classify_domain(alpha: float, sigma_x: float, phi: float, lam: float, n: int) -> Regime:
    return Regime(int(classify_domains(alpha, sigma_x, phi, lam, n)))


def _safe_wiener_gain(sigma_x_sq: np.ndarray, sigma_w_sq: np.ndarray) -> np.ndarray:
    total = sigma_x_sq + sigma_w_sq
    return np.divide(sigma_x_sq, total, out=np.ones(np.broadcast(sigma_x_sq, total).shape), where=total > 0)


def _intermediate_closed_form(alpha, sigma_x, phi, lam, n) -> Tuple[np.ndarray, np.ndarray]:
    sigma_x_sq = sigma_x ** 2
    mu = mu_threshold(lam, phi, sigma_x)
    gamma = (mu - alpha) / (np.sqrt(lam) * phi * alpha ** 2)
    gamma_w = _safe_wiener_gain(sigma_x_sq, n * alpha ** 2)
    sigma_delta_sq = gamma * (gamma_w - gamma) * (sigma_x_sq + n * alpha ** 2)
    # rounding at the D2/D3 tie can leave a tiny negative variance
    return np.maximum(gamma, 0.0), np.maximum(sigma_delta_sq, 0.0)


def intermediate_params(alpha: Scalar, sigma_x: Scalar, phi: Scalar, lam: float, n: int) -> Tuple[Scalar, Scalar]:
    """(gamma*, sigma_delta*^2) of the intermediate attack; only valid on D2."""
    regime = classify_domains(alpha, sigma_x, phi, lam, n)
    if np.any(regime != Regime.INTERMEDIATE):
        raise InvalidParameterError("intermediate attack parameters requested outside domain D2")
    alpha, sigma_x, phi = np.broadcast_arrays(np.asarray(alpha, dtype=np.float64),
                                              np.asarray(sigma_x, dtype=np.float64),
                                              np.asarray(phi, dtype=np.float64))
    gamma, sigma_delta_sq = _intermediate_closed_form(alpha, sigma_x, phi, lam, n)
    if gamma.ndim == 0:
        return float(gamma), float(sigma_delta_sq)
    return gamma, sigma_delta_sq


def attack_cost(regime: Regime, alpha: Scalar, sigma_x: Scalar, phi: Scalar, lam: float, n: int) -> Scalar:
    """Closed-form attacker cost J_E, J_W or J_I."""
    alpha = np.asarray(alpha, dtype=np.float64)
    sigma_x_sq = np.asarray(sigma_x, dtype=np.float64) ** 2
    phi = np.asarray(phi, dtype=np.float64)
    regime = Regime(regime)
    if regime is Regime.ERASE:
        cost = lam * phi ** 2 * sigma_x_sq * np.ones_like(alpha)
    elif regime is Regime.WIENER:
        rho = np.divide(alpha ** 2, sigma_x_sq + alpha ** 2 * (n - 1),
                        out=np.zeros(np.broadcast(alpha, sigma_x_sq).shape),
                        where=alpha > 0)
        total = sigma_x_sq + n * alpha ** 2
        shrunk = np.divide(n * alpha ** 2 * sigma_x_sq, total, out=np.zeros_like(rho), where=total > 0)
        cost = rho + lam * phi ** 2 * shrunk
    elif regime is Regime.INTERMEDIATE:
        if np.any(alpha == 0):
            raise InvalidParameterError("J_I is singular at alpha = 0")
        mu = mu_threshold(lam, phi, np.sqrt(sigma_x_sq))
        cost = 2.0 * mu / alpha - 1.0 + lam * phi ** 2 * sigma_x_sq * (1.0 - sigma_x_sq / alpha ** 2)
    else:
        raise InvalidParameterError("custom regime has no closed-form cost")
    return float(cost) if np.ndim(cost) == 0 else cost


def optimal_attack_params(alpha: Scalar, sigma_x: Scalar, phi: Scalar, lam: float, n: int
                          ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-site (gamma*, sigma_delta*^2, regime) minimising J."""
    regime = classify_domains(alpha, sigma_x, phi, lam, n)
    alpha, sigma_x, phi = np.broadcast_arrays(np.asarray(alpha, dtype=np.float64),
                                              np.asarray(sigma_x, dtype=np.float64),
                                              np.asarray(phi, dtype=np.float64))
    gamma = _safe_wiener_gain(sigma_x ** 2, n * alpha ** 2)
    sigma_delta_sq = np.zeros(alpha.shape)
    gamma = np.where(regime == Regime.ERASE, 0.0, gamma)
    mid = regime == Regime.INTERMEDIATE
    if np.any(mid):
        g, d = _intermediate_closed_form(alpha[mid], sigma_x[mid], phi[mid], lam, n)
        gamma[mid] = g
        sigma_delta_sq[mid] = d
    return gamma, sigma_delta_sq, regime


def optimal_attack(alpha: np.ndarray, model: SiteModel, lam: float, n: int, noise_seed: int = 0) -> AttackPlan:
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.size != model.m:
        raise InvalidParameterError(f"alpha has {alpha.size} sites, model has {model.m}")
    gamma, sigma_delta_sq, regime = optimal_attack_params(alpha, model.sigma_x, model.phi, lam, n)
    return AttackPlan(gamma=gamma, sigma_delta=np.sqrt(sigma_delta_sq), regime=regime, noise_seed=noise_seed)


def quantization_attack(y: np.ndarray, step: float) -> np.ndarray:
    """Uniform quantizer, round half away from zero."""
    if not step > 0:
        raise InvalidParameterError(f"quantization step must be > 0, got {step}")
    y = np.asarray(y, dtype=np.float64)
    return step * np.sign(y) * np.floor(np.abs(y) / step + 0.5)


def domain_boundaries(sigma_x: Scalar, phi: Scalar, lam: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    alpha on the D1/D2 boundary (alpha = mu) and on the D2/D3 boundary, the root
    of (alpha - mu)(sigma_x^2 + n alpha^2) + mu alpha^2 = 0 on (0, mu].
    """
    sigma_x, phi = np.broadcast_arrays(np.atleast_1d(np.asarray(sigma_x, dtype=np.float64)),
                                       np.atleast_1d(np.asarray(phi, dtype=np.float64)))
    _check_game_inputs(0.0, sigma_x, phi, lam)
    mu = mu_threshold(lam, phi, sigma_x)
    lower = np.zeros_like(mu)
    for k, (mu_k, s_k) in enumerate(zip(mu, sigma_x ** 2)):
        if mu_k <= 0:
            continue
        lower[k] = optimize.brentq(lambda a: (a - mu_k) * (s_k + n * a * a) + mu_k * a * a,
                                   0.0, mu_k, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return mu, lower
