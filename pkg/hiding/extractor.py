"""
MAP extractor for the spread-spectrum channel.
Features:
- Informed soft estimates b_hat_j weighted by gamma_i alpha_i / V_i
- Per-bit variance sigma_b^2 and Eb/N0 = sum_i rho_i
- Hard decisions (zero maps to +1) and bit-error rate
- Gaussian-channel BER prediction Phi(-1/sigma_b)
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import stats

from hiding.attack_channel import AttackPlan
from hiding.errors import DegenerateChannelError, InvalidParameterError
from hiding.signal_model import SiteModel, SpreadingCode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelAssumption:
    """What the decoder believes about the channel, site by site."""
    gamma: np.ndarray
    sigma_delta: np.ndarray
    alpha: np.ndarray
    sigma_x: np.ndarray
    n: int

    def __post_init__(self):
        arrays = {}
        for name in ("gamma", "sigma_delta", "alpha", "sigma_x"):
            value = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if np.any(value < 0) or not np.all(np.isfinite(value)):
                raise InvalidParameterError(f"assumed {name} must be finite and >= 0")
            arrays[name] = value
        sizes = {v.size for v in arrays.values()}
        if len(sizes) != 1 or 0 in sizes:
            raise InvalidParameterError(f"assumption vectors must share a length >= 1, got {sorted(sizes)}")
        if self.n < 1:
            raise InvalidParameterError(f"message length must be >= 1, got {self.n}")
        for name, value in arrays.items():
            object.__setattr__(self, name, value)

    @property
    def m(self) -> int:
        return int(self.alpha.size)

    @classmethod
    def matched(cls, attack: AttackPlan, alpha: np.ndarray, model: SiteModel, n: int,
                filter_gain: Optional[np.ndarray] = None) -> "ChannelAssumption":
        """
        Decoder that knows the attack exactly. filter_gain is the hider's
        post-filter gain; host and mark both pass through it before the attack.
        """
        gain = 1.0 if filter_gain is None else np.asarray(filter_gain, dtype=np.float64)
        return cls(gamma=attack.gamma * gain, sigma_delta=attack.sigma_delta, alpha=alpha,
                   sigma_x=model.sigma_x, n=n)

    @classmethod
    def unattacked(cls, alpha: np.ndarray, model: SiteModel, n: int, sigma_delta: float = 0.0,
                   filter_gain: Optional[np.ndarray] = None) -> "ChannelAssumption":
        """Default decoder: gamma = 1 (or the post-filter gain), optional flat noise floor."""
        m = model.m
        gamma = np.ones(m) if filter_gain is None else np.broadcast_to(
            np.asarray(filter_gain, dtype=np.float64), (m,))
        return cls(gamma=gamma, sigma_delta=np.full(m, float(sigma_delta)),
                   alpha=alpha, sigma_x=model.sigma_x, n=n)

    def energy(self) -> np.ndarray:
        return (self.gamma * self.alpha) ** 2


@dataclass(frozen=True)
class DecodeReport:
    soft: np.ndarray
    sigma_b_sq: float
    eb_n0: float
    hard: np.ndarray
    ber: Optional[float] = None

    @property
    def n(self) -> int:
        return int(self.soft.size)

    @property
    def predicted_ber(self) -> float:
        return predicted_ber(self.sigma_b_sq)

    def with_truth(self, truth: np.ndarray) -> "DecodeReport":
        return replace(self, ber=ber(self.hard, truth))


def channel_variances(assumption: ChannelAssumption) -> np.ndarray:
    """V_i = gamma_i^2 (sigma_x_i^2 + alpha_i^2 (n - 1)) + sigma_delta_i^2."""
    a = assumption
    variance = a.gamma ** 2 * (a.sigma_x ** 2 + a.alpha ** 2 * (a.n - 1)) + a.sigma_delta ** 2
    bad = (variance == 0) & (a.energy() > 0)
    if np.any(bad):
        raise DegenerateChannelError(
            f"zero channel variance at {int(np.count_nonzero(bad))} marked site(s), first {int(np.flatnonzero(bad)[0])}")
    return variance


def channel_variance(i: int, assumption: ChannelAssumption) -> float:
    if not 0 <= i < assumption.m:
        raise InvalidParameterError(f"site {i} outside 0..{assumption.m - 1}")
    return float(channel_variances(assumption)[i])


def site_rho(assumption: ChannelAssumption) -> np.ndarray:
    """rho_i = alpha_i^2 gamma_i^2 / V_i, zero on unmarked or erased sites."""
    variance = channel_variances(assumption)
    energy = assumption.energy()
    return np.divide(energy, variance, out=np.zeros_like(energy), where=energy > 0)


def eb_n0(assumption: ChannelAssumption) -> float:
    return math.fsum(site_rho(assumption))


def map_decode(y_prime: np.ndarray, code: SpreadingCode, assumption: ChannelAssumption) -> DecodeReport:
    y_prime = np.asarray(y_prime, dtype=np.float64).reshape(-1)
    if not (y_prime.size == code.m == assumption.m):
        raise InvalidParameterError(
            f"length mismatch: signal {y_prime.size}, code {code.m}, assumption {assumption.m}")
    if code.n != assumption.n:
        raise InvalidParameterError(f"code carries {code.n} bits, assumption expects {assumption.n}")

    total = eb_n0(assumption)
    if total <= 0:
        raise DegenerateChannelError("no watermark energy reaches the decoder (all gamma * alpha are zero)")
    variance = channel_variances(assumption)
    gain = assumption.gamma * assumption.alpha
    weights = np.divide(gain, variance, out=np.zeros_like(gain), where=gain > 0)
    soft = code.correlate(weights * y_prime) / total
    return DecodeReport(soft=soft, sigma_b_sq=1.0 / total, eb_n0=total, hard=hard_decision(soft))


def hard_decision(soft: np.ndarray) -> np.ndarray:
    """sign(soft) with soft == 0 mapped to +1."""
    return np.where(np.asarray(soft) >= 0, 1, -1).astype(np.int8)


def ber(hard: np.ndarray, truth: np.ndarray) -> float:
    hard = np.asarray(hard).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if hard.size != truth.size or hard.size == 0:
        raise InvalidParameterError(f"bit vectors differ in length ({hard.size} vs {truth.size})")
    if not np.all(np.isin(truth, (-1, 1))):
        raise InvalidParameterError("truth bits must be +/-1")
    return float(np.count_nonzero(hard != truth)) / truth.size


def predicted_ber(sigma_b_sq: float) -> float:
    """Phi(-1 / sigma_b) for a Gaussian channel with unit signal amplitude."""
    if sigma_b_sq < 0:
        raise InvalidParameterError(f"variance must be >= 0, got {sigma_b_sq}")
    if sigma_b_sq == 0:
        return 0.0
    if math.isinf(sigma_b_sq):
        return 0.5
    return float(stats.norm.sf(1.0 / math.sqrt(sigma_b_sq)))
