"""
Additive spread-spectrum embedder.
Features:
- y_i = x_i + alpha_i * sum_j G(i, j) b_j over a lazily evaluated code
- Expected (weighted-MSE) embedding distortion, with and without post-filter
- Wiener post-filter applied to the whole watermarked sample
- Empirical weighted MSE for measured distortions
"""

import logging
from dataclasses import dataclass

import numpy as np

from hiding.errors import InvalidParameterError
from hiding.signal_model import Message, SiteModel, SpreadingCode, spreading_code

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingPlan:
    message: Message
    alpha: np.ndarray
    code_seed: int
    postfilter: bool = False

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64).reshape(-1)
        if alpha.size < 1 or np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise InvalidParameterError("alpha must be a non-empty vector of finite values >= 0")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.message.n

    @property
    def m(self) -> int:
        return int(self.alpha.size)

    def code(self) -> SpreadingCode:
        return spreading_code(self.code_seed, self.n, self.m)

    def watermark_power(self) -> np.ndarray:
        """sigma_W^2 = n alpha^2 per site (the n - 1 vs n approximation is applied here)."""
        return self.n * self.alpha ** 2


def _check_lengths(plan: EmbeddingPlan, model: SiteModel, length: int = None):
    if plan.m != model.m:
        raise InvalidParameterError(f"plan covers {plan.m} sites, model has {model.m}")
    if length is not None and length != model.m:
        raise InvalidParameterError(f"signal has {length} sites, model has {model.m}")


def watermark(plan: EmbeddingPlan, model: SiteModel) -> np.ndarray:
    """w_i = alpha_i sum_j G(i, j) b_j."""
    _check_lengths(plan, model)
    return plan.alpha * plan.code().spread(plan.message.bits)


def embed(x: np.ndarray, plan: EmbeddingPlan, model: SiteModel) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_lengths(plan, model, x.size)
    y = x + watermark(plan, model)
    if plan.postfilter:
        y = wiener_postfilter(y, model, plan.watermark_power())
    return y


def postfilter_gain(sigma_x_sq: np.ndarray, sigma_w_sq: np.ndarray) -> np.ndarray:
    """sigma_X^2 / (sigma_X^2 + sigma_W^2); unit gain where both vanish."""
    sigma_x_sq = np.asarray(sigma_x_sq, dtype=np.float64)
    sigma_w_sq = np.asarray(sigma_w_sq, dtype=np.float64)
    total = sigma_x_sq + sigma_w_sq
    return np.divide(sigma_x_sq, total, out=np.ones(np.broadcast(sigma_x_sq, total).shape), where=total > 0)


def wiener_postfilter(y: np.ndarray, model: SiteModel, sigma_w_sq: np.ndarray) -> np.ndarray:
    sigma_w_sq = np.asarray(sigma_w_sq, dtype=np.float64)
    if np.any(sigma_w_sq < 0):
        raise InvalidParameterError("watermark power must be >= 0")
    y = np.asarray(y, dtype=np.float64)
    if y.size != model.m:
        raise InvalidParameterError(f"signal has {y.size} sites, model has {model.m}")
    return postfilter_gain(model.sigma_x_sq, sigma_w_sq) * y


def site_embedding_distortion(alpha: np.ndarray,
                              sigma_x: np.ndarray,
                              phi: np.ndarray,
                              n: int,
                              postfilter: bool = False) -> np.ndarray:
    """Per-site expected weighted distortion phi^2 n alpha^2 (or its post-filtered form)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    sigma_x_sq = np.asarray(sigma_x, dtype=np.float64) ** 2
    phi_sq = np.asarray(phi, dtype=np.float64) ** 2
    sigma_w_sq = n * alpha ** 2
    if not postfilter:
        return phi_sq * sigma_w_sq
    total = sigma_x_sq + sigma_w_sq
    shrunk = np.divide(sigma_x_sq * sigma_w_sq, total, out=np.zeros(np.broadcast(total, phi_sq).shape),
                       where=total > 0)
    return phi_sq * shrunk


def embedding_distortion(plan: EmbeddingPlan, model: SiteModel) -> float:
    _check_lengths(plan, model)
    return float(np.sum(site_embedding_distortion(plan.alpha, model.sigma_x, model.phi,
                                                  plan.n, plan.postfilter)))


def empirical_weighted_mse(a: np.ndarray, b: np.ndarray, phi: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if not (a.size == b.size == phi.size):
        raise InvalidParameterError(f"length mismatch: {a.size}, {b.size}, {phi.size}")
    return float(np.sum(phi ** 2 * (a - b) ** 2))
