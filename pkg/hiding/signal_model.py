"""
Host-signal statistical model.
Features:
- Non-i.i.d. Gaussian host generation from textual variance profiles
- Sliding-window per-site deviation estimation for real signals
- Perceptual weights phi_i
- Seeded +/-1 spreading codes evaluated lazily in site chunks

sigma_x is always a standard deviation; formulas square it where a variance is meant.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from hiding.counter_rng import (
    STREAM_CODE,
    STREAM_HOST,
    STREAM_MESSAGE,
    counter_normal,
    counter_sign,
)
from hiding.errors import InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_VARIANCE_FLOOR = 1e-6
DEFAULT_CHUNK_SITES = 8192


class WeightRule(Enum):
    PERCEPTUAL = "perceptual"
    UNIT = "unit"


class ProfileKind(Enum):
    CONSTANT = "constant"
    RAMP = "ramp"
    PIECEWISE = "piecewise"
    POWERLAW = "powerlaw"


@dataclass(frozen=True)
class VarianceProfile:
    """Per-site standard deviation recipe, e.g. ``ramp:1:3`` or ``piecewise:1,2,4``."""
    kind: ProfileKind
    params: Tuple[float, ...]

    def __post_init__(self):
        if self.kind is ProfileKind.POWERLAW:
            scale = self.params[1] if len(self.params) > 1 else 1.0
            if scale < 0:
                raise InvalidParameterError(f"power-law scale must be >= 0, got {scale}")
        elif any(p < 0 for p in self.params):
            raise InvalidParameterError(f"negative standard deviation in profile {self.describe()}")
        if not self.params:
            raise InvalidParameterError(f"profile {self.kind.value} needs parameters")

    @classmethod
    def constant(cls, sigma: float) -> "VarianceProfile":
        return cls(ProfileKind.CONSTANT, (float(sigma),))

    @classmethod
    def ramp(cls, sigma_lo: float, sigma_hi: float) -> "VarianceProfile":
        return cls(ProfileKind.RAMP, (float(sigma_lo), float(sigma_hi)))

    @classmethod
    def piecewise(cls, sigmas: Sequence[float]) -> "VarianceProfile":
        return cls(ProfileKind.PIECEWISE, tuple(float(s) for s in sigmas))

    @classmethod
    def power_law(cls, exponent: float, scale: float = 1.0) -> "VarianceProfile":
        return cls(ProfileKind.POWERLAW, (float(exponent), float(scale)))

    @classmethod
    def parse(cls, text: str) -> "VarianceProfile":
        """Parse ``kind:arg[:arg]``; piecewise takes a comma-separated list."""
        kind_text, _, rest = text.strip().partition(":")
        try:
            kind = ProfileKind(kind_text.strip().lower())
        except ValueError:
            raise InvalidParameterError(f"unknown variance profile '{kind_text}'") from None
        try:
            if kind is ProfileKind.PIECEWISE:
                values = [float(v) for v in rest.split(",") if v.strip()]
            else:
                values = [float(v) for v in rest.split(":") if v.strip()]
        except ValueError:
            raise InvalidParameterError(f"malformed variance profile '{text}'") from None

        expected = {ProfileKind.CONSTANT: (1, 1), ProfileKind.RAMP: (2, 2),
                    ProfileKind.PIECEWISE: (1, None), ProfileKind.POWERLAW: (1, 2)}[kind]
        lo, hi = expected
        if len(values) < lo or (hi is not None and len(values) > hi):
            raise InvalidParameterError(f"wrong number of parameters in profile '{text}'")
        if kind is ProfileKind.POWERLAW:
            return cls.power_law(*values)
        return cls(kind, tuple(values))

    def describe(self) -> str:
        sep = "," if self.kind is ProfileKind.PIECEWISE else ":"
        return f"{self.kind.value}:" + sep.join(repr(p) for p in self.params)

    def sigmas(self, m: int) -> np.ndarray:
        """Per-site standard deviations for m sites."""
        if m < 1:
            raise InvalidParameterError(f"site count must be >= 1, got {m}")
        if self.kind is ProfileKind.CONSTANT:
            return np.full(m, self.params[0])
        if self.kind is ProfileKind.RAMP:
            lo, hi = self.params
            if m == 1:
                return np.array([lo])
            return lo + (hi - lo) * np.arange(m) / (m - 1)
        if self.kind is ProfileKind.PIECEWISE:
            blocks = np.array_split(np.arange(m), len(self.params))
            sigma = np.empty(m)
            for block, value in zip(blocks, self.params):
                sigma[block] = value
            return sigma
        exponent, scale = self.params
        return scale * (np.arange(1, m + 1, dtype=np.float64) ** (-exponent))


@dataclass(frozen=True)
class SiteModel:
    """Per-site host deviation sigma_x and perceptual weight phi."""
    sigma_x: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        sigma_x = np.asarray(self.sigma_x, dtype=np.float64).reshape(-1)
        phi = np.asarray(self.phi, dtype=np.float64).reshape(-1)
        if sigma_x.size < 1 or sigma_x.shape != phi.shape:
            raise InvalidParameterError(
                f"sigma_x and phi must share a length >= 1 (got {sigma_x.size} and {phi.size})")
        if np.any(sigma_x < 0) or not np.all(np.isfinite(sigma_x)):
            raise InvalidParameterError("sigma_x entries must be finite and >= 0")
        if np.any(phi <= 0) or not np.all(np.isfinite(phi)):
            raise InvalidParameterError("phi entries must be finite and > 0")
        object.__setattr__(self, "sigma_x", sigma_x)
        object.__setattr__(self, "phi", phi)

    @property
    def m(self) -> int:
        return int(self.sigma_x.size)

    @property
    def sigma_x_sq(self) -> np.ndarray:
        return self.sigma_x ** 2

    @classmethod
    def from_sigmas(cls, sigma_x, rule: WeightRule = WeightRule.PERCEPTUAL) -> "SiteModel":
        sigma_x = np.asarray(sigma_x, dtype=np.float64)
        return cls(sigma_x=sigma_x, phi=perceptual_weights(sigma_x, rule))


@dataclass(frozen=True)
class Message:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits).reshape(-1)
        if bits.size < 1 or not np.all(np.isin(bits, (-1, 1))):
            raise InvalidParameterError("message bits must be a non-empty vector of +/-1")
        object.__setattr__(self, "bits", bits.astype(np.int8))

    @property
    def n(self) -> int:
        return int(self.bits.size)


@dataclass(frozen=True)
class SpreadingCode:
    """Lazily evaluated n x m matrix G(i, j) in {-1, +1}; i indexes sites, j bits."""
    seed: int
    n: int
    m: int
    chunk_sites: int = field(default=DEFAULT_CHUNK_SITES, compare=False)

    def value(self, i: int, j: int) -> int:
        return int(counter_sign(self.seed, STREAM_CODE, i, j))

    def rows(self, start: int, stop: int) -> np.ndarray:
        """Block G[start:stop, :] with shape (stop - start, n)."""
        sites = np.arange(start, stop, dtype=np.uint64)[:, None]
        bits = np.arange(self.n, dtype=np.uint64)[None, :]
        return counter_sign(self.seed, STREAM_CODE, sites, bits)

    def blocks(self) -> Iterator[Tuple[int, np.ndarray]]:
        for start in range(0, self.m, self.chunk_sites):
            stop = min(start + self.chunk_sites, self.m)
            yield start, self.rows(start, stop)

    def matrix(self) -> np.ndarray:
        return self.rows(0, self.m)

    def spread(self, bits: np.ndarray) -> np.ndarray:
        """Per-site sum_j G(i, j) b_j."""
        bits = np.asarray(bits, dtype=np.float64)
        if bits.size != self.n:
            raise InvalidParameterError(f"message has {bits.size} bits, code expects {self.n}")
        out = np.empty(self.m)
        for start, block in self.blocks():
            out[start:start + block.shape[0]] = block @ bits
        return out

    def correlate(self, values: np.ndarray) -> np.ndarray:
        """Per-bit sum_i values_i G(i, j), reduced in fixed chunk order."""
        values = np.asarray(values, dtype=np.float64)
        if values.size != self.m:
            raise InvalidParameterError(f"vector has {values.size} sites, code expects {self.m}")
        partials = [values[start:start + block.shape[0]] @ block for start, block in self.blocks()]
        return np.sum(np.vstack(partials), axis=0)


def gen_host(m: int,
             profile: VarianceProfile,
             seed: int,
             rule: WeightRule = WeightRule.PERCEPTUAL) -> Tuple[np.ndarray, SiteModel]:
    """Draw x_i ~ N(0, sigma_i^2) independently, keyed by (seed, i)."""
    sigma_x = profile.sigmas(m)
    z = counter_normal(seed, STREAM_HOST, np.arange(m, dtype=np.uint64))
    model = SiteModel.from_sigmas(sigma_x, rule)
    return sigma_x * z, model


def estimate_site_variances(samples: np.ndarray,
                            window: int,
                            floor: float = DEFAULT_VARIANCE_FLOOR) -> np.ndarray:
    """
    Local standard deviation over a centered window, reflected at the borders.

    For 2-D input (wavelet subbands) the window is window x window.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if not isinstance(window, (int, np.integer)) or window <= 0 or window % 2 == 0:
        raise InvalidParameterError(f"window must be a positive odd integer, got {window}")
    if floor <= 0:
        raise InvalidParameterError(f"variance floor must be > 0, got {floor}")
    if arr.ndim == 0 or any(window > size for size in arr.shape):
        raise InvalidParameterError(f"window {window} exceeds sample shape {arr.shape}")

    half = window // 2
    padded = np.pad(arr, half, mode="reflect") if half else arr
    views = sliding_window_view(padded, (window,) * arr.ndim)
    local = views.std(axis=tuple(range(arr.ndim, 2 * arr.ndim)))
    return np.maximum(local, floor)


def perceptual_weights(sigma_x: np.ndarray, rule: WeightRule = WeightRule.PERCEPTUAL) -> np.ndarray:
    """phi_i = (1 + sigma_i)^(-1/2), or all ones for the unit rule."""
    sigma_x = np.asarray(sigma_x, dtype=np.float64)
    if np.any(sigma_x < 0):
        raise InvalidParameterError("sigma_x entries must be >= 0")
    if rule is WeightRule.UNIT:
        return np.ones_like(sigma_x)
    return (1.0 + sigma_x) ** -0.5


def spreading_code(seed: int, n: int, m: int) -> SpreadingCode:
    if n < 1 or m < 1:
        raise InvalidParameterError(f"spreading code needs n >= 1 and m >= 1 (got n={n}, m={m})")
    return SpreadingCode(seed=int(seed), n=int(n), m=int(m))


def message_bits(seed: int, n: int) -> Message:
    """Deterministic +/-1 message of length n."""
    if n < 1:
        raise InvalidParameterError(f"message length must be >= 1, got {n}")
    return Message(counter_sign(seed, STREAM_MESSAGE, np.arange(n, dtype=np.uint64)))


def as_site_model(sigma_x: Union[np.ndarray, float], phi: Union[np.ndarray, float], m: int) -> SiteModel:
    """Broadcast scalar or vector parameters into a SiteModel of m sites."""
    return SiteModel(sigma_x=np.broadcast_to(np.asarray(sigma_x, dtype=np.float64), (m,)).copy(),
                     phi=np.broadcast_to(np.asarray(phi, dtype=np.float64), (m,)).copy())
