"""
Counter-based pseudo-random generation.

Every random value in the lab is a pure function of (seed, stream, coordinates),
so results do not depend on evaluation order, chunking or parallel schedules.

Pinned generator:
- mix64(z) is the SplitMix64 step: z += 0x9E3779B97F4A7C15, then
  z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB;
  z ^= z>>31 (all arithmetic modulo 2**64).
- counter_hash(seed, stream, c1, ..., ck) = h_k with
  h_0 = mix64(mix64(seed) ^ stream) and h_t = mix64(h_{t-1} ^ mix64(c_t)).
- counter_uniform takes the top 53 bits: u = ((h >> 11) + 1) * 2**-53, in (0, 1].
- counter_normal is Box-Muller on lanes 0 and 1 appended as a final coordinate:
  z = sqrt(-2 ln u0) * cos(2 pi u1).
"""

from typing import Union

import numpy as np

ArrayLike = Union[int, np.ndarray]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S63 = np.uint64(63)
_TWO_POW_M53 = 2.0 ** -53

# Stream tags
STREAM_HOST = 0x484F5354
STREAM_CODE = 0x434F4445
STREAM_NOISE = 0x4E4F4953
STREAM_MESSAGE = 0x4D534753
STREAM_TRIAL = 0x54524941


def _as_u64(value: ArrayLike) -> np.ndarray:
    return np.asarray(value, dtype=np.uint64)


def mix64(z: ArrayLike) -> np.ndarray:
    """SplitMix64 step applied element-wise."""
    with np.errstate(over="ignore"):
        z = _as_u64(z) + _GOLDEN
        z = (z ^ (z >> _S30)) * _MUL1
        z = (z ^ (z >> _S27)) * _MUL2
        return z ^ (z >> _S31)


def counter_hash(seed: ArrayLike, stream: int, *coords: ArrayLike) -> np.ndarray:
    """64-bit hash of (seed, stream, coords); coordinates broadcast against each other."""
    with np.errstate(over="ignore"):
        h = mix64(mix64(seed) ^ np.uint64(stream))
        for coord in coords:
            h = mix64(h ^ mix64(coord))
        return h


def counter_uniform(seed: ArrayLike, stream: int, *coords: ArrayLike) -> np.ndarray:
    """Uniform draws in (0, 1]."""
    h = counter_hash(seed, stream, *coords)
    return ((h >> _S11).astype(np.float64) + 1.0) * _TWO_POW_M53


def counter_normal(seed: ArrayLike, stream: int, *coords: ArrayLike) -> np.ndarray:
    """Standard normal draws via Box-Muller over two counter lanes."""
    u0 = counter_uniform(seed, stream, *coords, 0)
    u1 = counter_uniform(seed, stream, *coords, 1)
    return np.sqrt(-2.0 * np.log(u0)) * np.cos(2.0 * np.pi * u1)


def counter_sign(seed: ArrayLike, stream: int, *coords: ArrayLike) -> np.ndarray:
    """+1/-1 draws from the top bit of the hash (int8)."""
    h = counter_hash(seed, stream, *coords)
    return (1 - 2 * (h >> _S63).astype(np.int8)).astype(np.int8)


def derive_seed(seed: int, stream: int, index: ArrayLike) -> np.ndarray:
    """Independent sub-seed(s) for repeated trials or sub-experiments."""
    return counter_hash(seed, stream, index)
