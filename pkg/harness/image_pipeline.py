"""
Image pipeline: 8-bit P5 PGM <-> Haar DWT detail coefficients.
Only the detail subbands carry the mark; the approximation band is left untouched.
A JSON run report next to the output image records everything extraction needs.
"""

import json
import logging
import math
import os
from typing import Dict, List, Tuple

import numpy as np
import pywt

from hiding.attack_channel import quantization_attack
from hiding.embedder import embed, empirical_weighted_mse
from hiding.errors import ConfigError
from hiding.extractor import ChannelAssumption, DecodeReport, map_decode
from hiding.game_solver import EquilibriumReport, calibrate_multipliers, solve_equilibrium
from hiding.signal_model import SiteModel, WeightRule, estimate_site_variances, message_bits, spreading_code
from harness.config import ImagePipelineConfig

logger = logging.getLogger(__name__)

WAVELET = 'haar'
MODE = 'periodization'
_WHITESPACE = b' \t\r\n\x0b\x0c'


def _read_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    while pos < len(data):
        if data[pos:pos + 1] == b'#':
            while pos < len(data) and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b'#':
        pos += 1
    if start == pos:
        raise ConfigError('truncated PGM header')
    return data[start:pos], pos


def read_pgm(path: str) -> np.ndarray:
    """Binary P5 with maxval 255."""
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except FileNotFoundError:
        raise ConfigError(f"image not found: {path}") from None
    magic, pos = _read_token(data, 0)
    if magic != b'P5':
        raise ConfigError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width_token, pos = _read_token(data, pos)
        height_token, pos = _read_token(data, pos)
        maxval_token, pos = _read_token(data, pos)
        width, height, maxval = int(width_token), int(height_token), int(maxval_token)
    except ValueError:
        raise ConfigError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1:
        raise ConfigError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ConfigError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise ConfigError(f"{path}: missing whitespace before raster")
    raster = data[pos + 1:pos + 1 + width * height]
    if len(raster) != width * height:
        raise ConfigError(f"{path}: raster holds {len(raster)} bytes, expected {width * height}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str, image: np.ndarray) -> str:
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ConfigError('PGM output must be a 2-D uint8 array')
    height, width = image.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(f"P5\n{width} {height}\n255\n".encode('ascii'))
        f.write(np.ascontiguousarray(image).tobytes())
    return path


def check_dimensions(shape: Tuple[int, int], levels: int) -> None:
    block = 2 ** levels
    if shape[0] % block or shape[1] % block:
        raise ConfigError(f"image {shape[1]}x{shape[0]} is not divisible by 2^{levels} = {block}")


def haar_forward(image: np.ndarray, levels: int) -> List:
    check_dimensions(image.shape, levels)
    return pywt.wavedec2(np.asarray(image, dtype=np.float64), WAVELET, mode=MODE, level=levels)


def haar_inverse(coeffs: List) -> np.ndarray:
    return pywt.waverec2(coeffs, WAVELET, mode=MODE)


def detail_sites(coeffs: List, window: int, floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Flattened detail coefficients and their local deviations, coarsest level first."""
    values, sigmas = [], []
    for level in coeffs[1:]:
        for band in level:
            if window > min(band.shape):
                raise ConfigError(f"window {window} exceeds subband size {band.shape}")
            values.append(band.ravel())
            sigmas.append(estimate_site_variances(band, window, floor).ravel())
    return np.concatenate(values), np.concatenate(sigmas)


def replace_details(coeffs: List, values: np.ndarray) -> List:
    out = [coeffs[0]]
    offset = 0
    for level in coeffs[1:]:
        bands = []
        for band in level:
            size = band.size
            bands.append(values[offset:offset + size].reshape(band.shape))
            offset += size
        out.append(tuple(bands))
    return out


def to_pixels(values: np.ndarray) -> np.ndarray:
    return np.clip(np.round(values), 0, 255).astype(np.uint8)


def _solve(config: ImagePipelineConfig, model: SiteModel) -> EquilibriumReport:
    if config.calibrate:
        _, _, report = calibrate_multipliers(model, config.n, config.d_xy_max, config.d_xy_prime_max)
        return report
    return solve_equilibrium(model, config.n, config.lam, config.chi)


def embed_image(image: np.ndarray, config: ImagePipelineConfig) -> Tuple[np.ndarray, Dict]:
    coeffs = haar_forward(image, config.levels)
    x, sigma_x = detail_sites(coeffs, config.window, config.floor)
    model = SiteModel.from_sigmas(sigma_x, config.rule())
    equilibrium = _solve(config, model)
    message = message_bits(config.effective_message_seed, config.n)
    plan = equilibrium.embedding_plan(message, config.effective_code_seed)
    y = embed(x, plan, model)
    marked = to_pixels(haar_inverse(replace_details(coeffs, y)))

    change = marked.astype(np.float64) - image.astype(np.float64)
    report = {
        'shape': list(image.shape),
        'levels': config.levels,
        'window': config.window,
        'floor': config.floor,
        'weight_rule': config.rule().value,
        'n': config.n,
        'sites': model.m,
        'seed': config.seed,
        'code_seed': config.effective_code_seed,
        'message_seed': config.effective_message_seed,
        'lambda': equilibrium.lam,
        'chi': equilibrium.chi,
        'd_xy': equilibrium.d_xy,
        'd_xy_per_site': equilibrium.d_xy / model.m,
        'd_xy_prime': equilibrium.d_xy_prime,
        'eb_n0': equilibrium.eb_n0,
        'regimes': equilibrium.regime_counts(),
        'coefficient_weighted_mse': empirical_weighted_mse(y, x, model.phi),
        'pixel_mse': float(np.mean(change ** 2)),
        'mean_abs_change': float(np.mean(np.abs(change))),
        'truth': [int(b) for b in message.bits],
    }
    logger.info(f"Embedded {config.n} bits in {model.m} detail coefficients: Eb/N0={equilibrium.eb_n0:.6g}, "
                f"mean |change|={report['mean_abs_change']:.4g}")
    return marked, report


def attack_image(image: np.ndarray, step: float, levels: int) -> np.ndarray:
    """Uniform quantization of every DWT coefficient, then back to 8-bit pixels."""
    coeffs = haar_forward(image, levels)
    quantized = [quantization_attack(coeffs[0], step)]
    quantized += [tuple(quantization_attack(band, step) for band in level) for level in coeffs[1:]]
    return to_pixels(haar_inverse(quantized))


def extract_image(image: np.ndarray, report: Dict, step: float = 0.0) -> DecodeReport:
    """Blind re-estimation of the site model; strengths follow from the recorded multipliers."""
    levels, window, floor = int(report['levels']), int(report['window']), float(report['floor'])
    if list(image.shape) != list(report['shape']):
        raise ConfigError(f"image shape {list(image.shape)} does not match report {report['shape']}")
    coeffs = haar_forward(image, levels)
    y_prime, sigma_x = detail_sites(coeffs, window, floor)
    model = SiteModel.from_sigmas(sigma_x, WeightRule(report['weight_rule']))
    n = int(report['n'])
    equilibrium = solve_equilibrium(model, n, float(report['lambda']), float(report['chi']))
    assumption = ChannelAssumption.unattacked(equilibrium.alpha, model, n, sigma_delta=step / math.sqrt(12.0))
    decoded = map_decode(y_prime, spreading_code(int(report['code_seed']), n, model.m), assumption)
    if 'truth' in report:
        decoded = decoded.with_truth(np.asarray(report['truth']))
    return decoded


def write_report(path: str, report: Dict) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report, f, indent=2, sort_keys=True)
    return path


def read_report(path: str) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"run report not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"run report {path} is not valid JSON: {e}") from None


def cmd_image_embed(config: ImagePipelineConfig) -> Dict:
    if not config.input or not config.output:
        raise ConfigError('image-embed needs input and output paths')
    image = read_pgm(config.input)
    marked, report = embed_image(image, config)
    write_pgm(config.output, marked)
    report['output'] = config.output
    if config.step > 0:
        stem, ext = os.path.splitext(config.output)
        attacked_path = f"{stem}_attacked{ext or '.pgm'}"
        write_pgm(attacked_path, attack_image(marked, config.step, config.levels))
        report['attacked_output'] = attacked_path
        report['step'] = config.step
    write_report(config.report_path, report)
    logger.info(f"Wrote {config.output} and {config.report_path}")
    return report


def cmd_image_extract(config: ImagePipelineConfig) -> DecodeReport:
    if not config.input:
        raise ConfigError('image-extract needs an input path')
    report = read_report(config.report_path)
    decoded = extract_image(read_pgm(config.input), report, config.step)
    logger.info(f"Extracted {decoded.n} bits: Eb/N0={decoded.eb_n0:.6g}"
                + (f", BER={decoded.ber:.4g}" if decoded.ber is not None else ''))
    return decoded
