#!/usr/bin/env python3
"""
Experiment Configuration
Features:
- key=value config files with # comments (same rules as the .env loader)
- Typed dataclass configs with defaults < file < --set overrides
- Attack descriptors: none | optimal | quantization:STEP | sawgn:GAMMA:SIGMA_DELTA
- Logging setup shared by every command (console + file in CONFIG_FOLDER)
"""

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Tuple, Union, get_args, get_origin, get_type_hints

from hiding.counter_rng import STREAM_CODE, STREAM_MESSAGE, STREAM_NOISE, derive_seed
from hiding.errors import ConfigError, InvalidParameterError
from hiding.signal_model import VarianceProfile, WeightRule

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_FILE_NAME = 'hiding_lab.log'
DEFAULT_CONFIG_NAME = 'experiment.conf'

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def config_folder() -> str:
    return os.getenv('CONFIG_FOLDER', '.')


def setup_logging(verbose: bool = False) -> None:
    """Console plus file logging; the log file lives in CONFIG_FOLDER."""
    log_file_path = os.path.join(config_folder(), LOG_FILE_NAME)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(log_file_path)
        ],
        force=True,
    )


def _strip_quotes(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in ('"', "'"):
        return value[1:-1]
    return value


def parse_key_value_lines(lines, source: str = '<text>') -> Dict[str, str]:
    values = {}
    for line_num, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError(f"{source}:{line_num}: expected key = value, got '{line}'")
        key, value = line.split('=', 1)
        key, value = key.strip(), _strip_quotes(value.strip())

        # Skip null characters
        if '\0' in key or '\0' in value:
            logger.warning(f"{source}:{line_num}: skipping line with null characters")
            continue
        if not key:
            raise ConfigError(f"{source}:{line_num}: empty key")
        values[key] = value
    return values


def load_key_value_file(path: str) -> Dict[str, str]:
    """Read a UTF-8 key=value file."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_key_value_lines(f, source=path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except UnicodeDecodeError as e:
        raise ConfigError(f"config file {path} is not UTF-8: {e}") from None


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """--set key=value pairs from the command line."""
    return parse_key_value_lines(pairs or [], source='--set')


def _coerce(key: str, text: str, annotation):
    optional = get_origin(annotation) is Union and type(None) in get_args(annotation)
    if optional:
        if text.strip().lower() in ('', 'none', 'null'):
            return None
        annotation = next(a for a in get_args(annotation) if a is not type(None))
    try:
        if annotation is bool:
            lowered = text.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text}")
        if annotation is int:
            return int(text, 0)
        if annotation is float:
            return float(text)
        return text
    except ValueError as e:
        raise ConfigError(f"invalid value for '{key}': {e}") from None


def _render(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return repr(value) if isinstance(value, float) else str(value)


class _KeyValueConfig:
    """Shared mapping <-> dataclass plumbing; keys come from field metadata or names."""

    @classmethod
    def _keys(cls) -> Dict[str, str]:
        return {f.metadata.get('key', f.name): f.name for f in fields(cls)}

    @classmethod
    def from_mapping(cls, *mappings: Mapping[str, str]):
        keys = cls._keys()
        hints = get_type_hints(cls)
        values = {}
        for mapping in mappings:
            for key, text in mapping.items():
                if key not in keys:
                    raise ConfigError(f"unknown configuration key '{key}' (known: {', '.join(sorted(keys))})")
                values[keys[key]] = _coerce(key, text, hints[keys[key]])
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[Mapping[str, str]] = None):
        """Defaults < config file < overrides. Without a path, CONFIG_FOLDER/experiment.conf is used if present."""
        file_values = {}
        if path is None:
            candidate = os.path.join(config_folder(), DEFAULT_CONFIG_NAME)
            if os.path.exists(candidate):
                path = candidate
        if path is not None:
            file_values = load_key_value_file(path)
            logger.info(f"Loaded configuration from {path}")
        return cls.from_mapping(file_values, overrides or {})

    def resolved(self) -> List[Tuple[str, str]]:
        """Sorted (key, value) pairs of the full configuration."""
        keys = {f.name: f.metadata.get('key', f.name) for f in fields(self)}
        return sorted((keys[name], _render(getattr(self, name))) for name in keys)

    def validate(self) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    step: Optional[float] = None
    gamma: Optional[float] = None
    sigma_delta: Optional[float] = None

    @classmethod
    def parse(cls, text: str) -> 'AttackSpec':
        parts = [p.strip() for p in text.strip().lower().split(':')]
        kind = parts[0]
        try:
            if kind in ('none', 'optimal') and len(parts) == 1:
                return cls(kind)
            if kind == 'quantization' and len(parts) <= 2:
                step = float(parts[1]) if len(parts) == 2 else None
                if step is not None and not step > 0:
                    raise ValueError('step must be > 0')
                return cls(kind, step=step)
            if kind == 'sawgn' and len(parts) in (1, 3):
                if len(parts) == 1:
                    return cls(kind)
                gamma, sigma_delta = float(parts[1]), float(parts[2])
                if gamma < 0 or sigma_delta < 0:
                    raise ValueError('gamma and sigma_delta must be >= 0')
                return cls(kind, gamma=gamma, sigma_delta=sigma_delta)
        except ValueError as e:
            raise ConfigError(f"invalid attack descriptor '{text}': {e}") from None
        raise ConfigError(f"invalid attack descriptor '{text}' "
                          f"(expected none | optimal | quantization:STEP | sawgn:GAMMA:SIGMA_DELTA)")


def _derived_seed(seed: int, stream: int) -> int:
    return int(derive_seed(seed, stream, 0))


@dataclass(frozen=True)
class ExperimentConfig(_KeyValueConfig):
    """Synthetic-host experiments, sweeps and oracle checks."""
    m: int = 4096
    n: int = 16
    seed: int = 1
    code_seed: Optional[int] = None
    noise_seed: Optional[int] = None
    message_seed: Optional[int] = None
    profile: str = 'ramp:1:10'
    weight_rule: str = 'perceptual'
    lam: float = field(default=0.002, metadata={'key': 'lambda'})
    chi: float = 0.0028
    d_xy_max: Optional[float] = None
    d_xy_prime_max: Optional[float] = None
    postfilter: bool = False
    attack: str = 'optimal'
    trials: int = 1000
    output: str = 'output.csv'
    alpha_min: float = 0.01
    alpha_max: float = 3.0
    sigma_x_min: float = 0.05
    sigma_x_max: float = 3.0
    grid_points: int = 101
    attack_points: int = 12
    step_max: float = 8.0
    oracle_cases: int = 1000
    tolerance: float = 1e-4
    attack_grid_points: int = 400
    refine_rounds: int = 3
    workers: int = 4

    def validate(self) -> None:
        checks = [
            (self.m >= 1, 'm must be >= 1'),
            (self.n >= 1, 'n must be >= 1'),
            (self.seed >= 0, 'seed must be >= 0'),
            (self.lam > 0, 'lambda must be > 0'),
            (self.chi > 0, 'chi must be > 0'),
            (self.d_xy_max is None or self.d_xy_max > 0, 'd_xy_max must be > 0'),
            (self.d_xy_prime_max is None or self.d_xy_prime_max > 0, 'd_xy_prime_max must be > 0'),
            (self.trials >= 1, 'trials must be >= 1'),
            (self.alpha_min <= self.alpha_max, 'alpha_min must be <= alpha_max'),
            (0 <= self.sigma_x_min <= self.sigma_x_max, 'need 0 <= sigma_x_min <= sigma_x_max'),
            (self.grid_points >= 2, 'grid_points must be >= 2'),
            (self.attack_points >= 2, 'attack_points must be >= 2'),
            (self.step_max > 0, 'step_max must be > 0'),
            (self.oracle_cases >= 1, 'oracle_cases must be >= 1'),
            (self.tolerance >= 0, 'tolerance must be >= 0'),
            (self.attack_grid_points >= 2, 'attack_grid_points must be >= 2'),
            (self.refine_rounds >= 0, 'refine_rounds must be >= 0'),
            (self.workers >= 1, 'workers must be >= 1'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            self.variance_profile()
        except InvalidParameterError as e:
            raise ConfigError(str(e)) from None
        self.rule()
        self.attack_spec()

    def variance_profile(self) -> VarianceProfile:
        return VarianceProfile.parse(self.profile)

    def rule(self) -> WeightRule:
        try:
            return WeightRule(self.weight_rule.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown weight rule '{self.weight_rule}' (perceptual | unit)") from None

    def attack_spec(self) -> AttackSpec:
        return AttackSpec.parse(self.attack)

    @property
    def calibrate(self) -> bool:
        return self.d_xy_max is not None and self.d_xy_prime_max is not None

    @property
    def effective_code_seed(self) -> int:
        return self.code_seed if self.code_seed is not None else _derived_seed(self.seed, STREAM_CODE)

    @property
    def effective_noise_seed(self) -> int:
        return self.noise_seed if self.noise_seed is not None else _derived_seed(self.seed, STREAM_NOISE)

    @property
    def effective_message_seed(self) -> int:
        return self.message_seed if self.message_seed is not None else _derived_seed(self.seed, STREAM_MESSAGE)


@dataclass(frozen=True)
class ImagePipelineConfig(_KeyValueConfig):
    """PGM + Haar DWT embedding runs."""
    input: str = ''
    output: str = ''
    report: Optional[str] = None
    levels: int = 3
    window: int = 9
    floor: float = 1e-6
    step: float = 0.0
    n: int = 156
    seed: int = 1
    code_seed: Optional[int] = None
    message_seed: Optional[int] = None
    weight_rule: str = 'perceptual'
    lam: float = field(default=0.002, metadata={'key': 'lambda'})
    chi: float = 0.0028
    d_xy_max: Optional[float] = None
    d_xy_prime_max: Optional[float] = None

    def validate(self) -> None:
        if self.levels < 1:
            raise ConfigError('levels must be >= 1')
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError('window must be a positive odd integer')
        if not self.floor > 0:
            raise ConfigError('floor must be > 0')
        if self.step < 0:
            raise ConfigError('step must be >= 0')
        if self.n < 1:
            raise ConfigError('n must be >= 1')
        if not (self.lam > 0 and self.chi > 0):
            raise ConfigError('lambda and chi must be > 0')
        try:
            WeightRule(self.weight_rule.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown weight rule '{self.weight_rule}' (perceptual | unit)") from None

    def rule(self) -> WeightRule:
        return WeightRule(self.weight_rule.strip().lower())

    @property
    def calibrate(self) -> bool:
        return self.d_xy_max is not None and self.d_xy_prime_max is not None

    @property
    def report_path(self) -> str:
        if self.report:
            return self.report
        stem, _ = os.path.splitext(self.output or self.input)
        return stem + '.json'

    @property
    def effective_code_seed(self) -> int:
        return self.code_seed if self.code_seed is not None else _derived_seed(self.seed, STREAM_CODE)

    @property
    def effective_message_seed(self) -> int:
        return self.message_seed if self.message_seed is not None else _derived_seed(self.seed, STREAM_MESSAGE)
