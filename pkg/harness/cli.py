#!/usr/bin/env python3
"""
Information-Hiding Lab command line.
Features:
- Step-by-step pipeline: gen -> optimize -> embed -> attack -> extract (CSV in, CSV out)
- Figure-data sweeps: sweep-domains, sweep-alpha, sweep-attack
- Image pipeline on 8-bit PGM files: image-embed, image-extract
- oracle-check: closed forms against brute force, non-zero exit on any gap over tolerance

Usage: python -m harness.cli <command> [--config FILE] [--set key=value ...] [-v]
"""

import argparse
import logging
import math
import sys
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from hiding.attack_channel import AttackPlan, Regime, apply_attack, quantization_attack
from hiding.embedder import EmbeddingPlan, embed, postfilter_gain
from hiding.errors import ConfigError, HidingLabError
from hiding.extractor import ChannelAssumption, map_decode
from hiding.game_solver import calibrate_multipliers, solve_equilibrium
from hiding.signal_model import SiteModel, message_bits, spreading_code
from harness.config import ExperimentConfig, ImagePipelineConfig, parse_overrides, setup_logging
from harness.csv_output import read_csv, require_columns, write_csv
from harness.image_pipeline import cmd_image_embed, cmd_image_extract
from harness.oracle_check import cmd_oracle_check
from harness.sweeps import build_host, cmd_sweep_alpha, cmd_sweep_attack, cmd_sweep_domains

logger = logging.getLogger(__name__)

_REGIME_BY_LABEL = {r.label: r for r in Regime}


def _experiment_config(args) -> ExperimentConfig:
    overrides = parse_overrides(args.overrides)
    if getattr(args, 'output', None):
        overrides['output'] = args.output
    return ExperimentConfig.load(args.config, overrides)


def _image_config(args) -> ImagePipelineConfig:
    overrides = parse_overrides(args.overrides)
    for key in ('input', 'output', 'report'):
        if getattr(args, key, None):
            overrides[key] = getattr(args, key)
    return ImagePipelineConfig.load(args.config, overrides)


def _load_plan(path: str) -> Tuple[Dict[str, str], pd.DataFrame, SiteModel]:
    header, plan = read_csv(path)
    require_columns(plan, ('site', 'sigma_x', 'phi', 'alpha', 'regime', 'gamma', 'sigma_delta_sq'), path)
    model = SiteModel(sigma_x=plan['sigma_x'].to_numpy(), phi=plan['phi'].to_numpy())
    return header, plan, model


def _signal(path: str, column: str) -> Tuple[Dict[str, str], np.ndarray]:
    header, frame = read_csv(path)
    require_columns(frame, ('site', column), path)
    return header, frame[column].to_numpy(dtype=np.float64)


def _plan_n(header: Dict[str, str], config: ExperimentConfig) -> int:
    return int(header.get('n', config.n))


def _plan_postfilter(header: Dict[str, str], config: ExperimentConfig) -> bool:
    return header.get('postfilter', 'true' if config.postfilter else 'false') == 'true'


def cmd_gen(config: ExperimentConfig) -> pd.DataFrame:
    x, model = build_host(config)
    frame = pd.DataFrame({'site': np.arange(model.m), 'x': x, 'sigma_x': model.sigma_x, 'phi': model.phi})
    write_csv(config.output, frame, config.resolved() + [('command', 'gen')])
    return frame


def cmd_optimize(config: ExperimentConfig, host_path: str) -> pd.DataFrame:
    _, host = read_csv(host_path)
    require_columns(host, ('site', 'sigma_x', 'phi'), host_path)
    model = SiteModel(sigma_x=host['sigma_x'].to_numpy(), phi=host['phi'].to_numpy())
    if config.calibrate:
        _, _, report = calibrate_multipliers(model, config.n, config.d_xy_max, config.d_xy_prime_max,
                                             config.postfilter)
    else:
        report = solve_equilibrium(model, config.n, config.lam, config.chi, config.postfilter)
    frame = pd.DataFrame({
        'site': np.arange(model.m),
        'sigma_x': model.sigma_x,
        'phi': model.phi,
        'alpha': report.alpha,
        'regime': [Regime(int(r)).label for r in report.regime],
        'gamma': report.gamma,
        'sigma_delta_sq': report.sigma_delta_sq,
        'rho': report.rho,
    })
    header = config.resolved() + [('command', 'optimize')] + \
        [(f'equilibrium_{k}', v) for k, v in report.summary().items()]
    write_csv(config.output, frame, header)
    print(f"✅ Equilibrium: Eb/N0={report.eb_n0:.6g}, D_xy={report.d_xy:.6g}, D_xy'={report.d_xy_prime:.6g}")
    return frame


def cmd_embed(config: ExperimentConfig, host_path: str, plan_path: str) -> pd.DataFrame:
    _, x = _signal(host_path, 'x')
    plan_header, plan, model = _load_plan(plan_path)
    n = _plan_n(plan_header, config)
    message = message_bits(config.effective_message_seed, n)
    embedding = EmbeddingPlan(message=message, alpha=plan['alpha'].to_numpy(),
                              code_seed=config.effective_code_seed,
                              postfilter=_plan_postfilter(plan_header, config))
    y = embed(x, embedding, model)
    frame = pd.DataFrame({'site': np.arange(model.m), 'y': y})
    header = config.resolved() + [('command', 'embed'), ('message_seed_used', config.effective_message_seed),
                                  ('code_seed_used', config.effective_code_seed)]
    write_csv(config.output, frame, header)
    return frame


def _optimal_plan(plan: pd.DataFrame, noise_seed: int) -> AttackPlan:
    regime = np.array([_REGIME_BY_LABEL[label] for label in plan['regime']], dtype=np.int8)
    return AttackPlan(gamma=plan['gamma'].to_numpy(), sigma_delta=np.sqrt(plan['sigma_delta_sq'].to_numpy()),
                      regime=regime, noise_seed=noise_seed)


def cmd_attack(config: ExperimentConfig, input_path: str, plan_path: str) -> pd.DataFrame:
    _, y = _signal(input_path, 'y')
    _, plan, model = _load_plan(plan_path)
    spec = config.attack_spec()
    if spec.kind == 'none':
        y_prime = y.copy()
    elif spec.kind == 'optimal':
        y_prime = apply_attack(y, _optimal_plan(plan, config.effective_noise_seed))
    elif spec.kind == 'quantization':
        if spec.step is None:
            raise ConfigError('attack command needs quantization:STEP')
        y_prime = quantization_attack(y, spec.step)
    else:
        if spec.gamma is None:
            raise ConfigError('attack command needs sawgn:GAMMA:SIGMA_DELTA')
        y_prime = apply_attack(y, AttackPlan.custom(model.m, spec.gamma, spec.sigma_delta,
                                                    config.effective_noise_seed))
    frame = pd.DataFrame({'site': np.arange(model.m), 'y': y_prime})
    write_csv(config.output, frame, config.resolved() + [('command', 'attack')])
    return frame


def decoder_assumption(config: ExperimentConfig, plan: pd.DataFrame, model: SiteModel, n: int,
                       postfilter: bool = False) -> ChannelAssumption:
    """What the extractor assumes, following the configured attack descriptor and the plan's post-filter."""
    alpha = plan['alpha'].to_numpy()
    gain = postfilter_gain(model.sigma_x_sq, n * alpha ** 2) if postfilter else None
    spec = config.attack_spec()
    if spec.kind == 'optimal':
        return ChannelAssumption.matched(_optimal_plan(plan, 0), alpha, model, n, gain)
    if spec.kind == 'sawgn' and spec.gamma is not None:
        return ChannelAssumption.matched(AttackPlan.custom(model.m, spec.gamma, spec.sigma_delta), alpha, model, n,
                                         gain)
    if spec.kind == 'quantization' and spec.step is not None:
        return ChannelAssumption.unattacked(alpha, model, n, sigma_delta=spec.step / math.sqrt(12.0),
                                            filter_gain=gain)
    return ChannelAssumption.unattacked(alpha, model, n, filter_gain=gain)


def cmd_extract(config: ExperimentConfig, input_path: str, plan_path: str) -> pd.DataFrame:
    _, y_prime = _signal(input_path, 'y')
    plan_header, plan, model = _load_plan(plan_path)
    n = _plan_n(plan_header, config)
    assumption = decoder_assumption(config, plan, model, n, _plan_postfilter(plan_header, config))
    truth = message_bits(config.effective_message_seed, n).bits
    decoded = map_decode(y_prime, spreading_code(config.effective_code_seed, n, model.m), assumption)
    decoded = decoded.with_truth(truth)
    frame = pd.DataFrame({'bit': np.arange(n), 'soft': decoded.soft, 'hard': decoded.hard, 'truth': truth})
    header = config.resolved() + [('command', 'extract'), ('eb_n0', decoded.eb_n0),
                                  ('sigma_b_sq', decoded.sigma_b_sq), ('ber', decoded.ber),
                                  ('predicted_ber', decoded.predicted_ber)]
    write_csv(config.output, frame, header)
    print(f"✅ Extracted {n} bits: BER={decoded.ber:.4g} (predicted {decoded.predicted_ber:.4g}), "
          f"Eb/N0={decoded.eb_n0:.6g}")
    return frame


def _run_experiment(handler):
    def run(args) -> int:
        handler(_experiment_config(args))
        return 0
    return run


def _run_image_embed(args) -> int:
    report = cmd_image_embed(_image_config(args))
    print(f"✅ Embedded {report['n']} bits: Eb/N0={report['eb_n0']:.6g}, "
          f"mean |pixel change|={report['mean_abs_change']:.4g}")
    return 0


def _run_image_extract(args) -> int:
    decoded = cmd_image_extract(_image_config(args))
    bits = ''.join('1' if b > 0 else '0' for b in decoded.hard)
    print(f"✅ Bits: {bits}")
    if decoded.ber is not None:
        print(f"   BER: {decoded.ber:.4g} (predicted {decoded.predicted_ber:.4g}), Eb/N0={decoded.eb_n0:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='key=value config file (default: $CONFIG_FOLDER/experiment.conf)')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override one configuration key (repeatable)')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')

    parser = argparse.ArgumentParser(prog='python -m harness.cli',
                                     description='Spread-spectrum information-hiding lab')
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name: str, help_text: str, handler, *file_flags: str):
        p = sub.add_parser(name, parents=[common], help=help_text)
        for flag in file_flags:
            p.add_argument(f'--{flag}', required=flag in ('host', 'plan', 'input') and name not in (
                'image-embed', 'image-extract'), default=None)
        if 'output' not in file_flags:
            p.add_argument('--output', default=None)
        p.set_defaults(handler=handler)
        return p

    add('gen', 'generate a synthetic host', _run_experiment(cmd_gen))
    add('optimize', 'solve the game for a host', lambda a: _run_with_files(a, cmd_optimize, 'host'), 'host')
    add('embed', 'embed the message', lambda a: _run_with_files(a, cmd_embed, 'host', 'plan'), 'host', 'plan')
    add('attack', 'apply the configured attack', lambda a: _run_with_files(a, cmd_attack, 'input', 'plan'),
        'input', 'plan')
    add('extract', 'decode the message', lambda a: _run_with_files(a, cmd_extract, 'input', 'plan'),
        'input', 'plan')
    add('sweep-domains', 'regime map data', _run_experiment(cmd_sweep_domains))
    add('sweep-alpha', 'optimal strength curves', _run_experiment(cmd_sweep_alpha))
    add('sweep-attack', 'scheme comparison under attack', _run_experiment(cmd_sweep_attack))
    add('image-embed', 'embed into a PGM image', _run_image_embed, 'input', 'output', 'report')
    add('image-extract', 'extract from a PGM image', _run_image_extract, 'input', 'report')
    add('oracle-check', 'closed forms against brute force',
        lambda a: cmd_oracle_check(_experiment_config(a)))
    return parser


def _run_with_files(args, handler, *flags: str) -> int:
    handler(_experiment_config(args), *(getattr(args, flag) for flag in flags))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger.info(f"Starting {args.command}")
    try:
        status = args.handler(args)
    except HidingLabError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {e}")
        return 2
    logger.info(f"Finished {args.command} (exit status {status})")
    return status


if __name__ == '__main__':
    sys.exit(main())
