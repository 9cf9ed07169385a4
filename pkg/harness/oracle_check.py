#!/usr/bin/env python3
"""
Oracle Check
Features:
- Random parameter draws covering all three attack regimes
- Closed-form attack cost vs refined grid minimum
- Closed-form optimal strength payoff vs alpha grid maximum
- Thread-pool execution with results kept in case order
- Per-suite summaries and a CSV of every gap
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
import pandas as pd

from hiding.attack_channel import Regime, attack_cost, classify_domain, mu_threshold
from hiding.counter_rng import STREAM_TRIAL, counter_uniform, derive_seed
from hiding.game_solver import optimal_alpha, site_payoff
from hiding.oracle import GridSpec, grid_alpha_search, grid_attack_search
from hiding.signal_model import perceptual_weights
from harness.config import ExperimentConfig
from harness.csv_output import write_csv

logger = logging.getLogger(__name__)

ATTACK_SUITE = 'attack'
ALPHA_SUITE = 'alpha'
PAYOFF_FLOOR = 1e-9


@dataclass
class OracleCase:
    suite: str
    case: int
    alpha: float
    sigma_x: float
    phi: float
    lam: float
    chi: float
    n: int
    regime: str
    closed: float
    oracle: float
    gap: float
    passed: bool = False


@dataclass
class SuiteResult:
    """Outcome of one oracle suite."""
    suite: str
    tolerance: float
    cases: List[OracleCase] = field(default_factory=list)
    start_time: float = 0.0
    end_time: float = 0.0

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    @property
    def failures(self) -> int:
        return sum(1 for c in self.cases if not c.passed)

    @property
    def max_gap(self) -> float:
        return max((c.gap for c in self.cases), default=0.0)

    @property
    def mean_gap(self) -> float:
        return float(np.mean([c.gap for c in self.cases])) if self.cases else 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def regime_counts(self) -> dict:
        counts = {}
        for c in self.cases:
            counts[c.regime] = counts.get(c.regime, 0) + 1
        return dict(sorted(counts.items()))

    def print_summary(self):
        print(f"\n📊 {self.suite} oracle suite:")
        print(f"   Cases: {len(self.cases)} {self.regime_counts()}")
        print(f"   Duration: {self.duration:.1f}s")
        print(f"   Max gap: {self.max_gap:.3e}")
        print(f"   Mean gap: {self.mean_gap:.3e}")
        print(f"   Within {self.tolerance:g}: {'✅ YES' if self.passed else f'❌ NO ({self.failures} failing)'}")


def _draw(seed: int, case: int, count: int) -> np.ndarray:
    case_seed = derive_seed(seed, STREAM_TRIAL, case)
    return counter_uniform(case_seed, STREAM_TRIAL, np.arange(count, dtype=np.uint64))


def _log_uniform(u: float, lo: float, hi: float) -> float:
    return math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))


def attack_case(config: ExperimentConfig, case: int) -> OracleCase:
    """alpha up to 1.5 mu so that erase, intermediate and wiener sites all occur."""
    u = _draw(config.seed, case, 5)
    sigma_x = _log_uniform(u[0], 0.2, 5.0)
    phi = 0.3 + 0.7 * float(u[1])
    lam = _log_uniform(u[2], 1e-3, 10.0)
    n = 1 + int(u[3] * 200) if u[3] < 1.0 else 200
    alpha = float(u[4]) * 1.5 * float(mu_threshold(lam, phi, sigma_x))

    regime = classify_domain(alpha, sigma_x, phi, lam, n)
    closed = attack_cost(regime, alpha, sigma_x, phi, lam, n)
    spec = GridSpec.for_site(alpha, sigma_x, n, points=config.attack_grid_points, refine_rounds=config.refine_rounds)
    oracle = grid_attack_search(alpha, sigma_x, phi, lam, n, spec).value
    gap = abs(closed - oracle) / max(abs(oracle), 1e-300)
    return OracleCase(ATTACK_SUITE, case, alpha, sigma_x, phi, lam, math.nan, n, regime.label,
                      closed, oracle, gap, gap <= config.tolerance)


def alpha_case(config: ExperimentConfig, case: int) -> OracleCase:
    """Gap is relative to the searched payoff, floored at PAYOFF_FLOOR."""
    u = _draw(config.seed, case, 4)
    sigma_x = _log_uniform(u[0], 0.3, 10.0)
    phi = float(perceptual_weights(sigma_x))
    lam = _log_uniform(u[1], 3e-4, 0.3)
    chi = _log_uniform(u[2], 1e-4, 0.1)
    n = 50 + int(u[3] * 151) if u[3] < 1.0 else 200

    alpha, regime = optimal_alpha(lam, chi, phi, sigma_x, n)
    closed = site_payoff(alpha, lam, chi, phi, sigma_x, n)
    _, oracle = grid_alpha_search(lam, chi, phi, sigma_x, n)
    scale = max(abs(oracle), PAYOFF_FLOOR)
    gap = max(0.0, oracle - closed) / scale
    return OracleCase(ALPHA_SUITE, case, alpha, sigma_x, phi, lam, chi, n, Regime(regime).label,
                      closed, oracle, gap, gap <= config.tolerance)


def run_suite(config: ExperimentConfig, suite: str, runner: Callable[[ExperimentConfig, int], OracleCase]) -> SuiteResult:
    result = SuiteResult(suite=suite, tolerance=config.tolerance)
    result.start_time = time.time()
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = [executor.submit(runner, config, case) for case in range(config.oracle_cases)]
        # collected in submission order so output does not depend on scheduling
        result.cases = [future.result() for future in futures]
    result.end_time = time.time()
    for c in result.cases:
        if not c.passed:
            logger.warning(f"{suite} case {c.case} over tolerance: gap={c.gap:.3e} "
                           f"(alpha={c.alpha:.6g}, sigma_x={c.sigma_x:.6g}, lambda={c.lam:.6g}, n={c.n})")
    return result


def cmd_oracle_check(config: ExperimentConfig) -> int:
    """Exit status 0 iff every gap is within tolerance."""
    suites = [run_suite(config, ATTACK_SUITE, attack_case), run_suite(config, ALPHA_SUITE, alpha_case)]
    for suite in suites:
        suite.print_summary()

    frame = pd.DataFrame([vars(c) for s in suites for c in s.cases])
    header = config.resolved() + [('command', 'oracle-check')]
    write_csv(config.output, frame, header)
    failing = sum(s.failures for s in suites)
    if failing:
        logger.warning(f"{failing} oracle case(s) exceed tolerance {config.tolerance:g}")
        return 1
    logger.info("All oracle cases within tolerance")
    return 0
