"""
Shared fixtures. The packages are imported from the repository root, the same
way the standalone scripts in this folder always did.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from hiding.signal_model import SiteModel, VarianceProfile, gen_host, message_bits  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_config_folder(tmp_path, monkeypatch):
    """Log files and default configs resolve inside the test's temp dir."""
    monkeypatch.setenv('CONFIG_FOLDER', str(tmp_path))
    return tmp_path


@pytest.fixture
def unit_site():
    """sigma_x^2 = 1, phi = 1, lambda = 1, n = 1: the hand-checked site."""
    return dict(sigma_x=1.0, phi=1.0, lam=1.0, n=1)


@pytest.fixture
def ramp_host():
    x, model = gen_host(4096, VarianceProfile.ramp(1.0, 10.0), seed=11)
    return x, model


@pytest.fixture
def flat_model():
    return SiteModel(sigma_x=np.ones(1000), phi=np.ones(1000))


@pytest.fixture
def four_bits():
    return message_bits(5, 4)


def find_code_seed(n, m, predicate, limit=10000):
    """First code seed whose sign matrix satisfies predicate."""
    from hiding.signal_model import spreading_code
    for seed in range(limit):
        code = spreading_code(seed, n, m)
        if predicate(code.matrix()):
            return seed
    raise AssertionError('no code seed satisfies the predicate')


@pytest.fixture
def code_seed_where():
    return find_code_seed
