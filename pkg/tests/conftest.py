import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smoothcert.core import ExpectationMode, NoiseConfig
from smoothcert.mechanisms import MechanismId


@pytest.fixture(scope="session")
def unit_noise() -> NoiseConfig:
    return NoiseConfig(sigma=1.0)


@pytest.fixture(scope="session")
def grid_multinomial_small():
    """30x30 all-mechanism multinomial sweep shared by module tests."""
    from smoothcert.analysis import sweep_simplex

    return sweep_simplex(list(MechanismId), NoiseConfig(sigma=1.0), 30,
                         ExpectationMode.MULTINOMIAL)
