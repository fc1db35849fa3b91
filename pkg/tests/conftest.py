import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oscsync.model import SystemSpec


@pytest.fixture
def fig1_spec() -> SystemSpec:
    """The headline two-mode parameter point (quarter-turn coupling phase)."""
    return SystemSpec.two_mode(
        0.95, 1.01, 0.2, 0.21, theta1=0.0, theta2=np.pi / 4, gamma=0.1, n_max=6
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
