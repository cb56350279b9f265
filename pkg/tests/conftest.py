import sys
from pathlib import Path

import numpy as np
import pytest

# make tests/oracles.py and tests/scene.py importable regardless of cwd
sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
