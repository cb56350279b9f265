import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from stub_backend import StubBackend  # noqa: E402


@pytest.fixture
def stub_backend():
    return StubBackend()
