import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from elcrf.kernels import backends


@pytest.fixture(params=sorted(backends()))
def kernel_backend(request):
    """Runs a test once per importable kernel backend."""
    return backends()[request.param]
