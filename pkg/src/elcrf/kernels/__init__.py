"""Chain DP kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set ELCRF_PURE_PYTHON=1
to force the fallback. Both backends expose forward_logz, forward_backward
and viterbi_path with identical contracts (see pychain).
"""

from __future__ import annotations

import os

from . import pychain

try:
    from . import _chain
except ImportError:  # pragma: no cover - depends on build environment
    _chain = None

if _chain is not None and not os.environ.get("ELCRF_PURE_PYTHON"):
    _impl = _chain
else:
    _impl = pychain

backend_name = _impl.name
forward_logz = _impl.forward_logz
forward_backward = _impl.forward_backward
viterbi_path = _impl.viterbi_path


def backends() -> dict:
    """All importable kernel backends, keyed by name."""
    found = {pychain.name: pychain}
    if _chain is not None:
        found[_chain.name] = _chain
    return found
