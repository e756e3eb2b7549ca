"""Recurrence kernels with backend selection at import time.

The compiled Cython backend (``vdparse.kernels._core``) is preferred when it
built successfully; otherwise the pure-numpy reference backend is used.
Set ``VDPARSE_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the
active implementation ("cython" or "numpy").
"""

import os

from . import pyref

if os.environ.get("VDPARSE_PURE_PYTHON"):
    _impl = pyref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pyref

BACKEND = _impl.BACKEND
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward

__all__ = [
    "BACKEND",
    "lstm_forward",
    "lstm_backward",
    "gru_forward",
    "gru_backward",
    "pyref",
]
