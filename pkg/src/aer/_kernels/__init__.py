"""Hot-kernel backend selection.

The compiled extension is preferred; the pure-NumPy reference is used when
the extension is missing or when ``AER_PURE_PYTHON`` is set (any non-empty
value).  Both backends expose the same functions and the same numerics.
"""

import os

from . import _reference

if os.environ.get("AER_PURE_PYTHON"):
    _impl = _reference
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _reference

BACKEND = _impl.BACKEND
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
lstm_backward_fused = _impl.lstm_backward_fused
dtw_window_scores = _impl.dtw_window_scores

reference = _reference

__all__ = [
    "BACKEND",
    "lstm_forward",
    "lstm_backward",
    "lstm_backward_fused",
    "dtw_window_scores",
    "reference",
]
