"""Global numeric precision mode.

Production arrays are float32; verification (gradient checks, oracle
comparisons) runs in float64. The mode is process-global so every module
agrees without threading a dtype through each call.
"""
from __future__ import annotations

import contextlib

import numpy as np

_MODES = {"f32": np.float32, "f64": np.float64}
_mode = "f32"


def set_mode(mode: str) -> None:
    global _mode
    if mode not in _MODES:
        raise ValueError(f"precision mode must be one of {sorted(_MODES)}, got {mode!r}")
    _mode = mode


def get_mode() -> str:
    return _mode


def dtype() -> np.dtype:
    """Default floating dtype for the current mode."""
    return np.dtype(_MODES[_mode])


@contextlib.contextmanager
def mode(tmp: str):
    """Temporarily switch precision, restoring the previous mode on exit."""
    prev = _mode
    set_mode(tmp)
    try:
        yield
    finally:
        set_mode(prev)
