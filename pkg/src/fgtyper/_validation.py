"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_nonempty_str(value, name):
    """Require ``value`` to be a non-empty string and return it."""
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{name} must be a non-empty string, got {value!r}")
    return value


def check_count(value, name, minimum=1):
    """Require an integer >= ``minimum`` and return it as int."""
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_open_unit(value, name, include_one=False):
    """Require a float in (0, 1) or (0, 1] and return it."""
    value = float(value)
    upper_ok = value <= 1.0 if include_one else value < 1.0
    if not (value > 0.0 and upper_ok):
        interval = "(0, 1]" if include_one else "(0, 1)"
        raise ValueError(f"{name} must lie in {interval}, got {value}")
    return value


def check_positive(value, name):
    """Require a strictly positive finite float and return it."""
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_log_probs(values, name="logits"):
    """Require a finite 1-d vector of log-probabilities (every entry <= 0)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr > 0.0):
        raise ValueError(f"{name} must be log-probabilities (entries <= 0)")
    return arr
