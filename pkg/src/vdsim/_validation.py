"""Small input-validation helpers, in the spirit of ``sklearn.utils.validation``."""
import math

import numpy as np

from .errors import ConfigError, SchemaError


def check_unit_interval(value, name="value"):
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_probability(value, field):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {value!r}") from None
    if not (0.0 <= value <= 1.0):
        raise ConfigError(field, f"probability must lie in [0, 1], got {value}")
    return value


def check_distribution(probs, field, tol=1e-9):
    """Validate a mapping of probabilities that must sum to one."""
    out = {k: check_probability(v, f"{field}.{k}") for k, v in probs.items()}
    total = sum(out.values())
    if abs(total - 1.0) > tol:
        raise ConfigError(field, f"probabilities must sum to 1, got {total:.6g}")
    return out


def check_positive_int(value, field, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {value}")
    return int(value)


def check_columns(frame, required, context="dataset"):
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(missing, context)
    return frame


def as_float_array(x, name, ndim=None):
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
