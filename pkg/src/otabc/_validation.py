"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import InvalidInput


def check_samples(samples, dim=None):
    """Return ``samples`` as a float array of shape (n, d).

    One-dimensional input is read as ``n`` scalar observations.
    """
    try:
        arr = np.asarray(samples, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"samples are not numeric: {exc}") from exc
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInput(f"samples must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInput("samples must be nonempty")
    try:
        arr = check_array(arr, ensure_2d=True, dtype=np.float64, copy=False)
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInput(f"expected {dim} coordinates per sample, got {arr.shape[1]}")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInput(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidInput(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_real(value, name, low=-np.inf, high=np.inf, low_open=False, high_open=False):
    """Check that ``value`` is a real number inside the stated interval."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise InvalidInput(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if np.isnan(value):
        raise InvalidInput(f"{name} is NaN")
    too_low = value <= low if low_open else value < low
    too_high = value >= high if high_open else value > high
    if too_low or too_high:
        lb = "]" if low_open else "["
        rb = "[" if high_open else "]"
        raise InvalidInput(f"{name}={value} outside {lb}{low}, {high}{rb}")
    return value


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise InvalidInput(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)
