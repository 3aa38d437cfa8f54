"""dB <-> linear conversions; every module converts through here"""
import numpy as np


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(value, dtype=float))


def as_scalar_or_array(value):
    """Return a Python float for 0-d results, the array otherwise"""
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr
