"""Input checks shared by the estimators and the numeric routines."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, NumericalDegeneracyError


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_interval(value, name, low, high, *, closed_low=True, closed_high=True):
    value = float(value)
    ok_low = value >= low if closed_low else value > low
    ok_high = value <= high if closed_high else value < high
    if not (ok_low and ok_high):
        lb = "[" if closed_low else "("
        rb = "]" if closed_high else ")"
        raise ConfigurationError(f"{name}={value} outside {lb}{low}, {high}{rb}")
    return value


def check_observations(X, n_features=None):
    """2-D float64 array of observations, one row per time step."""
    X = check_array(np.asarray(X, dtype=np.float64), ensure_2d=False, ensure_all_finite=True)
    if X.ndim == 1:
        X = X[None, :]
    if n_features is not None and X.shape[1] != n_features:
        raise ConfigurationError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_finite(x, what, step=None):
    if not np.all(np.isfinite(x)):
        where = "" if step is None else f" at step {step}"
        raise NumericalDegeneracyError(f"non-finite {what}{where}")
    return x


def check_stochastic(table, name, axis=-1, atol=1e-6):
    """Rows along `axis` must be nonnegative and sum to one."""
    table = np.asarray(table, dtype=np.float64)
    if np.any(table < 0) or not np.allclose(table.sum(axis=axis), 1.0, rtol=0, atol=atol):
        raise ConfigurationError(f"{name} rows are not normalized")
    return table
