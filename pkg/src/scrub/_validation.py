"""Input validation helpers used by the estimators and the functional API."""
import numpy as np

from .errors import DegenerateLabelError, DimensionMismatchError, IntegrityError


def check_matrix(X, name="X", dtype=np.float64):
    """Return ``X`` as a finite 2-D array of ``dtype``.

    Raises IntegrityError for non-finite entries and ValueError for bad shapes.
    """
    X = np.asarray(X, dtype=dtype)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise IntegrityError(f"{name} contains NaN or Inf")
    return X


def check_labels(y, n_rows, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.shape[0] != n_rows:
        raise IntegrityError(f"{name} has {y.shape[0]} entries, expected {n_rows}")
    return y


def check_binary_labels(y, n_rows, name="y"):
    """Validate 0/1 labels and require both classes to be present."""
    y = check_labels(y, n_rows, name)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{name} must contain only 0/1 labels")
    y = y.astype(np.int64)
    if y.min() == y.max():
        raise DegenerateLabelError(f"{name} contains a single class ({int(y[0])})")
    return y


def check_dim(actual, expected, what="input"):
    if actual != expected:
        raise DimensionMismatchError(f"{what} has dimension {actual}, expected {expected}")


def check_vectors(directions, dim=None):
    """Stack a list/array of direction vectors into a (k, d) float64 array."""
    if isinstance(directions, np.ndarray) and directions.ndim == 2:
        W = directions.astype(np.float64, copy=False)
    else:
        rows = [np.asarray(v, dtype=np.float64).ravel() for v in directions]
        if not rows:
            if dim is None:
                raise ValueError("cannot infer dimension of an empty direction list")
            return np.zeros((0, dim))
        lengths = {r.shape[0] for r in rows}
        if len(lengths) != 1:
            raise DimensionMismatchError(f"direction vectors have mixed lengths {sorted(lengths)}")
        W = np.vstack(rows)
    if dim is not None:
        check_dim(W.shape[1], dim, "direction")
    if not np.all(np.isfinite(W)):
        raise IntegrityError("directions contain NaN or Inf")
    return W
