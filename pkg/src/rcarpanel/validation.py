"""Input validation helpers.

Small check_* functions in the spirit of sklearn's validation utilities:
normalize to float ndarrays, verify shapes/finiteness, raise early with
readable messages.
"""

import numpy as np

from .exceptions import RcarError

__all__ = [
    "check_coeffs",
    "check_square",
    "check_symmetric",
    "check_panel_array",
    "check_weights",
]


def check_coeffs(alpha, order=None):
    """Validate a coefficient vector (a_1, ..., a_p).

    Returns a 1-D float64 copy.  ``order``, when given, pins the expected
    length p.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1 or a.size < 1:
        raise RcarError(f"coefficient vector must be 1-D and non-empty, got shape {a.shape}")
    if order is not None and a.size != order:
        raise RcarError(f"coefficient vector has length {a.size}, expected order {order}")
    if not np.all(np.isfinite(a)):
        raise RcarError("coefficient vector contains non-finite entries")
    return a.copy()


def check_square(M, name="matrix"):
    """Validate a square real matrix with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise RcarError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise RcarError(f"{name} contains non-finite entries")
    return A


def check_symmetric(M, name="matrix", tol=1e-8):
    A = check_square(M, name=name)
    if not np.allclose(A, A.T, atol=tol, rtol=tol):
        raise RcarError(f"{name} is not symmetric within tolerance {tol}")
    return A


def check_panel_array(X, order=1):
    """Validate a panel observation matrix of shape (N, T+1).

    Rows are individuals, columns are time points t = 0..T.  Requires
    T >= order so at least one state vector exists per individual.
    """
    Y = np.asarray(X, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(1, -1)
    if Y.ndim != 2:
        raise RcarError(f"panel must be a 2-D array (individuals x time), got ndim={Y.ndim}")
    n, width = Y.shape
    if n < 1:
        raise RcarError("panel must contain at least one individual")
    if width < order + 1:
        raise RcarError(
            f"panel has {width} time points; need at least order+1 = {order + 1}"
        )
    if not np.all(np.isfinite(Y)):
        raise RcarError("panel contains non-finite observations")
    return Y


def check_weights(weights, n, tol=1e-12):
    """Validate mixture probabilities: positive, summing to one within tol."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise RcarError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w <= 0):
        raise RcarError("mixture weights must be strictly positive")
    if abs(w.sum() - 1.0) > tol:
        raise RcarError(f"mixture weights sum to {w.sum()!r}, expected 1 within {tol}")
    return w
