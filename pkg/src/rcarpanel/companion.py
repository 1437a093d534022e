"""Companion-matrix construction and stationarity checks for scalar AR(p).

The order-p recursion y_t = a_1 y_{t-1} + ... + a_p y_{t-p} + e_t is embedded
as a first-order vector recursion on the state (y_{t-p+1}, ..., y_t)' whose
transition matrix has an identity superdiagonal in the top p-1 rows and the
reversed coefficient vector in the bottom row.  Stationarity of a draw is the
usual root condition: all roots of z^p - a_1 z^{p-1} - ... - a_p inside the
unit circle, equivalently all companion eigenvalues with modulus < 1.
"""

import numpy as np

from .exceptions import NumericalError, RcarError
from .validation import check_coeffs, check_square

__all__ = [
    "companion_matrix",
    "is_companion",
    "char_poly_roots",
    "spectral_radius",
    "is_stationary_coeffs",
    "DEFAULT_BOUNDARY_TOL",
    "ROOT_RESIDUAL_TOL",
]

# Margin below the unit circle that counts as "stationary".  The open unit
# disk itself is not numerically decidable.
DEFAULT_BOUNDARY_TOL = 1e-9

# Accept a computed root z when |poly(z)| <= ROOT_RESIDUAL_TOL * (1 + |z|^p).
ROOT_RESIDUAL_TOL = 1e-8


def companion_matrix(coeffs):
    """Build the p x p companion matrix of a coefficient vector.

    Row i < p-1 carries a single 1 in column i+1; the bottom row is the
    reversed coefficient vector (a_p, a_{p-1}, ..., a_1).  For p = 1 the
    matrix is the scalar [[a_1]].
    """
    a = check_coeffs(coeffs)
    p = a.size
    A = np.zeros((p, p))
    if p > 1:
        A[: p - 1, 1:] = np.eye(p - 1)
    A[p - 1, :] = a[::-1]
    return A


def is_companion(M, atol=0.0):
    """True when M has exact companion structure (shift rows + free bottom row)."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    p = A.shape[0]
    if p == 1:
        return True
    expect = np.zeros((p - 1, p))
    expect[:, 1:] = np.eye(p - 1)
    return bool(np.all(np.abs(A[: p - 1] - expect) <= atol))


def coeffs_from_companion(M):
    """Inverse of companion_matrix: read (a_1, ..., a_p) off the bottom row."""
    A = check_square(M, name="companion matrix")
    if not is_companion(A, atol=1e-12):
        raise RcarError("matrix does not have companion structure")
    return A[-1, ::-1].copy()


def char_poly_roots(coeffs, residual_tol=ROOT_RESIDUAL_TOL):
    """All p roots (with multiplicity) of z^p - a_1 z^{p-1} - ... - a_p.

    Each returned root z satisfies |poly(z)| <= residual_tol * (1 + |z|^p);
    a root finder failure or an oversized residual raises NumericalError
    rather than returning silent garbage.
    """
    a = check_coeffs(coeffs)
    p = a.size
    poly = np.concatenate(([1.0], -a))
    try:
        roots = np.roots(poly)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise NumericalError(f"root finder failed for coefficients {a}: {exc}") from exc
    if roots.size != p or not np.all(np.isfinite(roots)):
        raise NumericalError(f"root finder returned invalid roots for coefficients {a}")
    resid = np.abs(np.polyval(poly, roots))
    bound = residual_tol * (1.0 + np.abs(roots) ** p)
    if np.any(resid > bound):
        raise NumericalError(
            f"root residuals {resid.max():.3e} exceed tolerance for coefficients {a}"
        )
    return roots


def spectral_radius(M):
    """max |lambda_i| over the eigenvalues of a square matrix."""
    A = check_square(M)
    if A.shape[0] == 1:
        return float(abs(A[0, 0]))
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("eigenvalue computation returned non-finite values")
    return float(np.max(np.abs(ev)))


def is_stationary_coeffs(coeffs, tol=DEFAULT_BOUNDARY_TOL):
    """True iff the companion spectral radius is below 1 - tol.

    tol must lie in (0, 0.1]; it is the margin that separates "stationary"
    from the numerically undecidable boundary.
    """
    if not 0.0 < tol <= 0.1:
        raise RcarError(f"boundary tolerance must lie in (0, 0.1], got {tol}")
    return spectral_radius(companion_matrix(coeffs)) < 1.0 - tol
