"""Cross-sectional and per-individual moment estimators for RCAR panels.

Two first-class pathways:

* cross_sectional - pooled lag covariances Upsilon_hat(u) averaged over
  individuals and time, the scalar covariance ratios rho_hat(u) =
  upsilon_hat(u)/upsilon_hat(0) (order 1 only), and the noise recovery
  Omega_hat = [1 - rho_hat(2)] * upsilon_hat(0).  For order > 1 the noise
  matrix Upsilon_hat(0) - Upsilon_hat(2) is reported but flagged heuristic:
  the scalar telescoping identity has no exact matrix analogue.
* per_individual - ordinary least squares transition estimates per
  individual (companion-shaped, bottom row estimated), aggregated into
  empirical coefficient-moment matrices mean_w{A_w^v kron A_w^{v+u}}.

rho_hat estimates a covariance ratio; it equals a coefficient moment only
when the coefficient draw and its implied variance are uncorrelated, so
coefficient moments come exclusively from the per-individual pathway.

The sklearn-style wrappers (CrossSectionalMoments, PerIndividualMoments)
expose the same computations as fit()-style estimators on an (N, T+1)
observation matrix, with fitted attributes and get_params support.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator

from .companion import companion_matrix, spectral_radius
from .exceptions import EstimationError, RankDeficiencyError, RcarError
from .moments import CovarianceSet, MomentSeries, kron
from .simulate import Panel
from .validation import check_panel_array

__all__ = [
    "build_states",
    "upsilon_hat",
    "a_hat_individual",
    "estimate_cross_sectional",
    "estimate_per_individual",
    "EstimationReport",
    "CrossSectionalMoments",
    "PerIndividualMoments",
]

GRAM_COND_MAX = 1e12


def _panel_matrix(panel, order=None):
    """Accept a Panel or a raw (N, T+1) array; return (array, order)."""
    if isinstance(panel, Panel):
        return panel.y, panel.order
    if order is None:
        raise RcarError("order must be given when passing a raw observation array")
    return check_panel_array(panel, order), int(order)


def build_states(series, order):
    """Stack the state vectors (y_{t-p+1}, ..., y_t)' of one series.

    Returns an (T - p + 2, p) array whose row k is the state at time
    t = p - 1 + k; consecutive rows overlap in p - 1 entries.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim != 1:
        raise RcarError("series must be 1-D")
    p = int(order)
    if p < 1:
        raise RcarError("order must be >= 1")
    if s.size < p:
        raise RcarError(f"series of length {s.size} is shorter than order {p}")
    return sliding_window_view(s, p).copy()


def _panel_states(Y, p):
    """States for every individual: (N, T-p+2, p)."""
    return sliding_window_view(Y, p, axis=1).copy()


def upsilon_hat(panel, u, order=None):
    """Pooled lag-u second-moment estimate and its summand count.

    (1/(C N)) sum_w sum_t Y_t(w) Y_{t-u}(w)' over exactly the C time points
    per individual where both states exist; the divisor always equals the
    number of summed outer products.
    """
    Y, p = _panel_matrix(panel, order)
    if u < 0:
        raise RcarError("lag must be nonnegative")
    S = _panel_states(Y, p)
    n, m = S.shape[0], S.shape[1]
    c = m - u
    if c < 1:
        raise EstimationError(
            f"lag {u} too large for horizon T={Y.shape[1] - 1} at order {p}: "
            "no state pairs available"
        )
    M = np.einsum("nti,ntj->ij", S[:, u:, :], S[:, : m - u, :])
    return M / (c * n), c * n


def a_hat_individual(series, order):
    """Least-squares transition estimate for one individual.

    Returns (companion-shaped p x p estimate, residual variance).  The
    bottom row solves the normal equations against the lagged state Gram
    matrix; shift rows are structural.  A singular Gram matrix (some linear
    combination of the state deterministic) raises RankDeficiencyError.
    """
    p = int(order)
    S = build_states(series, p)
    if S.shape[0] < 2:
        raise EstimationError("series too short: need at least two states")
    X = S[:-1]                  # lagged states
    resp = S[1:, -1]            # newest observation per state
    gram = X.T @ X
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_COND_MAX:
        raise RankDeficiencyError(
            f"lagged state Gram matrix has condition number {cond:.3e}; "
            "a linear combination of the state is deterministic"
        )
    bottom = np.linalg.solve(gram, X.T @ resp)
    A = companion_matrix(bottom[::-1])
    resid = resp - X @ bottom
    dof = max(resid.size - p, 1)
    return A, float(resid @ resid / dof)


@dataclass
class EstimationReport:
    """Estimator outputs with diagnostics and effective-count metadata."""

    pathway: str
    order: int
    n_individuals: int
    horizon: int
    upsilon: CovarianceSet
    rho: dict = None                   # u -> scalar ratio (order 1 only)
    omega: np.ndarray = None
    omega_method: str = None           # "scalar_telescoping" | "heuristic_lag2" | "per_individual"
    a_hat: np.ndarray = None           # (N, p, p)
    sigma2_hat: np.ndarray = None      # (N,)
    mu_hat: MomentSeries = None
    diagnostics: dict = field(default_factory=dict)

    def effective_count(self, u):
        return self.upsilon.meta["counts"][u]


def estimate_cross_sectional(panel, max_lag=2, order=None, rcond_min=1e-12):
    """Cross-sectional pathway: pooled covariances, ratios, noise recovery.

    Needs max_lag >= 2 for the noise estimate.  A numerically singular
    pooled lag-0 moment (some linear combination of the state is constant,
    e.g. an all-zero panel) still yields the moment tables; the ratio and
    noise estimates are then None and a rank warning is recorded.
    """
    Y, p = _panel_matrix(panel, order)
    U = int(max_lag)
    if U < 2:
        raise RcarError("max_lag must be >= 2 to recover the noise covariance")
    lags, counts = {}, {}
    for u in range(U + 1):
        lags[u], counts[u] = upsilon_hat(Y, u, order=p)
    up0 = lags[0]
    cov = CovarianceSet(kind="unconditional", lags=lags,
                        meta={"counts": counts, "source": "cross_sectional"})
    sv = np.linalg.svd(up0, compute_uv=False)
    if sv[0] <= 0 or sv[-1] / sv[0] < rcond_min:
        return EstimationReport(
            pathway="cross_sectional",
            order=p,
            n_individuals=Y.shape[0],
            horizon=Y.shape[1] - 1,
            upsilon=cov,
            diagnostics={
                "lag0_rcond": float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0,
                "rank_warning": "pooled lag-0 moment matrix is numerically "
                                "singular; ratio and noise estimates skipped",
            },
        )
    diagnostics = {"lag0_rcond": float(sv[-1] / sv[0])}
    if p == 1:
        v0 = up0[0, 0]
        rho = {u: float(lags[u][0, 0] / v0) for u in range(U + 1)}
        omega = np.array([[(1.0 - rho[2]) * v0]])
        method = "scalar_telescoping"
    else:
        rho = None
        omega = up0 - lags[2]
        method = "heuristic_lag2"
        diagnostics["omega_note"] = (
            "matrix noise recovery Upsilon(0) - Upsilon(2) is heuristic for "
            "order > 1; use the per-individual pathway for moment estimates"
        )
    return EstimationReport(
        pathway="cross_sectional",
        order=p,
        n_individuals=Y.shape[0],
        horizon=Y.shape[1] - 1,
        upsilon=cov,
        rho=rho,
        omega=omega,
        omega_method=method,
        diagnostics=diagnostics,
    )


def estimate_per_individual(panel, max_power=1, max_lag=2, order=None):
    """Per-individual pathway: OLS transitions, empirical coefficient moments.

    Estimates A(w) per individual, aggregates mean_w{A_w^v kron A_w^{v+u}}
    for 2v + u <= 2*max_power + max_lag, and recovers the noise matrix from
    per-individual Gamma_hat(0) - A_hat Gamma_hat(1)'.  Individuals whose
    OLS fails are collected and reported together.
    """
    Y, p = _panel_matrix(panel, order)
    n, width = Y.shape
    T = width - 1
    if T < 10 * p:
        warnings.warn(
            f"horizon T={T} is short for per-individual OLS at order {p} "
            f"(recommend T >= {10 * p}); estimates may be unstable",
            RuntimeWarning,
        )
    a_hats = np.empty((n, p, p))
    sigma2 = np.empty(n)
    omega_terms = np.empty((n, p, p))
    failures = []
    for i in range(n):
        try:
            A, s2 = a_hat_individual(Y[i], p)
        except RcarError as exc:
            failures.append((i + 1, str(exc)))
            continue
        a_hats[i] = A
        sigma2[i] = s2
        g0, _ = upsilon_hat(Y[i][None, :], 0, order=p)
        g1, _ = upsilon_hat(Y[i][None, :], 1, order=p)
        omega_terms[i] = g0 - A @ g1.T
    if failures:
        listed = "; ".join(f"individual {w}: {msg}" for w, msg in failures[:5])
        more = "" if len(failures) <= 5 else f" (+{len(failures) - 5} more)"
        raise EstimationError(f"per-individual estimation failed for "
                              f"{len(failures)} individuals: {listed}{more}")
    budget = 2 * int(max_power) + int(max_lag)
    entries = {}
    powers = {0: np.broadcast_to(np.eye(p), (n, p, p)).copy()}

    def power(k):
        if k not in powers:
            powers[k] = powers[k - 1] @ a_hats
        return powers[k]

    for v in range(budget // 2 + 1):
        for u in range(budget - 2 * v + 1):
            Pv, Pvu = power(v), power(v + u)
            acc = np.zeros((p * p, p * p))
            for i in range(n):
                acc += kron(Pv[i], Pvu[i])
            entries[(v, u)] = acc / n
    mu = MomentSeries(entries=entries, order=p, source="empirical")
    radii = np.array([spectral_radius(A) for A in a_hats])
    lags, counts = {}, {}
    for u in range(int(max_lag) + 1):
        lags[u], counts[u] = upsilon_hat(Y, u, order=p)
    cov = CovarianceSet(kind="unconditional", lags=lags,
                        meta={"counts": counts, "source": "cross_sectional"})
    return EstimationReport(
        pathway="per_individual",
        order=p,
        n_individuals=n,
        horizon=T,
        upsilon=cov,
        omega=omega_terms.mean(axis=0),
        omega_method="per_individual",
        a_hat=a_hats,
        sigma2_hat=sigma2,
        mu_hat=mu,
        diagnostics={
            "spectral_radii": radii,
            "nonstationary_fraction": float(np.mean(radii >= 1.0)),
        },
    )


class CrossSectionalMoments(BaseEstimator):
    """sklearn-style wrapper for the cross-sectional pathway.

    fit(X) expects an (N, T+1) observation matrix: one individual per row,
    time along columns.  Fitted attributes: upsilon_ (dict of lag
    matrices), rho_ (order 1 only), omega_, report_.
    """

    def __init__(self, order=1, max_lag=2):
        self.order = order
        self.max_lag = max_lag

    def fit(self, X, y=None):
        X = check_panel_array(X, self.order)
        report = estimate_cross_sectional(X, max_lag=self.max_lag, order=self.order)
        self.report_ = report
        self.upsilon_ = report.upsilon.lags
        self.rho_ = report.rho
        self.omega_ = report.omega
        self.n_features_in_ = X.shape[1]
        return self


class PerIndividualMoments(BaseEstimator):
    """sklearn-style wrapper for the per-individual pathway.

    Fitted attributes: coef_ (N, p, p) transition estimates, sigma2_,
    moments_ (empirical MomentSeries), omega_, report_.
    """

    def __init__(self, order=1, max_power=1, max_lag=2):
        self.order = order
        self.max_power = max_power
        self.max_lag = max_lag

    def fit(self, X, y=None):
        X = check_panel_array(X, self.order)
        report = estimate_per_individual(X, max_power=self.max_power,
                                         max_lag=self.max_lag, order=self.order)
        self.report_ = report
        self.coef_ = report.a_hat
        self.sigma2_ = report.sigma2_hat
        self.moments_ = report.mu_hat
        self.omega_ = report.omega
        self.n_features_in_ = X.shape[1]
        return self
