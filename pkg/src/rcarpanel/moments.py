"""Exact second-moment machinery for random coefficient AR panels.

Everything here works on the state form Y_t = A Y_{t-1} + e_t with e_t
carrying the scalar innovation in its last slot.  Two families of objects:

* conditional (one coefficient draw): the lag-0 state covariance Gamma(0)
  solving Gamma = A Gamma A' + Omega, its lags Gamma(u) = A^u Gamma(0), and
  the identification map A = Gamma(1) Gamma(0)^-1;
* unconditional (averaged over the coefficient law): the moment matrices
  mu(v, u) = E{A^v kron A^{v+u}}, the covariance series
  vec Upsilon(u) = sum_v mu(v, u) vec OmegaBar, and the spectral density
  S(l) = (1/2pi) sum_u Upsilon(u) exp(-i l u).

vec is column-stacking, so vec(A M B') = (B kron A) vec(M); this is the
convention that turns the fixed-point equation into the linear system
(I - A kron A) vec Gamma(0) = vec Omega.
"""

from dataclasses import dataclass, field

import numpy as np

from .companion import DEFAULT_BOUNDARY_TOL, companion_matrix, spectral_radius
from .distributions import GAUSSIAN_SAMPLE_DEFAULT, DegenerateCoefficients, DiscreteCoefficients
from .exceptions import NonstationaryError, RankDeficiencyError, RcarError, TruncationError
from .validation import check_square, check_symmetric

__all__ = [
    "vec",
    "unvec",
    "kron",
    "gamma0_direct",
    "gamma0_series",
    "gamma_u",
    "identify_transition",
    "moment_mu",
    "moment_series",
    "upsilon_series",
    "spectral_density",
    "spectral_existence_check",
    "CovarianceSet",
    "MomentSeries",
    "SeriesResult",
    "SpectralDensityValue",
    "ExistenceCheck",
    "SERIES_TOL_DEFAULT",
    "SERIES_MAX_TERMS_DEFAULT",
    "RCOND_MIN",
]

SERIES_TOL_DEFAULT = 1e-12
SERIES_MAX_TERMS_DEFAULT = 100_000

# Reciprocal-condition floor for the I - A kron A system.
RCOND_MIN = 1e-12


def vec(M):
    """Column-stack a matrix into a vector."""
    A = np.asarray(M)
    if A.ndim != 2:
        raise RcarError(f"vec expects a matrix, got ndim={A.ndim}")
    return A.reshape(-1, order="F")


def unvec(w, p, q=None):
    """Inverse of vec for a p x q matrix (q defaults to p)."""
    q = p if q is None else q
    v = np.asarray(w)
    if v.ndim != 1 or v.size != p * q:
        raise RcarError(f"unvec expects a vector of length {p * q}, got shape {v.shape}")
    return v.reshape((p, q), order="F")


def kron(M1, M2):
    """Kronecker product (thin wrapper so the convention lives in one place)."""
    return np.kron(np.asarray(M1), np.asarray(M2))


@dataclass
class SeriesResult:
    """A truncated matrix series: value, terms used, geometric tail estimate."""

    value: np.ndarray
    terms: int
    tail_bound: float

    def __iter__(self):  # allow  value, terms = result  style unpacking
        return iter((self.value, self.terms))


@dataclass
class CovarianceSet:
    """Lag-indexed p x p covariance matrices.

    kind is "conditional" (tied to one coefficient draw) or "unconditional"
    (tied to a coefficient law); meta records truncation orders / tail bounds
    / effective counts depending on how the set was produced.
    """

    kind: str
    lags: dict
    meta: dict = field(default_factory=dict)

    PSD_TOL = 1e-10

    def __post_init__(self):
        if self.kind not in ("conditional", "unconditional"):
            raise RcarError(f"unknown covariance kind {self.kind!r}")
        if 0 in self.lags:
            G0 = np.asarray(self.lags[0])
            if not np.allclose(G0, G0.T, atol=1e-8):
                raise RcarError("lag-0 covariance must be symmetric")
            if np.linalg.eigvalsh(0.5 * (G0 + G0.T)).min() < -self.PSD_TOL:
                raise RcarError("lag-0 covariance must be PSD up to tolerance")

    @property
    def order(self):
        return np.asarray(next(iter(self.lags.values()))).shape[0]

    def __getitem__(self, u):
        return self.lags[u]


@dataclass
class MomentSeries:
    """Container for the moment matrices mu(v, u) = E{A^v kron A^{v+u}}.

    Indexed by (v, u); entry (0, 0) is the p^2 identity.  source is "model"
    for exact/propagated expectations and "empirical" for sample means.
    """

    entries: dict
    order: int
    source: str = "model"
    tail_bound: float = 0.0

    def __post_init__(self):
        key = (0, 0)
        if key in self.entries:
            I = np.eye(self.order ** 2)
            if not np.allclose(self.entries[key], I, atol=1e-10):
                raise RcarError("moment series entry (0,0) must be the identity")

    def __getitem__(self, vu):
        return self.entries[vu]


def _require_stationary_draw(A, tol):
    rho = spectral_radius(A)
    if rho >= 1.0 - tol:
        raise NonstationaryError(
            f"companion spectral radius {rho:.6g} is not below 1 - {tol:g}; "
            "the lag-0 covariance fixed point does not exist"
        )
    return rho


def gamma0_direct(A, Omega, tol=DEFAULT_BOUNDARY_TOL):
    """Lag-0 state covariance by solving (I - A kron A) x = vec(Omega).

    The result is symmetrized and satisfies Gamma = A Gamma A' + Omega to
    solver precision.  Raises NonstationaryError when the spectral radius is
    not below 1 - tol or the system is numerically singular.
    """
    A = check_square(A, name="transition matrix")
    Omega = check_symmetric(Omega, name="innovation covariance")
    p = A.shape[0]
    if Omega.shape != (p, p):
        raise RcarError(f"innovation covariance must be {p}x{p}, got {Omega.shape}")
    _require_stationary_draw(A, tol)
    system = np.eye(p * p) - kron(A, A)
    rcond = 1.0 / np.linalg.cond(system, p=1)
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise NonstationaryError(
            f"system I - A kron A is numerically singular (rcond {rcond:.3e}); "
            "draw is too close to the stationarity boundary"
        )
    x = np.linalg.solve(system, vec(Omega))
    G = unvec(x, p)
    return 0.5 * (G + G.T)


def gamma0_series(A, Omega, tol=SERIES_TOL_DEFAULT, max_terms=SERIES_MAX_TERMS_DEFAULT):
    """Lag-0 state covariance as the partial sum of A^k Omega A'^k.

    Stops once the newest term's max-abs entry drops below tol; reports the
    number of terms and a geometric tail estimate.  Raises TruncationError
    (carrying the tail estimate) if max_terms is hit first.
    """
    A = check_square(A, name="transition matrix")
    Omega = check_symmetric(Omega, name="innovation covariance")
    _require_stationary_draw(A, DEFAULT_BOUNDARY_TOL)
    total = np.zeros_like(Omega)
    term = Omega.copy()
    prev_norm = None
    for k in range(int(max_terms)):
        norm = np.max(np.abs(term))
        if k > 0 and norm == 0.0:
            # series terminated exactly (nilpotent transition)
            return SeriesResult(0.5 * (total + total.T), k, 0.0)
        total += term
        if norm < tol:
            ratio = norm / prev_norm if prev_norm else 0.0
            tail = norm * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            return SeriesResult(0.5 * (total + total.T), k + 1, float(tail))
        prev_norm = norm
        term = A @ term @ A.T
    ratio = np.max(np.abs(term)) / prev_norm if prev_norm else 1.0
    tail = np.max(np.abs(term)) / (1.0 - ratio) if ratio < 1.0 else np.inf
    raise TruncationError(
        f"covariance series did not reach tolerance {tol:g} within {max_terms} terms",
        tail_estimate=float(tail),
        terms=int(max_terms),
    )


def gamma_u(A, gamma0, u):
    """Lag-u state covariance A^u Gamma(0); u = 0 returns Gamma(0) unchanged."""
    A = check_square(A, name="transition matrix")
    G0 = check_symmetric(gamma0, name="lag-0 covariance")
    if u < 0:
        raise RcarError("lag must be nonnegative")
    if u == 0:
        return G0.copy()
    return np.linalg.matrix_power(A, int(u)) @ G0


def identify_transition(gamma1, gamma0, cond_max=1e12):
    """Recover the transition matrix from Gamma(1) Gamma(0)^-1.

    Raises RankDeficiencyError when Gamma(0) is singular or its condition
    number exceeds cond_max, i.e. when some linear combination of the state
    is numerically deterministic.
    """
    G1 = check_square(gamma1, name="lag-1 covariance")
    G0 = check_symmetric(gamma0, name="lag-0 covariance")
    cond = np.linalg.cond(G0)
    if not np.isfinite(cond) or cond > cond_max:
        raise RankDeficiencyError(
            f"lag-0 covariance has condition number {cond:.3e}; a linear "
            "combination of the state is (numerically) deterministic, so the "
            "transition matrix is not identified"
        )
    # Gamma(1) Gamma(0)^-1  via a solve against the symmetric Gamma(0)
    return np.linalg.solve(G0.T, G1.T).T


def _exact_dist_or_raise(dist, what):
    if not dist.is_exact:
        raise RcarError(
            f"{what} requires sampling mode for gaussian coefficient laws; "
            "pass samples=... (seeded) or discretize the law first"
        )


def _sampled_atoms(dist, samples, seed):
    n = GAUSSIAN_SAMPLE_DEFAULT if samples is True else int(samples)
    rng = np.random.default_rng(0 if seed is None else seed)
    draws = dist.sample(rng, size=n)
    w = 1.0 / n
    return [(np.asarray(v), w) for v in draws], n


def _dist_atoms(dist, samples, seed):
    """(atom list, sample count or None) for exact or sampled evaluation."""
    if dist.is_exact:
        return dist.atoms(), None
    if samples is None:
        _exact_dist_or_raise(dist, "moment computation")
    return _sampled_atoms(dist, samples, seed)


def moment_mu(dist, v, u, samples=None, seed=None):
    """The p^2 x p^2 moment matrix E{A^v kron A^{v+u}}.

    Exact probability-weighted sum for degenerate/discrete laws; (v, u) =
    (0, 0) is the identity.  Gaussian laws must opt into sampling mode.
    """
    if v < 0 or u < 0:
        raise RcarError("moment indices must be nonnegative")
    atoms, _ = _dist_atoms(dist, samples, seed)
    p = dist.order
    M = np.zeros((p * p, p * p))
    for vecA, w in atoms:
        A = companion_matrix(vecA)
        Av = np.linalg.matrix_power(A, int(v))
        Avu = np.linalg.matrix_power(A, int(v + u))
        M += w * kron(Av, Avu)
    return M


def moment_series(dist, max_power, max_lag, samples=None, seed=None):
    """MomentSeries holding mu(v, u) for all 2v + u <= 2*max_power + max_lag."""
    if max_power < 0 or max_lag < 0:
        raise RcarError("moment series orders must be nonnegative")
    budget = 2 * int(max_power) + int(max_lag)
    entries = {}
    for v in range(budget // 2 + 1):
        for u in range(budget - 2 * v + 1):
            entries[(v, u)] = moment_mu(dist, v, u, samples=samples, seed=seed)
    return MomentSeries(entries=entries, order=dist.order,
                        source="model" if dist.is_exact else "sampled")


def _require_second_order(dist, samples, seed):
    from .distributions import is_second_order_stationary

    chk = is_second_order_stationary(dist, samples=samples, seed=seed)
    if not chk:
        raise NonstationaryError(
            f"coefficient law is not second-order stationary: spectral radius "
            f"of E{{A kron A}} is {chk.radius:.6g}"
        )
    return chk


def upsilon_series(dist, omega_bar, u, tol=SERIES_TOL_DEFAULT,
                   max_terms=SERIES_MAX_TERMS_DEFAULT, samples=None, seed=None):
    """Unconditional lag-u covariance via the moment series.

    vec Upsilon(u) = sum_v E{A^v kron A^{v+u}} vec(OmegaBar), truncated when
    the newest term's max-abs entry drops below tol.  OmegaBar is the mean
    state innovation covariance E{Omega_w}.
    """
    if u < 0:
        raise RcarError("lag must be nonnegative")
    Om = check_symmetric(omega_bar, name="mean innovation covariance")
    p = dist.order
    if Om.shape != (p, p):
        raise RcarError(f"mean innovation covariance must be {p}x{p}")
    _require_second_order(dist, samples, seed)
    atoms, _ = _dist_atoms(dist, samples, seed)
    mats = [companion_matrix(v) for v, _ in atoms]
    weights = [w for _, w in atoms]
    w0 = vec(Om)
    # running powers: P_i = A_i^v, Q_i = A_i^{v+u}
    P = [np.eye(p) for _ in mats]
    Q = [np.linalg.matrix_power(A, int(u)) for A in mats]
    total = np.zeros(p * p)
    prev_norm = None

    def finish(nterms, tail):
        value = unvec(total, p)
        if u == 0:
            value = 0.5 * (value + value.T)
        return SeriesResult(value, nterms, float(tail))

    for v in range(int(max_terms)):
        term = np.zeros(p * p)
        for A, w, Pi, Qi in zip(mats, weights, P, Q):
            term += w * (kron(Pi, Qi) @ w0)
        norm = np.max(np.abs(term))
        if v > 0 and norm == 0.0:
            return finish(v, 0.0)
        total += term
        if norm < tol:
            ratio = norm / prev_norm if prev_norm else 0.0
            tail = norm * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            return finish(v + 1, tail)
        prev_norm = norm
        for i, A in enumerate(mats):
            P[i] = P[i] @ A
            Q[i] = Q[i] @ A
    raise TruncationError(
        f"unconditional covariance series did not reach tolerance {tol:g} "
        f"within {max_terms} terms",
        tail_estimate=float(prev_norm) if prev_norm else None,
        terms=int(max_terms),
    )


@dataclass
class ExistenceCheck:
    """Spectral-density existence verdict with per-atom diagnostics."""

    ok: bool
    radii: np.ndarray
    tol: float
    approximate: bool = False

    def __bool__(self):
        return self.ok


def spectral_existence_check(dist, tol=DEFAULT_BOUNDARY_TOL, samples=None, seed=None):
    """True iff every atom (or sampled draw) has spectral radius < 1 - tol.

    That margin keeps (I - I kron A)^2 invertible with a summable inverse
    series, which is what the lag sum defining the spectral density needs.
    """
    if not 0.0 < tol <= 0.1:
        raise RcarError(f"boundary tolerance must lie in (0, 0.1], got {tol}")
    atoms, n = _dist_atoms(dist, samples, seed)
    radii = np.array([spectral_radius(companion_matrix(v)) for v, _ in atoms])
    return ExistenceCheck(
        ok=bool(np.all(radii < 1.0 - tol)),
        radii=radii,
        tol=tol,
        approximate=n is not None,
    )


@dataclass
class SpectralDensityValue:
    """Model spectral density at one frequency.

    value is Hermitian p x p (real symmetric at frequency 0).  tail_bound
    combines the outer lag-sum tail with the inner per-lag series tails.
    moment_route_value / moment_route_gap are populated at frequency 0 only:
    the alternative evaluation through the factorized moment series, and its
    max-abs gap from the direct lag sum.  The factorized form coincides with
    the lag sum for degenerate coefficient laws; for genuinely random
    coefficients a nonzero gap is expected and is reported, not hidden.
    """

    frequency: float
    value: np.ndarray
    truncation_order: int
    tail_bound: float
    moment_route_value: np.ndarray = None
    moment_route_gap: float = None
    moment_route_tail: float = None


def _factorized_spectral_zero(dist, omega_bar, tol, max_terms, samples, seed):
    """The factorized moment-series evaluation of 2*pi*S(0).

    vec S = (1/2pi) [I + sum_u (E{I kron A^u} + E{A^u kron I})]
                    [sum_v E{(A kron A)^v}] vec(OmegaBar),
    with both series truncated at tol.  Returns (matrix, tail bound).
    """
    p = dist.order
    atoms, _ = _dist_atoms(dist, samples, seed)
    mats = [companion_matrix(v) for v, _ in atoms]
    weights = [w for _, w in atoms]
    I = np.eye(p)
    Ipp = np.eye(p * p)

    bracket = Ipp.copy()
    powers = [A.copy() for A in mats]
    tail_bracket = np.inf
    prev = None
    for _ in range(int(max_terms)):
        term = np.zeros((p * p, p * p))
        for A, w, Au in zip(mats, weights, powers):
            term += w * (kron(I, Au) + kron(Au, I))
        bracket += term
        norm = np.max(np.abs(term))
        if norm < tol:
            ratio = norm / prev if prev else 0.0
            tail_bracket = norm * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            break
        prev = norm if norm > 0 else None
        for i, A in enumerate(mats):
            powers[i] = powers[i] @ A
    else:
        raise TruncationError("factorized spectral bracket did not converge",
                              terms=int(max_terms))

    even = upsilon_series(dist, omega_bar, 0, tol=tol, max_terms=max_terms,
                          samples=samples, seed=seed)
    x = bracket @ vec(even.value)
    value = unvec(x, p) / (2.0 * np.pi)
    # tail: bracket error on the even sum, plus bracket norm on the even tail
    bnorm = np.abs(bracket).sum(axis=1).max()
    tail = (tail_bracket * np.max(np.abs(vec(even.value)))
            + bnorm * even.tail_bound) / (2.0 * np.pi)
    return value, float(tail)


def spectral_density(dist, omega_bar, frequency, tol=SERIES_TOL_DEFAULT,
                     max_terms=SERIES_MAX_TERMS_DEFAULT, samples=None, seed=None):
    """Model spectral density at a frequency (radians), by truncated lag sum.

    S(l) = (1/2pi) [Upsilon(0) + sum_{u>=1} (Upsilon(u) e^{-ilu} +
    Upsilon(u)' e^{+ilu})], each Upsilon(u) computed by its own truncated
    series.  Raises NonstationaryError when the existence condition fails.
    At frequency 0 the factorized moment-series evaluation is attached for
    cross-checking.
    """
    chk = spectral_existence_check(dist, samples=samples, seed=seed)
    if not chk:
        raise NonstationaryError(
            "spectral density does not exist: some coefficient draw has "
            f"spectral radius >= 1 (max {chk.radii.max():.6g})"
        )
    p = dist.order
    lam = float(frequency)
    inner_tol = tol
    up0 = upsilon_series(dist, omega_bar, 0, tol=inner_tol, max_terms=max_terms,
                         samples=samples, seed=seed)
    total = up0.value.astype(complex)
    inner_tails = up0.tail_bound
    prev_norm = None
    outer_tail = np.inf
    used = 1
    for u in range(1, int(max_terms)):
        upu = upsilon_series(dist, omega_bar, u, tol=inner_tol, max_terms=max_terms,
                             samples=samples, seed=seed)
        inner_tails += upu.tail_bound
        phase = np.exp(-1j * lam * u)
        add = upu.value * phase + upu.value.T * np.conj(phase)
        total += add
        used = u + 1
        norm = np.max(np.abs(upu.value))  # phase has modulus 1
        if norm < tol:
            ratio = norm / prev_norm if prev_norm else 0.0
            outer_tail = 2.0 * norm * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            break
        prev_norm = norm if norm > 0 else None
    else:
        raise TruncationError(
            f"spectral lag sum did not reach tolerance {tol:g} within {max_terms} lags",
            terms=int(max_terms),
        )
    value = total / (2.0 * np.pi)
    tail = (outer_tail + 2.0 * inner_tails) / (2.0 * np.pi)
    out = SpectralDensityValue(
        frequency=lam,
        value=value,
        truncation_order=used,
        tail_bound=float(tail),
    )
    if lam == 0.0:
        alt, alt_tail = _factorized_spectral_zero(dist, omega_bar, tol, max_terms,
                                                  samples, seed)
        out.moment_route_value = alt
        out.moment_route_tail = alt_tail
        out.moment_route_gap = float(np.max(np.abs(alt - value.real)))
    return out
