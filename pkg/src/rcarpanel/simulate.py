"""Reproducible RCAR(p) panel simulation.

Randomness engineering: every individual w gets its own counter-based
stream, a Philox generator keyed directly by (seed, w).  Streams are never
shared, so a panel is bit-identical for a given (spec, seed, init) no matter
in which order (or how concurrently) individuals are generated.  Within an
individual the draw order is fixed: coefficient draws (with any redraws),
the variance draw, initialization draws, then path innovations.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfiltic

from .companion import DEFAULT_BOUNDARY_TOL, companion_matrix, spectral_radius
from .distributions import ModelSpec
from .exceptions import NonstationaryError, RcarError, SimulationError
from .moments import gamma0_direct

__all__ = [
    "InitMode",
    "IndividualDraw",
    "Panel",
    "individual_stream",
    "draw_individual",
    "simulate_path",
    "simulate_panel",
    "MAX_REDRAWS",
]

# Consecutive rejected coefficient draws tolerated before concluding the
# law's mass is predominantly nonstationary.
MAX_REDRAWS = 1_000_000

BURN_IN_DEFAULT = 500


@dataclass(frozen=True)
class InitMode:
    """How a simulated path is initialized.

    * exact_stationary: pre-state drawn N(0, Gamma(0)), so the path is
      stationary from t = 0 (gaussian innovations make this exact).
    * burn_in(B): start from a zero state, discard B samples.
    * ma_truncation(J): pre-state built from the truncated moving-average
      representation sum_{j=0..J} A^j e_{-1-j}.
    * fixed_start(x0): x0 is the full state at t = 0 (its last entry is
      y_0 itself); innovations drive t >= 1.  Used by diagnostics and
      noiseless checks.
    """

    kind: str
    burn_in: int = BURN_IN_DEFAULT
    ma_terms: int = 50
    start: tuple = None

    _KINDS = ("exact_stationary", "burn_in", "ma_truncation", "fixed_start")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise RcarError(f"unknown init mode {self.kind!r}; expected one of {self._KINDS}")
        if self.kind == "burn_in" and self.burn_in < 0:
            raise RcarError("burn-in length must be >= 0")
        if self.kind == "ma_truncation" and self.ma_terms < 1:
            raise RcarError("truncated MA initialization needs at least one term")
        if self.kind == "fixed_start":
            if self.start is None:
                raise RcarError("fixed_start requires a start state")
            state = np.atleast_1d(np.asarray(self.start, dtype=float))
            if not np.all(np.isfinite(state)):
                raise RcarError("fixed_start state must be finite")
            object.__setattr__(self, "start", tuple(float(x) for x in state))

    @classmethod
    def exact_stationary(cls):
        return cls(kind="exact_stationary")

    @classmethod
    def with_burn_in(cls, n=BURN_IN_DEFAULT):
        return cls(kind="burn_in", burn_in=int(n))

    @classmethod
    def ma_truncation(cls, n_terms):
        return cls(kind="ma_truncation", ma_terms=int(n_terms))

    @classmethod
    def fixed_start(cls, state):
        return cls(kind="fixed_start", start=tuple(np.atleast_1d(state)))


@dataclass(frozen=True)
class IndividualDraw:
    """One individual's latent draw, with its stationarity flag and the
    number of rejected draws it took to obtain."""

    coeffs: np.ndarray
    sigma2: float
    stationary: bool
    redraws: int = 0


@dataclass
class Panel:
    """An observed panel: y[w, t] for w = 0..N-1 (file indexing 1..N) and
    t = 0..T, with optional hidden truth for harness use."""

    y: np.ndarray                     # (N, T+1)
    order: int
    init: InitMode
    seed: int
    truth_coeffs: np.ndarray = None   # (N, p) when kept
    truth_sigma2: np.ndarray = None   # (N,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2:
            raise RcarError("panel observations must be 2-D (individuals x time)")
        if not np.all(np.isfinite(self.y)):
            raise SimulationError("panel contains non-finite observations")
        if self.truth_coeffs is not None and len(self.truth_coeffs) != self.n_individuals:
            raise RcarError("truth must have exactly one entry per individual")

    @property
    def n_individuals(self):
        return self.y.shape[0]

    @property
    def horizon(self):
        return self.y.shape[1] - 1


def individual_stream(seed, omega):
    """The dedicated random stream of individual omega under a panel seed.

    Philox is counter-based, so keying the generator by (seed, omega)
    yields independent streams without any sequential spawning.
    """
    key = np.array([np.uint64(seed), np.uint64(omega)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _atom_stationarity(dist, tol):
    flags = []
    for vec_, w in dist.atoms():
        flags.append(spectral_radius(companion_matrix(vec_)) < 1.0 - tol)
    return flags


def draw_individual(coeff_dist, noise, rng, policy="reject", tol=DEFAULT_BOUNDARY_TOL,
                    max_redraws=MAX_REDRAWS):
    """Draw one individual's (coefficients, sigma^2).

    policy "reject" redraws until a stationary coefficient vector appears
    (the redraw count is recorded); "keep" accepts any draw and only flags
    it.  A law whose stationary mass is exhausted raises SimulationError.
    """
    if policy not in ("reject", "keep"):
        raise RcarError(f"unknown draw policy {policy!r}")
    exhausted_msg = (
        "coefficient law mass is predominantly nonstationary: "
        f"exceeded the redraw budget under policy 'reject'"
    )
    if coeff_dist.is_exact:
        flags = _atom_stationarity(coeff_dist, tol)
        none_stationary = not any(flags)
    else:
        flags = None
        none_stationary = False
    redraws = 0
    while True:
        vec_ = coeff_dist.sample(rng)
        stationary = spectral_radius(companion_matrix(vec_)) < 1.0 - tol
        if stationary or policy == "keep":
            break
        redraws += 1
        # for exact laws a fruitless redraw loop is decidable immediately
        if none_stationary or redraws >= max_redraws:
            raise SimulationError(exhausted_msg)
    sigma2 = noise.sample_variance(rng)
    return IndividualDraw(coeffs=np.asarray(vec_, dtype=float), sigma2=float(sigma2),
                          stationary=bool(stationary), redraws=redraws)


def _ar_poly(coeffs):
    return np.concatenate(([1.0], -np.asarray(coeffs, dtype=float)))


def _run_recursion(coeffs, innovations, pre_state):
    """AR recursion driven by innovations, starting from the state holding
    the p observations before the first innovation."""
    apoly = _ar_poly(coeffs)
    if len(innovations) == 0:
        return np.empty(0)
    zi = lfiltic([1.0], apoly, y=np.asarray(pre_state, dtype=float)[::-1])
    out, _ = lfilter([1.0], apoly, innovations, zi=zi)
    return out


def simulate_path(coeffs, sigma2, horizon, init, rng):
    """Simulate one individual's observations y_0..y_T.

    Deterministic given the generator state.  exact_stationary and
    ma_truncation require a stationary coefficient vector.
    """
    a = np.asarray(coeffs, dtype=float)
    p = a.size
    T = int(horizon)
    if T < 0:
        raise RcarError("horizon must be nonnegative")
    if sigma2 < 0:
        raise RcarError("sigma^2 must be nonnegative")
    scale = float(np.sqrt(sigma2))

    if init.kind == "exact_stationary":
        A = companion_matrix(a)
        try:
            G0 = gamma0_direct(A, _omega_of(p, sigma2))
        except NonstationaryError as exc:
            raise NonstationaryError(
                "exact_stationary initialization requires a stationary draw"
            ) from exc
        L = _chol_psd(G0)
        pre = L @ rng.standard_normal(p)
        e = rng.normal(0.0, scale, T + 1)
        y = _run_recursion(a, e, pre)
    elif init.kind == "ma_truncation":
        rho = spectral_radius(companion_matrix(a))
        if rho >= 1.0 - DEFAULT_BOUNDARY_TOL:
            raise NonstationaryError(
                "ma_truncation initialization requires a stationary draw"
            )
        J = init.ma_terms
        e_pre = rng.normal(0.0, scale, J + 1)
        warm = _run_recursion(a, e_pre, np.zeros(p))
        warm = np.concatenate([np.zeros(p), warm])
        pre = warm[-p:]
        e = rng.normal(0.0, scale, T + 1)
        y = _run_recursion(a, e, pre)
    elif init.kind == "burn_in":
        B = init.burn_in
        e = rng.normal(0.0, scale, B + T + 1)
        y = _run_recursion(a, e, np.zeros(p))[B:]
    elif init.kind == "fixed_start":
        x0 = np.asarray(init.start, dtype=float)
        if x0.size != p:
            raise RcarError(
                f"fixed_start state has length {x0.size}, expected order {p}"
            )
        e = rng.normal(0.0, scale, T)  # innovations for t = 1..T
        if T == 0:
            y = x0[-1:].copy()
        else:
            rest = _run_recursion(a, e, x0)
            y = np.concatenate([x0[-1:], rest])
    else:  # pragma: no cover
        raise RcarError(f"unknown init mode {init.kind!r}")

    if not np.all(np.isfinite(y)):
        raise SimulationError(
            "path overflowed to non-finite values (nonstationary draw?)"
        )
    return y


def _omega_of(p, sigma2):
    M = np.zeros((p, p))
    M[p - 1, p - 1] = sigma2
    return M


def _chol_psd(G):
    """Cholesky factor tolerant of semi-definite matrices (sigma^2 = 0)."""
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (G + G.T))
        w = np.clip(w, 0.0, None)
        return V * np.sqrt(w)


class _DrawCache:
    """Per-panel cache of stationarity flags and Gamma(0) Cholesky factors,
    keyed by the (coefficients, sigma2) values of discrete laws."""

    def __init__(self):
        self.chol = {}

    def chol_gamma0(self, coeffs, sigma2):
        key = (tuple(np.asarray(coeffs)), float(sigma2))
        if key not in self.chol:
            A = companion_matrix(coeffs)
            G0 = gamma0_direct(A, _omega_of(len(key[0]), sigma2))
            self.chol[key] = np.linalg.cholesky(G0) if sigma2 > 0 else np.zeros_like(G0)
        return self.chol[key]


def simulate_panel(spec, seed, init=None, keep_truth=False, policy="reject",
                   tol=DEFAULT_BOUNDARY_TOL):
    """Simulate a full panel under a model spec.

    Individual w (1-based) uses the stream keyed by (seed, w); identical
    (spec, seed, init) inputs give bit-identical panels.  Errors from a
    single individual are re-raised with that individual identified.
    """
    if not isinstance(spec, ModelSpec):
        raise RcarError("spec must be a ModelSpec")
    seed = int(seed)
    if seed < 0 or seed > np.iinfo(np.uint64).max:
        raise RcarError("seed must fit in an unsigned 64-bit integer")
    init = InitMode.exact_stationary() if init is None else init
    p = spec.order
    N, T = spec.n_individuals, spec.horizon
    cache = _DrawCache() if (init.kind == "exact_stationary"
                             and spec.coeff_dist.is_exact) else None
    y = np.empty((N, T + 1))
    coeffs_out = np.empty((N, p)) if keep_truth else None
    sigma2_out = np.empty(N) if keep_truth else None
    nonstat = 0
    for w in range(1, N + 1):
        rng = individual_stream(seed, w)
        try:
            draw = draw_individual(spec.coeff_dist, spec.noise, rng,
                                   policy=policy, tol=tol)
            if cache is not None and draw.stationary:
                # reuse the cached factor by inlining the stationary init
                L = cache.chol_gamma0(draw.coeffs, draw.sigma2)
                pre = L @ rng.standard_normal(p)
                e = rng.normal(0.0, np.sqrt(draw.sigma2), T + 1)
                path = _run_recursion(draw.coeffs, e, pre)
                if not np.all(np.isfinite(path)):
                    raise SimulationError("path overflowed to non-finite values")
            else:
                path = simulate_path(draw.coeffs, draw.sigma2, T, init, rng)
        except RcarError as exc:
            raise type(exc)(f"individual {w}: {exc}") from exc
        y[w - 1] = path
        nonstat += 0 if draw.stationary else 1
        if keep_truth:
            coeffs_out[w - 1] = draw.coeffs
            sigma2_out[w - 1] = draw.sigma2
    if nonstat:
        warnings.warn(
            f"{nonstat}/{N} individuals kept with nonstationary coefficient draws",
            RuntimeWarning,
        )
    return Panel(
        y=y,
        order=p,
        init=init,
        seed=seed,
        truth_coeffs=coeffs_out,
        truth_sigma2=sigma2_out,
        meta={"policy": policy, "nonstationary_kept": nonstat},
    )
