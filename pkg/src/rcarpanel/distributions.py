"""Model description types: coefficient distributions, noise, panel geometry.

A model is a coefficient-vector law (per individual), a noise-variance law,
and the panel dimensions (N individuals, observations t = 0..T).  Degenerate
and finite-discrete coefficient laws admit exact expectations by enumerating
atoms; the gaussian law requires seeded sampling and is always flagged
approximate.
"""

from dataclasses import dataclass, field

import numpy as np

from .companion import DEFAULT_BOUNDARY_TOL, companion_matrix, spectral_radius
from .exceptions import RcarError
from .validation import check_coeffs, check_weights

__all__ = [
    "CoefficientDistribution",
    "DegenerateCoefficients",
    "DiscreteCoefficients",
    "GaussianCoefficients",
    "NoiseSpec",
    "ModelSpec",
    "SecondOrderCheck",
    "is_second_order_stationary",
    "GAUSSIAN_SAMPLE_DEFAULT",
]

# Sample budget for moment expectations under the gaussian coefficient law.
GAUSSIAN_SAMPLE_DEFAULT = 100_000


class CoefficientDistribution:
    """Base class for per-individual coefficient-vector laws."""

    #: order p of the coefficient vectors
    order: int

    @property
    def is_exact(self):
        """True when expectations can be computed by enumerating atoms."""
        return False

    def atoms(self):
        """List of (coefficient vector, probability) pairs; exact laws only."""
        raise RcarError(
            f"{type(self).__name__} has no finite atom representation; "
            "use sampling mode"
        )

    def mean(self):
        raise NotImplementedError

    def sample(self, rng, size=None):
        """Draw coefficient vectors; shape (p,) or (size, p)."""
        raise NotImplementedError


@dataclass(frozen=True)
class DegenerateCoefficients(CoefficientDistribution):
    """Point mass at a single coefficient vector (fixed-coefficient AR(p))."""

    value: tuple

    def __post_init__(self):
        v = check_coeffs(self.value)
        object.__setattr__(self, "value", tuple(float(x) for x in v))

    @property
    def order(self):
        return len(self.value)

    @property
    def is_exact(self):
        return True

    def atoms(self):
        return [(np.array(self.value), 1.0)]

    def mean(self):
        return np.array(self.value)

    def sample(self, rng, size=None):
        v = np.array(self.value)
        if size is None:
            return v.copy()
        return np.tile(v, (size, 1))


@dataclass(frozen=True)
class DiscreteCoefficients(CoefficientDistribution):
    """Finite mixture of coefficient vectors with positive weights."""

    values: tuple        # tuple of coefficient tuples, all length p
    weights: tuple = None  # defaults to uniform

    def __post_init__(self):
        if len(self.values) < 1:
            raise RcarError("discrete coefficient law needs at least one atom")
        vecs = [check_coeffs(v) for v in self.values]
        p = vecs[0].size
        for v in vecs[1:]:
            if v.size != p:
                raise RcarError("all atoms must share the same order p")
        w = self.weights
        if w is None:
            w = np.full(len(vecs), 1.0 / len(vecs))
        w = check_weights(w, len(vecs))
        object.__setattr__(self, "values", tuple(tuple(float(x) for x in v) for v in vecs))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def order(self):
        return len(self.values[0])

    @property
    def is_exact(self):
        return True

    def atoms(self):
        return [(np.array(v), w) for v, w in zip(self.values, self.weights)]

    def mean(self):
        return sum(w * np.array(v) for v, w in zip(self.values, self.weights))

    def sample(self, rng, size=None):
        k = rng.choice(len(self.values), size=size, p=np.array(self.weights))
        arr = np.array(self.values)
        return arr[k]


@dataclass(frozen=True)
class GaussianCoefficients(CoefficientDistribution):
    """Gaussian coefficient vector with given mean and PSD covariance.

    Places positive mass on nonstationary draws whenever the covariance is
    nonzero; every moment computed under this law is sample-based.
    """

    mean_vector: tuple
    covariance: tuple    # p x p, symmetric PSD

    def __post_init__(self):
        m = check_coeffs(self.mean_vector)
        C = np.asarray(self.covariance, dtype=float)
        p = m.size
        if C.shape != (p, p):
            raise RcarError(f"covariance must be {p}x{p}, got {C.shape}")
        if not np.allclose(C, C.T, atol=1e-12):
            raise RcarError("covariance must be symmetric")
        ev = np.linalg.eigvalsh(0.5 * (C + C.T))
        if ev.min() < -1e-10 * max(1.0, ev.max()):
            raise RcarError("covariance must be positive semi-definite")
        object.__setattr__(self, "mean_vector", tuple(float(x) for x in m))
        object.__setattr__(self, "covariance", tuple(tuple(float(x) for x in row) for row in C))

    @property
    def order(self):
        return len(self.mean_vector)

    def mean(self):
        return np.array(self.mean_vector)

    def sample(self, rng, size=None):
        m = np.array(self.mean_vector)
        C = np.array(self.covariance)
        # svd method tolerates semi-definite covariances
        out = rng.multivariate_normal(m, C, size=size, method="svd")
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Law of the per-individual innovation variance sigma^2.

    Innovations are zero-mean gaussian with the drawn variance, iid over time
    within an individual.  Either a single constant variance or a finite
    mixture of strictly positive variance atoms.
    """

    variances: tuple           # variance atoms, all > 0 (or >= 0, see below)
    weights: tuple = None      # defaults to uniform

    # A zero atom is permitted only as the single (constant) atom: it encodes
    # the noiseless limit used by diagnostics, not a valid model variance.
    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if v.ndim != 1 or v.size < 1:
            raise RcarError("noise spec needs at least one variance atom")
        if not np.all(np.isfinite(v)):
            raise RcarError("variance atoms must be finite")
        if v.size == 1:
            if v[0] < 0:
                raise RcarError("variance must be nonnegative")
        elif np.any(v <= 0):
            raise RcarError("mixture variance atoms must be strictly positive")
        w = self.weights
        if w is None:
            w = np.full(v.size, 1.0 / v.size)
        w = check_weights(w, v.size)
        object.__setattr__(self, "variances", tuple(float(x) for x in v))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def constant(cls, sigma2):
        return cls(variances=(float(sigma2),))

    @property
    def is_constant(self):
        return len(self.variances) == 1

    def atoms(self):
        return list(zip(self.variances, self.weights))

    def mean_variance(self):
        return float(np.dot(self.variances, self.weights))

    def omega(self, p, sigma2=None):
        """The p x p innovation covariance of the state recursion.

        Zero everywhere except the (p, p) entry, which is sigma^2 (the given
        draw, or the mean variance when omitted).
        """
        s2 = self.mean_variance() if sigma2 is None else float(sigma2)
        M = np.zeros((p, p))
        M[p - 1, p - 1] = s2
        return M

    def omega_bar(self, p):
        """E over individuals of the state innovation covariance."""
        return self.omega(p)

    def sample_variance(self, rng):
        if self.is_constant:
            # no stream consumption for a deterministic value
            return self.variances[0]
        k = rng.choice(len(self.variances), p=np.array(self.weights))
        return self.variances[k]


@dataclass(frozen=True)
class ModelSpec:
    """Full generative description of an RCAR(p) panel."""

    coeff_dist: CoefficientDistribution
    noise: NoiseSpec
    n_individuals: int
    horizon: int             # observations run t = 0..horizon

    def __post_init__(self):
        if not isinstance(self.coeff_dist, CoefficientDistribution):
            raise RcarError("coeff_dist must be a CoefficientDistribution")
        if not isinstance(self.noise, NoiseSpec):
            raise RcarError("noise must be a NoiseSpec")
        if self.n_individuals < 1:
            raise RcarError("need at least one individual")
        if self.horizon < self.order:
            raise RcarError(
                f"horizon T={self.horizon} must be >= order p={self.order}"
            )

    @property
    def order(self):
        return self.coeff_dist.order


@dataclass(frozen=True)
class SecondOrderCheck:
    """Outcome of the second-order stationarity criterion.

    Truthy iff the spectral radius of E{A kron A} is below 1 - tol.  When the
    expectation had to be estimated by sampling (gaussian law), approximate
    is True and sample_size records the budget.
    """

    stationary: bool
    radius: float
    tol: float
    approximate: bool = False
    sample_size: int = None

    def __bool__(self):
        return self.stationary


def mean_kron_square(dist, samples=None, seed=None):
    """E{A(w) kron A(w)} for a coefficient law.

    Exact probability-weighted sum over atoms for degenerate/discrete laws;
    seeded Monte Carlo mean for the gaussian law.
    """
    p = dist.order
    if dist.is_exact:
        M = np.zeros((p * p, p * p))
        for vec, w in dist.atoms():
            A = companion_matrix(vec)
            M += w * np.kron(A, A)
        return M, None
    n = GAUSSIAN_SAMPLE_DEFAULT if samples is None else int(samples)
    rng = np.random.default_rng(0 if seed is None else seed)
    draws = dist.sample(rng, size=n)
    M = np.zeros((p * p, p * p))
    for vec in draws:
        A = companion_matrix(vec)
        M += np.kron(A, A)
    M /= n
    return M, n


def is_second_order_stationary(dist, tol=DEFAULT_BOUNDARY_TOL, samples=None, seed=None):
    """Second-order stationarity of the coefficient law.

    The criterion is spectral_radius(E{A kron A}) < 1 - tol, which governs
    convergence of the second-moment series.  Returns a SecondOrderCheck
    usable as a boolean.
    """
    if not 0.0 < tol <= 0.1:
        raise RcarError(f"boundary tolerance must lie in (0, 0.1], got {tol}")
    M, n = mean_kron_square(dist, samples=samples, seed=seed)
    rho = spectral_radius(M)
    return SecondOrderCheck(
        stationary=bool(rho < 1.0 - tol),
        radius=rho,
        tol=tol,
        approximate=not dist.is_exact,
        sample_size=n,
    )
