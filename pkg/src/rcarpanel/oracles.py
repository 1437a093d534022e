"""Independent reference computations ("oracles") for key numeric targets.

Each oracle rederives a target value through an elementary route that does
not touch the production moment machinery: geometric partial sums for the
scalar variance, probability-weighted enumeration with exact rationals for
discrete mixtures, the quadratic formula for order-2 roots, and
brute-force index loops for the vec/Kronecker identity.  The CLI exposes
them so any frozen constant in the test suite can be regenerated and
inspected, derivation included.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import ConfigError, RcarError

__all__ = [
    "OracleReport",
    "ar1_gamma0",
    "ar1_spectral_zero",
    "two_atom_upsilon",
    "telescoping_identity",
    "quadratic_roots",
    "kron_vec_identity",
    "run_oracle",
    "list_oracles",
]


@dataclass
class OracleReport:
    name: str
    values: dict
    lines: list = field(default_factory=list)

    def render(self):
        out = [f"oracle {self.name}"]
        out.extend("  " + line for line in self.lines)
        for key, val in self.values.items():
            out.append(f"  {key} = {val!r}")
        return "\n".join(out)


def ar1_gamma0(a, sigma2=1.0, tol=1e-15, max_terms=100000):
    """Scalar stationary variance by geometric partial sums.

    Sums sigma2 * a^(2k) until the next term falls below tol; the closed
    form sigma2 / (1 - a^2) is printed alongside for comparison.
    """
    a = float(a)
    if abs(a) >= 1.0:
        raise RcarError("partial sums diverge for |a| >= 1")
    total, term, k = 0.0, float(sigma2), 0
    while term >= tol:
        total += term
        term *= a * a
        k += 1
        if k > max_terms:
            raise RcarError("partial sums did not reach tolerance")
    closed = sigma2 / (1.0 - a * a)
    return OracleReport(
        "ar1_gamma0",
        {"gamma0": total, "closed_form": closed, "terms": k},
        [f"sum of sigma2*a^(2k), a={a}, sigma2={sigma2}, stop below {tol:g}"],
    )


def ar1_spectral_zero(a, sigma2=1.0):
    """Zero-frequency spectral density of a fixed-coefficient AR(1).

    Sums the two-sided geometric lag-covariance series in closed form:
    gamma0 * (1 + a) / (1 - a), divided by 2 pi.
    """
    a = float(a)
    if abs(a) >= 1.0:
        raise RcarError("lag sum diverges for |a| >= 1")
    gamma0 = sigma2 / (1.0 - a * a)
    lag_sum = gamma0 * (1.0 + a) / (1.0 - a)
    value = lag_sum / (2.0 * np.pi)
    return OracleReport(
        "ar1_spectral0",
        {"spectral0": value, "lag_sum": lag_sum, "gamma0": gamma0},
        [f"gamma0*(1+a)/(1-a) / (2 pi), a={a}, sigma2={sigma2}",
         "equals sigma2 / (2 pi (1-a)^2)"],
    )


def _atom_fractions(a1, a2, sigma2):
    return (Fraction(a1).limit_denominator(10 ** 12),
            Fraction(a2).limit_denominator(10 ** 12),
            Fraction(sigma2).limit_denominator(10 ** 12))


def two_atom_upsilon(u=0, a1=0.2, a2=0.4, sigma2=1.0):
    """Lag-u pooled variance of an equal-weight two-atom scalar mixture.

    Enumerates (1/2) * sigma2 * a^u / (1 - a^2) per atom in exact rational
    arithmetic and reports each addend.
    """
    u = int(u)
    if u < 0:
        raise RcarError("lag must be nonnegative")
    fa1, fa2, fs = _atom_fractions(a1, a2, sigma2)
    half = Fraction(1, 2)
    addend1 = half * fs * fa1 ** u / (1 - fa1 ** 2)
    addend2 = half * fs * fa2 ** u / (1 - fa2 ** 2)
    exact = addend1 + addend2
    return OracleReport(
        f"two_atom_upsilon (u={u})",
        {"upsilon": float(exact), "exact": exact,
         "addend_1": float(addend1), "addend_2": float(addend2)},
        [f"atoms {a1}, {a2} each weight 1/2, sigma2={sigma2}",
         f"(1/2) s a^{u}/(1-a^2) per atom, exact rational arithmetic"],
    )


def telescoping_identity(a1=0.2, a2=0.4, sigma2=1.0):
    """Exact check that lag-0 minus lag-2 pooled variance equals sigma2.

    For scalar mixtures, a^0/(1-a^2) - a^2/(1-a^2) = 1 identically, so the
    weighted difference collapses to the mean noise variance.  Verified in
    rational arithmetic; exact is True only on identity, not closeness.
    """
    up0 = two_atom_upsilon(0, a1, a2, sigma2).values["exact"]
    up2 = two_atom_upsilon(2, a1, a2, sigma2).values["exact"]
    fs = _atom_fractions(a1, a2, sigma2)[2]
    diff = up0 - up2
    return OracleReport(
        "telescoping",
        {"upsilon0": float(up0), "upsilon2": float(up2),
         "difference": float(diff), "difference_exact": diff,
         "sigma2": float(fs), "exact": diff == fs},
        ["rational-arithmetic difference of the lag-0 and lag-2 enumerations"],
    )


def quadratic_roots(alpha1, alpha2):
    """Roots of z^2 - alpha1 z - alpha2 by the quadratic formula."""
    a1, a2 = float(alpha1), float(alpha2)
    disc = a1 * a1 + 4.0 * a2
    if disc >= 0:
        s = float(np.sqrt(disc))
        roots = ((a1 + s) / 2.0, (a1 - s) / 2.0)
    else:
        s = float(np.sqrt(-disc))
        roots = (complex(a1 / 2.0, s / 2.0), complex(a1 / 2.0, -s / 2.0))
    return OracleReport(
        "roots",
        {"root_1": roots[0], "root_2": roots[1], "discriminant": disc},
        [f"z^2 - {a1} z - {a2} via the quadratic formula"],
    )


def kron_vec_identity(seed=0, p=3):
    """Brute-force check of vec(A M B') = (B kron A) vec(M).

    Builds the Kronecker matrix entry by entry with index loops (no library
    product) on seeded random matrices and reports the max deviation.
    """
    p = int(p)
    rng = np.random.default_rng(int(seed))
    A, M, B = rng.standard_normal((3, p, p))
    lhs = (A @ M @ B.T).flatten(order="F")
    K = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            for k in range(p):
                for m in range(p):
                    K[i + p * j, k + p * m] = B[j, m] * A[i, k]
    rhs = K @ M.flatten(order="F")
    dev = float(np.max(np.abs(lhs - rhs)))
    return OracleReport(
        "kron_identity",
        {"max_deviation": dev, "order": p, "seed": int(seed)},
        ["column-stacking vec; Kronecker matrix built by explicit loops"],
    )


def _parse_cli_args(raw):
    """Split oracle CLI arguments into positionals and key=value pairs."""
    pos, kw = [], {}
    for tok in raw:
        if "=" in tok:
            key, _, val = tok.partition("=")
            kw[key.strip()] = float(val)
        else:
            pos.append(float(tok))
    return pos, kw


_REGISTRY = {
    "ar1_gamma0": (ar1_gamma0, "a [sigma2] [tol] or a=0.5"),
    "ar1_spectral0": (ar1_spectral_zero, "a [sigma2]"),
    "two_atom_upsilon0": (lambda *a, **k: two_atom_upsilon(0, *a, **k),
                          "[a1] [a2] [sigma2]"),
    "two_atom_upsilon": (two_atom_upsilon, "u [a1] [a2] [sigma2]"),
    "telescoping": (telescoping_identity, "[a1] [a2] [sigma2]"),
    "roots": (quadratic_roots, "alpha1 alpha2"),
    "kron_identity": (kron_vec_identity, "[seed] [p]"),
}


def list_oracles():
    return {name: usage for name, (_, usage) in sorted(_REGISTRY.items())}


def run_oracle(subcase, raw_args=()):
    """Run a named oracle with CLI-style arguments; unknown names raise."""
    if subcase not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(f"unknown oracle subcase {subcase!r}; known: {known}")
    fn, _ = _REGISTRY[subcase]
    pos, kw = _parse_cli_args(raw_args)
    try:
        return fn(*pos, **kw)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for oracle {subcase!r}: {exc}") from None
