import numpy as np
import pytest

from rcarpanel.companion import companion_matrix
from rcarpanel.distributions import (
    DegenerateCoefficients,
    DiscreteCoefficients,
    GaussianCoefficients,
    NoiseSpec,
    is_second_order_stationary,
    mean_kron_square,
)
from rcarpanel.exceptions import (
    NonstationaryError,
    RankDeficiencyError,
    RcarError,
    TruncationError,
)
from rcarpanel.moments import (
    CovarianceSet,
    MomentSeries,
    gamma0_direct,
    gamma0_series,
    gamma_u,
    identify_transition,
    kron,
    moment_mu,
    moment_series,
    spectral_density,
    spectral_existence_check,
    unvec,
    upsilon_series,
    vec,
)
from rcarpanel.oracles import (
    ar1_gamma0,
    ar1_spectral_zero,
    kron_vec_identity,
    telescoping_identity,
    two_atom_upsilon,
)

TWO_ATOM = DiscreteCoefficients(values=((0.2,), (0.4,)))
NOISE1 = NoiseSpec.constant(1.0)

# frozen from the enumeration oracle: (1/2)(1/0.96 + 1/0.84)
TWO_ATOM_UPSILON0 = 1.1160714285714286
TWO_ATOM_UPSILON2 = 0.11607142857142858


def omega_for(p, sigma2=1.0):
    M = np.zeros((p, p))
    M[p - 1, p - 1] = sigma2
    return M


def test_vec_is_column_stacking():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(vec(M), [1.0, 3.0, 2.0, 4.0])
    np.testing.assert_array_equal(unvec(vec(M), 2), M)


def test_kron_vec_identity_matches_bruteforce():
    rep = kron_vec_identity(seed=3, p=3)
    assert rep.values["max_deviation"] < 1e-12
    # and the library kron satisfies the same identity
    rng = np.random.default_rng(3)
    A, M, B = rng.standard_normal((3, 3, 3))
    np.testing.assert_allclose(vec(A @ M @ B.T), kron(B, A) @ vec(M),
                               atol=1e-12)


def test_gamma0_direct_ar1_closed_form():
    for a in (-0.9, -0.5, 0.0, 0.5, 0.9):
        G = gamma0_direct(np.array([[a]]), omega_for(1))
        assert G[0, 0] == pytest.approx(1.0 / (1.0 - a * a), abs=1e-12)


def test_gamma0_direct_matches_partial_sum_oracle():
    G = gamma0_direct(np.array([[0.5]]), omega_for(1))
    oracle = ar1_gamma0(0.5).values["gamma0"]
    assert G[0, 0] == pytest.approx(oracle, abs=1e-12)


def test_gamma0_direct_rejects_nonstationary():
    with pytest.raises(NonstationaryError):
        gamma0_direct(np.array([[1.0]]), omega_for(1))
    with pytest.raises(NonstationaryError):
        gamma0_direct(companion_matrix([0.9, 0.3]), omega_for(2))


def test_gamma0_series_term_counts():
    # zero transition: the series is Omega after a single term
    res = gamma0_series(np.zeros((2, 2)), omega_for(2))
    np.testing.assert_array_equal(res.value, omega_for(2))
    assert res.terms == 1
    # a = 0.5 at tol 1e-12: 0.25^k < 1e-12 needs k <= 21 terms
    res = gamma0_series(np.array([[0.5]]), omega_for(1), tol=1e-12)
    assert res.terms <= 21
    assert res.value[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-11)


def test_gamma0_series_agrees_with_direct():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = rng.integers(1, 4)
        while True:
            coeffs = rng.uniform(-0.9, 0.9, size=p)
            A = companion_matrix(coeffs)
            if np.max(np.abs(np.linalg.eigvals(A))) < 0.9:
                break
        Om = omega_for(p, rng.uniform(0.5, 2.0))
        direct = gamma0_direct(A, Om)
        series = gamma0_series(A, Om, tol=1e-13)
        np.testing.assert_allclose(direct, series.value, atol=1e-9)


def test_gamma0_series_cap_raises_with_tail():
    with pytest.raises(TruncationError) as err:
        gamma0_series(np.array([[0.999999]]), omega_for(1), tol=1e-300,
                      max_terms=50)
    assert err.value.terms == 50
    assert err.value.tail_estimate is not None


def test_gamma_u_and_identification_round_trip():
    A = companion_matrix([0.5, 0.3])
    G0 = gamma0_direct(A, omega_for(2))
    G1 = gamma_u(A, G0, 1)
    np.testing.assert_allclose(identify_transition(G1, G0), A, atol=1e-10)


def test_identify_transition_rank_deficiency():
    with pytest.raises(RankDeficiencyError):
        identify_transition(np.eye(2), np.zeros((2, 2)))


def test_moment_mu_degenerate_products():
    dist = DegenerateCoefficients((0.5, 0.3))
    A = companion_matrix([0.5, 0.3])
    np.testing.assert_allclose(moment_mu(dist, 1, 1), np.kron(A, A @ A),
                               atol=1e-14)
    np.testing.assert_array_equal(moment_mu(dist, 0, 0), np.eye(4))


def test_moment_mu_two_atom_average():
    got = moment_mu(TWO_ATOM, 1, 0)
    expect = 0.5 * (np.array([[0.04]]) + np.array([[0.16]]))
    np.testing.assert_allclose(got, expect, atol=1e-15)


def test_moment_series_budget_and_identity():
    ms = moment_series(TWO_ATOM, max_power=1, max_lag=2)
    # every (v, u) with 2v + u <= 4 present
    assert set(ms.entries) == {(v, u) for v in range(3) for u in range(5)
                               if 2 * v + u <= 4}
    np.testing.assert_array_equal(ms[(0, 0)], np.eye(1))


def test_upsilon_two_atom_against_enumeration():
    up0 = upsilon_series(TWO_ATOM, omega_for(1), 0)
    up2 = upsilon_series(TWO_ATOM, omega_for(1), 2)
    assert up0.value[0, 0] == pytest.approx(TWO_ATOM_UPSILON0, abs=1e-9)
    assert up2.value[0, 0] == pytest.approx(TWO_ATOM_UPSILON2, abs=1e-9)
    oracle = two_atom_upsilon(0).values["upsilon"]
    assert up0.value[0, 0] == pytest.approx(oracle, abs=1e-9)


def test_upsilon_telescoping_identity():
    rep = telescoping_identity()
    assert rep.values["exact"] is True
    up0 = upsilon_series(TWO_ATOM, omega_for(1), 0).value[0, 0]
    up2 = upsilon_series(TWO_ATOM, omega_for(1), 2).value[0, 0]
    assert up0 - up2 == pytest.approx(1.0, abs=1e-10)


def test_upsilon_requires_second_order_stationarity():
    bad = DiscreteCoefficients(values=((0.9,), (1.1,)))
    assert not is_second_order_stationary(bad)
    with pytest.raises(NonstationaryError):
        upsilon_series(bad, omega_for(1), 0)


def test_upsilon_degenerate_equals_gamma():
    dist = DegenerateCoefficients((0.5, 0.3))
    A = companion_matrix([0.5, 0.3])
    G0 = gamma0_direct(A, omega_for(2))
    up = upsilon_series(dist, omega_for(2), 0, tol=1e-14)
    np.testing.assert_allclose(up.value, G0, atol=1e-10)


def test_mean_kron_square_two_atom():
    M, n = mean_kron_square(TWO_ATOM)
    assert n is None
    assert M[0, 0] == pytest.approx(0.5 * (0.04 + 0.16), abs=1e-15)


def test_second_order_examples():
    assert is_second_order_stationary(DegenerateCoefficients((0.5,)))
    assert is_second_order_stationary(DegenerateCoefficients((0.0, 0.0)))
    check = is_second_order_stationary(DiscreteCoefficients(
        values=((0.9,), (1.1,))))
    assert not check
    assert check.radius == pytest.approx(1.01, abs=1e-12)


def test_second_order_gaussian_is_flagged_approximate():
    dist = GaussianCoefficients(mean_vector=(0.3,), covariance=((0.01,),))
    check = is_second_order_stationary(dist, samples=20000, seed=5)
    assert check.approximate
    assert check.sample_size == 20000
    assert check  # E{a^2} = 0.09 + 0.01 well inside the unit disk


def test_spectral_existence_check():
    ok = spectral_existence_check(TWO_ATOM)
    assert ok
    bad = spectral_existence_check(DiscreteCoefficients(values=((0.5,), (1.2,))))
    assert not bad


def test_spectral_zero_ar1_closed_form():
    sd = spectral_density(DegenerateCoefficients((0.5,)), omega_for(1), 0.0)
    oracle = ar1_spectral_zero(0.5).values["spectral0"]
    assert oracle == pytest.approx(2.0 / np.pi, abs=1e-15)
    assert sd.value.real[0, 0] == pytest.approx(2.0 / np.pi, abs=1e-6)
    # degenerate law: the factorized moment route agrees within tails
    assert sd.moment_route_gap <= sd.tail_bound + sd.moment_route_tail + 1e-9


def test_spectral_hermitian_off_zero():
    sd = spectral_density(DegenerateCoefficients((0.5, 0.3)), omega_for(2), 0.7)
    np.testing.assert_allclose(sd.value, sd.value.conj().T, atol=1e-12)
    assert sd.moment_route_value is None


def test_spectral_two_atom_routes_gap_is_reported():
    """For a genuinely random coefficient law the factorized route differs;
    the gap must be surfaced, not hidden."""
    sd = spectral_density(TWO_ATOM, omega_for(1), 0.0)
    direct = sd.value.real[0, 0]
    # exact lag sum: sum_u weighted a^u/(1-a^2) both directions
    exact = 0.0
    for a, w in ((0.2, 0.5), (0.4, 0.5)):
        exact += w * (1.0 / (1.0 - a * a)) * (1.0 + a) / (1.0 - a)
    exact /= 2.0 * np.pi
    assert direct == pytest.approx(exact, abs=1e-9)
    assert sd.moment_route_gap > 1e-3  # genuinely different evaluations
    assert sd.moment_route_gap == pytest.approx(
        abs(sd.moment_route_value[0, 0] - direct), abs=1e-12)


def test_spectral_rejects_nonstationary_atom():
    with pytest.raises(NonstationaryError):
        spectral_density(DiscreteCoefficients(values=((0.5,), (1.2,))),
                         omega_for(1), 0.0)


def test_covariance_set_validation():
    with pytest.raises(RcarError):
        CovarianceSet(kind="bogus", lags={0: np.eye(2)})
    with pytest.raises(RcarError):
        CovarianceSet(kind="conditional",
                      lags={0: np.array([[0.0, 1.0], [0.0, 0.0]])})
    cs = CovarianceSet(kind="conditional", lags={0: np.eye(2)})
    assert cs.order == 2
    np.testing.assert_array_equal(cs[0], np.eye(2))


def test_moment_series_requires_identity_at_origin():
    with pytest.raises(RcarError):
        MomentSeries(entries={(0, 0): np.zeros((1, 1))}, order=1,
                     source="exact")
