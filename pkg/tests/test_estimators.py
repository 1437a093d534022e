import numpy as np
import pytest
from sklearn.base import clone

from rcarpanel.companion import companion_matrix
from rcarpanel.distributions import (
    DegenerateCoefficients,
    DiscreteCoefficients,
    ModelSpec,
    NoiseSpec,
)
from rcarpanel.estimators import (
    CrossSectionalMoments,
    PerIndividualMoments,
    a_hat_individual,
    build_states,
    estimate_cross_sectional,
    estimate_per_individual,
    upsilon_hat,
)
from rcarpanel.exceptions import (
    EstimationError,
    RankDeficiencyError,
    RcarError,
)
from rcarpanel.simulate import InitMode, simulate_panel

TWO_ATOM = DiscreteCoefficients(values=((0.2,), (0.4,)))


def two_atom_panel(n=2000, horizon=30, seed=5):
    spec = ModelSpec(coeff_dist=TWO_ATOM, noise=NoiseSpec.constant(1.0),
                     n_individuals=n, horizon=horizon)
    return simulate_panel(spec, seed, keep_truth=True)


def test_build_states_windows():
    S = build_states([0.0, 1.0, 2.0, 3.0], 2)
    np.testing.assert_array_equal(S, [[0, 1], [1, 2], [2, 3]])
    S1 = build_states([5.0, 6.0], 1)
    np.testing.assert_array_equal(S1, [[5.0], [6.0]])
    with pytest.raises(RcarError):
        build_states([1.0], 2)


def test_upsilon_hat_hand_computed():
    Y = np.array([[1.0, 2.0, 3.0]])
    M0, c0 = upsilon_hat(Y, 0, order=1)
    assert c0 == 3
    assert M0[0, 0] == pytest.approx((1 + 4 + 9) / 3)
    M1, c1 = upsilon_hat(Y, 1, order=1)
    assert c1 == 2
    assert M1[0, 0] == pytest.approx((2 * 1 + 3 * 2) / 2)
    # the divisor is always the exact number of summed products
    M2, c2 = upsilon_hat(Y, 2, order=1)
    assert c2 == 1
    assert M2[0, 0] == pytest.approx(3 * 1)


def test_upsilon_hat_order2_lag_structure():
    Y = np.array([[1.0, 0.0, 2.0, 1.0]])
    # states (y_{t-1}, y_t) for t = 1..3
    M1, c = upsilon_hat(Y, 1, order=2)
    assert c == 2
    expect = (np.outer([0, 2], [1, 0]) + np.outer([2, 1], [0, 2])) / 2
    np.testing.assert_allclose(M1, expect)


def test_upsilon_hat_lag_too_large():
    with pytest.raises(EstimationError):
        upsilon_hat(np.zeros((2, 4)), 4, order=1)


def test_upsilon_hat_averages_individuals():
    Y = np.array([[1.0, 1.0], [3.0, 3.0]])
    M, c = upsilon_hat(Y, 0, order=1)
    assert c == 4
    assert M[0, 0] == pytest.approx((1 + 1 + 9 + 9) / 4)


def test_a_hat_noiseless_exact():
    y = 2.0 ** -np.arange(30)
    A, s2 = a_hat_individual(y, 1)
    assert A[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert s2 == pytest.approx(0.0, abs=1e-20)


def test_a_hat_noiseless_order2():
    coeffs = np.array([0.5, 0.3])
    y = [1.0, 0.7]
    for _ in range(60):
        y.append(0.5 * y[-1] + 0.3 * y[-2])
    A, s2 = a_hat_individual(np.array(y), 2)
    np.testing.assert_allclose(A, companion_matrix(coeffs), atol=1e-10)
    assert A[0, 0] == 0.0 and A[0, 1] == 1.0  # shift row is structural
    assert s2 < 1e-20


def test_a_hat_rank_deficiency():
    with pytest.raises(RankDeficiencyError):
        a_hat_individual(np.zeros(20), 1)
    with pytest.raises(RankDeficiencyError):
        a_hat_individual(np.ones(20), 2)


def test_a_hat_recovers_ar1_statistically():
    rng = np.random.default_rng(2)
    e = rng.standard_normal(5001)
    y = np.empty(5001)
    prev = 0.0
    for t in range(5001):
        prev = 0.6 * prev + e[t]
        y[t] = prev
    A, s2 = a_hat_individual(y, 1)
    assert A[0, 0] == pytest.approx(0.6, abs=0.03)
    assert s2 == pytest.approx(1.0, abs=0.05)


def test_cross_sectional_two_atom():
    panel = two_atom_panel()
    rep = estimate_cross_sectional(panel)
    assert rep.pathway == "cross_sectional"
    assert rep.omega_method == "scalar_telescoping"
    assert rep.rho[0] == 1.0
    assert 0.2 < rep.rho[1] < 0.4
    assert abs(rep.omega[0, 0] - 1.0) < 0.05
    assert abs(rep.upsilon[0][0, 0] - 1.1160714285714286) < 0.05
    assert rep.effective_count(0) == 2000 * 31
    assert rep.effective_count(2) == 2000 * 29


def test_cross_sectional_all_zero_degrades():
    rep = estimate_cross_sectional(np.zeros((5, 10)), order=1)
    np.testing.assert_array_equal(rep.upsilon[0], [[0.0]])
    assert rep.rho is None and rep.omega is None
    assert "rank_warning" in rep.diagnostics


def test_cross_sectional_order2_heuristic_is_flagged():
    spec = ModelSpec(coeff_dist=DegenerateCoefficients((0.5, 0.3)),
                     noise=NoiseSpec.constant(1.0), n_individuals=400,
                     horizon=40)
    rep = estimate_cross_sectional(simulate_panel(spec, 1))
    assert rep.omega_method == "heuristic_lag2"
    assert rep.rho is None
    assert "omega_note" in rep.diagnostics


def test_per_individual_two_atom():
    panel = two_atom_panel(n=400, horizon=60, seed=9)
    rep = estimate_per_individual(panel)
    assert rep.pathway == "per_individual"
    assert rep.a_hat.shape == (400, 1, 1)
    # each estimate should sit near its own individual's truth
    errs = np.abs(rep.a_hat[:, 0, 0] - panel.truth_coeffs[:, 0])
    assert np.mean(errs) < 0.2
    assert abs(rep.omega[0, 0] - 1.0) < 0.1
    assert abs(np.mean(rep.sigma2_hat) - 1.0) < 0.1
    # moment budget 2v + u <= 2*1 + 2
    assert set(rep.mu_hat.entries) == {(v, u) for v in range(3)
                                       for u in range(5) if 2 * v + u <= 4}
    assert rep.mu_hat.source == "empirical"
    assert rep.diagnostics["nonstationary_fraction"] == 0.0


def test_per_individual_short_horizon_warns():
    panel = two_atom_panel(n=20, horizon=8, seed=2)
    with pytest.warns(RuntimeWarning):
        estimate_per_individual(panel)


def test_per_individual_failures_are_reported():
    Y = np.concatenate([np.zeros((1, 25)),
                        np.random.default_rng(0).standard_normal((3, 25))])
    with pytest.raises(EstimationError) as err:
        estimate_per_individual(Y, order=1)
    assert "individual 1" in str(err.value)


def test_pathways_collapse_for_degenerate_law():
    """With a fixed coefficient the covariance ratio and the mean
    transition estimate target the same number."""
    spec = ModelSpec(coeff_dist=DegenerateCoefficients((0.5,)),
                     noise=NoiseSpec.constant(1.0), n_individuals=600,
                     horizon=50)
    panel = simulate_panel(spec, 17)
    cs = estimate_cross_sectional(panel)
    pi = estimate_per_individual(panel)
    assert abs(cs.rho[1] - 0.5) < 0.03
    assert abs(pi.a_hat.mean() - 0.5) < 0.03
    assert abs(cs.rho[1] - pi.a_hat.mean()) < 0.05


def test_sklearn_wrapper_cross_sectional():
    panel = two_atom_panel(n=300, horizon=20, seed=3)
    est = CrossSectionalMoments(order=1, max_lag=2)
    assert est.get_params() == {"order": 1, "max_lag": 2}
    fitted = est.fit(panel.y)
    assert fitted is est
    assert est.n_features_in_ == 21
    assert set(est.upsilon_) == {0, 1, 2}
    assert est.omega_.shape == (1, 1)
    assert est.rho_[0] == 1.0
    # clone drops the fitted state but keeps params
    fresh = clone(est)
    assert fresh.get_params() == est.get_params()
    assert not hasattr(fresh, "upsilon_")


def test_sklearn_wrapper_per_individual():
    panel = two_atom_panel(n=50, horizon=40, seed=4)
    est = PerIndividualMoments(order=1, max_power=1, max_lag=2).fit(panel.y)
    assert est.coef_.shape == (50, 1, 1)
    assert est.sigma2_.shape == (50,)
    assert est.moments_[(0, 0)].shape == (1, 1)
    assert est.omega_.shape == (1, 1)


def test_wrapper_input_validation():
    est = CrossSectionalMoments(order=2)
    with pytest.raises(RcarError):
        est.fit(np.zeros((4, 2)))  # horizon shorter than the order
    with pytest.raises(RcarError):
        est.fit(np.zeros((2, 2, 2)))
    # a 1-D series is promoted to a single-row panel
    rep = estimate_cross_sectional(np.arange(30.0), order=1)
    assert rep.n_individuals == 1


def test_raw_array_requires_order():
    with pytest.raises(RcarError):
        upsilon_hat(np.zeros((2, 5)), 0)
