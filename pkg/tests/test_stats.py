"""Functional evaluation, analytic and lattice moments, covariance series."""
import numpy as np
import pytest

from stablema import (
    ContractError,
    HypothesisError,
    KernelBank,
    ParameterError,
    StableParams,
    analytic_lag_covariance_trig,
    analytic_mean_trig,
    asymptotic_covariance,
    covariance_standard_errors,
    empirical_covariance,
    evaluate_vn,
    lattice_asymptotic_covariance,
    lattice_lag_covariance_trig,
    lattice_mean_trig,
    make_trig_functional,
    ou_kernel,
    plan_grid,
    power_kernel,
)

BANK = KernelBank((ou_kernel(1.0), ou_kernel(2.0)))
P15 = StableParams(1.5, 1.0)
FN = make_trig_functional([[2.0, 0.0], [0.0, 2.0]], [0.0, 0.0], [2.6, 3.2])


def test_functional_shape_checks():
    with pytest.raises(ParameterError):
        make_trig_functional([[1.0, 0.0]], [0.0, 0.0], [1.0])
    with pytest.raises(ParameterError):
        make_trig_functional([[np.inf, 0.0]], [0.0], [1.0])


def test_functional_evaluate_and_bounds():
    fn = make_trig_functional([[2.0, -3.0]], [0.5], [1.5])
    x = np.array([0.3, -0.2])
    np.testing.assert_allclose(
        fn.evaluate(x), 1.5 * np.cos(2.0 * 0.3 - 3.0 * (-0.2) + 0.5)
    )
    np.testing.assert_allclose(fn.grad_bounds, [1.5 * 3.0])
    np.testing.assert_allclose(fn.hess_bounds, [1.5 * 9.0])
    two = fn.evaluate(np.array([[0.3, 0.1], [-0.2, 0.4]]))
    assert two.shape == (1, 2)


def test_analytic_mean_ou_closed_form():
    # Single kernel, f = cos(u X): E = exp(-|u|^b / (lam b)).
    bank = KernelBank((ou_kernel(1.0),))
    fn = make_trig_functional([[1.0]], [0.0], [1.0])
    np.testing.assert_allclose(
        analytic_mean_trig(fn, bank, P15),
        np.exp(-1.0 / 1.5),
        rtol=1e-8,
    )


def test_evaluate_vn_contract_and_value():
    vals = np.array([[0.0, np.pi / 2.0], [0.0, 0.0]])  # m=2, n=2
    fn = make_trig_functional([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], [1.0, 1.0])
    v = evaluate_vn(vals, fn, np.zeros(2))
    # f1: cos(0) + cos(pi/2) = 1; f2: cos(0) + cos(0) = 2; normalized /sqrt(2)
    np.testing.assert_allclose(v, [1.0 / np.sqrt(2.0), 2.0 / np.sqrt(2.0)], atol=1e-15)
    with pytest.raises(ContractError):
        evaluate_vn(vals, fn, np.zeros(3))
    with pytest.raises(ContractError):
        evaluate_vn(vals[:1], fn, np.zeros(2))


def test_lag_covariance_symmetry_and_decay():
    c_plus = analytic_lag_covariance_trig(FN, BANK, P15, 0, 1, 3)
    c_minus = analytic_lag_covariance_trig(FN, BANK, P15, 1, 0, -3)
    np.testing.assert_allclose(c_plus, c_minus, rtol=1e-10)
    # OU overlap dies off exponentially in the lag.
    c8 = abs(analytic_lag_covariance_trig(FN, BANK, P15, 0, 0, 8))
    c2 = abs(analytic_lag_covariance_trig(FN, BANK, P15, 0, 0, 2))
    assert c8 < c2 * 1e-2


def test_lag_zero_variance_positive():
    assert analytic_lag_covariance_trig(FN, BANK, P15, 0, 0, 0) > 0.0


def test_asymptotic_covariance_properties():
    cov = asymptotic_covariance(FN, BANK, P15)
    assert cov.matrix.shape == (2, 2)
    np.testing.assert_allclose(cov.matrix, cov.matrix.T, rtol=0.0)
    assert np.all(cov.eigenvalues() > 0.0)
    assert cov.tail_bound < 0.01 * cov.matrix.diagonal().max()
    assert cov.provenance == "analytic-series"


def test_asymptotic_covariance_regression_values():
    # Frozen output of the certified series at default settings; guards the
    # quadrature stack against silent drift.
    cov = asymptotic_covariance(FN, BANK, P15)
    expect = np.array([[3.67418965, 2.429966698], [2.429966698, 4.11798035]])
    np.testing.assert_allclose(cov.matrix, expect, rtol=1e-6)
    assert cov.truncation_lag == 8


def test_asymptotic_covariance_hypothesis_gate():
    thin = KernelBank((power_kernel(0.0, 4.0 / 3.0),))  # alpha*beta = 2
    fn1 = make_trig_functional([[1.0]], [0.0], [1.0])
    with pytest.raises(HypothesisError):
        asymptotic_covariance(fn1, thin, P15)
    with pytest.raises(HypothesisError):
        lattice_asymptotic_covariance(
            fn1, thin, P15, plan_grid(thin, P15, n=4, tol=np.inf)
        )


def test_lattice_mean_converges_to_continuous():
    exact = analytic_mean_trig(FN, BANK, P15)
    gaps = []
    for tol in (1e-1, 1e-2):
        grid = plan_grid(BANK, P15, n=4, tol=tol)
        gaps.append(np.max(np.abs(lattice_mean_trig(FN, BANK, P15, grid) - exact)))
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.05


def test_lattice_lag_covariance_converges_to_continuous():
    exact = analytic_lag_covariance_trig(FN, BANK, P15, 0, 1, 2)
    grid = plan_grid(BANK, P15, n=4, tol=1e-2)
    lat = lattice_lag_covariance_trig(FN, BANK, P15, grid, 0, 1, 2)
    np.testing.assert_allclose(lat, exact, rtol=0.15)


def test_lattice_lag_covariance_negative_lag_symmetry():
    grid = plan_grid(BANK, P15, n=4, tol=1e-1)
    a = lattice_lag_covariance_trig(FN, BANK, P15, grid, 0, 1, -5)
    b = lattice_lag_covariance_trig(FN, BANK, P15, grid, 1, 0, 5)
    assert a == b


def test_lattice_covariance_is_n_independent_for_ou():
    # The OU window certificate is n-free, so the lattice law of the
    # stationary interior does not depend on which n the grid was planned
    # for (same mesh and window).
    g1 = plan_grid(BANK, P15, n=16, tol=1e-2)
    g2 = plan_grid(BANK, P15, n=64, tol=1e-2)
    assert (g1.mesh, g1.trunc) == (g2.mesh, g2.trunc)
    c1 = lattice_asymptotic_covariance(FN, BANK, P15, g1)
    c2 = lattice_asymptotic_covariance(FN, BANK, P15, g2)
    np.testing.assert_allclose(c1.matrix, c2.matrix, rtol=1e-12, atol=1e-12)


def test_lattice_covariance_tracks_continuous():
    cont = asymptotic_covariance(FN, BANK, P15)
    grid = plan_grid(BANK, P15, n=8, tol=1e-2)
    lat = lattice_asymptotic_covariance(FN, BANK, P15, grid)
    assert lat.provenance == "lattice-series"
    np.testing.assert_allclose(lat.matrix, cont.matrix, rtol=0.03, atol=0.03)


def test_empirical_covariance_matches_numpy():
    x = np.arange(12.0).reshape(6, 2) ** 1.3
    cov = empirical_covariance(x)
    np.testing.assert_allclose(cov.matrix, np.cov(x, rowvar=False, ddof=1))
    assert cov.provenance == "empirical"
    assert cov.replications == 6
    with pytest.raises(ParameterError):
        empirical_covariance(x[:1])


def test_covariance_standard_errors_shrink():
    rng = np.random.default_rng(0)
    small = covariance_standard_errors(rng.normal(size=(100, 2)))
    large = covariance_standard_errors(rng.normal(size=(10000, 2)))
    assert small.shape == (2, 2)
    assert np.all(large < small)
