"""Overlap integrals, decay audit, surrogate bounds, intensity integrals."""
import numpy as np
import pytest

from stablema import (
    AnIntegrand,
    CoverageError,
    DivergenceError,
    HypothesisError,
    KernelBank,
    ParameterError,
    an_function,
    an_integral,
    build_rho_table,
    gamma1_bound,
    gamma2_bound,
    ou_kernel,
    power_kernel,
    rate_prediction,
    rho,
    rho_decay_check,
)


def test_rho_ou_closed_form():
    # int_0^inf exp(-lam b (x + (x+k))/2) dx = exp(-lam b k/2)/(lam b)
    lam, beta = 1.5, 1.2
    g = ou_kernel(lam)
    for k in (0, 1, 5):
        expect = np.exp(-lam * beta * k / 2.0) / (lam * beta)
        np.testing.assert_allclose(rho(g, g, beta, k), expect, rtol=1e-6)


def test_rho_shift_symmetry():
    g1, g2 = ou_kernel(1.0), ou_kernel(2.0)
    for k in (-4, -1, 0, 2, 7):
        np.testing.assert_allclose(
            rho(g1, g2, 1.5, k), rho(g2, g1, 1.5, -k), rtol=1e-6
        )


def test_rho_disjoint_supports_is_zero():
    # OU lives on x >= 0; shifted far left the overlap window is empty.
    g = ou_kernel(1.0)
    assert rho(g, g, 1.5, -10**9) == 0.0


def test_rho_huge_lag_underflows_to_zero_without_error():
    g = ou_kernel(1.0)
    val = rho(g, g, 1.5, 700)
    assert 0.0 <= val < 1e-200


def test_rho_divergence_gates():
    with pytest.raises(DivergenceError):
        rho(power_kernel(-1.5, 2.0), power_kernel(-1.5, 2.0), 1.5, 0)
    with pytest.raises(DivergenceError):
        rho(power_kernel(0.0, 0.5), power_kernel(0.0, 0.5), 1.5, 0)


def test_rho_table_lookup_and_symmetry():
    bank = KernelBank((ou_kernel(1.0), ou_kernel(2.0)))
    table = build_rho_table(bank, 1.5, 8)
    assert table.m == 2
    np.testing.assert_allclose(table.value(0, 1, 3), rho(bank[0], bank[1], 1.5, 3), rtol=1e-9)
    np.testing.assert_allclose(table.value(0, 1, -3), table.value(1, 0, 3), rtol=0.0)
    with pytest.raises(CoverageError):
        table.value(0, 0, 9)


def test_rho_table_rows_cover_full_lag_range():
    bank = KernelBank((ou_kernel(1.0),))
    table = build_rho_table(bank, 1.5, 4)
    rows = list(table.rows())
    ks = sorted(k for _, _, k, _ in rows)
    assert ks == list(range(-4, 5))


def test_decay_audit_passes_on_power_pairs():
    bank = KernelBank((power_kernel(0.0, 2.0),))
    table = build_rho_table(bank, 1.5, 64)
    report = rho_decay_check(table, [2.0])
    assert report.passed
    assert report.max_ratio < np.inf


def test_gamma_bounds_m_doubling_is_exact():
    # Identical kernels: doubling m scales the pre-sqrt sums by 2^6 and 2^8.
    g = ou_kernel(1.0)
    bank4 = KernelBank((g, g, g, g))
    table = build_rho_table(bank4, 1.5, 64)
    for n in (16, 64):
        g1_m2 = gamma1_bound(table, n, 2)
        g1_m4 = gamma1_bound(table, n, 4)
        np.testing.assert_allclose(g1_m4**2 / g1_m2**2, 2.0**6, rtol=1e-12)
        g2_m2 = gamma2_bound(table, n, 2)
        g2_m4 = gamma2_bound(table, n, 4)
        np.testing.assert_allclose(g2_m4**2 / g2_m2**2, 2.0**8, rtol=1e-12)


def test_gamma_bounds_halving_rate():
    g = ou_kernel(1.0)
    table = build_rho_table(KernelBank((g,)), 1.5, 2048)
    r1 = gamma1_bound(table, 1024, 1) / gamma1_bound(table, 512, 1)
    r2 = gamma2_bound(table, 1024, 1) / gamma2_bound(table, 512, 1)
    np.testing.assert_allclose([r1, r2], [2.0**-0.5, 2.0**-0.5], rtol=0.02)


def test_gamma_bound_gates():
    table = build_rho_table(KernelBank((ou_kernel(1.0),)), 1.5, 16)
    with pytest.raises(CoverageError):
        gamma1_bound(table, 17, 1)
    with pytest.raises(ParameterError):
        gamma1_bound(table, 8, 2)


def test_rate_prediction_piecewise():
    assert rate_prediction(8.0 / 3.0, 1.5, 3.0) == (-0.5, False)  # ab = 4 > q
    assert rate_prediction(2.0, 1.5, 3.0) == (-0.5, True)  # ab = q exactly
    slope, logf = rate_prediction(5.0 / 3.0, 1.5, 3.0)  # ab = 2.5
    np.testing.assert_allclose(slope, -0.25)
    assert not logf
    lf_slope, _ = rate_prediction(1.0 + 1.0 / 1.5 - 0.3, 1.5, 3.0)  # the H=0.3 noise
    np.testing.assert_allclose(lf_slope, -0.025)
    with pytest.raises(HypothesisError):
        rate_prediction(1.0, 1.5, 3.0)


def test_an_function_clipped_sum():
    spec = AnIntegrand(
        kernel_j=power_kernel(0.0, 2.0),
        kernel_k=ou_kernel(1.0),
        beta=1.5,
        n=64,
        p=2.0,
        q=3.0,
    )
    # n^{-1/2} sum of min(1, x|g|): nonnegative, monotone in x, capped at
    # sqrt(n) once every clip saturates.
    small = an_function(spec, "j", 0.5, 0.1)
    large = an_function(spec, "j", 1e9, 0.1)
    assert 0.0 < small < large <= np.sqrt(64.0) + 1e-12
    np.testing.assert_allclose(large, np.sqrt(64.0))
    with pytest.raises(ParameterError):
        an_function(spec, "x", 1.0, 0.0)
    with pytest.raises(ParameterError):
        an_function(spec, "j", -1.0, 0.0)


def test_an_integral_frozen_oracles_fast_decay():
    # alpha*beta = 4 regime; reference values from an independent
    # high-precision evaluation, frozen at relative 1e-3.
    alpha = 8.0 / 3.0
    expect = {64: 21.3116, 128: 16.4416, 256: 12.2897, 512: 9.00737}
    for n in (64, 128):
        spec = AnIntegrand(
            kernel_j=power_kernel(0.0, alpha),
            kernel_k=power_kernel(0.0, alpha),
            beta=1.5,
            n=n,
            p=2.0,
            q=3.0,
        )
        np.testing.assert_allclose(an_integral(spec), expect[n], rtol=3e-3)


def test_an_integral_frozen_oracles_slow_decay():
    alpha = 5.0 / 3.0
    expect = {64: 96.2845, 128: 98.5931}
    for n in (64, 128):
        spec = AnIntegrand(
            kernel_j=power_kernel(0.0, alpha),
            kernel_k=power_kernel(0.0, alpha),
            beta=1.5,
            n=n,
            p=2.0,
            q=3.0,
        )
        np.testing.assert_allclose(an_integral(spec), expect[n], rtol=3e-3)


def test_an_integrand_validation():
    g = power_kernel(0.0, 2.0)
    with pytest.raises(ParameterError):
        AnIntegrand(kernel_j=g, kernel_k=g, beta=1.5, n=0, p=2.0, q=3.0)
    with pytest.raises(ParameterError):
        AnIntegrand(kernel_j=g, kernel_k=g, beta=1.5, n=64, p=3.0, q=2.0)
