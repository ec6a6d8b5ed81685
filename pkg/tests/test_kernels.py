"""Kernel families: evaluation, certificates, norms, envelope audits."""
import numpy as np
import pytest

from stablema import (
    DivergenceError,
    DomainError,
    KernelBank,
    ParameterError,
    beta_norm,
    envelope_check,
    envelope_value,
    indicator_kernel,
    kernel_eval,
    lfsn_alpha,
    lfsn_kernel,
    ou_kernel,
    power_kernel,
)
from stablema.kernels import kernel_eval_raw


def test_ou_values_and_support():
    g = ou_kernel(2.0)
    x = np.array([-1.0, 0.0, 0.5, 3.0])
    np.testing.assert_allclose(kernel_eval(g, x), [0.0, 1.0, np.exp(-1.0), np.exp(-6.0)])
    assert g.support == (0.0, np.inf)
    assert g.kappa == 0.0


def test_ou_rejects_bad_params():
    with pytest.raises(ParameterError):
        ou_kernel(0.0)
    with pytest.raises(ParameterError):
        ou_kernel(1.0, alpha=-1.0)


def test_power_kernel_two_branches():
    g = power_kernel(0.5, 2.0)
    x = np.array([0.0, 0.25, -0.25, 1.0, 4.0, -4.0])
    np.testing.assert_allclose(kernel_eval(g, x), [0.0, 0.5, 0.5, 1.0, 1 / 16, 1 / 16])


def test_power_kernel_singular_origin_is_rejected_pointwise():
    g = power_kernel(-0.25, 2.0)
    with pytest.raises(DomainError):
        kernel_eval(g, np.array([0.0, 1.0]))
    # Raw evaluation flags the singularity as inf instead.
    assert np.isposinf(kernel_eval_raw(g, 0.0))


def test_indicator_kernel():
    g = indicator_kernel()
    np.testing.assert_array_equal(
        kernel_eval(g, np.array([-0.1, 0.0, 0.99, 1.0])), [0.0, 1.0, 1.0, 0.0]
    )


def test_lfsn_alpha_formula():
    np.testing.assert_allclose(lfsn_alpha(0.3, 1.5), 1.0 - 0.3 + 1.0 / 1.5)
    with pytest.raises(ParameterError):
        lfsn_alpha(1.0, 1.5)
    with pytest.raises(ParameterError):
        lfsn_alpha(0.5, 2.0)


def test_lfsn_difference_structure():
    H, beta = 0.3, 1.5
    g = lfsn_kernel(H, beta)
    c = H - 1.0 / beta
    xs = np.array([0.5, 2.0, 10.0])
    shifted = np.where(xs > 1.0, xs - 1.0, 1.0)  # dummy 1 where the branch is off
    expect = xs**c - np.where(xs > 1.0, shifted**c, 0.0)
    np.testing.assert_allclose(kernel_eval(g, xs), expect)
    # Tail certificate alpha = 1 - H + 1/beta governs the large-x decay.
    ratio = kernel_eval(g, 200.0) / kernel_eval(g, 100.0)
    np.testing.assert_allclose(ratio, 2.0**-g.alpha, rtol=0.02)


def test_envelope_holds_on_all_families():
    specs = [
        ou_kernel(1.0),
        ou_kernel(2.0, alpha=3.0),
        power_kernel(0.0, 2.0),
        power_kernel(-0.3, 4.0 / 3.0),
        lfsn_kernel(0.3, 1.5),
        lfsn_kernel(0.8, 1.2),
        indicator_kernel(),
    ]
    for spec in specs:
        report = envelope_check(spec)
        assert report.passed, (spec.label(), report)


def test_envelope_value_branches():
    g = power_kernel(0.5, 2.0)
    np.testing.assert_allclose(envelope_value(g, [0.25, 4.0]), [0.5, 1 / 16])


def test_beta_norm_ou_closed_form():
    # int_0^inf exp(-lam beta x) dx = 1/(lam beta)
    for lam in (0.5, 1.0, 2.0):
        for beta in (0.8, 1.5):
            np.testing.assert_allclose(
                beta_norm(ou_kernel(lam), beta), 1.0 / (lam * beta), rtol=1e-8
            )


def test_beta_norm_indicator_and_power():
    assert beta_norm(indicator_kernel(), 1.5) == 1.0
    # Two-sided power law: 2 * (1/(kappa b + 1) + 1/(alpha b - 1))
    kappa, alpha, beta = 0.5, 2.0, 1.5
    expect = 2.0 * (1.0 / (kappa * beta + 1.0) + 1.0 / (alpha * beta - 1.0))
    np.testing.assert_allclose(beta_norm(power_kernel(kappa, alpha), beta), expect, rtol=1e-8)


def test_beta_norm_divergence_gates():
    with pytest.raises(DivergenceError):
        beta_norm(power_kernel(-1.0, 2.0), 1.0)  # kappa*beta <= -1
    with pytest.raises(DivergenceError):
        beta_norm(power_kernel(0.0, 0.5), 1.5)  # alpha*beta <= 1


def test_bank_accessors():
    bank = KernelBank((ou_kernel(1.0, alpha=3.0), power_kernel(0.0, 2.0)))
    assert bank.m == 2
    assert bank.alpha_min() == 2.0
    np.testing.assert_array_equal(bank.alphas(), [3.0, 2.0])
    with pytest.raises(ParameterError):
        KernelBank(())
