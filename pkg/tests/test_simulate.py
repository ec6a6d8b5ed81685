"""Grid planning, path simulation identities, marginal sampling."""
import numpy as np
import pytest

from stablema import (
    ContractError,
    DivergenceError,
    KernelBank,
    ParameterError,
    PlanningError,
    SeedStream,
    SimulationGrid,
    StableParams,
    increment_scale,
    indicator_kernel,
    marginal_samples,
    marginal_scale,
    ou_kernel,
    plan_grid,
    power_kernel,
    sample_sbs,
    simulate_paths,
)
from stablema.kernels import kernel_eval_lattice

OU_BANK = KernelBank((ou_kernel(1.0), ou_kernel(2.0)))
P15 = StableParams(1.5, 1.0)


def test_plan_grid_infinite_tol_is_minimal():
    grid = plan_grid(OU_BANK, P15, n=8, tol=np.inf)
    assert (grid.mesh, grid.trunc, grid.certified) == (1.0, 1.0, True)


def test_plan_grid_tightens_with_tol():
    g1 = plan_grid(OU_BANK, P15, n=8, tol=1e-1)
    g2 = plan_grid(OU_BANK, P15, n=8, tol=1e-2)
    assert g2.mesh <= g1.mesh
    assert g2.trunc >= g1.trunc


def test_plan_grid_resource_caps():
    with pytest.raises(PlanningError):
        plan_grid(OU_BANK, P15, n=8, tol=1e-4)  # mesh floor 2^-12
    with pytest.raises(ParameterError):
        plan_grid(OU_BANK, P15, n=8, tol=0.0)


def test_plan_grid_divergent_bank_rejected():
    bad = KernelBank((power_kernel(0.0, 0.5),))  # alpha*beta = 0.75 <= 1
    with pytest.raises(DivergenceError):
        plan_grid(bad, P15, n=8, tol=1e-2)


def test_grid_shape_validation():
    with pytest.raises(ParameterError):
        SimulationGrid(n=4, mesh=0.3, trunc=1.0)
    with pytest.raises(ParameterError):
        SimulationGrid(n=4, mesh=0.5, trunc=3.0)
    with pytest.raises(ParameterError):
        SimulationGrid(n=0, mesh=0.5, trunc=1.0)


def test_simulate_rejects_uncertified_grid():
    grid = SimulationGrid(n=4, mesh=0.5, trunc=2.0)
    with pytest.raises(ContractError):
        simulate_paths(OU_BANK, P15, grid, SeedStream(0))


def test_indicator_paths_are_raw_increments():
    # Mesh-1 indicator kernel: X_s equals the increment at the observation
    # slot, bit-exactly (the degenerate i.i.d. reduction).
    bank = KernelBank((indicator_kernel(),))
    grid = plan_grid(bank, P15, n=16, tol=np.inf)
    paths = simulate_paths(bank, P15, grid, SeedStream(5))
    incr = sample_sbs(P15, grid.lattice_size, SeedStream(5))
    # On the unit mesh the kernel reduces to a point mass at offset 0, so
    # observation s reads the increment T slots in.
    np.testing.assert_array_equal(paths.values[0], incr[np.arange(16) + int(grid.trunc)])


def test_fft_convolution_matches_direct_sum():
    grid = plan_grid(OU_BANK, P15, n=6, tol=1e-1)
    stream = SeedStream(123)
    paths = simulate_paths(OU_BANK, P15, grid, stream)
    inc_params = StableParams(P15.beta, increment_scale(P15, grid.mesh))
    incr = sample_sbs(inc_params, grid.lattice_size, stream)
    p = grid.steps_per_unit
    r0 = (grid.n - 1 + int(grid.trunc)) * p
    base = np.arange(grid.n) * p + grid.lattice_size - 1
    for i, spec in enumerate(OU_BANK):
        vals = kernel_eval_lattice(spec, np.arange(-r0, r0 + 1) * grid.mesh)
        direct = np.convolve(incr, vals)[base]
        np.testing.assert_allclose(paths.values[i], direct, rtol=1e-9, atol=1e-12)


def test_paths_deterministic_and_shaped():
    grid = plan_grid(OU_BANK, P15, n=12, tol=1e-1)
    a = simulate_paths(OU_BANK, P15, grid, SeedStream(9, 2))
    b = simulate_paths(OU_BANK, P15, grid, SeedStream(9, 2))
    assert a.values.tobytes() == b.values.tobytes()
    assert (a.m, a.n) == (2, 12)


def test_components_share_one_driver():
    # Identical kernels in two slots must produce identical rows.
    bank = KernelBank((ou_kernel(1.0), ou_kernel(1.0)))
    grid = plan_grid(bank, P15, n=8, tol=1e-1)
    paths = simulate_paths(bank, P15, grid, SeedStream(4))
    np.testing.assert_array_equal(paths.values[0], paths.values[1])


def test_marginal_scale_ou_closed_form():
    lam, beta = 2.0, 1.5
    expect = 1.0 * (1.0 / (lam * beta)) ** (1.0 / beta)
    np.testing.assert_allclose(marginal_scale(ou_kernel(lam), P15), expect, rtol=1e-8)


def test_marginal_samples_contract_checks():
    grid_n2 = plan_grid(OU_BANK, P15, n=2, tol=1e-1)
    with pytest.raises(ParameterError):
        marginal_samples(OU_BANK, P15, grid_n2, SeedStream(0), 10)
    grid = plan_grid(OU_BANK, P15, n=1, tol=1e-1)
    with pytest.raises(ParameterError):
        marginal_samples(OU_BANK, P15, grid, SeedStream(0), 0)
    with pytest.raises(ContractError):
        marginal_samples(OU_BANK, P15, SimulationGrid(n=1, mesh=0.5, trunc=2.0), SeedStream(0), 4)


def test_marginal_samples_determinism_contract():
    # Same (seed, count) reproduces bytes; the 2048-replication chunk sets
    # the uniform block boundaries, so prefixes agree at whole chunks only.
    grid = plan_grid(OU_BANK, P15, n=1, tol=1e-1)
    a = marginal_samples(OU_BANK, P15, grid, SeedStream(21), 7)
    b = marginal_samples(OU_BANK, P15, grid, SeedStream(21), 7)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (7, 2)
    full = marginal_samples(OU_BANK, P15, grid, SeedStream(21), 2048)
    longer = marginal_samples(OU_BANK, P15, grid, SeedStream(21), 2050)
    np.testing.assert_array_equal(full, longer[:2048])


def test_marginal_samples_match_manual_contraction():
    grid = plan_grid(OU_BANK, P15, n=1, tol=1e-1)
    out = marginal_samples(OU_BANK, P15, grid, SeedStream(33), 1)
    inc_params = StableParams(P15.beta, increment_scale(P15, grid.mesh))
    incr = sample_sbs(inc_params, grid.lattice_size, SeedStream(33))
    p = grid.steps_per_unit
    r0 = int(grid.trunc) * p  # n = 1
    expect = np.empty(2)
    for i, spec in enumerate(OU_BANK):
        vals = kernel_eval_lattice(spec, np.arange(-r0, r0 + 1) * grid.mesh)
        expect[i] = incr @ vals
    np.testing.assert_allclose(out[0], expect, rtol=1e-12)
