"""Lattice simulation of coupled heavy-tailed moving averages.

All m components integrate the SAME driver realization against their own
kernels:

    X_s^i = sum_j g_i(s - t_j) dL_j,     t_j = (1 - T) + j h,

with exact stable increments dL_j of scale sigma h^{1/beta} on a uniform
mesh-h lattice covering [1 - T, n + T].  plan_grid certifies (T, h) against
a relative scale tolerance before any sampling happens; simulate_paths
refuses uncertified grids.

The lattice sum over j is a discrete convolution evaluated at every
(1/h)-th output position, done with one shared FFT of the increments per
replication and one spectrum multiply per kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import ContractError, ParameterError, PlanningError
from .kernels import KernelBank, KernelSpec, beta_norm, kernel_eval_lattice
from .quadrature import integrate_piecewise
from .stable import SeedStream, StableParams, increment_scale, sample_sbs, sample_sbs_from

__all__ = [
    "SimulationGrid",
    "PathMatrix",
    "plan_grid",
    "simulate_paths",
    "marginal_scale",
    "marginal_samples",
]

_T_CAP = 2**20
_H_CAP = 2.0**-12
_LATTICE_CAP = 200_000_000


@dataclass(frozen=True)
class SimulationGrid:
    """Certified simulation lattice: n observations, mesh h, window T.

    T and 1/h are powers of two, so T/h is an integer and observation times
    land exactly on lattice points.  `certified` is set only by plan_grid;
    hand-built grids are rejected by simulate_paths.
    """

    n: int
    mesh: float
    trunc: float
    tol: float = np.nan
    certified: bool = False

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n!r}")
        h = float(self.mesh)
        T = float(self.trunc)
        if not (0 < h <= 1.0) or 2.0 ** round(np.log2(h)) != h:
            raise ParameterError(f"mesh must be a power of two in (0, 1], got {h!r}")
        if T < 1.0 or 2.0 ** round(np.log2(T)) != T:
            raise ParameterError(f"trunc must be a power of two >= 1, got {T!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "mesh", h)
        object.__setattr__(self, "trunc", T)

    @property
    def steps_per_unit(self) -> int:
        return round(1.0 / self.mesh)

    @property
    def lattice_size(self) -> int:
        return (self.n - 1 + 2 * int(self.trunc)) * self.steps_per_unit + 1


@dataclass(frozen=True)
class PathMatrix:
    """m x n matrix of observations; every row shares one driver realization."""

    values: np.ndarray
    grid: SimulationGrid
    stream: SeedStream

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def _tail_mass(spec: KernelSpec, beta: float, T: float) -> float:
    """Integral of |g|^beta over |x| > T (T >= 1, beyond all breakpoints)."""
    total = 0.0
    lo, hi = spec.support

    def f(t):
        return np.abs(kernel_eval_lattice(spec, np.asarray(t))) ** beta

    if hi > T:
        total += integrate_piecewise(f, lo=T, hi=hi, rel_tol=1e-9)
    if lo < -T:
        total += integrate_piecewise(f, lo=lo, hi=-T, rel_tol=1e-9)
    return total


def _lattice_mass(spec: KernelSpec, beta: float, T: float, h: float) -> float:
    """h * sum over |j h| <= T of |g(j h)|^beta, singular points skipped."""
    half = round(T / h)
    if 2 * half + 1 > _LATTICE_CAP:
        raise PlanningError(f"certificate lattice would need {2 * half + 1} points")
    x = np.arange(-half, half + 1) * h
    vals = np.abs(kernel_eval_lattice(spec, x)) ** beta
    return float(h * vals.sum())


def plan_grid(bank: KernelBank, params: StableParams, n: int, tol: float) -> SimulationGrid:
    """Choose the smallest certified window T and mesh h for the bank.

    Certificates, both relative in scale space and checked per kernel:

    * truncation:  (integral of |g|^b over |x| > T)^{1/b} <= tol * norm^{1/b}
    * mesh:        |lattice scale - continuous scale| <= tol * continuous scale

    T doubles from 1 (cap 2^20), then h halves from 1 (cap 2^-12); failure to
    certify inside the caps raises PlanningError.  tol = inf accepts the
    minimal grid (T = 1, h = 1) outright.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol!r}")
    beta = params.beta
    norms = [beta_norm(k, beta) for k in bank]  # raises DivergenceError if unsound
    if np.isinf(tol):
        return SimulationGrid(n=n, mesh=1.0, trunc=1.0, tol=tol, certified=True)

    tail_budget = [tol**beta * N for N in norms]
    T = 1.0
    while True:
        if all(_tail_mass(k, beta, T) <= b for k, b in zip(bank, tail_budget)):
            break
        T *= 2.0
        if T > _T_CAP:
            raise PlanningError(f"no window T <= 2^20 certifies tol {tol:g}")

    scales = [N ** (1.0 / beta) for N in norms]
    h = 1.0
    while True:
        ok = True
        for k, N, s in zip(bank, norms, scales):
            disc = _lattice_mass(k, beta, T, h) ** (1.0 / beta)
            if abs(disc - s) > tol * s:
                ok = False
                break
        if ok:
            break
        h *= 0.5
        if h < _H_CAP:
            raise PlanningError(f"no mesh h >= 2^-12 certifies tol {tol:g}")
    return SimulationGrid(n=n, mesh=h, trunc=T, tol=tol, certified=True)


@lru_cache(maxsize=64)
def _kernel_lattice_samples(spec: KernelSpec, grid: SimulationGrid):
    """Kernel sampled on the full two-sided offset lattice, zero-trimmed.

    Returns (g, offset): g is the nonzero run of samples at offsets
    (offset - R0) * h ... where R0 = (n - 1 + T) * p indexes offset zero.
    Cached: the samples depend only on (kernel, grid), not the replication.
    """
    p = grid.steps_per_unit
    r0 = (grid.n - 1 + int(grid.trunc)) * p
    x = np.arange(-r0, r0 + 1) * grid.mesh
    vals = kernel_eval_lattice(spec, x)
    nz = np.nonzero(vals)[0]
    if len(nz) == 0:
        return np.zeros(1), 0
    return vals[nz[0] : nz[-1] + 1], int(nz[0])


@lru_cache(maxsize=64)
def _kernel_spectrum(spec: KernelSpec, grid: SimulationGrid, flen: int):
    g, offset = _kernel_lattice_samples(spec, grid)
    return sfft.rfft(g, flen), len(g), offset


def simulate_paths(
    bank: KernelBank, params: StableParams, grid: SimulationGrid, stream: SeedStream
) -> PathMatrix:
    """Simulate all m components from one shared driver realization."""
    if not grid.certified:
        raise ContractError("grid was not produced by plan_grid; refusing to simulate")
    n = grid.n
    p = grid.steps_per_unit
    nlat = grid.lattice_size
    if nlat > _LATTICE_CAP:
        raise PlanningError(f"lattice of {nlat} points exceeds the resource cap")
    inc_params = StableParams(params.beta, increment_scale(params, grid.mesh))
    incr = sample_sbs(inc_params, nlat, stream)

    samples = [_kernel_lattice_samples(spec, grid) for spec in bank]
    max_len = max(len(g) for g, _ in samples)
    fincr = None
    if max_len > 1:
        flen = sfft.next_fast_len(nlat + max_len - 1, real=True)
        fincr = sfft.rfft(incr, flen)

    out = np.empty((bank.m, n))
    base_idx = np.arange(n) * p + (nlat - 1)
    for i, spec in enumerate(bank):
        g, offset = samples[i]
        idx = base_idx - offset
        row = np.zeros(n)
        if len(g) == 1:
            # Pointlike kernel: the convolution is a shifted copy; doing it
            # directly keeps the degenerate i.i.d. case bit-exact.
            valid = (idx >= 0) & (idx < nlat)
            row[valid] = g[0] * incr[idx[valid]]
        else:
            fg, glen, _ = _kernel_spectrum(spec, grid, flen)
            conv_len = nlat + glen - 1
            conv = sfft.irfft(fincr * fg, flen)[:conv_len]
            valid = (idx >= 0) & (idx < conv_len)
            row[valid] = conv[idx[valid]]
        out[i] = row
    return PathMatrix(values=out, grid=grid, stream=stream)


def marginal_scale(spec: KernelSpec, params: StableParams, rel_tol: float = 1e-6) -> float:
    """Scale of the stationary marginal: sigma * (integral |g|^beta)^{1/beta}."""
    return params.scale * beta_norm(spec, params.beta, rel_tol=rel_tol) ** (1.0 / params.beta)


def marginal_samples(
    bank: KernelBank,
    params: StableParams,
    grid: SimulationGrid,
    stream: SeedStream,
    count: int,
) -> np.ndarray:
    """count independent draws of the time-1 marginal vector, shape (count, m).

    Batched replication path for marginal-law checks: one stream supplies
    lattice_size increments per replication in fixed chunks of 2048
    replications (the chunk size is part of the determinism contract since
    it sets the uniform block boundaries), and each replication contracts
    against the kernel sample vectors.  Requires a grid planned with n = 1.
    """
    if not grid.certified:
        raise ContractError("grid was not produced by plan_grid; refusing to simulate")
    if grid.n != 1:
        raise ParameterError("marginal_samples requires a grid planned with n = 1")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    nlat = grid.lattice_size
    inc_params = StableParams(params.beta, increment_scale(params, grid.mesh))
    gmat = np.zeros((nlat, bank.m))
    for i, spec in enumerate(bank):
        g, offset = _kernel_lattice_samples(spec, grid)
        gmat[offset : offset + len(g), i] = g
    rng = stream.generator()
    chunk = 2048
    out = np.empty((count, bank.m))
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        incr = sample_sbs_from(inc_params, (stop - start) * nlat, rng)
        out[start:stop] = incr.reshape(stop - start, nlat) @ gmat
    return out
