"""Functionals of the stationary paths and their exact second-order theory.

The test functionals are trigonometric rows

    f_i(x) = a_i cos(<u_i, x> + theta_i),

whose means and lag covariances against a shared stable driver reduce to
one-dimensional quadratures of kernel combinations: any linear functional
<c, X_0> of the stationary vector is symmetric stable with a computable
scale, so E cos(.) is an exponential of a kernel-power integral.

Lag covariances are evaluated cancellation-free: writing
N_i = int |h_i|^b, D+- = N_i + N_j - int |h_i(lag + t) +- h_j(t)|^b dt,
the product-to-sum identity rearranges exactly to

    cov = a_i a_j / 2 * exp(-s (N_i + N_j))
          * [cos(th_i + th_j) expm1(s D+) + cos(th_i - th_j) expm1(s D-)]

with s = scale^beta, and D+- is computed as a SINGLE quadrature of
|h_i|^b + |h_j|^b - |h_i +- h_j|^b, supported only on the overlap of the
shifted kernels.  At large lags this evaluates the small covariance
directly instead of subtracting two near-equal exponentials.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DivergenceError, HypothesisError, ParameterError
from .kernels import KernelBank, kernel_eval_raw
from .quadrature import integrate_piecewise, scalar_fn
from .simulate import PathMatrix
from .stable import StableParams

__all__ = [
    "Functional",
    "CovMatrix",
    "make_trig_functional",
    "analytic_mean_trig",
    "evaluate_vn",
    "analytic_lag_covariance_trig",
    "asymptotic_covariance",
    "lattice_mean_trig",
    "lattice_lag_covariance_trig",
    "lattice_asymptotic_covariance",
    "empirical_covariance",
    "covariance_standard_errors",
]

log = logging.getLogger("stablema")


@dataclass(frozen=True, eq=False)
class Functional:
    """Vector of trig rows with certified derivative bounds.

    grad_bounds[i] = |a_i| max_j |U_ij| and
    hess_bounds[i] = |a_i| max_{j,k} |U_ij U_ik| bound the sup norms of the
    gradient/Hessian entries of row i; downstream rate constants consume
    them.
    """

    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    grad_bounds: np.ndarray
    hess_bounds: np.ndarray

    @property
    def d(self) -> int:
        return self.freqs.shape[0]

    @property
    def m(self) -> int:
        return self.freqs.shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """f(x) for x of shape (m,) or (m, n); returns (d,) or (d, n)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        arg = self.freqs @ (x[:, None] if single else x)
        vals = self.amps[:, None] * np.cos(arg + self.phases[:, None])
        return vals[:, 0] if single else vals


def make_trig_functional(freqs, phases, amps) -> Functional:
    """Rows f_i(x) = a_i cos(<freqs[i], x> + phases[i])."""
    amps = np.atleast_1d(np.asarray(amps, dtype=float))
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    d = freqs.shape[0]
    if amps.shape != (d,) or phases.shape != (d,):
        raise ParameterError(
            f"shape mismatch: freqs {freqs.shape}, amps {amps.shape}, phases {phases.shape}"
        )
    if not (np.all(np.isfinite(amps)) and np.all(np.isfinite(freqs)) and np.all(np.isfinite(phases))):
        raise ParameterError("functional parameters must be finite")
    row_max = np.max(np.abs(freqs), axis=1)
    return Functional(
        amps=amps,
        freqs=freqs,
        phases=phases,
        grad_bounds=np.abs(amps) * row_max,
        hess_bounds=np.abs(amps) * row_max**2,
    )


def _check_dims(fn: Functional, bank: KernelBank) -> None:
    if fn.m != bank.m:
        raise ParameterError(f"functional expects m={fn.m} kernels, bank has {bank.m}")


def _combined_splits(bank: KernelBank, coeffs: np.ndarray, shift: float = 0.0):
    pts = set()
    for c, spec in zip(coeffs, bank):
        if c != 0.0:
            pts.update(b - shift for b in spec.breakpoints)
    return pts


def _combined_support(bank: KernelBank, coeffs: np.ndarray, shift: float = 0.0):
    los = [s.support[0] - shift for c, s in zip(coeffs, bank) if c != 0.0]
    his = [s.support[1] - shift for c, s in zip(coeffs, bank) if c != 0.0]
    if not los:
        return 0.0, 0.0
    return min(los), max(his)


def _check_integrable(bank: KernelBank, coeffs: np.ndarray, beta: float) -> None:
    used = [s for c, s in zip(coeffs, bank) if c != 0.0]
    if not used:
        return
    a = min(s.alpha for s in used)
    k = min(s.kappa for s in used)
    if a * beta <= 1.0:
        raise DivergenceError(f"combined row has alpha*beta = {a * beta:g} <= 1")
    if k * beta <= -1.0:
        raise DivergenceError(f"combined row has kappa*beta = {k * beta:g} <= -1")


def _row_values(bank: KernelBank, coeffs: np.ndarray, t: np.ndarray, shift: float = 0.0):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape if t.ndim else (1,))
    tt = t if t.ndim else t.reshape(1)
    for c, spec in zip(coeffs, bank):
        if c != 0.0:
            out = out + c * kernel_eval_raw(spec, tt + shift)
    return out


def _row_norm(bank: KernelBank, coeffs: np.ndarray, beta: float, rel_tol: float) -> float:
    """Integral of |sum_l c_l g_l(t)|^beta over the line."""
    coeffs = np.asarray(coeffs, dtype=float)
    if np.all(coeffs == 0.0):
        return 0.0
    _check_integrable(bank, coeffs, beta)
    lo, hi = _combined_support(bank, coeffs)

    def f(t):
        return np.abs(_row_values(bank, coeffs, t)) ** beta

    return integrate_piecewise(
        f, splits=_combined_splits(bank, coeffs), lo=lo, hi=hi, rel_tol=rel_tol
    )


def analytic_mean_trig(
    fn: Functional, bank: KernelBank, params: StableParams, rel_tol: float = 1e-8
) -> np.ndarray:
    """E f(X_0) componentwise: a_i cos(theta_i) exp(-scale^b int |h_i|^b)."""
    _check_dims(fn, bank)
    s = params.scale**params.beta
    out = np.empty(fn.d)
    for i in range(fn.d):
        norm = _row_norm(bank, fn.freqs[i], params.beta, rel_tol)
        out[i] = fn.amps[i] * np.cos(fn.phases[i]) * np.exp(-s * norm)
    return out


def evaluate_vn(paths, fn: Functional, centering) -> np.ndarray:
    """Normalized centered sum n^{-1/2} sum_s (f(X_s) - centering).

    centering is the d-vector subtracted per time point (analytic mean for
    exact centering, or an explicit estimate); subtraction happens before
    summation so a constant shift of f and centering cancels.
    """
    x = paths.values if isinstance(paths, PathMatrix) else np.asarray(paths, dtype=float)
    if x.ndim != 2 or x.shape[0] != fn.m:
        raise ContractError(f"paths must be (m={fn.m}, n), got {x.shape}")
    centering = np.asarray(centering, dtype=float)
    if centering.shape != (fn.d,):
        raise ContractError(f"centering must have shape ({fn.d},), got {centering.shape}")
    n = x.shape[1]
    vals = fn.evaluate(x) - centering[:, None]
    return vals.sum(axis=1) / np.sqrt(n)


def _lag_cov(
    fn: Functional,
    bank: KernelBank,
    params: StableParams,
    norms: np.ndarray,
    i: int,
    j: int,
    lag: int,
    rel_tol: float,
) -> float:
    """cov(f_i(X_lag), f_j(X_0)) given precomputed row norms."""
    ci = fn.freqs[i]
    cj = fn.freqs[j]
    if np.all(ci == 0.0) or np.all(cj == 0.0):
        return 0.0
    s = params.scale**params.beta
    lo_i, hi_i = _combined_support(bank, ci, shift=float(lag))
    lo_j, hi_j = _combined_support(bank, cj)
    lo, hi = max(lo_i, lo_j), min(hi_i, hi_j)
    if lo >= hi:
        d_plus = d_minus = 0.0
    else:
        splits = _combined_splits(bank, ci, shift=float(lag)) | _combined_splits(bank, cj)

        def make(sign):
            def f(t):
                a = _row_values(bank, ci, t, shift=float(lag))
                b = _row_values(bank, cj, t)
                return (
                    np.abs(a) ** params.beta
                    + np.abs(b) ** params.beta
                    - np.abs(a + sign * b) ** params.beta
                )

            return f

        # Signed integrand: vanishes off the overlap, so the bounded-range
        # quadrature with a small absolute floor is enough.
        d_plus = _signed_quad(make(+1.0), splits, lo, hi, rel_tol)
        d_minus = _signed_quad(make(-1.0), splits, lo, hi, rel_tol)
    pref = 0.5 * fn.amps[i] * fn.amps[j] * np.exp(-s * (norms[i] + norms[j]))
    th_i, th_j = fn.phases[i], fn.phases[j]
    return float(
        pref
        * (
            np.cos(th_i + th_j) * np.expm1(s * d_plus)
            + np.cos(th_i - th_j) * np.expm1(s * d_minus)
        )
    )


def _signed_quad(f, splits, lo, hi, rel_tol):
    from scipy.integrate import quad

    pts = sorted({float(p) for p in splits if lo < float(p) < hi})
    edges = [lo, *pts, hi]
    f = scalar_fn(f)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a == b:
            continue
        val, _ = quad(f, a, b, epsabs=1e-14, epsrel=rel_tol, limit=400)
        total += val
    return total


def analytic_lag_covariance_trig(
    fn: Functional,
    bank: KernelBank,
    params: StableParams,
    i: int,
    j: int,
    lag: int,
    rel_tol: float = 1e-8,
) -> float:
    """Exact cov(f_i(X_lag), f_j(X_0)) by stable characteristic functionals."""
    _check_dims(fn, bank)
    if int(lag) != lag:
        raise ParameterError(f"lag must be an integer, got {lag!r}")
    norms = np.array([_row_norm(bank, fn.freqs[k], params.beta, rel_tol) for k in range(fn.d)])
    return _lag_cov(fn, bank, params, norms, i, j, int(lag), rel_tol)


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """d x d covariance with provenance metadata.

    provenance is "analytic-series" (series truncated at truncation_lag with
    the reported tail_bound) or "empirical" (sample covariance over
    `replications` replications).
    """

    matrix: np.ndarray
    provenance: str
    truncation_lag: int | None = None
    tail_bound: float | None = None
    replications: int | None = None

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def asymptotic_covariance(
    fn: Functional,
    bank: KernelBank,
    params: StableParams,
    S: int | None = None,
    tail_frac: float = 0.01,
    rel_tol: float = 1e-8,
    max_lag: int = 4096,
) -> CovMatrix:
    """Two-sided series Sigma^2_ij = sum_{s>=0} cov_ij(s) + sum_{s>=1} cov_ji(s).

    With S given, the series truncates there and the reported tail bound is
    C_tail * sum_{s>S} s^{-r} (bounded by the integral) with r = alpha_min
    * beta / 2, the certified lag-covariance decay, and C_tail the largest
    |cov| * s^r over s in [S/2, S].  With S=None, lags accumulate in
    doubling blocks until that bound drops below tail_frac of the largest
    diagonal entry.  Requires the summability gate alpha_min * beta > 2.
    """
    _check_dims(fn, bank)
    ab = bank.alpha_min() * params.beta
    if ab <= 2.0:
        raise HypothesisError(f"alpha_min * beta = {ab:g} <= 2; series not certified summable")
    norms = np.array([_row_norm(bank, fn.freqs[k], params.beta, rel_tol) for k in range(fn.d)])

    def cov(i, j, s):
        return _lag_cov(fn, bank, params, norms, i, j, s, rel_tol)

    return _series_sum(cov, fn.d, ab / 2.0, S, tail_frac, max_lag, "analytic-series")


def _series_sum(cov_fn, d, r, S, tail_frac, max_lag, provenance) -> CovMatrix:
    """Accumulate Sigma^2 from a memoized lag-covariance callable."""
    cache = {}

    def cov_cached(i, j, s):
        key = (i, j, s)
        if key not in cache:
            cache[key] = cov_fn(i, j, s)
        return cache[key]

    sigma = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            sigma[i, j] = cov_cached(i, j, 0)
            sigma[j, i] = sigma[i, j]

    def add_block(lo, hi):
        for s in range(lo, hi + 1):
            for i in range(d):
                for j in range(d):
                    c = cov_cached(i, j, s)
                    sigma[i, j] += c  # cov(f_i(X_s), f_j(X_0))
                    sigma[j, i] += c  # its mirror term in the (j, i) entry

    def tail_bound(upto):
        peak = 0.0
        for s in range(max(1, upto // 2), upto + 1):
            for i in range(d):
                for j in range(d):
                    peak = max(peak, abs(cov_cached(i, j, s)) * s**r)
        return peak * upto ** (1.0 - r) / (r - 1.0)

    if S is not None:
        S = int(S)
        if S < 1:
            raise ParameterError(f"S must be >= 1, got {S}")
        add_block(1, S)
        return CovMatrix(
            matrix=sigma, provenance=provenance, truncation_lag=S, tail_bound=tail_bound(S)
        )

    upto = 8
    done = 0
    while True:
        add_block(done + 1, upto)
        done = upto
        tail = tail_bound(upto)
        max_diag = float(np.max(np.diag(sigma)))
        if tail <= tail_frac * max(max_diag, 1e-300):
            break
        upto *= 2
        if upto > max_lag:
            log.warning("series truncated at lag %d with tail bound %.3e", done, tail)
            break
    return CovMatrix(
        matrix=sigma, provenance=provenance, truncation_lag=done, tail_bound=tail_bound(done)
    )


def _lattice_rows(fn: Functional, bank: KernelBank, grid) -> np.ndarray:
    """Combined row kernels sum_l U_il g_l sampled on the simulation lattice.

    Row i is sampled at offsets (q - R0) h for q = 0 .. 2 R0 with
    R0 = (n - 1 + T) / h, exactly the sample array the FFT convolution in
    simulate_paths contracts against the increments: observation s reads the
    window q in [(s-1)/h, (s-1)/h + lattice_size).  Full-array sums therefore
    give the stationary interior law of the simulated process; the per-s
    window differences live entirely in the certified truncation tail.
    """
    from .simulate import _kernel_lattice_samples

    p = grid.steps_per_unit
    r0 = (grid.n - 1 + int(grid.trunc)) * p
    full = 2 * r0 + 1
    rows = np.zeros((fn.d, full))
    for l, spec in enumerate(bank):
        col = fn.freqs[:, l]
        if np.all(col == 0.0):
            continue
        g, offset = _kernel_lattice_samples(spec, grid)
        rows[:, offset : offset + len(g)] += col[:, None] * g[None, :]
    return rows


def lattice_mean_trig(fn: Functional, bank: KernelBank, params: StableParams, grid) -> np.ndarray:
    """E f(X_0) for the lattice process the simulator actually samples.

    Same formula as analytic_mean_trig with the kernel-power integral
    replaced by its lattice sum h sum_q |h_i(q h)|^beta, so simulated paths
    centered with this vector have exactly zero-mean summands up to the
    truncation-window tail.  Use it whenever n^{1/2}-amplified centering
    error matters; the continuous mean differs by O(grid tol) in scale.
    """
    _check_dims(fn, bank)
    for i in range(fn.d):
        _check_integrable(bank, fn.freqs[i], params.beta)
    rows = _lattice_rows(fn, bank, grid)
    s = params.scale**params.beta
    norms = grid.mesh * (np.abs(rows) ** params.beta).sum(axis=1)
    return fn.amps * np.cos(fn.phases) * np.exp(-s * norms)


def _lattice_lag_cov(fn, params, grid, rows, pows, norms, i, j, lag):
    """cov(f_i(X_lag), f_j(X_0)) of the lattice process, cancellation-free."""
    s = params.scale**params.beta
    shift = int(lag) * grid.steps_per_unit
    L = rows.shape[1]
    if shift >= L:
        d_plus = d_minus = 0.0
    else:
        a, b = rows[i, shift:], rows[j, : L - shift]
        pa, pb = pows[i, shift:], pows[j, : L - shift]
        # Summands vanish identically (in floating point too) wherever one
        # factor is zero, so restricting to the overlap is just an optimization
        # we skip; the arrays are small.
        d_plus = grid.mesh * float(np.sum(pa + pb - np.abs(a + b) ** params.beta))
        d_minus = grid.mesh * float(np.sum(pa + pb - np.abs(a - b) ** params.beta))
    pref = 0.5 * fn.amps[i] * fn.amps[j] * np.exp(-s * (norms[i] + norms[j]))
    th_i, th_j = fn.phases[i], fn.phases[j]
    return float(
        pref
        * (
            np.cos(th_i + th_j) * np.expm1(s * d_plus)
            + np.cos(th_i - th_j) * np.expm1(s * d_minus)
        )
    )


def lattice_lag_covariance_trig(
    fn: Functional, bank: KernelBank, params: StableParams, grid, i: int, j: int, lag: int
) -> float:
    """Exact cov(f_i(X_lag), f_j(X_0)) under the lattice law of the simulator."""
    _check_dims(fn, bank)
    if int(lag) != lag:
        raise ParameterError(f"lag must be an integer, got {lag!r}")
    lag = int(lag)
    if lag < 0:
        i, j, lag = j, i, -lag  # stationarity: cov_ij(-k) = cov_ji(k)
    rows = _lattice_rows(fn, bank, grid)
    pows = np.abs(rows) ** params.beta
    norms = grid.mesh * pows.sum(axis=1)
    return _lattice_lag_cov(fn, params, grid, rows, pows, norms, i, j, lag)


def lattice_asymptotic_covariance(
    fn: Functional,
    bank: KernelBank,
    params: StableParams,
    grid,
    S: int | None = None,
    tail_frac: float = 0.01,
    max_lag: int = 4096,
) -> CovMatrix:
    """asymptotic_covariance for the lattice law of the simulator.

    Lag covariances come from lattice sums over the simulation sample arrays
    instead of quadratures, so the result is the exact normalized-sum limit
    for the paths simulate_paths produces at this grid.  Reference of choice
    when comparing against simulated V_n at large n, where an O(grid tol)
    model mismatch would otherwise dominate.  Same truncation logic and
    decay certificate as the continuous version.
    """
    _check_dims(fn, bank)
    ab = bank.alpha_min() * params.beta
    if ab <= 2.0:
        raise HypothesisError(f"alpha_min * beta = {ab:g} <= 2; series not certified summable")
    for i in range(fn.d):
        _check_integrable(bank, fn.freqs[i], params.beta)
    rows = _lattice_rows(fn, bank, grid)
    pows = np.abs(rows) ** params.beta
    norms = grid.mesh * pows.sum(axis=1)

    def cov(i, j, s):
        return _lattice_lag_cov(fn, params, grid, rows, pows, norms, i, j, s)

    return _series_sum(cov, fn.d, ab / 2.0, S, tail_frac, max_lag, "lattice-series")


def empirical_covariance(samples: np.ndarray) -> CovMatrix:
    """Sample covariance (ddof=1) of replications stacked as rows."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ParameterError(f"samples must be (R >= 2, d), got {samples.shape}")
    mat = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    return CovMatrix(matrix=mat, provenance="empirical", replications=samples.shape[0])


def covariance_standard_errors(samples: np.ndarray) -> np.ndarray:
    """Entrywise MC standard errors of the sample covariance.

    SE_ij = std over replications of (z_i z_j) / sqrt(R), z centered.
    """
    samples = np.asarray(samples, dtype=float)
    z = samples - samples.mean(axis=0)
    R = samples.shape[0]
    prods = z[:, :, None] * z[:, None, :]
    return prods.std(axis=0, ddof=1) / np.sqrt(R)
