"""Experiment orchestration: replication engine, normality proxy, rate fits.

The smooth-metric proxy is a finite-dictionary lower bound: every dictionary
entry a cos(<v, x> + theta) carries certified second and third derivative
sup-norms a max|v_j v_k| <= 1 and a max|v_j v_k v_l| <= 1, so the reported
max discrepancy under-estimates the metric it witnesses.  Reports carry the
"proxy (lower bound)" label for this reason.

Replications are embarrassingly parallel over per-replication seed streams;
results land in preallocated arrays indexed by replication, so thread count
and completion order cannot change a single bit of any reported value.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from .bounds import rate_prediction
from .config import ExperimentConfig
from .errors import ContractError, DomainError, HypothesisError, ParameterError
from .kernels import KernelBank
from .simulate import plan_grid, simulate_paths
from .stable import SeedStream, StableParams
from .stats import (
    CovMatrix,
    Functional,
    analytic_mean_trig,
    asymptotic_covariance,
    covariance_standard_errors,
    empirical_covariance,
    evaluate_vn,
    lattice_asymptotic_covariance,
    lattice_mean_trig,
)

__all__ = [
    "D3ProxyDictionary",
    "D3ProxyResult",
    "RateFitResult",
    "default_dictionary",
    "psd_clip",
    "d3_proxy",
    "fit_rate",
    "collect_vn",
    "run_clt_experiment",
    "run_covariance_experiment",
    "run_rates_study",
    "run_simulate",
    "run_rho_table",
]

log = logging.getLogger("stablema")

UNVERIFIABLE_FLAG = "rate unverifiable at configured n range"
SLOPE_WINDOW = 0.15
MIN_RESOLVABLE_SLOPE = 0.15


@dataclass(frozen=True)
class D3ProxyDictionary:
    """Entries (v, theta, a) with a = min(1/max|v_j v_k|, 1/max|v_j v_k v_l|).

    The amplitude rule caps the second and third derivative sup-norms of
    a cos(<v, x> + theta) at 1, which is what makes each entry an admissible
    witness; `certificates` exposes those norms for assertion.
    """

    entries: tuple

    def __post_init__(self):
        for v, theta, a in self.entries:
            arr = np.asarray(v, dtype=float)
            m = float(np.max(np.abs(arr))) if arr.size else 0.0
            cap = 1.0 if m == 0.0 else min(m**-2, m**-3)
            if a > cap * (1.0 + 1e-12):
                raise ParameterError(
                    f"entry amplitude {a} exceeds the derivative cap {cap} for v={v}"
                )

    @property
    def size(self) -> int:
        return len(self.entries)

    def certificates(self) -> list[tuple[float, float]]:
        out = []
        for v, _, a in self.entries:
            m = float(np.max(np.abs(np.asarray(v, dtype=float))))
            out.append((a * m**2, a * m**3))
        return out


def _entry(v, theta: float) -> tuple[tuple, float, float]:
    arr = np.asarray(v, dtype=float)
    m = float(np.max(np.abs(arr))) if arr.size else 0.0
    a = 1.0 if m == 0.0 else min(m**-2, m**-3)
    return (tuple(float(x) for x in arr), float(theta), a)


def _directions(d: int) -> list[np.ndarray]:
    if d == 2:
        angles = np.arange(6) * np.pi / 6.0
        return [np.array([np.cos(t), np.sin(t)]) for t in angles]
    dirs: list[np.ndarray] = []
    for i in range(min(d, 6)):
        e = np.zeros(d)
        e[i] = 1.0
        dirs.append(e)
    extras = [
        np.ones(d) / np.sqrt(d),
        np.array([(-1.0) ** i for i in range(d)]) / np.sqrt(d),
        np.arange(1, d + 1) / np.linalg.norm(np.arange(1, d + 1)),
        np.arange(d, 0, -1) / np.linalg.norm(np.arange(d, 0, -1)),
    ]
    k = 0
    while len(dirs) < 6:
        # Low dimension cannot supply six distinct unit directions; repeat
        # deterministically rather than shrink the dictionary.
        dirs.append(extras[k % len(extras)] if d > 1 else np.ones(1))
        k += 1
    return dirs[:6]


def default_dictionary(d: int) -> D3ProxyDictionary:
    """24 witnesses: shells |v| in {0.5, 1}, 6 directions, phases {0, pi/2}."""
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    entries = []
    for shell in (0.5, 1.0):
        for direction in _directions(d):
            for theta in (0.0, np.pi / 2.0):
                entries.append(_entry(shell * direction, theta))
    return D3ProxyDictionary(entries=tuple(entries))


def psd_clip(matrix: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to zero (warns when it actually clips)."""
    matrix = np.asarray(matrix, dtype=float)
    sym = 0.5 * (matrix + matrix.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -1e-12 * max(1.0, vals.max()):
        log.warning("covariance matrix has negative eigenvalue %.3e; clipping", vals.min())
    clipped = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return 0.5 * (clipped + clipped.T)


@dataclass(frozen=True, eq=False)
class D3ProxyResult:
    value: float
    diffs: np.ndarray
    ses: np.ndarray
    argmax: int

    @property
    def se_at_max(self) -> float:
        return float(self.ses[self.argmax])


def d3_proxy(samples: np.ndarray, sigma2: CovMatrix, dictionary: D3ProxyDictionary) -> D3ProxyResult:
    """max over entries of |mean phi(V) - E phi(Y)|, Y ~ N(0, clipped Sigma^2)."""
    if dictionary.size == 0:
        raise ContractError("empty witness dictionary")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ParameterError(f"samples must be (R, d), got {samples.shape}")
    R, d = samples.shape
    if R < 100:
        raise ParameterError(f"need R >= 100 replications, got {R}")
    cov = psd_clip(sigma2.matrix if isinstance(sigma2, CovMatrix) else sigma2)
    if cov.shape != (d, d):
        raise ParameterError(f"covariance shape {cov.shape} does not match d={d}")
    diffs = np.empty(dictionary.size)
    ses = np.empty(dictionary.size)
    for idx, (v, theta, a) in enumerate(dictionary.entries):
        vv = np.asarray(v, dtype=float)
        vals = a * np.cos(samples @ vv + theta)
        gauss = a * np.cos(theta) * np.exp(-0.5 * float(vv @ cov @ vv))
        diffs[idx] = float(vals.mean()) - gauss
        ses[idx] = float(vals.std(ddof=1)) / np.sqrt(R)
    argmax = int(np.argmax(np.abs(diffs)))
    return D3ProxyResult(value=float(np.abs(diffs[argmax])), diffs=diffs, ses=ses, argmax=argmax)


@dataclass(frozen=True, eq=False)
class RateFitResult:
    slope: float
    intercept: float
    slope_halfwidth: float
    points: tuple
    log_adjusted: bool = False


def fit_rate(points, log_factor: bool = False) -> RateFitResult:
    """OLS of log(value) on log(n); subtracts log(log n) when the predicted
    regime carries a log factor, so the reported slope is the pure exponent.
    """
    pts = [(int(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ParameterError(f"need at least 3 points for a rate fit, got {len(pts)}")
    ns = np.array([n for n, _ in pts], dtype=float)
    vs = np.array([v for _, v in pts])
    if np.any(vs <= 0.0):
        raise DomainError("rate fit requires strictly positive values")
    if log_factor and np.any(ns < 2):
        raise DomainError("log-factor adjustment needs n >= 2")
    x = np.log(ns)
    y = np.log(vs)
    if log_factor:
        y = y - np.log(np.log(ns))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(pts) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = np.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    halfwidth = float(sstats.t.ppf(0.975, dof) * se) if dof > 0 else np.inf
    return RateFitResult(
        slope=float(slope),
        intercept=float(intercept),
        slope_halfwidth=halfwidth,
        points=tuple(pts),
        log_adjusted=log_factor,
    )


def _check_hypotheses(bank: KernelBank, beta: float) -> None:
    ab = bank.alpha_min() * beta
    if ab <= 2.0:
        raise HypothesisError(f"alpha_min * beta = {ab:g} <= 2; CLT hypotheses fail")
    for i, spec in enumerate(bank):
        if spec.kappa <= -1.0 / beta:
            raise HypothesisError(f"kernel {i}: kappa = {spec.kappa:g} <= -1/beta")


def collect_vn(
    bank: KernelBank,
    params: StableParams,
    grid,
    fn: Functional,
    centering: np.ndarray,
    replications: int,
    master_seed: int,
    threads: int = 1,
) -> np.ndarray:
    """(R, d) matrix of normalized centred sums, replication k on stream k.

    Work is dispatched in fixed chunks of replication indices; each chunk
    writes into its own output slice, so the result is independent of both
    the thread count and the completion order.
    """
    out = np.empty((replications, fn.d))

    def run_chunk(start: int, stop: int) -> None:
        for k in range(start, stop):
            paths = simulate_paths(bank, params, grid, SeedStream(master_seed, k))
            out[k] = evaluate_vn(paths, fn, centering)

    chunk = 64
    spans = [(s, min(s + chunk, replications)) for s in range(0, replications, chunk)]
    if threads <= 1:
        for a, b in spans:
            run_chunk(a, b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, a, b) for a, b in spans]
            for fut in futures:
                fut.result()
    return out


def _config_objects(config: ExperimentConfig):
    return config.driver(), config.bank(), config.functional()


def run_clt_experiment(config: ExperimentConfig):
    """Normality-rate experiment; returns a reporting.Report.

    Gates the rate-prediction hypotheses before any simulation, computes the
    analytic asymptotic covariance, then per n: R replications, V_n, the
    witness-dictionary proxy.  Fits the log-log slope across n and compares
    with the predicted exponent.  Regimes whose predicted |slope| is below
    MIN_RESOLVABLE_SLOPE are flagged unverifiable and skipped (exit 0): the
    feasible range of n cannot resolve them.
    """
    from .reporting import Report

    params, bank, fn = _config_objects(config)
    _check_hypotheses(bank, params.beta)
    predicted, log_factor = rate_prediction(bank.alpha_min(), params.beta, 3.0)

    lines = [f"predicted exponent: {predicted:.6g} (log factor: {log_factor})"]
    data = {"predicted": predicted, "log_factor": log_factor}
    if abs(predicted) < MIN_RESOLVABLE_SLOPE:
        lines.append(f"flag: {UNVERIFIABLE_FLAG}")
        lines.append("simulation skipped: the configured n range cannot resolve the rate")
        data["unverifiable"] = True
        return Report(
            subcommand="clt",
            config_echo=config.to_dict(),
            lines=lines,
            csv_header="n,proxy,se",
            csv_rows=[],
            passed=True,
            data=data,
        )
    data["unverifiable"] = False

    sigma2 = asymptotic_covariance(fn, bank, params, tail_frac=config.tail_frac)
    dictionary = default_dictionary(fn.d)
    eig = sigma2.eigenvalues()
    lines.append(f"asymptotic covariance (truncation lag {sigma2.truncation_lag}, "
                 f"tail bound {sigma2.tail_bound:.3e}):")
    for row in sigma2.matrix:
        lines.append("  " + "  ".join(f"{v: .10g}" for v in row))
    lines.append("eigenvalues: " + "  ".join(f"{v:.10g}" for v in eig))

    rows = []
    proxies = []
    sigma2_lat = None
    for n in config.n_list:
        grid = plan_grid(bank, params, n=n, tol=config.grid_tol)
        # Centering and reference covariance come from the exact law of the
        # lattice process being sampled: the certified O(tol) gap between the
        # lattice and continuous scales is amplified by n^{1/2} through the
        # centering, which at large n would swamp the decaying proxy signal.
        centering = lattice_mean_trig(fn, bank, params, grid)
        sigma2_lat = lattice_asymptotic_covariance(
            fn, bank, params, grid, tail_frac=config.tail_frac
        )
        if n == config.n_list[0]:
            gap = float(np.max(np.abs(sigma2_lat.matrix - sigma2.matrix)))
            lines.append(
                f"lattice-law reference covariance (proxy baseline), "
                f"max entry gap to continuous {gap:.3e}:"
            )
            for row in sigma2_lat.matrix:
                lines.append("  " + "  ".join(f"{v: .10g}" for v in row))
        v = collect_vn(
            bank, params, grid, fn, centering,
            config.replications, config.master_seed, config.threads,
        )
        res = d3_proxy(v, sigma2_lat, dictionary)
        proxies.append((n, res))
        rows.append((n, res.value, res.se_at_max))
        lines.append(
            f"n={n}: proxy (lower bound) = {res.value:.6e}  se = {res.se_at_max:.3e}"
        )

    decreasing = all(b[1].value < a[1].value for a, b in zip(proxies, proxies[1:]))
    fit = fit_rate([(n, r.value) for n, r in proxies], log_factor=log_factor)
    slope_ok = abs(fit.slope - predicted) <= SLOPE_WINDOW
    passed = bool(decreasing and slope_ok)
    lines.append(f"proxy decreasing across n_list: {decreasing}")
    lines.append(
        f"fitted slope: {fit.slope:.4f} +- {fit.slope_halfwidth:.4f} "
        f"(window {predicted:+.4f} +- {SLOPE_WINDOW})"
    )
    lines.append(f"verdict: {'pass' if passed else 'FAIL'}")
    data.update(
        sigma2=sigma2,
        sigma2_lattice=sigma2_lat,
        proxies=proxies,
        fit=fit,
        decreasing=decreasing,
        slope_ok=slope_ok,
    )

    def draw(ax):
        ns = np.array([n for n, _ in proxies], dtype=float)
        vals = np.array([r.value for _, r in proxies])
        ax.loglog(ns, vals, "o-", label="proxy (lower bound)")
        ax.loglog(ns, np.exp(fit.intercept) * ns**fit.slope, "--",
                  label=f"fit slope {fit.slope:.3f}")
        ax.loglog(ns, vals[0] * (ns / ns[0]) ** predicted, ":",
                  label=f"predicted {predicted:+.2f}")
        ax.set_xlabel("n")
        ax.set_ylabel("witness-dictionary discrepancy")
        ax.legend()

    return Report(
        subcommand="clt",
        config_echo=config.to_dict(),
        lines=lines,
        csv_header="n,proxy,se",
        csv_rows=rows,
        passed=passed,
        data=data,
        figures=(("rate", draw),),
    )


def run_covariance_experiment(config: ExperimentConfig):
    """Analytic vs empirical covariance of V_n across n; returns a Report.

    Passes when, at the largest n, every entry of the empirical covariance
    sits within three Monte Carlo standard errors of the analytic series
    value.
    """
    from .reporting import Report

    params, bank, fn = _config_objects(config)
    _check_hypotheses(bank, params.beta)
    sigma2 = asymptotic_covariance(fn, bank, params, tail_frac=config.tail_frac)
    centering = analytic_mean_trig(fn, bank, params)
    lines = [
        f"analytic covariance (truncation lag {sigma2.truncation_lag}, "
        f"tail bound {sigma2.tail_bound:.3e}):"
    ]
    for row in sigma2.matrix:
        lines.append("  " + "  ".join(f"{v: .10g}" for v in row))

    rows = []
    max_ratio_by_n = []
    final_ok = None
    for n in config.n_list:
        grid = plan_grid(bank, params, n=n, tol=config.grid_tol)
        v = collect_vn(
            bank, params, grid, fn, centering,
            config.replications, config.master_seed, config.threads,
        )
        emp = empirical_covariance(v)
        ses = covariance_standard_errors(v)
        diff = emp.matrix - sigma2.matrix
        ok = bool(np.all(np.abs(diff) <= 3.0 * ses))
        worst = float(np.max(np.abs(diff) / np.maximum(ses, 1e-300)))
        max_ratio_by_n.append((n, worst))
        final_ok = ok
        lines.append(f"n={n}: max |diff|/se = {worst:.3f}  within 3 se: {ok}")
        for i in range(fn.d):
            for j in range(fn.d):
                rows.append(
                    (n, i, j, sigma2.matrix[i, j], emp.matrix[i, j], diff[i, j], ses[i, j])
                )
    passed = bool(final_ok)
    lines.append("trend of max |diff|/se across n: "
                 + "  ".join(f"{n}:{w:.2f}" for n, w in max_ratio_by_n))
    lines.append(f"verdict: {'pass' if passed else 'FAIL'}")

    def draw(ax):
        ns = [n for n, _ in max_ratio_by_n]
        ws = [w for _, w in max_ratio_by_n]
        ax.semilogx(ns, ws, "o-")
        ax.axhline(3.0, color="r", linestyle="--", label="3 se")
        ax.set_xlabel("n")
        ax.set_ylabel("max entrywise |diff| / se")
        ax.legend()

    return Report(
        subcommand="covariance",
        config_echo=config.to_dict(),
        lines=lines,
        csv_header="n,i,j,analytic,empirical,diff,se",
        csv_rows=rows,
        passed=passed,
        data={"sigma2": sigma2, "trend": max_ratio_by_n},
        figures=(("agreement", draw),),
    )


def run_rates_study(config: ExperimentConfig, p: float = 2.0, q: float = 3.0):
    """Fitted n-slope of the min-of-powers intensity integral vs prediction."""
    from .bounds import AnIntegrand, an_integral
    from .reporting import Report

    params, bank, _ = _config_objects(config)
    g_j = bank[0]
    g_k = bank[1] if bank.m >= 2 else bank[0]
    a_min = min(g_j.alpha, g_k.alpha)
    predicted, log_factor = rate_prediction(a_min, params.beta, q)
    points = []
    lines = [f"p={p:g} q={q:g}  predicted exponent {predicted:.6g} (log factor: {log_factor})"]
    for n in config.n_list:
        spec = AnIntegrand(
            kernel_j=g_j, kernel_k=g_k, beta=params.beta, n=n, p=float(p), q=float(q)
        )
        val = an_integral(spec)
        points.append((n, val))
        lines.append(f"n={n}: integral = {val:.10e}")
    fit = fit_rate(points, log_factor=log_factor)
    passed = bool(abs(fit.slope - predicted) <= 0.1)
    lines.append(
        f"fitted slope: {fit.slope:.4f} +- {fit.slope_halfwidth:.4f} "
        f"(window {predicted:+.4f} +- 0.1)"
    )
    lines.append(f"verdict: {'pass' if passed else 'FAIL'}")

    def draw(ax):
        ns = np.array([n for n, _ in points], dtype=float)
        vals = np.array([v for _, v in points])
        ax.loglog(ns, vals, "o-", label="integral")
        ax.loglog(ns, np.exp(fit.intercept) * ns**fit.slope, "--",
                  label=f"fit slope {fit.slope:.3f}")
        ax.set_xlabel("n")
        ax.set_ylabel("min-of-powers intensity integral")
        ax.legend()

    return Report(
        subcommand="rates",
        config_echo=config.to_dict(),
        lines=lines,
        csv_header="n,value",
        csv_rows=points,
        passed=passed,
        data={"fit": fit, "predicted": predicted, "log_factor": log_factor},
        figures=(("slope", draw),),
    )


def run_simulate(config: ExperimentConfig):
    """Dump one replication (stream 0) of the path matrix at the largest n."""
    from .reporting import Report

    params, bank, _ = _config_objects(config)
    n = config.n_list[-1]
    grid = plan_grid(bank, params, n=n, tol=config.grid_tol)
    paths = simulate_paths(bank, params, grid, SeedStream(config.master_seed, 0))
    header = "t," + ",".join(f"X{i + 1}" for i in range(bank.m))
    rows = [(t + 1, *paths.values[:, t]) for t in range(n)]
    lines = [
        f"n={n}  mesh={grid.mesh:g}  window={grid.trunc:g}  lattice={grid.lattice_size}",
        f"one replication, stream 0, {bank.m} component(s)",
    ]

    def draw(ax):
        for i in range(bank.m):
            ax.plot(np.arange(1, n + 1), paths.values[i], lw=0.7, label=f"X{i + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("level")
        ax.legend()

    return Report(
        subcommand="simulate",
        config_echo=config.to_dict(),
        lines=lines,
        csv_header=header,
        csv_rows=rows,
        passed=None,
        data={"grid": grid},
        figures=(("paths", draw),),
    )


def run_rho_table(config: ExperimentConfig, k_max: int = 128):
    """Tabulate overlap integrals to |k| <= k_max and audit their decay."""
    from .bounds import build_rho_table, rho_decay_check
    from .reporting import Report

    params, bank, _ = _config_objects(config)
    table = build_rho_table(bank, params.beta, k_max)
    report = rho_decay_check(table, list(bank.alphas()))
    rows = list(table.rows())
    lines = [
        f"m={bank.m} kernels, k_max={k_max}, beta={params.beta:g}",
        f"decay audit: max ratio {report.max_ratio:.6g} at k={report.worst_k}, "
        f"monotone-with-slack: {report.passed}",
        f"verdict: {'pass' if report.passed else 'FAIL'}",
    ]

    def draw(ax):
        ks = np.arange(1, k_max + 1)
        for i in range(bank.m):
            for j in range(bank.m):
                vals = [table.value(i, j, int(k)) for k in ks]
                ax.loglog(ks, vals, lw=0.8, label=f"pair ({i},{j})")
        ax.set_xlabel("k")
        ax.set_ylabel("overlap integral")
        ax.legend(fontsize=6)

    return Report(
        subcommand="rho",
        config_echo=config.to_dict(),
        lines=lines,
        csv_header="i,j,k,rho",
        csv_rows=rows,
        passed=bool(report.passed),
        data={"table": table, "decay": report},
        figures=(("decay", draw),),
    )
