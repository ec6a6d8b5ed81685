"""Split-aware adaptive quadrature helpers.

Integrals of kernel powers have integrable endpoint singularities and known
breakpoints (support corners, shifted singular points).  QUADPACK handles
each piece well once the real line is cut there, so the scalar entry point
takes an explicit split set.  A vectorized Gauss-Kronrod 15(7) rule serves
integrands that are only affordable in batched evaluation.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .errors import AccuracyError

__all__ = ["integrate_piecewise", "scalar_fn", "vec_quad"]


def scalar_fn(f):
    """Adapt a vectorized integrand to QUADPACK's scalar calling convention."""

    def g(x):
        return np.asarray(f(x)).item()

    return g


def integrate_piecewise(
    f,
    splits=(),
    lo: float = -np.inf,
    hi: float = np.inf,
    rel_tol: float = 1e-6,
    limit: int = 200,
) -> float:
    """Integrate f over (lo, hi), cutting at the interior split points.

    The integrand is assumed nonnegative (all callers integrate absolute
    powers), so summing per-piece relative tolerances cannot hide
    cancellation.  Raises AccuracyError when the accumulated QUADPACK error
    estimate exceeds the requested relative tolerance.
    """
    pts = sorted({float(s) for s in splits if lo < float(s) < hi})
    edges = [lo, *pts, hi]
    f = scalar_fn(f)
    total = 0.0
    err = 0.0
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        if a == b:
            continue
        val, abserr, *_ = quad(
            f, a, b, epsabs=1e-300, epsrel=rel_tol * 0.25, limit=limit, full_output=1
        )
        total += val
        err += abserr
        pieces.append((a, b, val, abserr))
    floor = max(abs(total), 1e-290)
    if err > rel_tol * floor:
        # One retry with a harder subdivision budget before giving up.
        total = 0.0
        err = 0.0
        for i, (a, b, _, _) in enumerate(pieces):
            val, abserr, *_ = quad(
                f, a, b, epsabs=1e-300, epsrel=rel_tol * 0.25, limit=4 * limit, full_output=1
            )
            total += val
            err += abserr
            pieces[i] = (a, b, val, abserr)
        floor = max(abs(total), 1e-290)
        # Near-underflow integrals cannot be certified relatively; their
        # absolute scale is already below any downstream tolerance.
        if err > rel_tol * floor and abs(total) + err > 1e-200:
            raise AccuracyError(
                f"quadrature error {err:.3e} exceeds rel_tol {rel_tol:g} * |I| = {rel_tol * floor:.3e}",
                diagnostics={"pieces": pieces, "total": total, "err": err},
            )
    return total


# 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule,
# on [-1, 1].  Standard tabulated values.
_XK = np.array(
    [
        -0.991455371120813,
        -0.949107912342759,
        -0.864864423359769,
        -0.741531185599394,
        -0.586087235467691,
        -0.405845151377397,
        -0.207784955007898,
        0.0,
        0.207784955007898,
        0.405845151377397,
        0.586087235467691,
        0.741531185599394,
        0.864864423359769,
        0.949107912342759,
        0.991455371120813,
    ]
)
_WK = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
        0.204432940075298,
        0.190350578064785,
        0.169004726639267,
        0.140653259715525,
        0.104790010322250,
        0.063092092629979,
        0.022935322010529,
    ]
)
_WG = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ]
)
_GAUSS_IDX = np.arange(1, 15, 2)


def vec_quad(
    f,
    a: float,
    b: float,
    rel_tol: float = 1e-4,
    max_panels: int = 4096,
    max_rounds: int = 40,
) -> float:
    """Adaptive GK15 for a vectorized integrand f(x: array) -> array.

    All pending panels are evaluated in one batched call per round; panels
    whose Kronrod-Gauss discrepancy exceeds their share of the global budget
    are bisected.  Suited to smooth integrands with a few awkward spots.
    """
    if a == b:
        return 0.0
    panels = np.array([[a, b]], dtype=float)
    done_val = 0.0
    done_err = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (panels[:, 0] + panels[:, 1])
        half = 0.5 * (panels[:, 1] - panels[:, 0])
        nodes = mid[:, None] + half[:, None] * _XK[None, :]
        vals = f(nodes.ravel()).reshape(nodes.shape)
        ik = half * (vals @ _WK)
        ig = half * (vals[:, _GAUSS_IDX] @ _WG)
        perr = np.abs(ik - ig)
        total = done_val + float(ik.sum())
        budget = rel_tol * max(abs(total), 1e-290)
        # Accept panels that fit their length-weighted share of the budget.
        span = np.abs(panels[:, 1] - panels[:, 0]).sum() + 1e-300
        share = budget * np.abs(panels[:, 1] - panels[:, 0]) / span
        ok = perr <= np.maximum(share, 1e-300)
        if done_err + float(perr[ok].sum()) + float(perr[~ok].sum()) <= budget or np.all(ok):
            return total
        done_val += float(ik[ok].sum())
        done_err += float(perr[ok].sum())
        bad = panels[~ok]
        if 2 * len(bad) > max_panels:
            raise AccuracyError(
                f"vec_quad exhausted {max_panels} panels on [{a:g}, {b:g}]",
                diagnostics={"pending": len(bad), "err": done_err + perr[~ok].sum()},
            )
        mids = 0.5 * (bad[:, 0] + bad[:, 1])
        panels = np.concatenate(
            [np.stack([bad[:, 0], mids], axis=1), np.stack([mids, bad[:, 1]], axis=1)]
        )
    raise AccuracyError(f"vec_quad did not converge on [{a:g}, {b:g}]")
