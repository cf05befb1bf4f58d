"""Thin wrapper over scipy's DOP853 integrator.

Integrates forwards and backwards from a base point, restarts at declared
breakpoints (where the right-hand side may jump) and returns the state at
an arbitrary set of abscissae.
"""

import numpy as np
from scipy.integrate import solve_ivp

from .errors import EvalError


def _segments(start, stop, breakpoints):
    """Split [start, stop] (either orientation) at the interior breakpoints."""
    lo, hi = min(start, stop), max(start, stop)
    inner = sorted(b for b in breakpoints if lo < b < hi)
    if stop < start:
        inner = inner[::-1]
    knots = [start] + inner + [stop]
    return list(zip(knots[:-1], knots[1:]))


def integrate(rhs, x0, y0, xs, tol, breakpoints=()):
    """Values of the solution of ``y' = rhs(x, y)``, ``y(x0) = y0`` at ``xs``.

    Returns an array of shape ``(len(xs), len(y0))``.  Points equal to
    ``x0`` receive ``y0`` exactly.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    y0 = np.asarray(y0, dtype=float)
    out = np.empty((xs.size, y0.size))
    out[xs == x0] = y0
    for side in (xs > x0, xs < x0):
        idx = np.nonzero(side)[0]
        if idx.size == 0:
            continue
        targets = xs[idx]
        forward = targets[0] > x0
        order = np.argsort(targets if forward else -targets)
        idx, targets = idx[order], targets[order]
        far = targets[-1]
        y = y0
        for a, b in _segments(x0, far, breakpoints):
            lo, hi = min(a, b), max(a, b)
            inside = (targets > lo) & (targets < hi)
            t_eval = np.append(targets[inside], b)
            sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=tol, atol=tol,
                            t_eval=t_eval)
            if sol.status < 0:
                raise EvalError(f"ODE integration failed on [{a}, {b}]: {sol.message}")
            out[idx[inside]] = sol.y.T[:-1]
            out[idx[targets == b]] = sol.y[:, -1]
            y = sol.y[:, -1]
    return out
