"""Ordered, complete systems of nested quadratures.

The j-th quadrature integrates ``phi_j(t, u1, ..., u(j-1))`` from the base
point, where ``uk`` is the running value ``s_k + c_k`` of an earlier
quadrature.  The whole system is solved as a single initial value problem,
optionally together with its variational equations (the sensitivities
``d s_j / d c_k``).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _ode
from .config import DEFAULT_SEED, DEFAULT_TOL, WorkingBox, chebyshev_grid, latin_hypercube
from .errors import EvalError, QuadratureSystemError
from .expr import ZERO, as_expr, compile_expr, diff_expr, to_dsl


def running_names(n):
    return tuple(f"u{k}" for k in range(1, n + 1))


class QuadratureSystem:
    """Integrands ``phi_1 .. phi_n`` with base point ``x0`` on the closed ``interval``.

    ``breakpoints`` lists points of I where an integrand may jump; the
    integrator restarts there.
    """

    def __init__(self, integrands, x0=0.0, interval=(0.0, 1.0), breakpoints=()):
        if isinstance(integrands, (str, bytes)) or not len(integrands):
            raise QuadratureSystemError("a system needs at least one integrand")
        self.integrands = tuple(as_expr(e) for e in integrands)
        self.x0 = float(x0)
        a, b = (float(v) for v in interval)
        if not a < b:
            raise QuadratureSystemError(f"interval [{a}, {b}] is degenerate")
        if not a <= self.x0 <= b:
            raise QuadratureSystemError(f"base point {self.x0} lies outside [{a}, {b}]")
        self.interval = (a, b)
        self.breakpoints = tuple(sorted(float(p) for p in breakpoints if a < p < b))
        for j, phi in enumerate(self.integrands, start=1):
            allowed = {"x"} | set(running_names(j - 1))
            extra = phi.free_vars() - allowed
            if extra:
                raise QuadratureSystemError(
                    f"integrand {j} ({to_dsl(phi)}) may only use x and u1..u{j - 1}; "
                    f"found {', '.join(sorted(extra))}")
        self._compiled = {}

    @property
    def n(self):
        return len(self.integrands)

    def __repr__(self):
        body = ", ".join(repr(to_dsl(e)) for e in self.integrands)
        return f"QuadratureSystem([{body}], x0={self.x0!r}, interval={self.interval!r})"

    def __eq__(self, other):
        return (isinstance(other, QuadratureSystem) and self.integrands == other.integrands
                and self.x0 == other.x0 and self.interval == other.interval
                and self.breakpoints == other.breakpoints)

    def __hash__(self):
        return hash((self.integrands, self.x0, self.interval, self.breakpoints))

    def replace(self, integrands):
        return QuadratureSystem(integrands, self.x0, self.interval, self.breakpoints)

    def argnames(self, j):
        """Positional argument names of the compiled j-th integrand (1-based)."""
        return ("x",) + running_names(j - 1)

    def _kernels(self, tol):
        key = tol.ode_tol
        hit = self._compiled.get(key)
        if hit is None:
            funcs, partials = [], []
            for j, phi in enumerate(self.integrands, start=1):
                names = self.argnames(j)
                funcs.append(compile_expr(phi, names, tol))
                row = []
                for m in range(1, j):
                    d = diff_expr(phi, f"u{m}")
                    if d == ZERO:
                        continue
                    row.append((m - 1, compile_expr(d, names, tol)))
                partials.append(row)
            hit = (funcs, partials)
            self._compiled[key] = hit
        return hit

    def _rhs(self, c, tol, sensitivities):
        funcs, partials = self._kernels(tol)
        n = self.n
        c = np.asarray(c, dtype=float)

        def rhs(t, y):
            s = y[:n]
            u = s + c
            args = [t] + list(u)
            ds = [funcs[j](*args[:j + 1]) for j in range(n)]
            if not sensitivities:
                return ds
            J = y[n:].reshape(n, n)
            dJ = np.zeros((n, n))
            for j in range(n):
                for m, fn in partials[j]:
                    dphi = fn(*args[:j + 1])
                    dJ[j] += dphi * J[m]
                    dJ[j, m] += dphi
            return np.concatenate([ds, dJ.ravel()])

        return rhs

    def _constants(self, c):
        c = np.asarray(c, dtype=float).ravel()
        if c.size == self.n - 1:
            c = np.append(c, 0.0)
        if c.size != self.n:
            raise QuadratureSystemError(
                f"expected {self.n - 1} or {self.n} constants, got {c.size}")
        return c

    def _check_points(self, xs):
        a, b = self.interval
        span = b - a
        bad = [x for x in xs if x < a - 1e-12 * span or x > b + 1e-12 * span]
        if bad:
            raise QuadratureSystemError(f"x = {bad[0]} lies outside [{a}, {b}]")

    def evaluate_grid(self, xs, c, tol=DEFAULT_TOL, sensitivities=False):
        """Running quadratures at every point of ``xs``.

        Returns ``S`` with ``S[i, j] = s_(j+1)(xs[i], c)``; with
        ``sensitivities`` also ``J`` with ``J[i, j, k] = d s_(j+1) / d c_(k+1)``.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        self._check_points(xs)
        c = self._constants(c)
        n = self.n
        y0 = np.zeros(n + n * n if sensitivities else n)
        sol = _ode.integrate(self._rhs(c, tol, sensitivities), self.x0, y0, xs,
                             tol.ode_tol, self.breakpoints)
        if not np.all(np.isfinite(sol)):
            raise EvalError("system evaluation produced non-finite values")
        if sensitivities:
            return sol[:, :n], sol[:, n:].reshape(-1, n, n)
        return sol

    def evaluate(self, x, c, tol=DEFAULT_TOL):
        return self.evaluate_grid([x], c, tol)[0]

    def integrand_values(self, x, chat, tol=DEFAULT_TOL):
        """``phi_j(x, chat_1, ..., chat_(j-1))`` for every j (constants frozen)."""
        funcs, _ = self._kernels(tol)
        chat = np.asarray(chat, dtype=float)
        return np.array([funcs[j](x, *chat[:j]) for j in range(self.n)])


def eval_system(sys, x, c, tol=DEFAULT_TOL):
    """Vector ``(s_1(x), s_2(x, c_1), ..., s_n(x, c_1..c_(n-1)))``."""
    return sys.evaluate(x, c, tol)


# -- independence -----------------------------------------------------------

@dataclass
class IndependenceReport:
    independent: bool
    witness_constants: tuple
    pivot_points: tuple
    smallest_singular_value: float
    matrix_norm: float = 0.0
    threshold: float = 0.0
    witnesses_tried: int = 0

    def summary(self):
        verdict = "independent" if self.independent else "dependent"
        return (f"{verdict}: sigma_min={self.smallest_singular_value:.3e} "
                f"threshold={self.threshold:.3e} witness={list(self.witness_constants)} "
                f"pivots={list(self.pivot_points)}")


def _greedy_pivots(V):
    """Rows of ``V`` chosen greedily to keep the running k-th singular value large."""
    chosen = []
    best_sv = 0.0
    for k in range(V.shape[1]):
        best_row, best_sv = None, -1.0
        for i in range(V.shape[0]):
            if i in chosen:
                continue
            sv = np.linalg.svd(V[chosen + [i]], compute_uv=False)[k]
            if sv > best_sv:
                best_row, best_sv = i, sv
        if best_row is None:
            break
        chosen.append(best_row)
    return chosen


def check_independence(sys, search_budget=16, tol=DEFAULT_TOL, seed=DEFAULT_SEED,
                       box=None, grid_size=64):
    """Search witness constants and pivot points making the integrand matrix regular.

    Witness constants start at the origin and continue with a Latin-hypercube
    sample of ``box`` (default [-2, 2]^(n-1)); pivot points are picked from a
    Chebyshev grid of the interval.  Failure to find a witness is reported,
    not raised.
    """
    n = sys.n
    box = box.resized(n - 1) if box is not None and n > 1 else WorkingBox.uniform(n - 1)
    grid = chebyshev_grid(*sys.interval, grid_size)
    candidates = np.vstack([np.zeros((1, n - 1)),
                            latin_hypercube(box.lower, box.upper, max(search_budget - 1, 0), seed)
                            if n > 1 else np.zeros((max(search_budget - 1, 0), 0))])
    best = None
    tried = 0
    for chat in candidates:
        tried += 1
        try:
            V = np.array([sys.integrand_values(x, chat, tol) for x in grid])
        except EvalError:
            continue
        if not np.all(np.isfinite(V)):
            continue
        rows = _greedy_pivots(V)
        M = V[rows]
        svals = np.linalg.svd(M, compute_uv=False)
        norm, smin = svals[0], svals[-1]
        threshold = tol.rank_threshold * norm
        ok = norm > 0 and smin >= threshold
        report = IndependenceReport(bool(ok), tuple(float(v) for v in chat),
                                    tuple(float(grid[r]) for r in rows), float(smin),
                                    float(norm), float(threshold), tried)
        if best is None or report.smallest_singular_value > best.smallest_singular_value:
            best = report
        if ok:
            return report
    if best is None:
        return IndependenceReport(False, (), (), 0.0, 0.0, 0.0, tried)
    best.witnesses_tried = tried
    return best


# -- invariance probe -------------------------------------------------------

@dataclass
class InvarianceReport:
    probe_deviation: float
    spread: float
    samples: list = field(default_factory=list)

    def invariant(self, tol=DEFAULT_TOL):
        return self.probe_deviation < tol.constancy_tol

    def constant(self, tol=DEFAULT_TOL):
        return self.spread < tol.constancy_tol


def invariance_probe(g, sys, samples=None, tol=DEFAULT_TOL, seed=DEFAULT_SEED, box=None):
    """Compare ``g(s(x, c) + c)`` with ``g(c)`` over sampled ``(x, c)``.

    ``g`` is an expression over ``c1 .. cn``.  Reports the largest probe
    deviation and, separately, the largest spread ``|g(c) - g(c')|`` over
    the sampled constants.  ``samples`` is a count or a list of ``(x, c)``.
    """
    g = as_expr(g)
    n = sys.n
    names = tuple(f"c{k}" for k in range(1, n + 1))
    extra = g.free_vars() - set(names)
    if extra:
        raise QuadratureSystemError(f"g may only use c1..c{n}; found {sorted(extra)}")
    gfun = compile_expr(g, names, tol)
    if samples is None or isinstance(samples, int):
        count = samples or tol.sample_count
        box = box.resized(n) if box is not None else WorkingBox.uniform(n)
        a, b = sys.interval
        pts = latin_hypercube(np.r_[a, box.lower], np.r_[b, box.upper], count, seed)
        samples = [(p[0], p[1:]) for p in pts]
    rows = []
    values = []
    for x, c in samples:
        c = np.asarray(c, dtype=float)
        s = sys.evaluate(x, c, tol)
        g0 = gfun(*c)
        g1 = gfun(*(s + c))
        values.append(g0)
        rows.append((float(x), tuple(float(v) for v in c), abs(g1 - g0)))
    dev = max((r[2] for r in rows), default=0.0)
    spread = (max(values) - min(values)) if values else 0.0
    return InvarianceReport(float(dev), float(spread), rows)


__all__ = ["QuadratureSystem", "eval_system", "check_independence", "IndependenceReport",
           "invariance_probe", "InvarianceReport", "running_names"]
