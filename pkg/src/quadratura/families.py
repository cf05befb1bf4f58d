"""Parameter families of functions on an interval, and integrals by quadratures.

A family maps ``(x, c)`` to a real number.  Integrals by quadratures have
the shape ``theta(x, F(s_1 + c_1, ..., s_n + c_n))`` over a quadrature
system; their parameter gradients come from the variational equations of
the system, every other family falls back on central differences.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_SEED, DEFAULT_TOL, WorkingBox, chebyshev_grid, latin_hypercube
from .errors import QuadraturaError, StructureError
from .expr import Var, as_expr, compile_expr, diff_expr, exp, mul, substitute, to_dsl
from .systems import QuadratureSystem


def outer_names(n):
    return tuple(f"v{k}" for k in range(1, n + 1))


class Family:
    """Abstract family ``f(x, c)`` with ``param_dim`` parameters on ``interval``."""

    param_dim = 0
    x0 = 0.0
    interval = (0.0, 1.0)
    tol = DEFAULT_TOL

    def value(self, x, c):
        raise NotImplementedError

    def values(self, xs, c):
        return np.array([self.value(x, c) for x in xs])

    def initial_value(self, c):
        return self.value(self.x0, c)

    def gradient(self, x, c):
        """Partial derivatives with respect to every parameter (central differences)."""
        c = np.asarray(c, dtype=float)
        out = np.empty(c.size)
        for k in range(c.size):
            h = self.tol.diff_step_scale * max(1.0, abs(c[k]))
            up, down = c.copy(), c.copy()
            up[k] += h
            down[k] -= h
            out[k] = (self.value(x, up) - self.value(x, down)) / (2 * h)
        return out

    def gradients(self, xs, c):
        return np.array([self.gradient(x, c) for x in xs])


class FunctionFamily(Family):
    """Family given by a Python callable ``fn(x, c)``."""

    def __init__(self, fn, param_dim, x0=0.0, interval=(0.0, 1.0), tol=DEFAULT_TOL):
        self.fn = fn
        self.param_dim = int(param_dim)
        self.x0 = float(x0)
        self.interval = tuple(float(v) for v in interval)
        self.tol = tol

    def value(self, x, c):
        return float(self.fn(x, np.asarray(c, dtype=float)))


class ExprFamily(Family):
    """Family given by an expression in ``x`` and named parameters (symbolic partials)."""

    def __init__(self, expr, params=None, x0=0.0, interval=(0.0, 1.0), tol=DEFAULT_TOL):
        self.expr = as_expr(expr)
        if params is None:
            params = sorted(self.expr.free_vars() - {"x"}, key=lambda s: (len(s), s))
        self.params = tuple(params)
        self.param_dim = len(self.params)
        self.x0 = float(x0)
        self.interval = tuple(float(v) for v in interval)
        self.tol = tol
        names = ("x",) + self.params
        self._f = compile_expr(self.expr, names, tol)
        self._df = [compile_expr(diff_expr(self.expr, p), names, tol) for p in self.params]

    def value(self, x, c):
        return float(self._f(x, *np.asarray(c, dtype=float)))

    def gradient(self, x, c):
        c = np.asarray(c, dtype=float)
        return np.array([d(x, *c) for d in self._df])


class QuadratureIntegral(Family):
    """``f(x, c) = theta(x, F(s_1(x) + c_1, ..., s_n(x, ...) + c_n))``.

    ``F`` is an expression in ``v1 .. vn`` and ``theta`` an expression in
    ``x`` and ``w``.
    """

    kind = "quadrature"

    def __init__(self, sys, F, theta="w", tol=DEFAULT_TOL):
        if not isinstance(sys, QuadratureSystem):
            raise TypeError("sys must be a QuadratureSystem")
        self.sys = sys
        self.F = as_expr(F)
        self.theta = as_expr(theta)
        self.tol = tol
        self._validate()
        self.H = self.outer_function()
        n = sys.n
        names = outer_names(n)
        self._H = compile_expr(self.H, names, tol)
        self._dH = [compile_expr(diff_expr(self.H, v), names, tol) for v in names]
        self._theta = compile_expr(self.theta, ("x", "w"), tol)
        self._dtheta = compile_expr(diff_expr(self.theta, "w"), ("x", "w"), tol)

    def _validate(self):
        extra = self.F.free_vars() - set(outer_names(self.outer_arity()))
        if extra:
            raise StructureError(f"F may only use v1..v{self.outer_arity()}; found {sorted(extra)}")
        extra = self.theta.free_vars() - {"x", "w"}
        if extra:
            raise StructureError(f"theta may only use x and w; found {sorted(extra)}")

    def outer_arity(self):
        return self.sys.n

    def outer_function(self):
        """Expression in ``v1 .. vn`` applied to the running values ``s + c``."""
        return self.F

    @property
    def n(self):
        return self.sys.n

    @property
    def param_dim(self):
        return self.sys.n

    @property
    def x0(self):
        return self.sys.x0

    @property
    def interval(self):
        return self.sys.interval

    def with_parts(self, sys=None, F=None, theta=None):
        return type(self)(sys or self.sys, F if F is not None else self.F,
                          theta if theta is not None else self.theta, self.tol)

    def describe(self):
        lines = [f"kind: {self.kind}", f"x0: {self.x0!r}",
                 f"interval: {self.interval[0]!r}, {self.interval[1]!r}"]
        for j, phi in enumerate(self.sys.integrands, start=1):
            lines.append(f"phi{j}: {to_dsl(phi)}")
        lines += [f"F: {to_dsl(self.F)}", f"theta: {to_dsl(self.theta)}"]
        return "\n".join(lines)

    def value(self, x, c):
        return float(self.values([x], c)[0])

    def values(self, xs, c):
        c = np.asarray(c, dtype=float)
        S = self.sys.evaluate_grid(xs, c, self.tol)
        return np.array([self._theta(x, self._H(*(s + c))) for x, s in zip(np.atleast_1d(xs), S)])

    def initial_value(self, c):
        c = np.asarray(c, dtype=float)
        return float(self._theta(self.x0, self._H(*c)))

    def gradient(self, x, c):
        return self.gradients([x], c)[0]

    def gradients(self, xs, c):
        """Parameter gradients at every x, via the chain rule and the variational system."""
        c = np.asarray(c, dtype=float)
        n = self.n
        S, J = self.sys.evaluate_grid(xs, c, self.tol, sensitivities=True)
        out = np.empty((len(S), n))
        for i, x in enumerate(np.atleast_1d(xs)):
            u = S[i] + c
            w = self._H(*u)
            tw = self._dtheta(x, w)
            dH = np.array([d(*u) for d in self._dH])
            out[i] = tw * (dH @ (J[i] + np.eye(n)))
        return out


class ExponentialShapeIntegral(QuadratureIntegral):
    """Integral whose last two quadratures ``s, S`` enter as ``exp(s + c) * (S + C)``.

    ``F`` is an expression in ``v1 .. v(n-1)``; its last argument receives
    the product, the earlier ones the running values of the leading
    quadratures.
    """

    kind = "exponential-shape"

    def outer_arity(self):
        if self.sys.n < 2:
            raise StructureError("an exponential-shape integral needs at least two quadratures")
        return self.sys.n - 1

    def outer_function(self):
        n = self.sys.n
        product = mul(exp(Var(f"v{n - 1}")), Var(f"v{n}"))
        return substitute(self.F, {f"v{n - 1}": product})


def eval_integral(q, x, c, tol=None):
    """``f(x, c)``; at the base point this is ``theta(x0, F(c))``."""
    if tol is not None and tol != q.tol:
        q = type(q)(q.sys, q.F, q.theta, tol)
    return q.value(x, c)


# -- admissibility ----------------------------------------------------------

ZERO_FLOOR = 1e-8


@dataclass
class AdmissibilityReport:
    admissible: bool
    min_abs_partial: float
    sign_change: bool
    samples: int
    failures: list = field(default_factory=list)
    partial: str = "dF/dv_last"

    def summary(self):
        verdict = "pass" if self.admissible else "fail"
        text = (f"{verdict}: min |{self.partial}| = {self.min_abs_partial:.3e} "
                f"over {self.samples} samples")
        if self.sign_change:
            text += " (sign change)"
        for f in self.failures:
            text += f"; {f}"
        return text


def _nonvanishing(fn, points, floor=ZERO_FLOOR):
    values, failures = [], []
    for p in points:
        try:
            v = fn(*p)
        except QuadraturaError as exc:
            failures.append(f"evaluation failed at {tuple(float(t) for t in p)}: {exc}")
            continue
        if not np.isfinite(v):
            failures.append(f"non-finite value at {tuple(float(t) for t in p)}")
            continue
        values.append(v)
    values = np.array(values)
    min_abs = float(np.abs(values).min()) if values.size else 0.0
    sign_change = bool(values.size and values.min() < 0 < values.max())
    ok = values.size > 0 and not failures and not sign_change and min_abs >= floor
    return AdmissibilityReport(bool(ok), min_abs, sign_change, len(points), failures)


def check_admissible(F, n, box=None, tol=DEFAULT_TOL, seed=DEFAULT_SEED, samples=64):
    """Sample the last partial of ``F`` over the working box (origin included).

    Passes when the partial stays away from zero with a fixed sign and
    every sample evaluates.
    """
    F = as_expr(F)
    names = outer_names(n)
    extra = F.free_vars() - set(names)
    if extra:
        raise StructureError(f"F may only use v1..v{n}; found {sorted(extra)}")
    box = box.resized(n) if box is not None else WorkingBox.uniform(n)
    dF = compile_expr(diff_expr(F, names[-1]), names, tol)
    pts = box.sample(samples, seed, include_origin=True)
    return _nonvanishing(dF, pts)


def check_theta(theta, x_points, w_points, tol=DEFAULT_TOL):
    """``d theta / d w`` sampled on the product of the given x and w points."""
    theta = as_expr(theta)
    d = compile_expr(diff_expr(theta, "w"), ("x", "w"), tol)
    pts = [(x, w) for x in x_points for w in w_points]
    report = _nonvanishing(d, pts)
    report.partial = "dtheta/dw"
    return report


# -- Fundamental Equality ---------------------------------------------------

def _default_samples(fam, count, seed, box):
    n = fam.param_dim
    box = box.resized(n) if box is not None else WorkingBox.uniform(n)
    a, b = fam.interval
    pts = latin_hypercube(np.r_[a, box.lower], np.r_[b, box.upper], count, seed)
    return [(p[0], p[1:]) for p in pts]


def fundamental_equality_residual(fam, i, j, x0=None, samples=None, tol=None,
                                  seed=DEFAULT_SEED, box=None):
    """Largest normalized defect of the cross-partial identity for parameters i, j.

    The defect at ``(x, c)`` is ``|d_i f(x) d_j f(x0) - d_j f(x) d_i f(x0)|``
    divided by ``max(1, |each product|)``.  Indices are 1-based; ``samples``
    is a count or a list of ``(x, c)`` pairs.
    """
    if i == j:
        raise ValueError("the parameter pair must consist of two distinct indices")
    n = fam.param_dim
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"parameter indices must lie in 1..{n}")
    tol = tol or fam.tol
    x0 = fam.x0 if x0 is None else x0
    if samples is None or isinstance(samples, int):
        samples = _default_samples(fam, samples or tol.sample_count, seed, box)
    worst = 0.0
    for x, c in samples:
        g = fam.gradients([x, x0], c)
        lhs = g[0, i - 1] * g[1, j - 1]
        rhs = g[0, j - 1] * g[1, i - 1]
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    return float(worst)


# -- equivalence ------------------------------------------------------------

BRACKET_GROWTH = 2.0
BRACKET_STEPS = 12


def match_initial_value(fam, target, box=None):
    """Last parameter ``d`` with ``fam(x0, 0, ..., 0, d) = target``.

    The bracket starts at the box edges of the last parameter and widens
    geometrically a bounded number of times.  Returns ``None`` when the
    target is not attained inside the widest bracket.
    """
    n = fam.param_dim
    box = box.resized(n) if box is not None else WorkingBox.uniform(n)
    lo, hi = box.bounds[-1]
    base = np.zeros(n)

    def gap(d):
        c = base.copy()
        c[-1] = d
        return fam.initial_value(c) - target

    for _ in range(BRACKET_STEPS + 1):
        try:
            glo, ghi = gap(lo), gap(hi)
        except QuadraturaError:
            return None
        if glo == 0.0:
            return lo
        if ghi == 0.0:
            return hi
        if np.sign(glo) != np.sign(ghi):
            return brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        lo *= BRACKET_GROWTH
        hi *= BRACKET_GROWTH
    return None


@dataclass
class EquivalenceReport:
    equivalent: bool
    max_gap: float
    forward_gap: float
    backward_gap: float
    matched: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def summary(self):
        verdict = "equivalent" if self.equivalent else "not equivalent"
        text = (f"{verdict}: max gap {self.max_gap:.3e} "
                f"(forward {self.forward_gap:.3e}, backward {self.backward_gap:.3e})")
        for d in self.diagnostics:
            text += f"\n  {d}"
        return text


def _one_way(famA, famB, x_grid, c_samples, box):
    worst = 0.0
    matched, diagnostics = [], []
    for c in c_samples:
        c = np.asarray(c, dtype=float)
        target = famA.initial_value(c)
        d = match_initial_value(famB, target, box)
        if d is None:
            diagnostics.append(f"initial value {target!r} of parameters {list(c)} not attained")
            worst = np.inf
            continue
        dvec = np.zeros(famB.param_dim)
        dvec[-1] = d
        try:
            gap = float(np.max(np.abs(famA.values(x_grid, c) - famB.values(x_grid, dvec))))
        except QuadraturaError as exc:
            diagnostics.append(f"evaluation failed for parameters {list(c)}: {exc}")
            worst = np.inf
            continue
        matched.append((tuple(float(v) for v in c), float(d), gap))
        worst = max(worst, gap)
    return worst, matched, diagnostics


def check_equivalence(famA, famB, x_grid=None, c_samples=None, tol=None,
                      seed=DEFAULT_SEED, box=None, grid_size=33):
    """Grid test of equivalence of two families, in both directions.

    For every sampled parameter vector of one family the other family is
    matched on its last parameter (the rest held at 0) so that the values at
    the base point agree; the gap is the largest difference over ``x_grid``.
    """
    tol = tol or famA.tol
    if tuple(famA.interval) != tuple(famB.interval) or famA.x0 != famB.x0:
        raise ValueError("families must share the interval and the base point")
    if x_grid is None:
        x_grid = chebyshev_grid(*famA.interval, grid_size)
    x_grid = np.asarray(x_grid, dtype=float)

    def samples_for(fam, offset):
        if c_samples is not None and not isinstance(c_samples, int):
            return [np.asarray(c, dtype=float) for c in c_samples
                    if len(c) == fam.param_dim]
        count = c_samples or tol.sample_count
        b = box.resized(fam.param_dim) if box is not None else WorkingBox.uniform(fam.param_dim)
        return list(b.sample(count, seed + offset))

    fwd, m1, d1 = _one_way(famA, famB, x_grid, samples_for(famA, 0), box)
    bwd, m2, d2 = _one_way(famB, famA, x_grid, samples_for(famB, 1), box)
    worst = max(fwd, bwd)
    return EquivalenceReport(bool(worst < tol.equiv_tol), float(worst), float(fwd), float(bwd),
                             m1 + m2, d1 + d2)


@dataclass
class EffectiveParameterReport:
    passed: bool
    pair_residuals: dict
    reconstruction_gap: float
    diagnostics: list = field(default_factory=list)

    @property
    def max_residual(self):
        return max(self.pair_residuals.values(), default=0.0)

    def summary(self):
        verdict = "pass" if self.passed else "fail"
        text = (f"{verdict}: max pair residual {self.max_residual:.3e}, "
                f"reconstruction gap {self.reconstruction_gap:.3e}")
        for d in self.diagnostics:
            text += f"\n  {d}"
        return text


def effective_parameter_test(fam, x0=None, samples=None, tol=None, seed=DEFAULT_SEED,
                             box=None, x_grid=None):
    """Pairwise cross-partial residuals plus reconstruction from the initial value.

    Reconstruction matches every sampled family member with the member
    having zeros in all but the last parameter and the same value at the
    base point, then compares the two on the x-grid.
    """
    tol = tol or fam.tol
    n = fam.param_dim
    if n < 1:
        raise ValueError("family must have at least one parameter")
    if samples is None or isinstance(samples, int):
        samples = _default_samples(fam, samples or tol.sample_count, seed, box)
    pairs = {}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            pairs[(i, j)] = fundamental_equality_residual(fam, i, j, x0, samples, tol)
    if x_grid is None:
        x_grid = chebyshev_grid(*fam.interval, 33)
    gap, _, diagnostics = _one_way(fam, fam, np.asarray(x_grid, dtype=float),
                                   [c for _, c in samples], box)
    ok = all(r < tol.constancy_tol for r in pairs.values()) and gap < tol.equiv_tol
    return EffectiveParameterReport(bool(ok), pairs, float(gap), diagnostics)


__all__ = ["Family", "FunctionFamily", "ExprFamily", "QuadratureIntegral",
           "ExponentialShapeIntegral", "eval_integral", "check_admissible", "check_theta",
           "AdmissibilityReport", "fundamental_equality_residual", "check_equivalence",
           "EquivalenceReport", "effective_parameter_test", "EffectiveParameterReport",
           "match_initial_value", "outer_names"]
