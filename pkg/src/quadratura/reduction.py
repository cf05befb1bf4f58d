"""Reduction of effectively one-parametric integrals to the two-quadrature normal form.

Building blocks:

* ``solve_linear_pde`` solves ``d_(n-1) H = (a x_n + b) d_n H`` by characteristics;
* ``absorb_into_integrand`` folds ``B(s + c)`` into a higher quadrature;
* ``reduce_step_A`` removes the second-to-last quadrature or turns the
  integral into the exponential shape ``exp(s + c) (S + C)``;
* ``reduce_step_B`` removes one more quadrature from an exponential-shape
  integral;
* ``reduce_to_normal_form`` runs the two steps to termination and reads
  off ``p``, ``q`` and the outer function.

Every derived integrand stays a symbolic expression (with nested integral
nodes); numerical sampling is only used to confirm the structural facts
that the construction relies on.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import DEFAULT_SEED, DEFAULT_TOL, WorkingBox, chebyshev_grid, latin_hypercube
from .errors import (FactorizationAbsentError, IndependenceLostError, PDEStructureError,
                     QuadraturaError, RedundancyError, ReductionError, StructureAbsentError,
                     StructureError)
from .expr import (ZERO, Const, Var, add, as_expr, compile_expr, diff_expr, div, exp,
                   fresh_symbol, integral, mul, neg, substitute, sub, symbols_of, to_dsl)
from .families import (ExponentialShapeIntegral, Family, QuadratureIntegral, check_equivalence,
                       effective_parameter_test, outer_names)
from .odelab import LinearFirstOrder, linear_solution_parts
from .systems import check_independence, running_names


# -- helpers ----------------------------------------------------------------

def _sample_max(expr, names, points, tol):
    """Largest ``|expr|`` over the sample points (positional ``names``)."""
    fn = compile_expr(expr, names, tol)
    return float(max((abs(fn(*p)) for p in points), default=0.0))


def _box_points(box, dim, count, seed, include_origin=True):
    b = box.resized(dim) if box is not None else WorkingBox.uniform(dim)
    return b.sample(count, seed, include_origin=include_origin)


def _xu_points(interval, box, dim, count, seed):
    """Samples of ``(x, u1, ..., u_dim)`` with x in the interval."""
    b = box.resized(dim) if box is not None else WorkingBox.uniform(dim)
    a, c = interval
    pts = latin_hypercube(np.r_[a, b.lower], np.r_[c, b.upper], count, seed)
    return np.vstack([np.r_[interval[0], np.zeros(dim)], pts])


def _to_running(expr, n, last):
    """Rename ``v1 .. v(n-1)`` to ``u1 .. u(n-1)`` and ``vn`` to ``last``."""
    mapping = {f"v{j}": Var(f"u{j}") for j in range(1, n)}
    mapping[f"v{n}"] = as_expr(last)
    return substitute(expr, mapping)


def _snap(value, tol=1e-12):
    """Replace a sampled mean by a nearby simple rational when it is one."""
    frac = Fraction(value).limit_denominator(1000)
    return float(frac) if abs(float(frac) - value) <= tol * max(1.0, abs(value)) else value


# -- linear first-order PDE -------------------------------------------------

@dataclass
class LinearPDESolution:
    G: object
    transform: object
    names: tuple
    pde_residual: float = 0.0
    reconstruction_residual: float = 0.0

    def composed(self):
        """``G`` with its last argument replaced by the transform."""
        return substitute(self.G, {self.names[-1]: self.transform})


def _infer_names(H, a, b, prefix="x"):
    def top(e):
        idx = [int(v[len(prefix):]) for v in e.free_vars()
               if v.startswith(prefix) and v[len(prefix):].isdigit()]
        return max(idx, default=0)
    n = max(top(H), top(a) + 1, top(b) + 1, 2)
    return tuple(f"{prefix}{k}" for k in range(1, n + 1))


def solve_linear_pde(H, a, b, names=None, box=None, tol=DEFAULT_TOL, seed=DEFAULT_SEED,
                     samples=None, check=True):
    """Characteristic solution of ``0 = d_(n-1) H - (a x_n + b) d_n H``.

    ``H`` is an expression in ``names`` (default ``x1 .. xn``), ``a`` and
    ``b`` in the first ``n - 1`` of them.  Returns ``G = H`` with
    ``x_(n-1) = 0`` and the transform
    ``exp(int_0^x_(n-1) a) x_n + int_0^x_(n-1) b(t) exp(int_0^t a) dt`` so
    that ``H = G(..., transform)``.  With ``check`` both the PDE and the
    reconstruction are confirmed on sampled points.
    """
    H, a, b = as_expr(H), as_expr(a), as_expr(b)
    names = tuple(names) if names is not None else _infer_names(H, a, b)
    if len(names) < 2:
        raise ValueError("need at least two variables")
    prev, last = names[-2], names[-1]
    for coeff in (a, b):
        if last in coeff.free_vars():
            raise PDEStructureError(f"coefficient {to_dsl(coeff)} may not depend on {last}")
    avoid = symbols_of(H, a, b) | set(names)
    t = fresh_symbol(avoid, "t")
    r = fresh_symbol(avoid | {t}, "r")
    a_t = substitute(a, {prev: Var(t)})
    a_r = substitute(a, {prev: Var(r)})
    b_t = substitute(b, {prev: Var(t)})
    growth = exp(integral(t, 0, Var(prev), a_t))
    inner = exp(integral(r, 0, Var(t), a_r))
    transform = add(mul(growth, Var(last)), integral(t, 0, Var(prev), mul(b_t, inner)))
    G = substitute(H, {prev: ZERO})
    sol = LinearPDESolution(G, transform, names)
    if check:
        pts = _box_points(box, len(names), samples or 4 * tol.sample_count, seed)
        dprev, dlast = diff_expr(H, prev), diff_expr(H, last)
        residual = sub(dprev, mul(add(mul(a, Var(last)), b), dlast))
        fres = compile_expr(residual, names, tol)
        fscale = compile_expr(dprev, names, tol)
        sol.pde_residual = float(max(abs(fres(*p)) / max(1.0, abs(fscale(*p))) for p in pts))
        if sol.pde_residual >= tol.constancy_tol:
            raise PDEStructureError(
                "input does not satisfy the linear PDE", sol.pde_residual, tol.constancy_tol)
        gap = sub(H, sol.composed())
        sol.reconstruction_residual = _sample_max(gap, names, pts, tol)
    return sol


# -- absorption -------------------------------------------------------------

def absorbed_integrand(sys, B, index=None):
    """``phi_k + sum_j d_j B * phi_j`` for the k-th integrand (default the last)."""
    k = index or sys.n
    B = as_expr(B)
    extra = B.free_vars() - set(running_names(k - 1))
    if extra:
        raise StructureError(f"B may only use u1..u{k - 1}; found {sorted(extra)}")
    out = sys.integrands[k - 1]
    for j in range(1, k):
        dB = diff_expr(B, f"u{j}")
        out = add(out, mul(dB, sys.integrands[j - 1]))
    return out


def absorption_identity_residual(sys, new_sys, B, index=None, tol=DEFAULT_TOL, samples=None,
                                 seed=DEFAULT_SEED, box=None):
    """Largest ``|s_k(x,c) + B(s+c) - s'_k(x,c) - B(c)|`` over sampled ``(x, c)``."""
    k = index or sys.n
    names = running_names(k - 1)
    Bf = compile_expr(as_expr(B), names, tol)
    b = box.resized(max(k - 1, 1)) if box is not None else WorkingBox.uniform(max(k - 1, 1))
    a, e = sys.interval
    count = samples or tol.sample_count
    pts = latin_hypercube(np.r_[a, b.lower[:k - 1]], np.r_[e, b.upper[:k - 1]], count, seed)
    worst = 0.0
    for p in pts:
        x, c = p[0], p[1:]
        cfull = np.r_[c, np.zeros(sys.n - len(c))]
        s_old = sys.evaluate(x, cfull, tol)
        s_new = new_sys.evaluate(x, cfull, tol)
        u = s_old[:k - 1] + c
        lhs = s_old[k - 1] + Bf(*u)
        rhs = s_new[k - 1] + Bf(*c)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def absorb_into_integrand(sys, B, index=None, tol=DEFAULT_TOL, verify=True, samples=None,
                          seed=DEFAULT_SEED, box=None):
    """System with the k-th integrand replaced so that ``B(s + c)`` is absorbed.

    The new quadrature satisfies ``s_k + B(s + c) = s'_k + B(c)``.  With
    ``verify`` the identity is confirmed on samples and independence of the
    result is re-checked; a lost independence raises
    :class:`IndependenceLostError`.
    """
    k = index or sys.n
    if k < 2:
        raise StructureError("absorption needs at least one lower quadrature")
    integrands = list(sys.integrands)
    integrands[k - 1] = absorbed_integrand(sys, B, k)
    new_sys = sys.replace(integrands)
    if verify:
        res = absorption_identity_residual(sys, new_sys, B, k, tol, samples, seed, box)
        if res >= tol.constancy_tol:
            raise StructureError("absorption identity violated", res, tol.constancy_tol)
        report = check_independence(new_sys, tol=tol, seed=seed, box=box)
        if not report.independent:
            raise IndependenceLostError(
                "absorbed system failed the numerical independence check", new_sys, report)
    return new_sys


# -- coefficient extraction -------------------------------------------------

@dataclass
class AlphaExtraction:
    alpha: float
    beta: object
    constancy_residual: float
    ratio: object


def _ratio(F, n):
    """``d_n F / d_(n+1) F`` with ``F`` over ``v1 .. v(n+1)``."""
    return div(diff_expr(F, f"v{n}"), diff_expr(F, f"v{n + 1}"))


def _sampled(expr, names, points, tol, what):
    fn = compile_expr(expr, names, tol)
    vals = []
    for p in points:
        try:
            vals.append(fn(*p))
        except QuadraturaError as exc:
            raise StructureAbsentError(f"{what} could not be evaluated at "
                                       f"{tuple(float(v) for v in p)}: {exc}") from None
    return np.array(vals)


def extract_alpha(F, n, box=None, tol=DEFAULT_TOL, seed=DEFAULT_SEED, samples=None):
    """Constant ``alpha`` and function ``beta`` with ``d_n F = (alpha C + beta) d_C F``.

    ``F`` is an expression in ``v1 .. v(n+1)``, the last argument being the
    C-slot.  ``alpha`` is the sample mean of the C-derivative of the ratio
    ``d_n F / d_C F``; a sampled deviation at or above ``constancy_tol``
    means the structure is absent.  ``beta`` is the ratio at ``C = 0``.
    """
    F = as_expr(F)
    names = outer_names(n + 1)
    R = _ratio(F, n)
    dR = diff_expr(R, names[-1])
    pts = _box_points(box, n + 1, samples or 4 * tol.sample_count, seed)
    vals = _sampled(dR, names, pts, tol, "the C-derivative of the ratio")
    alpha = float(vals.mean())
    residual = float(np.abs(vals - alpha).max())
    if residual >= tol.constancy_tol:
        raise StructureAbsentError(
            f"C-derivative of the ratio varies by {residual:.3e}", residual, tol.constancy_tol)
    alpha = 0.0 if abs(alpha) < tol.constancy_tol else _snap(alpha)
    beta = substitute(R, {names[-1]: ZERO})
    return AlphaExtraction(alpha, beta, residual, R)


# -- trace ------------------------------------------------------------------

RULE_A_CASE1 = "reduce-A-case1"
RULE_A_CASE2 = "reduce-A-case2"
RULE_B = "reduce-B"
RULE_TERMINAL_1 = "terminal-1quad"
RULE_TERMINAL_2 = "terminal-2quad"


@dataclass
class StepRecord:
    rule: str
    count_before: int
    count_after: int
    objects: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    equivalence_gap: float = None

    def to_dict(self):
        return {"rule": self.rule, "count_before": self.count_before,
                "count_after": self.count_after, "objects": dict(self.objects),
                "residuals": {k: float(v) for k, v in self.residuals.items()},
                "equivalence_gap": None if self.equivalence_gap is None
                else float(self.equivalence_gap)}


@dataclass
class ReductionTrace:
    steps: list = field(default_factory=list)
    final_gap: float = None

    @property
    def rules(self):
        return [s.rule for s in self.steps]

    def counts(self):
        return [(s.count_before, s.count_after) for s in self.steps]

    def is_monotone(self):
        """Counts never grow and only the case-2 step may keep the count."""
        for s in self.steps:
            if s.count_after > s.count_before:
                return False
            if s.count_after == s.count_before and s.rule not in (RULE_A_CASE2,) \
                    and not s.rule.startswith("terminal"):
                return False
        return sum(s.rule == RULE_A_CASE2 for s in self.steps) <= 1

    def to_text(self):
        out = []
        for i, s in enumerate(self.steps, start=1):
            out.append(f"step {i}: {s.rule}")
            out.append(f"  quadratures: {s.count_before} -> {s.count_after}")
            for key in sorted(s.objects):
                out.append(f"  {key}: {s.objects[key]}")
            for key in sorted(s.residuals):
                out.append(f"  residual {key}: {s.residuals[key]!r}")
            if s.equivalence_gap is not None:
                out.append(f"  equivalence gap: {s.equivalence_gap!r}")
            out.append("")
        if self.final_gap is not None:
            out.append(f"final equivalence gap: {self.final_gap!r}")
        return "\n".join(out).rstrip("\n") + "\n"

    def to_jsonl(self):
        lines = [json.dumps(s.to_dict(), sort_keys=True) for s in self.steps]
        if self.final_gap is not None:
            lines.append(json.dumps({"final_equivalence_gap": float(self.final_gap)},
                                    sort_keys=True))
        return "\n".join(lines) + "\n"


@dataclass
class StepResult:
    output: object
    record: StepRecord


# -- the two reduction steps ------------------------------------------------

def _redundancy(expr, var, dim, interval, box, tol, seed, what):
    """Sampled ``max |d expr / d var|`` over ``(x, u1..u_dim)``; raise when not ~0."""
    d = diff_expr(expr, var)
    if d == ZERO:
        return 0.0
    names = ("x",) + running_names(dim)
    pts = _xu_points(interval, box, dim, 4 * tol.sample_count, seed)
    res = _sample_max(d, names, pts, tol)
    if res >= tol.constancy_tol:
        raise RedundancyError(f"{what} still depends on {var} (max |derivative| {res:.3e})",
                              res, tol.constancy_tol)
    return res


def _step_gap(before, after, tol, seed, box, c_samples):
    return check_equivalence(before, after, c_samples=c_samples, tol=tol, seed=seed,
                             box=box).max_gap


def reduce_step_A(q, tol=None, box=None, seed=DEFAULT_SEED, check=True, c_samples=None):
    """First reduction step for ``theta(x, F(s_1 + c_1, ..., s_n + c_n, S + C))``.

    With ``alpha = 0`` the quadrature ``s_n`` is eliminated and a plain
    integral with one quadrature less is returned; otherwise ``s_n`` is
    rescaled and an exponential-shape integral with the same count is
    returned.  With ``check`` the output is compared with the input on the
    sampled grid and the gap is recorded.
    """
    tol = tol or q.tol
    N = q.n
    if N < 2:
        raise StructureError("the first reduction step needs at least two quadratures")
    n = N - 1
    ex = extract_alpha(q.F, n, box, tol, seed)
    un, vn, vC = f"u{n}", f"v{n}", f"v{N}"
    G = substitute(q.F, {vn: ZERO, vC: Var(vn)})
    sys = q.sys
    phis = list(sys.integrands)
    avoid = set().union(*(e.symbols() for e in phis)) | q.F.symbols() | ex.beta.symbols()
    t = fresh_symbol(avoid, "t")
    objects = {"alpha": repr(ex.alpha), "beta": to_dsl(ex.beta), "G": to_dsl(G)}
    residuals = {"constancy": ex.constancy_residual}
    if ex.alpha == 0.0:
        B = integral(t, 0, Var(un), _to_running(ex.beta, n, Var(t)))
        Phi1 = absorbed_integrand(sys, B, N)
        residuals["redundancy"] = _redundancy(Phi1, un, n, sys.interval, box, tol, seed,
                                              "the absorbed integrand")
        Phi_hat = substitute(Phi1, {un: ZERO})
        new_sys = sys.replace(phis[:n - 1] + [Phi_hat])
        out = QuadratureIntegral(new_sys, G, q.theta, tol)
        rule = RULE_A_CASE1
        objects["B"] = to_dsl(B)
    else:
        alpha = Const(ex.alpha)
        phi = mul(alpha, phis[n - 1])
        Phi1 = substitute(phis[N - 1], {un: div(Var(un), alpha)})
        body = mul(_to_running(ex.beta, n, Var(t)), exp(mul(alpha, Var(t))))
        B = mul(exp(neg(Var(un))), integral(t, 0, div(Var(un), alpha), body))
        mid = sys.replace(phis[:n - 1] + [phi, Phi1])
        Phi2 = absorbed_integrand(mid, B, N)
        new_sys = sys.replace(phis[:n - 1] + [phi, Phi2])
        out = ExponentialShapeIntegral(new_sys, G, q.theta, tol)
        rule = RULE_A_CASE2
        objects["B"] = to_dsl(B)
    for j, e in enumerate(out.sys.integrands, start=1):
        objects[f"phi{j}"] = to_dsl(e)
    record = StepRecord(rule, N, out.n, objects, residuals)
    if check:
        record.equivalence_gap = _step_gap(q, out, tol, seed, box, c_samples)
    return StepResult(out, record)


def reduce_step_B(e, tol=None, box=None, seed=DEFAULT_SEED, check=True, c_samples=None):
    """Second reduction step: one quadrature less, exponential shape kept.

    The input is ``theta(x, F(s_1 + c_1, ..., s_n + c_n, exp(s + c) (S + C)))``
    with ``n >= 1``; ``s_n`` is absorbed into ``s`` and ``S`` and then
    eliminated.
    """
    tol = tol or e.tol
    if not isinstance(e, ExponentialShapeIntegral):
        raise StructureError("the second reduction step needs an exponential-shape integral")
    N = e.n
    n = N - 2
    if n < 1:
        raise StructureError("nothing left to eliminate")
    names = outer_names(n + 1)
    vD = names[-1]
    R = _ratio(e.F, n)
    dR = diff_expr(R, vD)
    d2R = diff_expr(dR, vD)
    pts = _box_points(box, n + 1, 4 * tol.sample_count, seed)
    gamma = float(np.abs(_sampled(d2R, names, pts, tol, "the second D-derivative"))
                  .max()) if d2R != ZERO else 0.0
    if gamma >= tol.constancy_tol:
        raise StructureAbsentError(
            f"ratio is not affine in the last argument (max |second derivative| {gamma:.3e})",
            gamma, tol.constancy_tol)
    alpha = substitute(dR, {vD: ZERO})
    beta = substitute(R, {vD: ZERO})
    sys = e.sys
    phis = list(sys.integrands)
    un, us = f"u{n}", f"u{n + 1}"
    avoid = (set().union(*(p.symbols() for p in phis)) | e.F.symbols()
             | alpha.symbols() | beta.symbols())
    t = fresh_symbol(avoid, "t")
    r = fresh_symbol(avoid | {t}, "r")
    A = integral(t, 0, Var(un), _to_running(alpha, n, Var(t)))
    A_r = substitute(A, {un: Var(r)})
    Bp = integral(r, 0, Var(un), mul(_to_running(beta, n, Var(r)), exp(A_r)))
    base = sys.replace(phis[:n + 1])
    phi_s1 = absorbed_integrand(base, A, n + 1)
    Phi1 = substitute(phis[N - 1], {us: sub(Var(us), A)})
    mid = sys.replace(phis[:n] + [phi_s1, Phi1])
    B = mul(exp(neg(Var(us))), Bp)
    Phi2 = absorbed_integrand(mid, B, N)
    residuals = {"gamma": gamma}
    residuals["redundancy_s"] = _redundancy(phi_s1, un, n, sys.interval, box, tol, seed,
                                            "the absorbed exponent integrand")
    residuals["redundancy_S"] = _redundancy(Phi2, un, n + 1, sys.interval, box, tol, seed,
                                            "the absorbed integrand")
    phi_hat = substitute(phi_s1, {un: ZERO})
    Phi_hat = substitute(Phi2, {un: ZERO, us: Var(un)})
    new_sys = sys.replace(phis[:n - 1] + [phi_hat, Phi_hat])
    G = substitute(e.F, {f"v{n}": ZERO, vD: Var(f"v{n}")})
    out = ExponentialShapeIntegral(new_sys, G, e.theta, tol)
    objects = {"alpha": to_dsl(alpha), "beta": to_dsl(beta), "A": to_dsl(A),
               "B'": to_dsl(Bp), "G": to_dsl(G)}
    for j, p in enumerate(new_sys.integrands, start=1):
        objects[f"phi{j}"] = to_dsl(p)
    record = StepRecord(RULE_B, N, out.n, objects, residuals)
    if check:
        record.equivalence_gap = _step_gap(e, out, tol, seed, box, c_samples)
    return StepResult(out, record)


# -- normal form ------------------------------------------------------------

@dataclass
class NormalForm:
    """``theta_hat(x, exp(-int p) (int q exp(int p) + C))`` on ``interval``."""

    p: object
    q: object
    theta_hat: object
    x0: float = 0.0
    interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.p, self.q, self.theta_hat = (as_expr(self.p), as_expr(self.q),
                                          as_expr(self.theta_hat))

    def linear_equation(self):
        return LinearFirstOrder(self.p, self.q, self.x0, self.interval)

    def family(self, tol=DEFAULT_TOL):
        return NormalFormFamily(self, tol)

    def to_text(self):
        return (f"p: {to_dsl(self.p)}\nq: {to_dsl(self.q)}\n"
                f"theta_hat: {to_dsl(self.theta_hat)}\n"
                f"x0: {self.x0!r}\ninterval: {self.interval[0]!r}, {self.interval[1]!r}\n")


class NormalFormFamily(Family):
    """One-parameter family of a normal form, evaluated through the closed linear solution."""

    param_dim = 1

    def __init__(self, nf, tol=DEFAULT_TOL):
        self.nf = nf
        self.tol = tol
        self.x0 = nf.x0
        self.interval = tuple(nf.interval)
        decay, forcing = linear_solution_parts(nf.p, nf.q, nf.x0)
        self._decay = compile_expr(decay, ("x",), tol)
        self._forcing = compile_expr(forcing, ("x",), tol)
        self._theta = compile_expr(nf.theta_hat, ("x", "w"), tol)
        self._dtheta = compile_expr(diff_expr(nf.theta_hat, "w"), ("x", "w"), tol)
        self._cache = {}

    def _parts(self, x):
        hit = self._cache.get(x)
        if hit is None:
            hit = (self._decay(x), self._forcing(x))
            self._cache[x] = hit
        return hit

    def inner(self, x, C):
        decay, forcing = self._parts(float(x))
        return decay * (forcing + C)

    def value(self, x, c):
        C = float(np.asarray(c, dtype=float).ravel()[0])
        return float(self._theta(x, self.inner(x, C)))

    def initial_value(self, c):
        return float(self._theta(self.x0, float(np.asarray(c, dtype=float).ravel()[0])))

    def gradient(self, x, c):
        C = float(np.asarray(c, dtype=float).ravel()[0])
        decay, _ = self._parts(float(x))
        return np.array([self._dtheta(x, self.inner(x, C)) * decay])


def _theta_hat(theta, G):
    return substitute(theta, {"w": substitute(G, {"v1": Var("w")})})


def remark_theta_hat(q):
    """``theta(x, F(0, ..., 0, w))`` built directly from an input integral."""
    arity = q.outer_arity()
    zeros = {f"v{k}": ZERO for k in range(1, arity)}
    zeros[f"v{arity}"] = Var("w")
    return substitute(q.theta, {"w": substitute(q.F, zeros)})


def terminal_one(q, tol=None):
    """Single quadrature left: ``p = 0`` and ``q`` is the integrand."""
    if q.n != 1:
        raise StructureError("terminal branch needs exactly one quadrature")
    Phi = q.sys.integrands[0]
    nf = NormalForm(ZERO, Phi, _theta_hat(q.theta, q.F), q.x0, q.interval)
    record = StepRecord(RULE_TERMINAL_1, 1, 1, {"p": "0", "q": to_dsl(Phi),
                                                 "theta_hat": to_dsl(nf.theta_hat)}, {})
    return nf, record


def terminal_two(e, tol=None, box=None, seed=DEFAULT_SEED):
    """Exponential shape with two quadratures: factor the integrand as ``q(x) exp(-c)``."""
    tol = tol or e.tol
    if not isinstance(e, ExponentialShapeIntegral) or e.n != 2:
        raise StructureError("terminal branch needs an exponential-shape pair of quadratures")
    phi_s, Phi = e.sys.integrands
    defect = add(Phi, diff_expr(Phi, "u1"))
    names = ("x", "u1")
    pts = _xu_points(e.interval, box, 1, 4 * tol.sample_count, seed)
    res = _sample_max(defect, names, pts, tol) if defect != ZERO else 0.0
    if res >= tol.constancy_tol:
        raise FactorizationAbsentError(res, tol.constancy_tol)
    qx = substitute(Phi, {"u1": ZERO})
    p = neg(phi_s)
    nf = NormalForm(p, qx, _theta_hat(e.theta, e.F), e.x0, e.interval)
    record = StepRecord(RULE_TERMINAL_2, 2, 2,
                        {"p": to_dsl(p), "q": to_dsl(qx), "theta_hat": to_dsl(nf.theta_hat)},
                        {"factorization": res})
    return nf, record


@dataclass
class ReductionResult:
    nf: NormalForm
    trace: ReductionTrace
    reduced: object
    equivalence: object = None


def reduce_to_normal_form(q, tol=None, box=None, seed=DEFAULT_SEED, precheck=True,
                          check_steps=True, check_final=True, c_samples=None, x_grid=None):
    """Run the reduction loop on ``q`` and read off the normal form.

    Step one repeats the first reduction step while more than one
    quadrature remains, until it produces the exponential shape; step two
    then repeats the second reduction step down to two quadratures.  A
    structured failure aborts with :class:`ReductionError` carrying the
    partial trace.
    """
    tol = tol or q.tol
    trace = ReductionTrace()
    if precheck:
        report = effective_parameter_test(q, tol=tol, seed=seed, box=box)
        if not report.passed:
            raise ReductionError(StructureAbsentError(report.summary(), report.max_residual,
                                                      tol.constancy_tol), trace)
    current = q
    try:
        if not isinstance(current, ExponentialShapeIntegral):
            while current.n > 1:
                step = reduce_step_A(current, tol, box, seed, check_steps, c_samples)
                trace.steps.append(step.record)
                current = step.output
                if isinstance(current, ExponentialShapeIntegral):
                    break
        if isinstance(current, ExponentialShapeIntegral):
            while current.n > 2:
                step = reduce_step_B(current, tol, box, seed, check_steps, c_samples)
                trace.steps.append(step.record)
                current = step.output
            nf, record = terminal_two(current, tol, box, seed)
        else:
            nf, record = terminal_one(current, tol)
        if check_steps:
            record.equivalence_gap = _step_gap(current, nf.family(tol), tol, seed, box, c_samples)
        trace.steps.append(record)
    except QuadraturaError as exc:
        raise ReductionError(exc, trace) from exc
    result = ReductionResult(nf, trace, current)
    if check_final:
        rep = check_equivalence(q, nf.family(tol), x_grid=x_grid, c_samples=c_samples,
                                tol=tol, seed=seed, box=box)
        trace.final_gap = rep.max_gap
        result.equivalence = rep
    return result


__all__ = ["solve_linear_pde", "LinearPDESolution", "absorb_into_integrand",
           "absorbed_integrand", "absorption_identity_residual", "extract_alpha",
           "AlphaExtraction", "reduce_step_A", "reduce_step_B", "reduce_to_normal_form",
           "NormalForm", "NormalFormFamily", "ReductionTrace", "StepRecord", "StepResult",
           "ReductionResult", "normal_form_faithfulness", "terminal_one", "terminal_two", "remark_theta_hat",
           "RULE_A_CASE1", "RULE_A_CASE2", "RULE_B", "RULE_TERMINAL_1", "RULE_TERMINAL_2"]


def normal_form_faithfulness(result, grid=None, c_samples=None, seed=DEFAULT_SEED):
    """Largest gap between the normal form and the last reduced integral.

    The reduced integral is evaluated with its exponent constant at zero and
    the same final constant, which is exactly what the normal form folds.
    """
    nf, reduced = result.nf, result.reduced
    fam = nf.family(reduced.tol)
    xs = chebyshev_grid(*nf.interval, 33) if grid is None else np.asarray(grid, dtype=float)
    if c_samples is None:
        c_samples = latin_hypercube([-2.0], [2.0], 10, seed)[:, 0]
    worst = 0.0
    for C in np.atleast_1d(c_samples):
        c = np.zeros(reduced.param_dim)
        c[-1] = C
        ref = reduced.values(xs, c)
        got = np.array([fam.value(x, [C]) for x in xs])
        worst = max(worst, float(np.abs(ref - got).max()))
    return worst
