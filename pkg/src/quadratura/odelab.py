"""Linear first-order equations, their diffeomorphic transforms, and u'' + Q u = 0.

The linear equation ``y' + p y = q`` is solved in closed form through two
quadratures; the second-order equation is handled in polar (Prüfer)
coordinates ``(u, u') = rho (sin theta, cos theta)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _ode
from .config import DEFAULT_SEED, DEFAULT_TOL, latin_hypercube
from .errors import StructureError
from .expr import (ONE, Var, add, as_expr, compile_expr, cos, diff_expr, div, exp, fresh_symbol,
                   integral, mul, neg, pow_, sin, sub, substitute, symbols_of)


# -- y' + p y = q -------------------------------------------------------------

@dataclass
class LinearFirstOrder:
    """``y' + p(x) y = q(x)`` on ``interval`` with data given at ``x0``."""

    p: object
    q: object
    x0: float = 0.0
    interval: tuple = (0.0, 1.0)
    breakpoints: tuple = ()

    def __post_init__(self):
        self.p, self.q = as_expr(self.p), as_expr(self.q)
        for name, e in (("p", self.p), ("q", self.q)):
            extra = e.free_vars() - {"x"}
            if extra:
                raise StructureError(f"{name} may only depend on x; found {sorted(extra)}")
        self.x0 = float(self.x0)
        self.interval = tuple(float(v) for v in self.interval)


def linear_solution_parts(p, q, x0=0.0):
    """Expressions ``(exp(-P(x)), int_x0^x q(t) exp(P(t)) dt)`` with ``P = int_x0^x p``.

    The solution with ``y(x0) = y0`` is their combination
    ``exp(-P) (y0 + K)``.
    """
    p, q = as_expr(p), as_expr(q)
    avoid = symbols_of(p, q) | {"x"}
    t = fresh_symbol(avoid, "t")
    r = fresh_symbol(avoid | {t}, "r")
    P_x = integral(t, x0, Var("x"), substitute(p, {"x": Var(t)}))
    P_t = integral(r, x0, Var(t), substitute(p, {"x": Var(r)}))
    decay = exp(neg(P_x))
    forcing = integral(t, x0, Var("x"), mul(substitute(q, {"x": Var(t)}), exp(P_t)))
    return decay, forcing


def linear_solution_expr(eq, y0):
    """Closed-form solution as an expression in ``x`` (``y0`` a number or symbol)."""
    decay, forcing = linear_solution_parts(eq.p, eq.q, eq.x0)
    return mul(decay, add(as_expr(y0), forcing))


@dataclass
class LinearTrajectory:
    grid: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    residual: float


def solve_linear_first_order(eq, y0, x_grid, tol=DEFAULT_TOL):
    """Closed-form solution on ``x_grid`` together with its equation residual.

    ``y'`` is evaluated from the symbolic derivative of the closed form, so
    the residual measures the quadratures rather than a difference quotient.
    """
    xs = np.asarray(x_grid, dtype=float)
    a, b = eq.interval
    if np.any(xs < a) or np.any(xs > b):
        raise StructureError(f"grid leaves the interval [{a}, {b}]")
    y_expr = linear_solution_expr(eq, float(y0))
    fy = compile_expr(y_expr, ("x",), tol)
    fdy = compile_expr(diff_expr(y_expr, "x"), ("x",), tol)
    fp = compile_expr(eq.p, ("x",), tol)
    fq = compile_expr(eq.q, ("x",), tol)
    y = np.array([fy(x) for x in xs])
    dy = np.array([fdy(x) for x in xs])
    res = np.abs(dy + np.array([fp(x) for x in xs]) * y - np.array([fq(x) for x in xs]))
    return LinearTrajectory(xs, y, dy, float(res.max(initial=0.0)))


# -- transformed equations --------------------------------------------------

class TransformedODE:
    """``d_x Phi(x, y) + d_y Phi(x, y) y' = q(x) - p(x) Phi(x, y)``."""

    def __init__(self, Phi, p, q, tol=DEFAULT_TOL):
        self.Phi, self.p, self.q = as_expr(Phi), as_expr(p), as_expr(q)
        extra = self.Phi.free_vars() - {"x", "y"}
        if extra:
            raise StructureError(f"Phi may only use x and y; found {sorted(extra)}")
        self.tol = tol
        names = ("x", "y")
        self.dPhi_x = diff_expr(self.Phi, "x")
        self.dPhi_y = diff_expr(self.Phi, "y")
        self._Phi = compile_expr(self.Phi, names, tol)
        self._dx = compile_expr(self.dPhi_x, names, tol)
        self._dy = compile_expr(self.dPhi_y, names, tol)
        self._p = compile_expr(self.p, ("x",), tol)
        self._q = compile_expr(self.q, ("x",), tol)

    def explicit_rhs(self):
        """``y' = (q - p Phi - d_x Phi) / d_y Phi`` as an expression."""
        return div(sub(sub(self.q, mul(self.p, self.Phi)), self.dPhi_x), self.dPhi_y)

    def slope(self, x, y):
        return (self._q(x) - self._p(x) * self._Phi(x, y) - self._dx(x, y)) / self._dy(x, y)

    def residual(self, x, y, dy):
        """Left minus right side of the implicit equation at one point."""
        return (self._dx(x, y) + self._dy(x, y) * dy - self._q(x)
                + self._p(x) * self._Phi(x, y))

    def solve(self, x0, y0, xs):
        sol = _ode.integrate(lambda x, y: [self.slope(x, y[0])], x0, [y0], xs, self.tol.ode_tol)
        return sol[:, 0]


def make_transformed_ode(Phi, p, q, tol=DEFAULT_TOL, box=None, samples=64, seed=DEFAULT_SEED,
                         interval=(0.0, 1.0)):
    """Build the transformed linear equation after checking ``d_y Phi != 0`` on samples.

    ``box`` gives the y-range as ``(lo, hi)`` (default ``(-2, 2)``).
    """
    ode = TransformedODE(Phi, p, q, tol)
    lo, hi = box if box is not None else (-2.0, 2.0)
    pts = latin_hypercube([interval[0], lo], [interval[1], hi], samples, seed)
    slopes = np.array([ode._dy(x, y) for x, y in pts])
    smallest = float(np.abs(slopes).min())
    # a sign change means a zero somewhere in the (connected) box
    if smallest < 1e-8 or (slopes.min() < 0 < slopes.max()):
        raise StructureError("d Phi / dy vanishes on the working box", smallest, 1e-8)
    return ode


@dataclass
class NormalFormResidualReport:
    inverse_residual: float
    ode_residual: float
    per_constant: list = field(default_factory=list)

    def passed(self, threshold=1e-6):
        return self.ode_residual < threshold


def verify_normal_form_solves(nf, ode, grid=None, c_samples=None, tol=DEFAULT_TOL,
                              seed=DEFAULT_SEED, inverse_tol=1e-6):
    """Residual of the transformed equation along the normal-form trajectories.

    ``Phi`` must invert ``theta_hat`` in its second argument; this is checked
    first on sampled points.  Along ``y(x) = theta_hat(x, z(x))`` with
    ``z' = q - p z`` the derivative is exact, so the residual only carries
    quadrature error.
    """
    a, b = nf.interval
    grid = np.linspace(a, b, 33) if grid is None else np.asarray(grid, dtype=float)
    if c_samples is None:
        c_samples = latin_hypercube([-2.0], [2.0], 10, seed)[:, 0]
    th = compile_expr(nf.theta_hat, ("x", "w"), tol)
    th_x = compile_expr(diff_expr(nf.theta_hat, "x"), ("x", "w"), tol)
    th_w = compile_expr(diff_expr(nf.theta_hat, "w"), ("x", "w"), tol)
    pts = latin_hypercube([a, -2.0], [b, 2.0], 32, seed)
    inv = max(abs(ode._Phi(x, th(x, w)) - w) for x, w in pts)
    if inv >= inverse_tol:
        raise StructureError("Phi does not invert theta_hat in the second slot", inv, inverse_tol)
    decay, forcing = linear_solution_parts(nf.p, nf.q, nf.x0)
    fd = compile_expr(decay, ("x",), tol)
    ff = compile_expr(forcing, ("x",), tol)
    fp = compile_expr(nf.p, ("x",), tol)
    fq = compile_expr(nf.q, ("x",), tol)
    parts = [(x, fd(x), ff(x), fp(x), fq(x)) for x in grid]
    rows = []
    for C in np.atleast_1d(c_samples):
        worst = 0.0
        for x, d, f, px, qx in parts:
            z = d * (f + C)
            dz = qx - px * z
            y = th(x, z)
            dy = th_x(x, z) + th_w(x, z) * dz
            worst = max(worst, abs(ode.residual(x, y, dy)))
        rows.append((float(C), float(worst)))
    return NormalFormResidualReport(float(inv), max(r[1] for r in rows), rows)


# -- u'' + Q u = 0 ------------------------------------------------------------

@dataclass
class SecondOrderEq:
    """``u'' + Q(x) u = 0``."""

    Q: object
    x0: float = 0.0
    interval: tuple = (0.0, 1.0)
    breakpoints: tuple = ()

    def __post_init__(self):
        self.Q = as_expr(self.Q)
        extra = self.Q.free_vars() - {"x"}
        if extra:
            raise StructureError(f"Q may only depend on x; found {sorted(extra)}")
        self.x0 = float(self.x0)
        self.interval = tuple(float(v) for v in self.interval)

    def constant_value(self):
        """The value of Q when it does not involve x, else ``None``."""
        if "x" in self.Q.free_vars():
            return None
        return float(compile_expr(self.Q, ("x",))(0.0))


@dataclass
class PruferTrajectory:
    grid: np.ndarray
    theta: np.ndarray
    logrho: np.ndarray
    x0: float = 0.0
    theta0: float = 0.0

    @property
    def rho(self):
        return np.exp(self.logrho)

    @property
    def u(self):
        return self.rho * np.sin(self.theta)

    @property
    def du(self):
        return self.rho * np.cos(self.theta)

    def rows(self):
        return list(zip(self.grid, self.theta, self.logrho, self.u, self.du))


def prufer_forward(eq, u0, du0, grid, tol=DEFAULT_TOL):
    """Angle and log-amplitude of the solution with ``u(x0) = u0``, ``u'(x0) = du0``.

    The angle is integrated continuously (never reduced modulo pi); the
    log-amplitude rate ``(1 - Q) sin cos`` is carried along as an extra
    quadrature component.
    """
    if u0 == 0 and du0 == 0:
        raise StructureError("the zero solution has no polar representation")
    Qf = compile_expr(eq.Q, ("x",), tol)
    theta0 = math.atan2(u0, du0)
    logrho0 = 0.5 * math.log(u0 * u0 + du0 * du0)

    def rhs(x, y):
        th = y[0]
        s, c = math.sin(th), math.cos(th)
        Qx = Qf(x)
        return [c * c + Qx * s * s, (1.0 - Qx) * s * c]

    xs = np.asarray(grid, dtype=float)
    sol = _ode.integrate(rhs, eq.x0, [theta0, logrho0], xs, tol.ode_tol, eq.breakpoints)
    return PruferTrajectory(xs, sol[:, 0], sol[:, 1], eq.x0, theta0)


def prufer_residual(eq, u0, du0, xs, h=0.05, tol=DEFAULT_TOL):
    """``max |u'' + Q u|`` with ``u''`` from a five-point difference of the reconstruction."""
    xs = np.asarray(xs, dtype=float)
    offsets = np.array([-2, -1, 0, 1, 2]) * h
    pts = (xs[:, None] + offsets[None, :]).ravel()
    u = prufer_forward(eq, u0, du0, pts, tol).u.reshape(len(xs), 5)
    d2 = (-u[:, 0] + 16 * u[:, 1] - 30 * u[:, 2] + 16 * u[:, 3] - u[:, 4]) / (12 * h * h)
    Qf = compile_expr(eq.Q, ("x",), tol)
    return float(np.max(np.abs(d2 + np.array([Qf(x) for x in xs]) * u[:, 2])))


# -- first integral for constant Q ------------------------------------------

@dataclass
class WitnessReport:
    Q: float
    deviation: float
    singular: bool
    closed_form_gap: float = None
    message: str = ""

    def passed(self, threshold=1e-6):
        return not self.singular and self.deviation < threshold


def _denominator_roots_in(Q, lo, hi):
    """Whether ``cos^2 + Q sin^2`` vanishes somewhere in ``[lo, hi]``."""
    if Q > 0:
        return False
    base = math.pi / 2 if Q == 0 else math.atan(1.0 / math.sqrt(-Q))
    roots = (base,) if Q == 0 else (base, -base)
    for r in roots:
        k = math.ceil((lo - r) / math.pi)
        if r + k * math.pi <= hi:
            return True
    return False


def angle_first_integral(Q_const, theta0):
    """Expression in ``theta`` for ``int_theta0^theta dpsi / (cos^2 psi + Q sin^2 psi)``."""
    psi = Var("psi")
    Q = as_expr(float(Q_const))
    den = add(pow_(cos(psi), 2), mul(Q, pow_(sin(psi), 2)))
    return integral("psi", float(theta0), Var("theta"), div(ONE, den))


def _closed_first_integral(Q, theta):
    """Branch-continuous antiderivative of ``1 / (cos^2 + Q sin^2)`` for ``Q > 0``."""
    r = math.sqrt(Q)
    s, c = math.sin(theta), math.cos(theta)
    return (theta + math.atan2((r - 1) * s * c, c * c + r * s * s)) / r


def restricted_integrability_witness(Q_const, trajectories, tol=DEFAULT_TOL):
    """Check that the angle first integral minus ``x - x0`` stays zero along trajectories.

    Reports a singular first integral when its integrand has a pole inside
    the range swept by the angle.
    """
    Q = float(Q_const)
    if isinstance(trajectories, PruferTrajectory):
        trajectories = [trajectories]
    deviation, closed_gap = 0.0, 0.0 if Q > 0 else None
    for traj in trajectories:
        lo = min(traj.theta0, float(traj.theta.min()))
        hi = max(traj.theta0, float(traj.theta.max()))
        if _denominator_roots_in(Q, lo, hi):
            return WitnessReport(Q, math.inf, True, None,
                                 "first integral singular on range")
        fn = compile_expr(angle_first_integral(Q, traj.theta0), ("theta",), tol)
        for x, th in zip(traj.grid, traj.theta):
            val = fn(th)
            deviation = max(deviation, abs(val - (x - traj.x0)))
            if Q > 0:
                ref = _closed_first_integral(Q, th) - _closed_first_integral(Q, traj.theta0)
                closed_gap = max(closed_gap, abs(val - ref))
    return WitnessReport(Q, float(deviation), False, closed_gap,
                         "first integral constant along trajectories")


# -- obstruction for non-constant Q -------------------------------------------

@dataclass
class ObstructionReport:
    derivable: bool
    Q1: float
    Q2: float
    determinants: list = field(default_factory=list)
    max_abs_det: float = 0.0
    level_identity_residual: float = None
    difference_identity_residual: float = None
    message: str = ""


def _square_derivatives():
    y = Var("y")
    s2, c2 = pow_(sin(y), 2), pow_(cos(y), 2)
    ds2, dc2 = diff_expr(s2, "y"), diff_expr(c2, "y")
    return s2, c2, ds2, dc2, diff_expr(ds2, "y"), diff_expr(dc2, "y")


def obstruction_identities(phi):
    """The two identities a transforming diffeomorphism would have to satisfy.

    Returns ``(at_Q, difference)``: the first is an expression in ``y`` and
    ``level`` (the value of Q), the second in ``y`` alone.
    """
    phi = as_expr(phi)
    d1 = diff_expr(phi, "y")
    ratio = div(diff_expr(d1, "y"), d1)
    dratio = diff_expr(ratio, "y")
    s2, c2, ds2, dc2, dds2, ddc2 = _square_derivatives()
    Q = Var("level")
    at_Q = add(add(mul(dratio, add(c2, mul(Q, s2))), mul(ratio, add(dc2, mul(Q, ds2)))),
               add(ddc2, mul(Q, dds2)))
    difference = add(add(mul(dratio, s2), mul(ratio, ds2)), dds2)
    return at_Q, difference


def nonconstancy_obstruction(eq, x1, x2, y_samples=None, phi=None, tol=DEFAULT_TOL,
                             y_points=None):
    """Evaluate the linear-independence obstruction for a pair with ``Q(x1) != Q(x2)``.

    Part one reports ``det [[(sin^2)'(y1), (sin^2)''(y1)], [(sin^2)'(y2), (sin^2)''(y2)]]``
    at each sample pair ``(y1, y2)``.  With a candidate ``phi`` (expression
    in ``y``) part two reports the largest residuals of both identities
    over ``y_points`` (default: 25 points of [-pi/2, pi/2]) and the sample
    pairs.
    """
    Qf = compile_expr(eq.Q, ("x",), tol)
    Q1, Q2 = float(Qf(x1)), float(Qf(x2))
    if Q1 == Q2:
        return ObstructionReport(False, Q1, Q2, message="no obstruction derivable from this pair")
    pairs = y_samples if y_samples is not None else [(math.pi / 4, math.pi / 3)]
    _, _, ds2, _, dds2, _ = _square_derivatives()
    f1 = compile_expr(ds2, ("y",), tol)
    f2 = compile_expr(dds2, ("y",), tol)
    dets = [float(f1(a) * f2(b) - f2(a) * f1(b)) for a, b in pairs]
    report = ObstructionReport(True, Q1, Q2, dets, max(abs(d) for d in dets),
                               message="derivatives of sin^2 are linearly independent")
    if phi is not None:
        at_Q, difference = obstruction_identities(phi)
        at_level = compile_expr(at_Q, ("y", "level"), tol)
        at_difference = compile_expr(difference, ("y",), tol)
        base = np.linspace(-math.pi / 2, math.pi / 2, 25) if y_points is None else y_points
        ys = sorted({float(v) for pair in pairs for v in pair} | {float(v) for v in base})
        report.level_identity_residual = max(max(abs(at_level(y, Q1)), abs(at_level(y, Q2))) for y in ys)
        report.difference_identity_residual = max(abs(at_difference(y)) for y in ys)
    return report


__all__ = ["LinearFirstOrder", "LinearTrajectory", "linear_solution_parts",
           "linear_solution_expr", "solve_linear_first_order", "TransformedODE",
           "make_transformed_ode", "verify_normal_form_solves", "NormalFormResidualReport",
           "SecondOrderEq", "PruferTrajectory", "prufer_forward", "prufer_residual",
           "restricted_integrability_witness", "WitnessReport", "angle_first_integral",
           "nonconstancy_obstruction", "ObstructionReport", "obstruction_identities"]
