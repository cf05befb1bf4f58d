"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``; the lines are echoed in the summary.
"""

import math
import random

import numpy as np
import pytest
from scipy.differentiate import derivative

from quadratura.config import ToleranceConfig
from quadratura.expr import compile_expr, diff_expr, parse_expr, to_dsl
from quadratura.families import (ExprFamily, QuadratureIntegral, check_equivalence,
                                 fundamental_equality_residual)
from quadratura.odelab import (LinearFirstOrder, SecondOrderEq, nonconstancy_obstruction,
                               prufer_forward, prufer_residual, restricted_integrability_witness,
                               solve_linear_first_order)
from quadratura.reduction import (RULE_A_CASE1, RULE_A_CASE2, RULE_TERMINAL_2,
                                  normal_form_faithfulness, reduce_to_normal_form,
                                  remark_theta_hat, solve_linear_pde)
from quadratura.systems import QuadratureSystem, invariance_probe

from exprgen import random_expr

TOL = ToleranceConfig()
GRID = np.linspace(0.0, 2.0, 33)
SEED = 20240917

EXAMPLE_SYS = QuadratureSystem(["1", "x*exp(u1)"], 0.0, (0.0, 2.0))
EXAMPLE = QuadratureIntegral(EXAMPLE_SYS, "exp(-v1)*v2")
INFLATED = QuadratureIntegral(QuadratureSystem(["1", "cos(x)", "x*exp(u1)"], 0.0, (0.0, 2.0)),
                              "exp(-v1)*v3")


def record(log, number, ok, detail):
    log.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(log[-1])
    assert ok, detail


@pytest.fixture(scope="module")
def inflated_result():
    return reduce_to_normal_form(INFLATED, seed=SEED)


def smooth_coefficient(rng):
    a, b, c = (round(rng.uniform(-2, 2), 3) for _ in range(3))
    shape = rng.choice(["sin({b}*x)", "cos({b}*x)", "exp({b}*x/4)", "x^2/(1 + {b}^2)",
                        "1/(2 + sin({b}*x))"])
    return f"{a!r} + {c!r}*" + shape.format(b=repr(b))


def test_criterion_1_linear_solver(acceptance_log):
    eq = LinearFirstOrder("1", "x", 0.0, (0.0, 2.0))
    tr = solve_linear_first_order(eq, 0.0, GRID)
    err = float(np.abs(tr.y - (GRID - 1 + np.exp(-GRID))).max())
    rng = random.Random(SEED)
    worst = 0.0
    for _ in range(20):
        eq = LinearFirstOrder(smooth_coefficient(rng), smooth_coefficient(rng), 0.0, (0.0, 2.0))
        worst = max(worst, solve_linear_first_order(eq, rng.uniform(-2, 2), GRID).residual)
    record(acceptance_log, 1, err < 1e-7 and worst < 1e-6,
           f"closed-form error {err:.2e} (< 1e-7), max residual over 20 random {worst:.2e} (< 1e-6)")


def test_criterion_2_fundamental_equality(acceptance_log):
    res = fundamental_equality_residual(EXAMPLE, 1, 2, samples=100, seed=SEED)
    control = ExprFamily("c1*x + c2", interval=(0.0, 2.0))
    ctl = fundamental_equality_residual(control, 1, 2, samples=[(1.0, np.zeros(2))])
    record(acceptance_log, 2, res < 1e-6 and ctl > 0.1,
           f"example residual {res:.2e} (< 1e-6), control residual {ctl:.2e} (> 0.1)")


def test_criterion_3_invariance_probe(acceptance_log):
    rng = random.Random(SEED)
    threshold = 10 * TOL.constancy_tol
    weakest = math.inf
    for _ in range(20):
        a, b, c, d, e, f = (round(rng.uniform(-2, 2), 3) for _ in range(6))
        if max(abs(a), abs(b), abs(c), abs(d), abs(e)) < 0.1:
            a = 1.0
        g = f"{a!r}*c1^2 + {b!r}*c1*c2 + {c!r}*c2^2 + {d!r}*c1 + {e!r}*c2 + {f!r}"
        weakest = min(weakest, invariance_probe(g, EXAMPLE_SYS, samples=10, seed=SEED).probe_deviation)
    const = invariance_probe("2.5", EXAMPLE_SYS, samples=10, seed=SEED).probe_deviation
    record(acceptance_log, 3, weakest > threshold and const < TOL.constancy_tol,
           f"smallest non-constant deviation {weakest:.2e} (> {threshold:.0e}), "
           f"constant deviation {const:.2e} (< {TOL.constancy_tol:.0e})")


def test_criterion_4_reduction(inflated_result, acceptance_log):
    r = inflated_result
    rules_ok = r.trace.rules == [RULE_A_CASE1, RULE_A_CASE2, RULE_TERMINAL_2]
    gap = check_equivalence(INFLATED, r.nf.family(), x_grid=GRID, c_samples=10, seed=SEED).max_gap
    steps = max(s.equivalence_gap for s in r.trace.steps)
    record(acceptance_log, 4, rules_ok and gap < 1e-6 and steps < 1e-6,
           f"trace {r.trace.rules}, end-to-end gap {gap:.2e} (< 1e-6), "
           f"worst step gap {steps:.2e} (< 1e-6)")


def test_criterion_5_faithfulness(inflated_result, acceptance_log):
    gap = normal_form_faithfulness(inflated_result, grid=GRID, seed=SEED)
    same = inflated_result.nf.theta_hat == remark_theta_hat(INFLATED)
    record(acceptance_log, 5, gap < 5e-7 and same,
           f"normal form vs reduced gap {gap:.2e} (< 5e-7), outer function structurally "
           f"equal: {same} ({to_dsl(inflated_result.nf.theta_hat)})")


A_POOL = ["0", "1", "x1", "-0.5", "cos(x1)", "x1*x2", "x2^2/4", "sin(x2)"]
B_POOL = ["0", "1", "x1^2", "exp(-x1)", "x2 - x1", "cos(x1 + x2)"]
G_POOL = ["x3", "x3^3 + x3", "exp(x3/3) + x1", "x3 + x1*x2", "sin(x1) + 2*x3", "x3/(2 + cos(x2))"]


def test_criterion_6_pde_round_trip(acceptance_log):
    rng = random.Random(SEED)
    names = ("x1", "x2", "x3")
    worst_pde = worst_rec = 0.0
    for _ in range(50):
        a, b, G = rng.choice(A_POOL), rng.choice(B_POOL), rng.choice(G_POOL)
        scale = round(rng.uniform(0.5, 1.5), 3)
        a = f"{scale!r}*({a})"
        H = solve_linear_pde(G, a, b, names, check=False).composed()
        sol = solve_linear_pde(H, a, b, names, seed=rng.randrange(2**31))
        worst_pde = max(worst_pde, sol.pde_residual)
        worst_rec = max(worst_rec, sol.reconstruction_residual)
    record(acceptance_log, 6, worst_pde < 1e-7 and worst_rec < 1e-7,
           f"worst PDE residual {worst_pde:.2e} (< 1e-7), "
           f"worst reconstruction {worst_rec:.2e} (< 1e-7) over 50 instances")


def test_criterion_7_prufer(acceptance_log):
    one = prufer_forward(SecondOrderEq("1", 0.0, (0.0, 2.0)), 0.3, 1.1, GRID)
    angle = float(np.abs(one.theta - (one.theta0 + GRID)).max())
    amp = float(np.abs(one.logrho - one.logrho[0]).max())
    zero = prufer_forward(SecondOrderEq("0", 0.0, (0.0, 2.0)), 0.0, 1.0, GRID)
    lin = float(np.abs(zero.u - GRID).max())
    airy = prufer_residual(SecondOrderEq("x", 0.0, (0.0, 2.0)), 0.0, 1.0, GRID)
    ok = angle < 1e-8 and amp < 1e-8 and lin < 1e-7 and airy < 1e-5
    record(acceptance_log, 7, ok,
           f"constant-one angle {angle:.2e} amplitude {amp:.2e} (< 1e-8), "
           f"zero potential {lin:.2e} (< 1e-7), linear potential residual {airy:.2e} (< 1e-5)")


def test_criterion_8_dichotomy(acceptance_log):
    devs = {}
    for Q in (1.0, 4.0):
        tr = prufer_forward(SecondOrderEq(repr(Q), 0.0, (0.0, 2.0)), 0.0, 1.0, GRID)
        devs[Q] = restricted_integrability_witness(Q, tr).deviation
    eq = SecondOrderEq("x", 0.0, (0.0, 2.0))
    obs = nonconstancy_obstruction(eq, 0.0, 1.0, y_samples=[(math.pi / 4, math.pi / 3)])
    det = abs(obs.determinants[0])
    ident = nonconstancy_obstruction(eq, 0.0, 1.0, phi="y").level_identity_residual
    ok = max(devs.values()) < 1e-6 and abs(det - 1) <= 1e-12 and ident > 0.5
    record(acceptance_log, 8, ok,
           f"first-integral deviation Q=1 {devs[1.0]:.2e}, Q=4 {devs[4.0]:.2e} (< 1e-6), "
           f"|det| - 1 = {det - 1:.1e} (<= 1e-12), identity-transform residual {ident:.2e} (> 0.5)")


def test_criterion_9_symbolic_engine(acceptance_log):
    rng = random.Random(SEED)
    worst = 0.0
    exact_round_trip = True
    for _ in range(200):
        e = random_expr(rng, depth=6, integrals=1)
        text = to_dsl(e)
        exact_round_trip &= parse_expr(text) == e and to_dsl(parse_expr(text)) == text
        f = compile_expr(e, ("x", "y"))
        d = compile_expr(diff_expr(e, "x"), ("x", "y"))
        x, y = rng.uniform(-1, 1), rng.uniform(-1, 1)
        # adaptive central differences; a fixed step is too coarse for steep trees
        fd = derivative(np.vectorize(lambda t: f(t, y)), x, initial_step=1e-2,
                        tolerances={"atol": 1e-12, "rtol": 1e-12}).df
        exact = d(x, y)
        worst = max(worst, abs(exact - float(fd)) / max(1.0, abs(exact)))
    record(acceptance_log, 9, worst < 1e-5 and exact_round_trip,
           f"worst derivative error {worst:.2e} (< 1e-5 relative), "
           f"round trip exact: {exact_round_trip}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
