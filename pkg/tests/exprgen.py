"""Seeded generator of well-defined random expression trees over x and y."""

import random

from quadratura.expr import (Add, Const, Div, Func, Integral, Mul, Neg, Pow, Sub, Var)

CONSTANTS = (1.0, 2.0, 3.0, 0.5, -1.5, 2.25, -0.75)


def _leaf(rng, names):
    if rng.random() < 0.6:
        return Var(rng.choice(names))
    return Const(rng.choice(CONSTANTS))


def random_expr(rng, depth=6, names=("x", "y"), integrals=1):
    """Random tree of at most ``depth`` levels with at most ``integrals`` integral nodes.

    Logarithms, roots and denominators are guarded so the tree is defined
    everywhere; integral nodes integrate over ``t`` from 0 to a variable.
    """
    budget = [integrals]

    def build(d, names):
        if d <= 1 or rng.random() < 0.2:
            return _leaf(rng, names)
        kind = rng.randrange(10)
        a = build(d - 1, names)
        if kind == 0:
            return Add(a, build(d - 1, names))
        if kind == 1:
            return Sub(a, build(d - 1, names))
        if kind == 2:
            return Mul(a, build(d - 1, names))
        if kind == 3:
            den = Add(Const(2.0), Func("sin", build(d - 2, names)))
            return Div(a, den)
        if kind == 4:
            return Neg(a)
        if kind == 5:
            return Pow(a, rng.choice((2, 3)))
        if kind == 6:
            return Func(rng.choice(("sin", "cos")), a)
        if kind == 7:
            return Func("exp", Func("sin", a))
        if kind == 8:
            guard = Add(Const(1.0), Pow(a, 2))
            return Func(rng.choice(("log", "sqrt")), guard)
        if budget[0] > 0:
            budget[0] -= 1
            upper = Var(rng.choice(names))
            inner = ("t",) + tuple(n for n in names if n != upper.name)
            body = build(min(d - 1, 3), inner)
            return Integral("t", Const(0.0), upper, body)
        return Mul(a, Const(rng.choice(CONSTANTS)))

    return build(depth, tuple(names))


def random_exprs(seed, count, **kw):
    rng = random.Random(seed)
    return [random_expr(rng, **kw) for _ in range(count)]
