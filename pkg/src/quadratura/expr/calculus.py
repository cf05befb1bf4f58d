"""Substitution and symbolic differentiation (Leibniz rule on integral nodes)."""

from ..errors import BoundSymbolError, CaptureError
from .nodes import (ONE, ZERO, Add, Const, Div, Func, Integral, Mul, Neg, Pow,
                    Sub, Var, add, as_expr, cos, div, integral, mul, neg, pow_,
                    rebuild, sin, sqrt, sub)


def simplify(e):
    """Bottom-up pass through the conservative builders."""
    memo = {}

    def walk(node):
        hit = memo.get(node)
        if hit is not None:
            return hit
        kids = node.children
        out = rebuild(node, [walk(k) for k in kids]) if kids else node
        memo[node] = out
        return out

    return walk(e)


def substitute(e, bindings):
    """Simultaneous, capture-checked substitution of free variables.

    ``bindings`` maps variable names to expressions (numbers and DSL strings
    are accepted).  Only paths that actually change are rebuilt, through the
    simplifying builders.
    """
    bindings = {k: as_expr(v) for k, v in bindings.items()}
    return _subst(e, bindings, {})


def _subst(e, bindings, memo):
    relevant = {k: v for k, v in bindings.items() if k in e.free_vars()}
    if not relevant:
        return e
    key = (e, tuple(sorted(relevant)))
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(e, Var):
        out = relevant[e.name]
    elif isinstance(e, Integral):
        lo = _subst(e.lower, relevant, memo)
        hi = _subst(e.upper, relevant, memo)
        inner = {k: v for k, v in relevant.items() if k != e.var}
        for name, repl in inner.items():
            if name in e.body.free_vars() and e.var in repl.free_vars():
                raise CaptureError(
                    f"substituting {name} -> {repl} would capture bound symbol {e.var!r}")
        body = _subst(e.body, inner, memo) if inner else e.body
        out = e if (lo is e.lower and hi is e.upper and body is e.body) \
            else integral(e.var, lo, hi, body)
    else:
        kids = [_subst(k, relevant, memo) for k in e.children]
        if all(a is b for a, b in zip(kids, e.children)):
            out = e
        else:
            out = rebuild(e, kids)
    memo[key] = out
    return out


def rename(e, mapping):
    """Rename free variables (``{"v3": "v2"}``), simultaneously."""
    return substitute(e, {old: Var(new) for old, new in mapping.items()})


def diff_expr(e, v):
    """Symbolic partial derivative of ``e`` with respect to the free variable ``v``."""
    e = as_expr(e)
    if v in e.bound_vars():
        raise BoundSymbolError(f"cannot differentiate with respect to bound symbol {v!r}")
    return _diff(e, v, {})


def _diff(e, v, memo):
    if v not in e.free_vars():
        return ZERO
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Var):
        out = ONE
    elif isinstance(e, Add):
        out = add(_diff(e.left, v, memo), _diff(e.right, v, memo))
    elif isinstance(e, Sub):
        out = sub(_diff(e.left, v, memo), _diff(e.right, v, memo))
    elif isinstance(e, Neg):
        out = neg(_diff(e.operand, v, memo))
    elif isinstance(e, Mul):
        a, b = e.left, e.right
        out = add(mul(_diff(a, v, memo), b), mul(a, _diff(b, v, memo)))
    elif isinstance(e, Div):
        a, b = e.left, e.right
        da, db = _diff(a, v, memo), _diff(b, v, memo)
        out = sub(div(da, b), div(mul(a, db), pow_(b, 2)))
    elif isinstance(e, Pow):
        r = e.exponent
        out = mul(mul(Const(float(r)), pow_(e.base, r - 1)), _diff(e.base, v, memo))
    elif isinstance(e, Func):
        u = e.arg
        du = _diff(u, v, memo)
        if e.name == "exp":
            out = mul(e, du)
        elif e.name == "log":
            out = div(du, u)
        elif e.name == "sin":
            out = mul(cos(u), du)
        elif e.name == "cos":
            out = mul(neg(sin(u)), du)
        else:  # sqrt
            out = div(du, mul(Const(2.0), sqrt(u)))
    elif isinstance(e, Integral):
        t = e.var
        upper_term = mul(substitute(e.body, {t: e.upper}), _diff(e.upper, v, memo))
        lower_term = mul(substitute(e.body, {t: e.lower}), _diff(e.lower, v, memo))
        inner = integral(t, e.lower, e.upper, _diff(e.body, v, memo))
        out = add(sub(upper_term, lower_term), inner)
    else:
        out = ZERO
    memo[e] = out
    return out


def fresh_symbol(avoid, prefix="t"):
    """First of ``prefix``, ``prefix1``, ``prefix2`` ... not in ``avoid``."""
    avoid = set(avoid)
    if prefix not in avoid:
        return prefix
    k = 1
    while f"{prefix}{k}" in avoid:
        k += 1
    return f"{prefix}{k}"


def symbols_of(*exprs):
    out = set()
    for e in exprs:
        out |= as_expr(e).symbols()
    return out


def count_nodes(e):
    seen = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(node.children)
    return len(seen)


__all__ = ["simplify", "substitute", "rename", "diff_expr", "fresh_symbol",
           "symbols_of", "count_nodes"]
