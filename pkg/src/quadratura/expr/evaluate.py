"""Numeric evaluation of expression trees.

Trees are compiled to straight-line Python functions: one statement per
distinct subexpression, integral bodies as nested closures, and every
subexpression hoisted to the outermost scope whose variables it uses.
Integral nodes are evaluated with adaptive Gauss-Kronrod quadrature and
memoized per top-level call on (node, bounds, free-variable values).
"""

import functools
import itertools
import math

from scipy.integrate import quad

from ..config import DEFAULT_TOL
from ..errors import (DivisionByZeroError, DomainError, EvalError,
                      QuadratureError, UnboundVariableError)
from .nodes import (Add, Const, Div, Func, Integral, Mul, Neg, Pow, Sub, Var,
                    as_expr, rational_power)

_QUAD_LIMIT = 200


def _quad(cache, idx, f, lo, hi, fv, tol):
    key = (idx, lo, hi, fv)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if lo == hi:
        val = 0.0
    else:
        res = quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=_QUAD_LIMIT, full_output=1)
        val, err = res[0], res[1]
        if len(res) > 3 and not err <= 100.0 * tol * max(1.0, abs(val)):
            raise QuadratureError(f"quadrature on [{lo}, {hi}] did not converge "
                                  f"(error estimate {err:.2e}): {res[3]}")
    cache[key] = val
    return val


class _Scope:
    def __init__(self, var, parent):
        self.var = var
        self.parent = parent
        self.lines = []
        self.memo = {}

    def chain(self):
        s = self
        while s is not None:
            yield s
            s = s.parent


class _CodeGen:
    def __init__(self):
        self.counter = itertools.count()
        self.integrals = {}

    def temp(self):
        return f"_t{next(self.counter)}"

    def target(self, node, scope):
        fv = node.free_vars()
        for s in scope.chain():
            if s.var is not None and s.var in fv:
                return s
        top = scope
        while top.parent is not None:
            top = top.parent
        return top

    def gen(self, node, scope):
        if isinstance(node, Const):
            return repr(node.value) if node.value >= 0 else f"({node.value!r})"
        if isinstance(node, Var):
            return "v_" + node.name
        home = self.target(node, scope)
        hit = home.memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Integral):
            code = self._integral(node, scope, home)
        else:
            args = [self.gen(ch, scope) for ch in node.children]
            code = self._op(node, args)
        name = self.temp()
        home.lines.append(f"{name} = {code}")
        home.memo[node] = name
        return name

    def _op(self, node, args):
        if isinstance(node, Add):
            return f"{args[0]} + {args[1]}"
        if isinstance(node, Sub):
            return f"{args[0]} - {args[1]}"
        if isinstance(node, Mul):
            return f"{args[0]} * {args[1]}"
        if isinstance(node, Div):
            return f"{args[0]} / {args[1]}"
        if isinstance(node, Neg):
            return f"-{args[0]}"
        if isinstance(node, Pow):
            r = node.exponent
            if r.denominator == 1:
                return f"float({args[0]}) ** {int(r)}"
            return f"_rpow({args[0]}, _F({r.numerator}, {r.denominator}))"
        if isinstance(node, Func):
            return f"_{node.name}({args[0]})"
        raise TypeError(type(node).__name__)

    def _integral(self, node, scope, home):
        idx = self.integrals.setdefault(node, len(self.integrals))
        lo = self.gen(node.lower, scope)
        hi = self.gen(node.upper, scope)
        body_scope = _Scope(node.var, home)
        result = self.gen(node.body, body_scope)
        fname = f"_body{next(self.counter)}"
        home.lines.append((fname, node.var, body_scope, result))
        fv = sorted(node.free_vars())
        fv_tuple = "(" + "".join(f"v_{n}, " for n in fv) + ")"
        return f"_quad(_cache, {idx}, {fname}, {lo}, {hi}, {fv_tuple}, _TOL)"


def _emit(scope, indent, out):
    pad = " " * indent
    for line in scope.lines:
        if isinstance(line, tuple):
            fname, var, body_scope, result = line
            out.append(f"{pad}def {fname}(v_{var}):")
            _emit(body_scope, indent + 4, out)
            out.append(f"{pad}    return {result}")
        else:
            out.append(pad + line)


class CompiledExpr:
    """Callable evaluating an expression at positional arguments ``argnames``."""

    def __init__(self, expr, argnames, raw, source):
        self.expr = expr
        self.argnames = argnames
        self._raw = raw
        self.source = source

    def __call__(self, *args):
        try:
            return self._raw(*args)
        except ZeroDivisionError:
            raise DivisionByZeroError(f"division by zero in {self.expr}") from None
        except ValueError as exc:
            raise DomainError(f"domain error in {self.expr}: {exc}") from None
        except OverflowError:
            raise EvalError(f"overflow while evaluating {self.expr}") from None


@functools.lru_cache(maxsize=8192)
def _compile(expr, argnames, quad_tol):
    missing = expr.free_vars() - set(argnames)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    gen = _CodeGen()
    top = _Scope(None, None)
    result = gen.gen(expr, top)
    params = ", ".join("v_" + a for a in argnames)
    lines = [f"def _compiled({params}):", "    _cache = {}"]
    _emit(top, 4, lines)
    lines.append(f"    return {result}")
    source = "\n".join(lines)
    namespace = {
        "_quad": _quad, "_rpow": rational_power, "_F": _fraction, "_TOL": quad_tol,
        "_exp": math.exp, "_log": _log, "_sin": math.sin, "_cos": math.cos,
        "_sqrt": math.sqrt,
    }
    exec(compile(source, "<quadratura-expr>", "exec"), namespace)
    return CompiledExpr(expr, argnames, namespace["_compiled"], source)


def _log(a):
    return math.log(a)


@functools.lru_cache(maxsize=256)
def _fraction(num, den):
    from fractions import Fraction
    return Fraction(num, den)


def compile_expr(expr, argnames=None, tol=DEFAULT_TOL):
    """Compile ``expr`` into a fast callable with positional ``argnames``."""
    expr = as_expr(expr)
    if argnames is None:
        argnames = tuple(sorted(expr.free_vars()))
    return _compile(expr, tuple(argnames), float(tol.ode_tol))


def eval_expr(expr, env, tol=DEFAULT_TOL):
    """Evaluate ``expr`` with free variables bound by ``env`` (extra keys ignored)."""
    expr = as_expr(expr)
    names = tuple(sorted(expr.free_vars()))
    for n in names:
        if n not in env:
            raise UnboundVariableError(n)
    fn = _compile(expr, names, float(tol.ode_tol))
    return float(fn(*(float(env[n]) for n in names)))


__all__ = ["compile_expr", "eval_expr", "CompiledExpr"]
