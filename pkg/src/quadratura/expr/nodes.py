"""Immutable expression trees, conservative smart constructors and the DSL printer.

Raw node constructors (``Add(a, b)`` ...) build exactly the requested
structure; the lower-case builders (``add``, ``mul`` ...) fold constants and
drop neutral elements (``+0``, ``*1``, ``*0``, ``exp(0)``, ``x^1``, integrals
of a zero body or over an empty range) and nothing else.
"""

import math
import re
from fractions import Fraction

from ..errors import ExprError

IDENT_RE = re.compile(r"[a-z][a-z0-9]*\Z")
FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
RESERVED = frozenset(FUNCTIONS) | {"quad"}

_MATH = {"exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos,
         "sqrt": math.sqrt}


class Expr:
    __slots__ = ("_hash", "_free", "_bound")
    _fields = ()
    # printer precedence: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom
    level = 5

    def _set(self, **kw):
        for k, v in kw.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_free", None)
        object.__setattr__(self, "_bound", None)

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return tuple(getattr(self, f) for f in self._fields)

    def __eq__(self, other):
        if self is other:
            return True
        return type(self) is type(other) and self._key() == other._key()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __reduce__(self):
        return (type(self), self._key())

    @property
    def children(self):
        return ()

    def free_vars(self):
        fv = self._free
        if fv is None:
            fv = self._compute_free()
            object.__setattr__(self, "_free", fv)
        return fv

    def _compute_free(self):
        out = frozenset()
        for ch in self.children:
            out |= ch.free_vars()
        return out

    def bound_vars(self):
        """All symbols bound by integral nodes anywhere in the tree."""
        bv = self._bound
        if bv is None:
            bv = frozenset()
            for ch in self.children:
                bv |= ch.bound_vars()
            if isinstance(self, Integral):
                bv |= {self.var}
            object.__setattr__(self, "_bound", bv)
        return bv

    def symbols(self):
        return self.free_vars() | self.bound_vars()

    def __str__(self):
        return to_dsl(self)

    def __repr__(self):
        return f"Expr({to_dsl(self)!r})"

    # arithmetic sugar routes through the simplifying builders
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return pow_(self, exponent)


class Const(Expr):
    __slots__ = ("value",)
    _fields = ("value",)

    def __init__(self, value):
        value = float(value)
        if not math.isfinite(value):
            raise ExprError(f"non-finite constant {value!r}")
        self._set(value=value)

    @property
    def level(self):
        return 3 if self.value < 0 else 5


class Var(Expr):
    __slots__ = ("name",)
    _fields = ("name",)

    def __init__(self, name):
        if not IDENT_RE.match(name) or name in RESERVED:
            raise ExprError(f"invalid variable name {name!r}")
        self._set(name=name)

    def _compute_free(self):
        return frozenset((self.name,))


class _Binary(Expr):
    __slots__ = ("left", "right")
    _fields = ("left", "right")

    def __init__(self, left, right):
        self._set(left=left, right=right)

    @property
    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()
    level = 1
    op = "+"


class Sub(_Binary):
    __slots__ = ()
    level = 1
    op = "-"


class Mul(_Binary):
    __slots__ = ()
    level = 2
    op = "*"


class Div(_Binary):
    __slots__ = ()
    level = 2
    op = "/"


class Neg(Expr):
    __slots__ = ("operand",)
    _fields = ("operand",)
    level = 3

    def __init__(self, operand):
        self._set(operand=operand)

    @property
    def children(self):
        return (self.operand,)


class Pow(Expr):
    """``base ^ exponent`` with a rational exponent."""

    __slots__ = ("base", "exponent")
    _fields = ("base", "exponent")
    level = 4

    def __init__(self, base, exponent):
        self._set(base=base, exponent=Fraction(exponent))

    @property
    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("name", "arg")
    _fields = ("name", "arg")

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}")
        self._set(name=name, arg=arg)

    @property
    def children(self):
        return (self.arg,)


class Integral(Expr):
    """Definite integral of ``body`` over ``var`` from ``lower`` to ``upper``."""

    __slots__ = ("var", "lower", "upper", "body")
    _fields = ("var", "lower", "upper", "body")

    def __init__(self, var, lower, upper, body):
        if not IDENT_RE.match(var) or var in RESERVED:
            raise ExprError(f"invalid bound symbol {var!r}")
        if var in body.bound_vars():
            raise ExprError(f"bound symbol {var!r} is rebound inside its own integral")
        self._set(var=var, lower=lower, upper=upper, body=body)

    @property
    def children(self):
        return (self.lower, self.upper, self.body)

    def _compute_free(self):
        return (self.lower.free_vars() | self.upper.free_vars()
                | (self.body.free_vars() - {self.var}))


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(obj):
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float, Fraction)):
        return Const(float(obj))
    if isinstance(obj, str):
        from .parser import parse_expr
        return parse_expr(obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to Expr")


def is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(fn, *args):
    try:
        v = fn(*args)
    except (ArithmeticError, ValueError):
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return Const(v)


def add(a, b):
    if is_const(a, 0.0):
        return b
    if is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(lambda p, q: p + q, a.value, b.value) or Add(a, b)
    return Add(a, b)


def sub(a, b):
    if is_const(b, 0.0):
        return a
    if is_const(a, 0.0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(lambda p, q: p - q, a.value, b.value) or Sub(a, b)
    return Sub(a, b)


def mul(a, b):
    if is_const(a, 0.0) or is_const(b, 0.0):
        return ZERO
    if is_const(a, 1.0):
        return b
    if is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(lambda p, q: p * q, a.value, b.value) or Mul(a, b)
    return Mul(a, b)


def div(a, b):
    if is_const(b, 1.0):
        return a
    if is_const(b, -1.0):
        return neg(a)
    if is_const(a, 0.0) and not is_const(b, 0.0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(lambda p, q: p / q, a.value, b.value) or Div(a, b)
    return Div(a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    return Neg(a)


def rational_power(base, exponent):
    """Real-valued ``base ** exponent`` for rational exponents (odd roots of negatives allowed)."""
    exponent = Fraction(exponent)
    if exponent.denominator == 1:
        return base ** int(exponent)
    if base < 0:
        if exponent.denominator % 2 == 0:
            raise ValueError("even root of a negative number")
        mag = (-base) ** float(exponent)
        return -mag if exponent.numerator % 2 else mag
    return base ** float(exponent)


def pow_(base, exponent):
    exponent = Fraction(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return _fold(rational_power, base.value, exponent) or Pow(base, exponent)
    return Pow(base, exponent)


def func(name, arg):
    if isinstance(arg, Const):
        folded = _fold(_MATH[name], arg.value)
        if folded is not None:
            return folded
    return Func(name, arg)


def exp(a):
    return func("exp", as_expr(a))


def log(a):
    return func("log", as_expr(a))


def sin(a):
    return func("sin", as_expr(a))


def cos(a):
    return func("cos", as_expr(a))


def sqrt(a):
    return func("sqrt", as_expr(a))


def integral(var, lower, upper, body):
    lower, upper, body = as_expr(lower), as_expr(upper), as_expr(body)
    if is_const(body, 0.0) or lower == upper:
        return ZERO
    return Integral(var, lower, upper, body)


def rebuild(e, children):
    """Rebuild node ``e`` from new children through the simplifying builders."""
    if isinstance(e, Add):
        return add(*children)
    if isinstance(e, Sub):
        return sub(*children)
    if isinstance(e, Mul):
        return mul(*children)
    if isinstance(e, Div):
        return div(*children)
    if isinstance(e, Neg):
        return neg(children[0])
    if isinstance(e, Pow):
        return pow_(children[0], e.exponent)
    if isinstance(e, Func):
        return func(e.name, children[0])
    if isinstance(e, Integral):
        return integral(e.var, *children)
    return e


# -- printer ---------------------------------------------------------------

def _number(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _exponent(r):
    if r.denominator == 1 and r >= 0:
        return str(r.numerator)
    if r.denominator == 1:
        return f"({r.numerator})"
    return f"({r.numerator}/{r.denominator})"


def _wrap(e, min_level):
    s = to_dsl(e)
    return f"({s})" if e.level < min_level else s


def to_dsl(e):
    """Print ``e`` in the DSL; ``parse_expr(to_dsl(e)) == e`` for every tree."""
    if isinstance(e, Const):
        return "-" + _number(-e.value) if e.value < 0 else _number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, _Binary):
        lmin = e.level
        rmin = e.level + 1
        return f"{_wrap(e.left, lmin)} {e.op} {_wrap(e.right, rmin)}" if e.level == 1 \
            else f"{_wrap(e.left, lmin)}{e.op}{_wrap(e.right, rmin)}"
    if isinstance(e, Neg):
        op = e.operand
        # a bare literal after unary minus would be read back as a negative constant
        if isinstance(op, (Const, Neg)):
            return f"-({to_dsl(op)})"
        return "-" + _wrap(op, 3)
    if isinstance(e, Pow):
        return f"{_wrap(e.base, 5)}^{_exponent(e.exponent)}"
    if isinstance(e, Func):
        return f"{e.name}({to_dsl(e.arg)})"
    if isinstance(e, Integral):
        return f"quad({e.var}, {to_dsl(e.lower)}, {to_dsl(e.upper)}, {to_dsl(e.body)})"
    raise TypeError(type(e).__name__)
