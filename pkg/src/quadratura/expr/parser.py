"""Recursive-descent parser for the expression DSL.

Precedence, tightest first: ``^`` (right associative), unary ``-``,
``* /``, ``+ -``.  A unary minus written directly in front of a numeric
literal that is not itself raised to a power is read as a negative
constant, which keeps printed trees round-trippable.
"""

import re
from fractions import Fraction

from ..errors import ParseError
from .nodes import (FUNCTIONS, RESERVED, Add, Const, Div, Func, Integral, Mul,
                    Neg, Pow, Sub, Var)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[a-z][a-z0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)

_ARITY = {name: 1 for name in FUNCTIONS}
_ARITY["quad"] = 4


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] not in ("op",):
            shown = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {shown!r}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            nxt, after = self.peek(1), self.peek(2)
            if nxt[0] == "num" and after[1] != "^":
                self.advance()
                self.advance()
                return Const(-float(nxt[1]))
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            exp_tok = self.peek()
            exponent = self.unary()
            return Pow(base, _rational_value(exponent, self, exp_tok))
        return base

    def atom(self):
        tok = self.peek()
        kind, value, pos = tok
        if kind == "num":
            self.advance()
            return Const(float(value))
        if kind == "ident":
            self.advance()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(value, tok)
            if value in RESERVED:
                raise self.error(f"reserved name {value!r} used as a variable", tok)
            return Var(value)
        if kind == "op" and value == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        shown = value or "end of input"
        raise self.error(f"unexpected token {shown!r}", tok)

    def call(self, name, tok):
        if name not in _ARITY:
            raise self.error(f"unknown function {name!r}", tok)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != _ARITY[name]:
            raise self.error(f"{name} expects {_ARITY[name]} argument(s), got {len(args)}", tok)
        if name == "quad":
            bound = args[0]
            if not isinstance(bound, Var):
                raise self.error("first argument of quad must be a variable name", tok)
            try:
                return Integral(bound.name, args[1], args[2], args[3])
            except Exception as exc:
                raise self.error(str(exc), tok) from None
        return Func(name, args[0])


def _rational_value(e, parser, tok):
    """Exact rational value of a constant exponent expression."""
    if isinstance(e, Const):
        return Fraction(repr(e.value))
    if isinstance(e, Neg):
        return -_rational_value(e.operand, parser, tok)
    if isinstance(e, (Add, Sub, Mul, Div)):
        a = _rational_value(e.left, parser, tok)
        b = _rational_value(e.right, parser, tok)
        if isinstance(e, Add):
            return a + b
        if isinstance(e, Sub):
            return a - b
        if isinstance(e, Mul):
            return a * b
        if b == 0:
            raise parser.error("division by zero in exponent", tok)
        return a / b
    if isinstance(e, Pow) and e.exponent.denominator == 1:
        base = _rational_value(e.base, parser, tok)
        if base == 0 and e.exponent < 0:
            raise parser.error("division by zero in exponent", tok)
        return base ** int(e.exponent)
    raise parser.error("exponent must be a rational constant (use exp/log for general powers)", tok)


def parse_expr(text):
    """Parse a DSL string into an :class:`Expr`."""
    return _Parser(text).parse()
