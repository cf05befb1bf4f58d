"""Expression DSL: parse, print, evaluate, differentiate and substitute."""

from .calculus import (count_nodes, diff_expr, fresh_symbol, rename, simplify,
                       substitute, symbols_of)
from .evaluate import CompiledExpr, compile_expr, eval_expr
from .nodes import (FUNCTIONS, ONE, RESERVED, ZERO, Add, Const, Div, Expr,
                    Func, Integral, Mul, Neg, Pow, Sub, Var, add, as_expr, cos,
                    div, exp, func, integral, is_const, log, mul, neg, pow_,
                    sin, sqrt, sub, to_dsl)
from .parser import parse_expr, tokenize

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Neg", "Pow", "Func",
    "Integral", "ZERO", "ONE", "FUNCTIONS", "RESERVED", "add", "sub", "mul",
    "div", "neg", "pow_", "func", "exp", "log", "sin", "cos", "sqrt",
    "integral", "as_expr", "is_const", "to_dsl", "parse_expr", "tokenize",
    "eval_expr", "compile_expr", "CompiledExpr", "diff_expr", "substitute",
    "rename", "simplify", "fresh_symbol", "symbols_of", "count_nodes",
]
