"""Safe compilation of user expression strings in one variable.

Expressions are checked against a whitelist of syntax nodes and names before
sympy ever sees them, then differentiated symbolically and lambdified to
numpy.
"""
from __future__ import annotations

import ast
from functools import lru_cache

import numpy as np
import sympy

from .errors import EvalError

_FUNCS = {
    "sin": sympy.sin, "cos": sympy.cos, "tan": sympy.tan,
    "exp": sympy.exp, "log": sympy.log, "sqrt": sympy.sqrt,
    "sinh": sympy.sinh, "cosh": sympy.cosh, "tanh": sympy.tanh,
    "asinh": sympy.asinh, "atan": sympy.atan, "abs": sympy.Abs,
    "sign": sympy.sign,
}
_CONSTS = {"pi": sympy.pi, "e": sympy.E}
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def _check(source: str, variables: tuple[str, ...]) -> None:
    try:
        tree = ast.parse(source.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise EvalError(f"cannot parse expression {source!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise EvalError(f"unsupported syntax {type(node).__name__} in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise EvalError(f"unknown function in {source!r}")
            if node.keywords:
                raise EvalError(f"keyword arguments are not allowed in {source!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                and node.id not in variables:
            raise EvalError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise EvalError(f"only numeric constants are allowed in {source!r}")


def parse(source: str, variables: tuple[str, ...] = ("t",)) -> sympy.Expr:
    _check(source, variables)
    local = dict(_FUNCS)
    local.update(_CONSTS)
    for v in variables:
        local[v] = sympy.Symbol(v, real=True)
    try:
        return sympy.sympify(source.replace("^", "**"), locals=local)
    except (sympy.SympifyError, TypeError) as exc:
        raise EvalError(f"cannot interpret expression {source!r}: {exc}") from None


@lru_cache(maxsize=256)
def compile_component(source: str, derivative: str | None = None):
    """Return ``(f, df)`` numpy callables of ``t`` for one coordinate.

    ``derivative`` overrides the symbolic derivative when given.
    """
    t = sympy.Symbol("t", real=True)
    expr = parse(source)
    dexpr = parse(derivative) if derivative else sympy.diff(expr, t)
    f = sympy.lambdify(t, expr, modules="numpy")
    df = sympy.lambdify(t, dexpr, modules="numpy")

    def wrap(fun, text):
        def call(tt):
            tt = np.asarray(tt, dtype=float)
            with np.errstate(all="ignore"):
                out = np.asarray(fun(tt), dtype=float)
            return np.broadcast_to(out, tt.shape).astype(float)
        call.source = text
        return call

    return wrap(f, source), wrap(df, derivative or str(dexpr))
