"""A small arithmetic expression language for user-defined problem coefficients.

Expressions are parsed with :mod:`ast` and evaluated on numpy arrays. Allowed:
numeric literals, ``pi``, ``e``, named constants, the variables handed to
:func:`compile_expression`, ``+ - * / **`` (``^`` is accepted as power), and
the functions ``sin cos tan exp log sqrt abs max min``.
"""

from __future__ import annotations

import ast
import operator

import numpy as np


class ExpressionError(ValueError):
    pass


_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
_VARIADIC = {"max": np.maximum, "min": np.minimum}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_BUILTIN_CONSTANTS = {"pi": np.pi, "e": np.e}


def compile_expression(text: str, variables=(), constants=None):
    """Compile ``text`` into ``fn(**variables) -> array``.

    Unknown names, attribute access, calls to anything outside the function
    table and every other Python construct raise :class:`ExpressionError`.
    """
    consts = dict(_BUILTIN_CONSTANTS)
    consts.update(constants or {})
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    variables = tuple(variables)
    node = _compile(tree.body, variables, consts, text)

    def fn(**env):
        return node(env)

    fn.source = text
    return fn


def _compile(node, variables, consts, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in variables:
            return lambda env: env[name]
        if name in consts:
            value = float(consts[name])
            return lambda env: value
        raise ExpressionError(f"unknown name {name!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, variables, consts, text)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile(node.left, variables, consts, text)
        right = _compile(node.right, variables, consts, text)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        args = [_compile(a, variables, consts, text) for a in node.args]
        if name in _FUNCS:
            if len(args) != 1:
                raise ExpressionError(f"{name} takes one argument in {text!r}")
            fn, arg = _FUNCS[name], args[0]
            return lambda env: fn(arg(env))
        if name in _VARIADIC:
            if len(args) < 2:
                raise ExpressionError(f"{name} takes at least two arguments in {text!r}")
            fn = _VARIADIC[name]

            def reduce(env):
                out = args[0](env)
                for a in args[1:]:
                    out = fn(out, a(env))
                return out

            return reduce
        raise ExpressionError(f"unknown function {name!r} in {text!r}")
    raise ExpressionError(f"unsupported construct {ast.dump(node)[:40]}... in {text!r}")
