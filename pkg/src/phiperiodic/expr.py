"""Small arithmetic expression language for user-supplied f, F and h.

Expressions are parsed with :mod:`ast` (after mapping ``^`` to ``**``) and
compiled into closures over numpy arrays. Only a whitelist of nodes is
accepted::

    numbers, the variables s, t, T, pi (plus any named constants passed in),
    unary +/-, binary + - * / ^, parentheses, and the functions
    sin, cos, exp, sqrt, abs
"""

from __future__ import annotations

import ast
import operator
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}

VARIABLES = ("s", "t")


class Expression:
    """A compiled expression in the variables ``s`` and ``t``.

    Parameters
    ----------
    text : str
        Source text, e.g. ``"2*s/(1+s^2)^2"``.
    constants : mapping, optional
        Extra named constants (``T`` and ``pi`` are always available once
        supplied here; ``pi`` defaults to numpy's value).
    """

    def __init__(self, text: str, constants: Mapping[str, float] | None = None):
        self.text = text
        consts = {"pi": float(np.pi)}
        consts.update(constants or {})
        self.constants = consts
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self._fn = self._compile(tree.body)

    def _compile(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            value = np.float64(node.value)  # numpy scalars: 1/0 gives inf, not an exception
            return lambda s, t: value
        if isinstance(node, ast.Name):
            name = node.id
            if name == "s":
                return lambda s, t: s
            if name == "t":
                return lambda s, t: t
            if name in self.constants:
                value = np.float64(self.constants[name])
                return lambda s, t: value
            raise ConfigError(f"unknown name {name!r} in expression {self.text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = self._compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda s, t: -inner(s, t)
            return inner
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left = self._compile(node.left)
            right = self._compile(node.right)
            return lambda s, t: op(left(s, t), right(s, t))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in FUNCTIONS
            and len(node.args) == 1
            and not node.keywords
        ):
            fn = FUNCTIONS[node.func.id]
            arg = self._compile(node.args[0])
            return lambda s, t: fn(arg(s, t))
        raise ConfigError(
            f"unsupported construct {ast.dump(node)[:40]}... in expression {self.text!r}"
        )

    def __call__(self, t, s=0.0):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            out = self._fn(s, t)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(t, s).shape)

    def __repr__(self):
        return f"Expression({self.text!r})"


def constant_value(text: str, constants: Mapping[str, float] | None = None) -> float:
    """Evaluate a constant expression such as ``"8*pi"``."""
    expr = Expression(text, constants)
    value = float(expr(0.0, 0.0))
    if not np.isfinite(value):
        raise ConfigError(f"expression {text!r} is not finite")
    return value
