"""A small arithmetic expression language for map configs.

Expressions are ordinary Python arithmetic over the variables ``x`` (1D) or
``x, y, z`` / ``x0, x1, ...`` (multi-dimensional) with a fixed whitelist of
functions.  They compile to numpy-vectorised callables.

>>> f = compile_expression("2*x - floor(2*x)")
>>> float(f(0.75))
0.5
"""

from __future__ import annotations

import ast
import math

import numpy as np


class ExpressionError(ValueError):
    pass


def _mod(a, b):
    return np.mod(a, b)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "floor": np.floor,
    "sign": np.sign,
    "mod": _mod,
    "min": np.minimum,
    "max": np.maximum,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

# float-in, float-out versions for scalar loops (orbit iteration)
SCALAR_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "floor": lambda a: float(math.floor(a)),
    "sign": lambda a: (a > 0) - (a < 0) + 0.0,
    "mod": lambda a, b: a % b,
    "min": min,
    "max": max,
}

_ALLOWED = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.Mod,
    ast.USub,
    ast.UAdd,
)


def variable_names(dim: int) -> list[str]:
    if dim == 1:
        return ["x"]
    if dim <= 3:
        return ["x", "y", "z"][:dim]
    return [f"x{i}" for i in range(dim)]


class Expression:
    """Compiled expression; call with one array per coordinate or one (n, d) array."""

    def __init__(self, source: str, dim: int = 1):
        self.source = source
        self.dim = dim
        self.names = variable_names(dim)
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED):
                raise ExpressionError(f"{type(node).__name__} not allowed in {source!r}")
            if isinstance(node, ast.Name):
                ok = node.id in FUNCTIONS or node.id in CONSTANTS or node.id in self.names
                if not ok:
                    raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                    raise ExpressionError(f"unknown function in {source!r}")
                if node.keywords:
                    raise ExpressionError("keyword arguments are not allowed")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ExpressionError(f"non-numeric constant in {source!r}")
        self._code = compile(tree, "<expr>", "eval")

    def __call__(self, *args):
        if len(args) == 1 and self.dim > 1:
            X = np.asarray(args[0], dtype=float)
            args = tuple(X[..., i] for i in range(self.dim))
        if len(args) != self.dim:
            raise ExpressionError(f"expected {self.dim} coordinates, got {len(args)}")
        env = {"__builtins__": {}}
        env.update(FUNCTIONS)
        env.update(CONSTANTS)
        env.update({n: np.asarray(a, dtype=float) for n, a in zip(self.names, args)})
        out = eval(self._code, env)
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else np.asarray(out, dtype=float)

    def scalar(self, *args) -> float:
        """Evaluate on Python floats (much faster than the array path for one point)."""
        env = {"__builtins__": {}}
        env.update(SCALAR_FUNCTIONS)
        env.update(CONSTANTS)
        env.update(zip(self.names, (float(a) for a in args)))
        try:
            return float(eval(self._code, env))
        except (ValueError, OverflowError, ZeroDivisionError):
            return float(self(*args))

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source: str, dim: int = 1) -> Expression:
    return Expression(source, dim)
