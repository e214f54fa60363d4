"""Restricted arithmetic expressions of ``x`` and ``y`` used in config files.

Expressions are parsed with :mod:`ast` and only numeric literals, the names
``x``, ``y``, ``pi`` and a fixed set of numpy functions, arithmetic,
comparisons and the element-wise logical operators ``&``, ``|``, ``~`` are
accepted. Anything else (attribute access, subscripts, lambdas, ...) is
rejected before evaluation.
"""

from __future__ import annotations

import ast
from functools import lru_cache

import numpy as np

FUNCTIONS = {
    "tanh": np.tanh,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "where": np.where,
    "minimum": np.minimum,
    "maximum": np.maximum,
}
CONSTANTS = {"pi": np.pi}
VARIABLES = ("x", "y")

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd, ast.Invert,
    ast.BitAnd, ast.BitOr, ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)


@lru_cache(maxsize=256)
def _compile(source: str):
    tree = ast.parse(source.strip(), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax {type(node).__name__!r} in {source!r}")
        if isinstance(node, ast.Name) and node.id not in (*FUNCTIONS, *CONSTANTS, *VARIABLES):
            raise ValueError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
            raise ValueError(f"only {sorted(FUNCTIONS)} may be called in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"only numeric constants are allowed in {source!r}")
    return compile(tree, "<config expression>", "eval")


def evaluate(source: str | float, x, y=0.0) -> np.ndarray:
    """Evaluate ``source`` element-wise at ``(x, y)``, broadcast to their shape."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    if isinstance(source, (int, float)):
        return np.full(shape, float(source))
    code = _compile(str(source))
    scope = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS, "x": x, "y": y}
    value = eval(code, scope)  # noqa: S307 - the tree was whitelisted above
    return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()


def validate(source: str | float) -> None:
    """Raise ``ValueError`` if ``source`` is not an admissible expression."""
    if not isinstance(source, (int, float)):
        _compile(str(source))
