"""Minimal arithmetic expression language for problem data in config files.

Grammar (a subset of Python expression syntax)::

    expr   := expr ('+' | '-' | '*' | '/' | '**' | '^') expr
            | ('+' | '-') expr | NUMBER | NAME | CALL | '(' expr ')'
    CALL   := FUNC '(' expr {',' expr} ')'

``^`` is accepted as a synonym for ``**``. Names are the variables ``t``,
``x1..xn``, ``y1..yn``, ``r`` (only where the data item depends on it),
``abs2`` (= |z|^2) and the constants ``pi``, ``e`` and ``f1``
(f(1, ..., 1) for the configured operator). Functions: exp, log, sqrt,
pow, abs, sin, cos, min, max. Evaluation is vectorised with numpy; nothing
else from Python is reachable.
"""
from __future__ import annotations

import ast
from typing import Callable

import numpy as np


class ExpressionError(ValueError):
    """Raised for syntax errors and names outside the grammar."""


FUNCTIONS: dict[str, tuple[Callable, int]] = {
    "exp": (np.exp, 1),
    "log": (np.log, 1),
    "sqrt": (np.sqrt, 1),
    "pow": (np.power, 2),
    "abs": (np.abs, 1),
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "min": (np.minimum, 2),
    "max": (np.maximum, 2),
}

_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def variable_names(n: int, with_r: bool, with_t: bool) -> set[str]:
    names = {f"x{j}" for j in range(1, n + 1)} | {f"y{j}" for j in range(1, n + 1)} | {"abs2"}
    if with_t:
        names.add("t")
    if with_r:
        names.add("r")
    return names


def _check(node: ast.AST, allowed: set[str], constants: dict[str, float]) -> None:
    if isinstance(node, ast.Expression):
        return _check(node.body, allowed, constants)
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ExpressionError(f"operator {type(node.op).__name__} is not supported")
        _check(node.left, allowed, constants)
        _check(node.right, allowed, constants)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ExpressionError(f"unary operator {type(node.op).__name__} is not supported")
        _check(node.operand, allowed, constants)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} is not a number")
    elif isinstance(node, ast.Name):
        if node.id not in allowed and node.id not in constants:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unknown function {ast.unparse(node.func)!r}")
        if node.keywords:
            raise ExpressionError("keyword arguments are not supported")
        arity = FUNCTIONS[node.func.id][1]
        if len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes {arity} argument(s), got {len(node.args)}")
        for a in node.args:
            _check(a, allowed, constants)
    else:
        raise ExpressionError(f"syntax {type(node).__name__} is not supported")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    func = FUNCTIONS[node.func.id][0]
    return func(*(_eval(a, env) for a in node.args))


def parse(text: str, allowed: set[str], constants: dict[str, float] | None = None) -> ast.Expression:
    constants = constants or {}
    try:
        tree = ast.parse(str(text).replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, allowed, constants)
    return tree


def compile_data(text: str, n: int, signature: str, f1: float = 1.0) -> Callable:
    """Compile ``text`` into a vectorised callable.

    ``signature`` is one of ``"z"`` (g, u0), ``"tz"`` (phi) or ``"tzr"``
    (G), giving callables ``f(z)``, ``f(t, z)`` and ``f(t, z, r)`` with z an
    (m, 2n) coordinate array laid out as x1..xn, y1..yn.
    """
    if signature not in ("z", "tz", "tzr"):
        raise ValueError(f"unknown signature {signature!r}")
    constants = {"pi": float(np.pi), "e": float(np.e), "f1": float(f1)}
    tree = parse(text, variable_names(n, "r" in signature, "t" in signature), constants)

    def evaluate(t, z, r):
        z = np.asarray(z, dtype=float)
        env = dict(constants)
        for j in range(n):
            env[f"x{j + 1}"] = z[..., j]
            env[f"y{j + 1}"] = z[..., n + j]
        env["abs2"] = np.sum(z**2, axis=-1)
        env["t"] = np.asarray(t, dtype=float) if t is not None else 0.0
        env["r"] = np.asarray(r, dtype=float) if r is not None else 0.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _eval(tree.body, env)
        shape = np.broadcast_shapes(z.shape[:-1], np.shape(env["t"]), np.shape(env["r"]))
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    if signature == "z":
        fn = lambda z: evaluate(None, z, None)  # noqa: E731
    elif signature == "tz":
        fn = lambda t, z: evaluate(t, z, None)  # noqa: E731
    else:
        fn = lambda t, z, r: evaluate(t, z, r)  # noqa: E731
    fn.source = text
    return fn
