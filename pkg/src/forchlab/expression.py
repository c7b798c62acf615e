"""Small arithmetic expression language for data fields.

Expressions use the operators ``+ - * / ^`` (``**`` is accepted too), the
functions ``sin cos exp sqrt`` (plus ``tanh log abs``), numeric literals, the
constant ``pi`` and the variables ``x y z t``.  Text is parsed through a
whitelisted :mod:`ast` walk and handed to sympy, so derivatives are exact and
evaluation is vectorised through :func:`sympy.lambdify`.
"""

from __future__ import annotations

import ast

import numpy as np
import sympy as sp

X, Y, Z, T = sp.symbols("x y z t", real=True)
VARIABLES = {"x": X, "y": Y, "z": Z, "t": T}
FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "sqrt": sp.sqrt,
    "tanh": sp.tanh,
    "log": sp.log,
    "abs": sp.Abs,
}
CONSTANTS = {"pi": sp.pi}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    """Raised when an expression string is not in the accepted language."""


def _to_sympy(node, text):
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body, text)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_to_sympy(node.left, text), _to_sympy(node.right, text))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        arg = _to_sympy(node.operand, text)
        return -arg if isinstance(node.op, ast.USub) else arg
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value)
    if isinstance(node, ast.Name):
        if node.id in VARIABLES:
            return VARIABLES[node.id]
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r} at column {node.col_offset} in {text!r}")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            name = getattr(node.func, "id", "?")
            raise ExpressionError(f"unknown function {name!r} at column {node.col_offset} in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument in {text!r}")
        return FUNCTIONS[node.func.id](_to_sympy(node.args[0], text))
    col = getattr(node, "col_offset", 0)
    raise ExpressionError(f"unsupported syntax at column {col} in {text!r}")


class Expression:
    """A scalar field f(x, y, z, t) given in closed form.

    Parameters
    ----------
    source : str, float or sympy expression
        Expression text such as ``"0.1*(1+x)*exp(-t)"``.

    Examples
    --------
    >>> f = Expression("1 + x^2")
    >>> float(f(2.0, 0.0, 0.0, 0.0))
    5.0
    """

    def __init__(self, source):
        if isinstance(source, Expression):
            self.text, self.sym = source.text, source.sym
        elif isinstance(source, sp.Basic):
            self.sym = source
            self.text = str(source)
        elif isinstance(source, (int, float)):
            self.sym = sp.Float(source) if isinstance(source, float) else sp.Integer(source)
            self.text = repr(source)
        elif isinstance(source, str):
            self.text = source
            try:
                tree = ast.parse(source.replace("^", "**"), mode="eval")
            except SyntaxError as exc:
                raise ExpressionError(f"cannot parse {source!r}: {exc.msg} (column {exc.offset})") from None
            self.sym = _to_sympy(tree, source)
        else:
            raise ExpressionError(f"cannot build an expression from {type(source).__name__}")
        self._fn = sp.lambdify((X, Y, Z, T), self.sym, modules="numpy")

    def __call__(self, x, y, z, t):
        x = np.asarray(x, dtype=float)
        out = self._fn(x, np.asarray(y, dtype=float), np.asarray(z, dtype=float), float(t))
        return np.broadcast_to(np.asarray(out, dtype=float),
                               np.broadcast_shapes(x.shape, np.shape(y), np.shape(z))).copy()

    def at(self, points, t):
        """Evaluate at an array of points with trailing dimension 3."""
        points = np.asarray(points, dtype=float)
        return self(points[..., 0], points[..., 1], points[..., 2], t)

    def diff(self, var):
        return Expression(sp.diff(self.sym, VARIABLES[var]))

    def gradient(self):
        return [self.diff(v) for v in "xyz"]

    @property
    def is_constant(self):
        return not (self.sym.free_symbols & set(VARIABLES.values()))

    def __repr__(self):
        return f"Expression({self.text!r})"


def as_expression(value):
    """Coerce a string, number or Expression to an Expression (None passes through)."""
    if value is None or isinstance(value, Expression):
        return value
    return Expression(value)
