"""Level-set descriptions of the interface.

Omega^1 = {phi < 0}, Omega^2 = {phi > 0}; the interface normal is
grad(phi)/|grad(phi)| and points from Omega^1 into Omega^2.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CircleLevelSet",
    "EllipseLevelSet",
    "LevelSet",
    "LineLevelSet",
    "PolynomialLevelSet",
    "parse_levelset",
]


def _as_points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


class LevelSet:
    """Base class. Subclasses implement ``_value`` and ``_gradient`` on (n, 2) arrays."""

    curvature_bound: float | None = None

    def value(self, x) -> np.ndarray:
        return self._value(_as_points(x))

    def gradient(self, x) -> np.ndarray:
        return self._gradient(_as_points(x))

    def normal(self, x) -> np.ndarray:
        g = self.gradient(x)
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def negated(self) -> LevelSet:
        return _Negated(self)

    def translated(self, shift) -> LevelSet:
        return _Translated(self, np.asarray(shift, dtype=float))


@dataclass(frozen=True)
class _Negated(LevelSet):
    base: LevelSet

    @property
    def curvature_bound(self):
        return self.base.curvature_bound

    def _value(self, x):
        return -self.base._value(x)

    def _gradient(self, x):
        return -self.base._gradient(x)

    def __str__(self):
        return f"neg({self.base})"


@dataclass(frozen=True, eq=False)
class _Translated(LevelSet):
    base: LevelSet
    shift: np.ndarray

    @property
    def curvature_bound(self):
        return self.base.curvature_bound

    def _value(self, x):
        return self.base._value(x - self.shift)

    def _gradient(self, x):
        return self.base._gradient(x - self.shift)

    def __str__(self):
        return f"shift({self.base}, {self.shift[0]:.17g}, {self.shift[1]:.17g})"


@dataclass(frozen=True)
class LineLevelSet(LevelSet):
    """phi = a x + b y + c."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0.0 and self.b == 0.0:
            raise ValueError("line level set needs (a, b) != 0")

    @property
    def curvature_bound(self):
        return 0.0

    def _value(self, x):
        return self.a * x[:, 0] + self.b * x[:, 1] + self.c

    def _gradient(self, x):
        return np.broadcast_to(np.array([self.a, self.b], dtype=float), x.shape).copy()

    def __str__(self):
        return f"line({self.a:g},{self.b:g},{self.c:g})"


@dataclass(frozen=True)
class CircleLevelSet(LevelSet):
    """phi = |x - c|^2 - r^2, negative inside."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError("circle radius must be positive")

    @property
    def curvature_bound(self):
        return 1.0 / self.r

    def _value(self, x):
        return (x[:, 0] - self.cx) ** 2 + (x[:, 1] - self.cy) ** 2 - self.r ** 2

    def _gradient(self, x):
        return 2.0 * np.column_stack([x[:, 0] - self.cx, x[:, 1] - self.cy])

    def __str__(self):
        return f"circle({self.cx:g},{self.cy:g},{self.r:g})"


@dataclass(frozen=True)
class EllipseLevelSet(LevelSet):
    """phi = ((x-cx)/a)^2 + ((y-cy)/b)^2 - 1."""

    cx: float
    cy: float
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0.0 or self.b <= 0.0:
            raise ValueError("ellipse semi-axes must be positive")

    @property
    def curvature_bound(self):
        return max(self.a / self.b ** 2, self.b / self.a ** 2)

    def _value(self, x):
        return ((x[:, 0] - self.cx) / self.a) ** 2 + ((x[:, 1] - self.cy) / self.b) ** 2 - 1.0

    def _gradient(self, x):
        return np.column_stack([2.0 * (x[:, 0] - self.cx) / self.a ** 2,
                                2.0 * (x[:, 1] - self.cy) / self.b ** 2])

    def __str__(self):
        return f"ellipse({self.cx:g},{self.cy:g},{self.a:g},{self.b:g})"


def _graded_exponents(n_coef: int) -> list[tuple[int, int]]:
    out = []
    d = 0
    while len(out) < n_coef:
        for j in range(d + 1):
            out.append((d - j, j))
        d += 1
    return out[:n_coef]


class PolynomialLevelSet(LevelSet):
    """phi = sum c_i x^a_i y^b_i with coefficients in graded order 1, x, y, x^2, xy, y^2, ..."""

    def __init__(self, coefficients, curvature_bound: float | None = None):
        self.coefficients = tuple(float(c) for c in coefficients)
        if not self.coefficients:
            raise ValueError("polynomial level set needs coefficients")
        self.exponents = _graded_exponents(len(self.coefficients))
        self.curvature_bound = curvature_bound

    def _value(self, x):
        out = np.zeros(len(x))
        for c, (a, b) in zip(self.coefficients, self.exponents):
            if c:
                out += c * x[:, 0] ** a * x[:, 1] ** b
        return out

    def _gradient(self, x):
        g = np.zeros((len(x), 2))
        for c, (a, b) in zip(self.coefficients, self.exponents):
            if not c:
                continue
            if a:
                g[:, 0] += c * a * x[:, 0] ** (a - 1) * x[:, 1] ** b
            if b:
                g[:, 1] += c * b * x[:, 0] ** a * x[:, 1] ** (b - 1)
        return g

    def __str__(self):
        return "poly(" + ",".join(f"{c:g}" for c in self.coefficients) + ")"


_BUILTINS = {
    "line": (LineLevelSet, 3),
    "circle": (CircleLevelSet, 3),
    "ellipse": (EllipseLevelSet, 4),
}


def parse_levelset(text: str) -> LevelSet:
    """Parse ``line(a,b,c)``, ``circle(cx,cy,r)``, ``ellipse(cx,cy,a,b)`` or ``poly(c0,c1,...)``."""
    m = re.fullmatch(r"\s*([a-z]+)\s*\((.*)\)\s*", text)
    if m is None:
        raise ValueError(f"cannot parse level set {text!r}")
    name, body = m.group(1), m.group(2)
    try:
        args = [float(_eval_number(tok)) for tok in body.split(",")] if body.strip() else []
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"bad level-set arguments in {text!r}") from exc
    if name == "poly":
        return PolynomialLevelSet(args)
    if name not in _BUILTINS:
        raise ValueError(f"unknown level set {name!r}")
    cls, nargs = _BUILTINS[name]
    if len(args) != nargs:
        raise ValueError(f"{name} expects {nargs} arguments, got {len(args)}")
    return cls(*args)


def _eval_number(tok: str) -> float:
    """Literal floats plus ``pi`` and simple arithmetic."""
    node = ast.parse(tok.strip(), mode="eval").body

    def ev(n):
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)):
            return float(n.value)
        if isinstance(n, ast.Name) and n.id == "pi":
            return math.pi
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, (ast.USub, ast.UAdd)):
            v = ev(n.operand)
            return -v if isinstance(n.op, ast.USub) else v
        if isinstance(n, ast.BinOp) and isinstance(n.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            a, b = ev(n.left), ev(n.right)
            return {ast.Add: a + b, ast.Sub: a - b, ast.Mult: a * b, ast.Div: a / b}[type(n.op)]
        raise ValueError(f"unsupported token {tok!r}")

    return ev(node)
