"""Polynomial bases on cells, sub-cells and (sub-)faces, and L2 projectors.

Cell bases are scaled monomials ((x - x_T)/h_T)^a in the frame of the
(parent or agglomerated) cell, orthonormalised on the integration domain.
Face bases live in the frame of the face: the coordinate runs along the
stored face direction so both neighbours of a face see the same basis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cache

import numpy as np
from scipy.linalg import solve_triangular

from .quadrature import QuadratureRule, segment_rule

__all__ = [
    "MAX_GRAM_CONDITION",
    "BasisError",
    "CellBasis",
    "FaceBasis",
    "build_cell_basis",
    "build_face_basis",
    "monomial_exponents",
    "poly_dim",
    "project_cell",
    "project_face",
    "trace_matrices",
]

MAX_GRAM_CONDITION = 1e14


class BasisError(np.linalg.LinAlgError):
    pass


def poly_dim(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@cache
def monomial_exponents(degree: int) -> np.ndarray:
    """Graded exponents (a, b): 1, x, y, x^2, xy, y^2, ..."""
    out = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    arr = np.array(out, dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def _powers(z: np.ndarray, degree: int) -> np.ndarray:
    p = np.ones((degree + 1,) + z.shape)
    for d in range(1, degree + 1):
        p[d] = p[d - 1] * z
    return p


def scaled_monomials(x: np.ndarray, center, h: float, degree: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = monomial_exponents(degree)
    xi = (x - np.asarray(center)[None, :]) / h
    px, py = _powers(xi[:, 0], degree), _powers(xi[:, 1], degree)
    return (px[e[:, 0]] * py[e[:, 1]]).T


def scaled_monomial_gradients(x: np.ndarray, center, h: float, degree: int) -> np.ndarray:
    """Shape (npts, n, 2)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = monomial_exponents(degree)
    xi = (x - np.asarray(center)[None, :]) / h
    px, py = _powers(xi[:, 0], degree), _powers(xi[:, 1], degree)
    ea, eb = e[:, 0], e[:, 1]
    gx = np.where(ea[:, None] > 0, ea[:, None] * px[np.maximum(ea - 1, 0)], 0.0) * py[eb]
    gy = px[ea] * np.where(eb[:, None] > 0, eb[:, None] * py[np.maximum(eb - 1, 0)], 0.0)
    return np.stack([gx.T, gy.T], axis=-1) / h


@dataclass(frozen=True, eq=False)
class CellBasis:
    """phi(x) = m(x) @ coef with m the scaled monomials of the frame (center, h)."""

    degree: int
    center: np.ndarray
    h: float
    coef: np.ndarray
    gram_condition: float = 1.0

    @property
    def dim(self) -> int:
        return poly_dim(self.degree)

    def values(self, x) -> np.ndarray:
        return scaled_monomials(x, self.center, self.h, self.degree) @ self.coef

    def gradients(self, x) -> np.ndarray:
        g = scaled_monomial_gradients(x, self.center, self.h, self.degree)
        return np.einsum("pmd,mn->pnd", g, self.coef)

    def evaluate(self, coeffs, x) -> np.ndarray:
        return self.values(x) @ np.asarray(coeffs)

    def translated(self, shift) -> CellBasis:
        return replace(self, center=self.center + np.asarray(shift, dtype=float))


def _orthonormalise(V: np.ndarray, w: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    # QR of the weighted Vandermonde: R is the Cholesky factor of the Gram matrix
    if V.shape[0] < V.shape[1]:
        raise BasisError(f"{what}: quadrature has fewer points than basis functions")
    if np.all(w >= 0.0):
        R = np.linalg.qr(np.sqrt(w)[:, None] * V, mode="r")
        d = np.diag(R)
        R = np.where(d < 0.0, -1.0, 1.0)[:, None] * R
        if np.abs(d).min() <= 0.0:
            raise BasisError(f"{what}: singular Gram matrix")
    else:
        # signed correction weights: factor the Gram matrix itself
        G = V.T @ (w[:, None] * V)
        try:
            R = np.linalg.cholesky(0.5 * (G + G.T)).T
        except np.linalg.LinAlgError as exc:
            raise BasisError(f"{what}: Gram matrix not positive definite") from exc
    s = np.linalg.svd(R, compute_uv=False)
    cond = float((s[0] / s[-1]) ** 2)
    if not np.isfinite(cond) or cond > MAX_GRAM_CONDITION:
        raise BasisError(f"{what}: Gram matrix condition {cond:.3g} exceeds {MAX_GRAM_CONDITION:g}; "
                         "the sub-cell is too thin (delta-ball condition violated)")
    coef = solve_triangular(R, np.eye(R.shape[0]), lower=False)
    return coef, cond


def build_cell_basis(center, h: float, degree: int, rule: QuadratureRule) -> CellBasis:
    """Orthonormal basis of P^degree on the domain integrated by ``rule``.

    The rule must be exact to degree 2*degree on that domain.
    """
    center = np.asarray(center, dtype=float)
    V = scaled_monomials(rule.points, center, h, degree)
    coef, cond = _orthonormalise(V, rule.weights, "cell basis")
    return CellBasis(degree, center, float(h), coef, cond)


@cache
def _legendre_monomial_coef(degree: int) -> np.ndarray:
    """Column j holds the monomial coefficients of P_j scaled to unit norm on [-1, 1]."""
    out = np.zeros((degree + 1, degree + 1))
    for j in range(degree + 1):
        c = np.polynomial.legendre.leg2poly([0] * j + [1])
        out[: len(c), j] = c * np.sqrt((2 * j + 1) / 2.0)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FaceBasis:
    """psi(x) = t^j @ coef with t = ((x - origin).tangent - mid) / half."""

    degree: int
    origin: np.ndarray
    tangent: np.ndarray
    mid: float
    half: float
    coef: np.ndarray
    segments: tuple

    @property
    def dim(self) -> int:
        return self.degree + 1

    def coordinate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return ((x - self.origin[None, :]) @ self.tangent - self.mid) / self.half

    def values(self, x) -> np.ndarray:
        t = self.coordinate(x)
        return _powers(t, self.degree).T @ self.coef

    def evaluate(self, coeffs, x) -> np.ndarray:
        return self.values(x) @ np.asarray(coeffs)

    def rule(self, order: int) -> QuadratureRule:
        return QuadratureRule.concatenate(segment_rule(a, b, order) for a, b in self.segments)


def build_face_basis(a, b, segments, degree: int) -> FaceBasis:
    """Orthonormal P^degree basis on the union of collinear ``segments`` of face a->b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    tangent = d / np.linalg.norm(d)
    segs = tuple((np.asarray(p, dtype=float), np.asarray(q, dtype=float)) for p, q in segments)
    s = np.array([[(p - a) @ tangent, (q - a) @ tangent] for p, q in segs])
    lo, hi = float(s.min()), float(s.max())
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if half <= 0.0:
        raise BasisError("degenerate face")
    if len(segs) == 1:
        coef = _legendre_monomial_coef(degree) / np.sqrt(half)
        return FaceBasis(degree, a, tangent, mid, half, coef, segs)
    rule = QuadratureRule.concatenate(segment_rule(p, q, 2 * degree) for p, q in segs)
    t = ((rule.points - a[None, :]) @ tangent - mid) / half
    V = _powers(t, degree).T
    coef, _ = _orthonormalise(V, rule.weights, "face basis")
    return FaceBasis(degree, a, tangent, mid, half, coef, segs)


def project_cell(f, basis: CellBasis, rule: QuadratureRule) -> np.ndarray:
    """Coefficients of the L2-orthogonal projection of f (callable on (n, 2) points)."""
    vals = np.asarray(f(rule.points), dtype=float)
    return basis.values(rule.points).T @ (rule.weights * vals)


def project_face(f, basis: FaceBasis, order: int | None = None) -> np.ndarray:
    rule = basis.rule(2 * basis.degree + 2 if order is None else order)
    vals = np.asarray(f(rule.points), dtype=float)
    return basis.values(rule.points).T @ (rule.weights * vals)


def trace_matrices(basis: CellBasis, face: FaceBasis, normal, order: int) -> tuple[np.ndarray, np.ndarray]:
    """(int_F psi phi^T, int_F psi (grad phi . n)^T) on the face segments.

    Shapes (face.dim, basis.dim).
    """
    rule = face.rule(order)
    phi = basis.values(rule.points)
    dphi = basis.gradients(rule.points) @ np.asarray(normal, dtype=float)
    psi = face.values(rule.points) * rule.weights[:, None]
    return psi.T @ phi, psi.T @ dphi
