"""Quadrature rules on segments, triangles and simple polygons."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights; ``weights.sum()`` is the measure of the domain."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())

    def __len__(self):
        return self.weights.size

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values) -> np.ndarray:
        """Integrate sampled values (trailing axis = quadrature points)."""
        return np.asarray(values) @ self.weights

    @staticmethod
    def concatenate(rules) -> QuadratureRule:
        rules = list(rules)
        if not rules:
            return QuadratureRule(np.zeros((0, 2)), np.zeros(0))
        return QuadratureRule(
            np.concatenate([r.points for r in rules]),
            np.concatenate([r.weights for r in rules]),
        )


@cache
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_points_for_degree(order: int) -> int:
    return max(1, (order + 2) // 2)


def segment_rule(a, b, order: int) -> QuadratureRule:
    """Gauss rule on the straight segment [a, b], exact to polynomial degree ``order``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, w = gauss_legendre01(gauss_points_for_degree(order))
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    return QuadratureRule(pts, w * np.linalg.norm(b - a))


@cache
def _reference_triangle(order: int) -> tuple[np.ndarray, np.ndarray]:
    # collapsed (Duffy) tensor Gauss rule on the unit triangle; the Jacobian
    # adds one degree in the collapsed direction
    n = gauss_points_for_degree(order + 1)
    t, w = gauss_legendre01(n)
    xi, eta = np.meshgrid(t, t, indexing="ij")
    wx, we = np.meshgrid(w, w, indexing="ij")
    x = xi.ravel()
    y = (eta * (1.0 - xi)).ravel()
    weights = (wx * we * (1.0 - xi)).ravel()
    return np.column_stack([x, y]), weights


def triangle_rule(p0, p1, p2, order: int) -> QuadratureRule:
    ref, w = _reference_triangle(order)
    p0 = np.asarray(p0, dtype=float)
    e1 = np.asarray(p1, dtype=float) - p0
    e2 = np.asarray(p2, dtype=float) - p0
    det = e1[0] * e2[1] - e1[1] * e2[0]
    pts = p0[None, :] + ref[:, :1] * e1[None, :] + ref[:, 1:] * e2[None, :]
    return QuadratureRule(pts, w * abs(det))


def triangles_rule(tris: np.ndarray, order: int) -> QuadratureRule:
    """Vectorised rule over an array of triangles with shape (m, 3, 2)."""
    tris = np.asarray(tris, dtype=float)
    if tris.size == 0:
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0))
    ref, w = _reference_triangle(order)
    p0 = tris[:, 0, :]
    e1 = tris[:, 1, :] - p0
    e2 = tris[:, 2, :] - p0
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = p0[:, None, :] + ref[None, :, :1] * e1[:, None, :] + ref[None, :, 1:] * e2[:, None, :]
    weights = det[:, None] * w[None, :]
    return QuadratureRule(pts.reshape(-1, 2), weights.ravel())


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _drop_degenerate(poly: np.ndarray, tol: float) -> np.ndarray:
    """Remove repeated and collinear vertices."""
    pts = np.asarray(poly, dtype=float)
    while len(pts) > 3:
        prev = np.roll(pts, 1, axis=0)
        nxt = np.roll(pts, -1, axis=0)
        d_in = pts - prev
        d_out = nxt - pts
        cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
        chord = np.linalg.norm(nxt - prev, axis=1)
        dup = np.linalg.norm(d_in, axis=1) <= tol
        straight = (np.abs(cross) <= tol * chord) & (np.einsum("ij,ij->i", d_in, d_out) >= 0.0)
        drop = dup | straight
        if not drop.any():
            break
        # never drop two neighbours in one sweep
        drop &= ~np.roll(drop, 1) | dup
        pts = pts[~drop]
    return pts


def _fan(pts: np.ndarray, apex: np.ndarray) -> np.ndarray | None:
    a = pts
    b = np.roll(pts, -1, axis=0)
    e1 = a - apex
    e2 = b - apex
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.all(cross > 0.0):
        tris = np.empty((len(pts), 3, 2))
        tris[:, 0] = apex
        tris[:, 1] = a
        tris[:, 2] = b
        return tris
    return None


def _polygon_centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    a = 0.5 * c.sum()
    return np.array([((x + xn) * c).sum(), ((y + yn) * c).sum()]) / (6.0 * a)


def triangulate_polygon(poly) -> np.ndarray:
    """Triangulate a simple polygon.

    Star-shaped polygons (the common case for cut cells) are fanned from
    their centroid; anything else goes through ear clipping. Returns an
    array of shape (m, 3, 2) of counter-clockwise triangles and raises
    ``ValueError`` for polygons that are not simple.
    """
    poly = np.asarray(poly, dtype=float)
    if signed_area(poly) < 0.0:
        poly = poly[::-1]
    scale = float(np.ptp(poly, axis=0).max()) if len(poly) else 0.0
    tol = 1e-14 * max(scale, 1e-300)
    pts = _drop_degenerate(poly, tol)
    if len(pts) < 3 or signed_area(pts) <= 0.0:
        return np.zeros((0, 3, 2))
    if len(pts) == 3:
        return pts[None, :, :].copy()
    b = np.roll(pts, -1, axis=0) - pts
    turn = b[:, 0] * np.roll(b, -1, axis=0)[:, 1] - b[:, 1] * np.roll(b, -1, axis=0)[:, 0]
    if np.all(turn >= 0.0):
        n = len(pts)
        return np.stack([np.repeat(pts[:1], n - 2, axis=0), pts[1:-1], pts[2:]], axis=1)
    fan = _fan(pts, _polygon_centroid(pts))
    if fan is not None:
        return fan
    return _ear_clip(pts, scale)


def _ear_clip(pts: np.ndarray, scale: float) -> np.ndarray:
    idx = list(range(len(pts)))
    tris = []
    area_tol = 1e-15 * scale * scale
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        clipped = False
        cur = pts[idx]
        for j in range(n):
            ia, ib, ic = idx[j - 1], idx[j], idx[(j + 1) % n]
            a, b, c = pts[ia], pts[ib], pts[ic]
            cr = _cross(a, b, c)
            if cr <= area_tol:
                if abs(cr) <= area_tol and np.dot(b - a, c - b) >= 0.0:
                    del idx[j]
                    clipped = True
                    break
                continue
            others = np.delete(cur, [(j - 1) % n, j, (j + 1) % n], axis=0)
            if len(others):
                d1 = (b[0] - a[0]) * (others[:, 1] - a[1]) - (b[1] - a[1]) * (others[:, 0] - a[0])
                d2 = (c[0] - b[0]) * (others[:, 1] - b[1]) - (c[1] - b[1]) * (others[:, 0] - b[0])
                d3 = (a[0] - c[0]) * (others[:, 1] - c[1]) - (a[1] - c[1]) * (others[:, 0] - c[0])
                inside = (d1 >= -area_tol) & (d2 >= -area_tol) & (d3 >= -area_tol)
                same = (np.linalg.norm(others - a, axis=1) <= 1e-14 * scale) | (
                    np.linalg.norm(others - c, axis=1) <= 1e-14 * scale)
                if np.any(inside & ~same):
                    continue
            tris.append((a, b, c))
            del idx[j]
            clipped = True
            break
        guard += 1
        if not clipped or guard > 10 * len(pts) + 10:
            raise ValueError("polygon is not simple; ear clipping failed")
    a, b, c = (pts[i] for i in idx)
    if _cross(a, b, c) > area_tol:
        tris.append((a, b, c))
    return np.asarray(tris, dtype=float).reshape(-1, 3, 2)


def polygon_rule(poly, order: int) -> QuadratureRule:
    """Rule exact to degree ``order`` on a simple polygon."""
    return triangles_rule(triangulate_polygon(poly), order)
