"""Independent dense reference implementations used by the tests.

Nothing here imports the package's quadrature, bases or operators: cells are
straight-cut polygons, polynomials are plain scaled monomials, and cell
integrals are exact moments obtained from Green's theorem.
"""

from __future__ import annotations

import numpy as np


def exponents(deg):
    return [(d - j, j) for d in range(deg + 1) for j in range(d + 1)]


def gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def polygon_moment(poly, a, b):
    """int_P x^a y^b dx dy = oint x^(a+1) y^b / (a+1) dy (counter-clockwise P)."""
    t, w = gauss((a + b + 2) // 2 + 2)
    total = 0.0
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        x = p[0] + t * (q[0] - p[0])
        y = p[1] + t * (q[1] - p[1])
        total += np.sum(w * x ** (a + 1) * y ** b) * (q[1] - p[1]) / (a + 1)
    return total


def signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def clip(poly, a, b, c, keep_negative=True):
    """Sutherland-Hodgman clip of a convex polygon by the half-plane a x + b y + c <= 0 (or >= 0)."""
    s = 1.0 if keep_negative else -1.0
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = s * (a * p[0] + b * p[1] + c)
        fq = s * (a * q[0] + b * q[1] + c)
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            out.append(p + fp / (fp - fq) * (q - p))
    return np.array(out)


class Monomials:
    """((x - c) / h)^alpha for |alpha| <= deg."""

    def __init__(self, center, h, deg):
        self.c, self.h, self.deg = np.asarray(center, float), float(h), deg
        self.e = exponents(deg)

    def __len__(self):
        return len(self.e)

    def values(self, x):
        z = (np.atleast_2d(x) - self.c) / self.h
        return np.column_stack([z[:, 0] ** a * z[:, 1] ** b for a, b in self.e])

    def gradients(self, x):
        z = (np.atleast_2d(x) - self.c) / self.h
        gx = np.column_stack([a * z[:, 0] ** max(a - 1, 0) * z[:, 1] ** b if a else 0 * z[:, 0] for a, b in self.e])
        gy = np.column_stack([b * z[:, 0] ** a * z[:, 1] ** max(b - 1, 0) if b else 0 * z[:, 0] for a, b in self.e])
        return np.stack([gx, gy], axis=-1) / self.h

    def _local(self, poly):
        return (np.asarray(poly) - self.c) / self.h

    def mass(self, poly):
        p = self._local(poly)
        n = len(self.e)
        M = np.empty((n, n))
        for i, (a1, b1) in enumerate(self.e):
            for j, (a2, b2) in enumerate(self.e):
                M[i, j] = polygon_moment(p, a1 + a2, b1 + b2)
        return M * self.h ** 2

    def means(self, poly):
        p = self._local(poly)
        return np.array([polygon_moment(p, a, b) for a, b in self.e]) * self.h ** 2

    def stiffness(self, poly):
        p = self._local(poly)
        n = len(self.e)
        K = np.zeros((n, n))
        for i, (a1, b1) in enumerate(self.e):
            for j, (a2, b2) in enumerate(self.e):
                v = 0.0
                if a1 and a2:
                    v += a1 * a2 * polygon_moment(p, a1 + a2 - 2, b1 + b2)
                if b1 and b2:
                    v += b1 * b2 * polygon_moment(p, a1 + a2, b1 + b2 - 2)
                K[i, j] = v
        return K  # the h^2 area factor cancels the 1/h^2 of the gradients


def segment_rule(p, q, n):
    t, w = gauss(n)
    pts = p[None, :] + t[:, None] * (q - p)[None, :]
    return pts, w * np.linalg.norm(q - p)


def fit(values_fn, basis_values_fn, pts):
    """Coefficients c with basis(pts) @ c = values(pts) (exact for members of the space)."""
    B = basis_values_fn(pts)
    c, *_ = np.linalg.lstsq(B, values_fn(pts), rcond=None)
    return c


class FaceMonomials:
    """t^j, t the normalised coordinate along the face a -> b, j <= k."""

    def __init__(self, a, b, k):
        self.a, self.b, self.k = np.asarray(a, float), np.asarray(b, float), k
        d = self.b - self.a
        self.len = np.linalg.norm(d)
        self.tau = d / self.len

    def values(self, x):
        t = (np.atleast_2d(x) - self.a) @ self.tau / self.len
        return np.column_stack([t ** j for j in range(self.k + 1)])


def reference_local_matrices(poly, k, kappa, line=None, eta=None):
    """Reconstruction, stabilisation and local matrix of one convex polygon.

    ``line = (a, b, c)`` cuts the cell (side 1 where a x + b y + c < 0).
    Returns a dict with the monomial bases, face pieces and the matrices in
    the oracle's own unknowns [cell side blocks | face piece blocks].
    """
    poly = np.asarray(poly, float)
    if signed_area(poly) < 0:
        poly = poly[::-1]
    h = max(np.linalg.norm(p - q) for p in poly for q in poly)
    if line is None:
        parts = {1: poly}
    else:
        parts = {1: clip(poly, *line, keep_negative=True), 2: clip(poly, *line, keep_negative=False)}
    sides = sorted(parts)
    # each side in its own frame keeps the monomial Gram matrices well conditioned
    bases = {s: Monomials(parts[s].mean(axis=0),
                          max(np.linalg.norm(p - q) for p in parts[s] for q in parts[s]), k + 1)
             for s in sides}
    nc = len(bases[sides[0]])
    ncell = nc * len(sides)

    # face pieces: (edge index, side, p, q)
    pieces = []
    n = len(poly)
    for e in range(n):
        p, q = poly[e], poly[(e + 1) % n]
        if line is None:
            pieces.append((e, 1, p, q))
            continue
        a, b, c = line
        fp, fq = a * p[0] + b * p[1] + c, a * q[0] + b * q[1] + c
        if fp * fq < 0:
            x = p + fp / (fp - fq) * (q - p)
            s_p = 1 if fp < 0 else 2
            pieces.append((e, s_p, p, x))
            pieces.append((e, 3 - s_p, x, q))
        else:
            pieces.append((e, 1 if fp + fq < 0 else 2, p, q))
    pieces.sort(key=lambda t: (t[0], t[1]))
    nf = k + 1
    size = ncell + nf * len(pieces)

    def cslice(s):
        i = sides.index(s)
        return slice(i * nc, (i + 1) * nc)

    # Nitsche form on the cell unknowns
    N = np.zeros((ncell, ncell))
    for s in sides:
        N[cslice(s), cslice(s)] = kappa[s] * bases[s].stiffness(parts[s])
    gamma = None
    if line is not None:
        a, b, c = line
        nrm = np.array([a, b]) / np.hypot(a, b)
        ends = []
        for e in range(n):
            p, q = poly[e], poly[(e + 1) % n]
            fp, fq = a * p[0] + b * p[1] + c, a * q[0] + b * q[1] + c
            if fp * fq < 0:
                ends.append(p + fp / (fp - fq) * (q - p))
        gx, gw = segment_rule(ends[0], ends[1], 2 * k + 4)
        J = np.hstack([bases[1].values(gx), -bases[2].values(gx)])
        F = np.hstack([kappa[1] * bases[1].gradients(gx) @ nrm, np.zeros((len(gx), nc))])
        cross = F.T @ (gw[:, None] * J)
        N += -cross - cross.T + eta * kappa[1] / h * (J.T * gw) @ J
        gamma = (gx, gw, nrm)

    # right-hand side of the reconstruction problem and stabilisation
    B = np.zeros((ncell, size))
    B[:, :ncell] = N
    S = np.zeros((size, size))
    for j, (e, s, p, q) in enumerate(pieces):
        p0, q0 = poly[e], poly[(e + 1) % n]
        d = q0 - p0
        nT = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        fb = FaceMonomials(p0, q0, k)
        x, w = segment_rule(p, q, 2 * k + 4)
        phi = bases[s].values(x)
        dphi = bases[s].gradients(x) @ nT
        psi = fb.values(x)
        fs = slice(ncell + j * nf, ncell + (j + 1) * nf)
        B[cslice(s), cslice(s)] -= kappa[s] * (dphi.T * w) @ phi
        B[cslice(s), fs] += kappa[s] * (dphi.T * w) @ psi
        Mf = (psi.T * w) @ psi
        proj = np.linalg.solve(Mf, (psi.T * w) @ phi)     # Pi_F of cell trace, face-monomial coefficients
        D = np.zeros((nf, size))
        D[:, cslice(s)] = proj
        D[:, fs] = -np.eye(nf)
        S += kappa[s] / h * D.T @ Mf @ D

    m = np.concatenate([bases[s].means(parts[s]) for s in sides])
    K = np.zeros((ncell + 1, ncell + 1))
    K[:ncell, :ncell] = N
    K[:ncell, ncell] = m
    K[ncell, :ncell] = m
    rhs = np.zeros((ncell + 1, size))
    rhs[:ncell] = B
    rhs[ncell, :ncell] = m
    R = np.linalg.solve(K, rhs)[:ncell]
    A = R.T @ N @ R + S
    return dict(poly=poly, parts=parts, sides=sides, bases=bases, pieces=pieces, N=N, B=B, m=m, R=R, S=S,
                A=0.5 * (A + A.T), nc=nc, nf=nf, ncell=ncell, size=size, h=h, gamma=gamma)


def reconstruction_residual(ref, r, v):
    """Relative residual of the bordered reconstruction equations.

    ``r`` holds cell coefficients of a candidate reconstruction and ``v`` the
    unknowns it was built from, both in the oracle's basis. The multiplier of
    the mean constraint is fitted in the least-squares sense.
    """
    N, B, m = ref["N"], ref["B"], ref["m"]
    b = B @ v
    res = N @ r - b
    lam = -(m @ res) / (m @ m)
    res = res + lam * m
    mean = m @ r - m @ v[: ref["ncell"]]
    scale = np.linalg.norm(b) + np.linalg.norm(N, 2) * np.linalg.norm(r)
    return float(np.hypot(np.linalg.norm(res), abs(mean) * np.linalg.norm(N, 2) / np.linalg.norm(m)) / scale)


def disk_monomial_integral(r, a, b):
    """int over the disk |x| < r of x^a y^b."""
    if a % 2 or b % 2:
        return 0.0
    from math import gamma
    return 2.0 * gamma((a + 1) / 2) * gamma((b + 1) / 2) / gamma((a + b + 2) / 2) * r ** (a + b + 2) / (a + b + 2)
