"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from cuthho.geometry import build_subcells, classify_cells
from cuthho.hho import build_cell_data, cell_face_blocks
from cuthho.levelset import LineLevelSet
from cuthho.mesh import PolyMesh
from cuthho.system import build_face_bases

SQUARE = ((-1.0, 1.0), (-1.0, 1.0))


def random_convex_polygon(rng, n=None, scale=None, regularity=0.0):
    """Random convex n-gon; ``regularity`` in [0, 1) bounds the smallest angular gap below by regularity * 2 pi / n."""
    n = int(rng.integers(3, 7)) if n is None else n
    min_gap = max(0.4, regularity * 2 * np.pi / n)
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        if np.min(np.diff(np.r_[ang, ang[0] + 2 * np.pi])) < min_gap:
            continue
        rad = rng.uniform(0.7, 1.0, n)
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        # keep it convex
        ok = True
        for i in range(n):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) <= 1e-3:
                ok = False
        if ok:
            break
    s = rng.uniform(0.05, 1.0) if scale is None else scale
    return pts * s + rng.uniform(-2, 2, 2)


def random_cut_line(rng, poly, min_fraction=0.1):
    """Line a x + b y + c = 0 through the polygon leaving at least ``min_fraction`` of the area per side."""
    from oracles import clip, signed_area
    ctr = poly.mean(axis=0)
    h = np.ptp(poly, axis=0).max()
    area = signed_area(poly)
    while True:
        th = rng.uniform(0, 2 * np.pi)
        nrm = np.array([np.cos(th), np.sin(th)])
        p = ctr + rng.uniform(-0.3, 0.3, 2) * h
        a, b, c = nrm[0], nrm[1], -float(nrm @ p)
        a1 = abs(signed_area(clip(poly, a, b, c, True))) if len(clip(poly, a, b, c, True)) >= 3 else 0
        if min_fraction * area < a1 < (1 - min_fraction) * area:
            # avoid lines passing through a vertex
            vals = poly @ nrm + c
            if np.min(np.abs(vals)) > 1e-3 * h:
                return (float(a), float(b), float(c))


def single_cell(poly, k, kappa=(1.0, 1.0), line=None, n_sub=8):
    """Package CellData for a one-cell mesh, optionally cut by a straight line."""
    poly = np.asarray(poly, float)
    mesh = PolyMesh(poly, (tuple(range(len(poly))),))
    ls = None if line is None else LineLevelSet(*line)
    topo = build_subcells(mesh, ls, classify_cells(mesh, ls), n_sub)
    fb = build_face_bases(topo, k)
    geom = topo.cells[0]
    faces = cell_face_blocks(mesh, topo, geom, fb)
    return mesh, build_cell_data(geom, faces, k, {1: kappa[0], 2: kappa[1]})


def admissible_cut_cell(rng, k, kappa=(1.0, 1.0), delta=0.02, n_sub=8):
    """Random cut cell whose two sides each contain a ball of radius delta * h_T."""
    from cuthho.geometry import check_assumption_ball
    while True:
        poly = random_convex_polygon(rng)
        line = random_cut_line(rng, poly)
        mesh, data = single_cell(poly, k, kappa, line, n_sub)
        if all(c.passed for c in check_assumption_ball(data.geom, delta).values()):
            return poly, line, data


def oracle_coefficient_map(ref, data, rng):
    """Oracle coefficients as a linear map of package coefficients (cell and face blocks)."""
    from oracles import FaceMonomials
    C = np.zeros((ref["size"], data.layout.size))
    T = np.zeros((ref["ncell"], data.layout.n_cell_dofs))
    for i, s in enumerate(ref["sides"]):
        pts = ref["parts"][s].mean(axis=0) + 0.3 * (rng.random((40, 2)) - 0.5) * ref["h"]
        Tm = np.linalg.lstsq(ref["bases"][s].values(pts), data.bases[s].values(pts), rcond=None)[0]
        rows = slice(i * ref["nc"], (i + 1) * ref["nc"])
        C[rows, data.layout.cell_slice(s)] = Tm
        T[rows, data.layout.cell_slice(s)] = Tm
    poly = ref["poly"]
    for j, fb in enumerate(data.faces):
        a, b = fb.basis.segments[0]
        mid = 0.5 * (a + b)
        for jj, (e, s, p, q) in enumerate(ref["pieces"]):
            d = q - p
            t = (mid - p) @ d / (d @ d)
            if s == fb.side and 0 < t < 1 and abs(d[0] * (mid - p)[1] - d[1] * (mid - p)[0]) < 1e-11 * (d @ d) ** 0.5 * ref["h"]:
                break
        else:  # pragma: no cover
            raise AssertionError("face piece not found in the oracle")
        fm = FaceMonomials(poly[e], poly[(e + 1) % len(poly)], data.k)
        pts = p[None] + np.linspace(0.1, 0.9, data.k + 3)[:, None] * (q - p)[None]
        Tf = np.linalg.lstsq(fm.values(pts), fb.basis.values(pts), rcond=None)[0]
        C[ref["ncell"] + jj * ref["nf"]:ref["ncell"] + (jj + 1) * ref["nf"], data.layout.face_slice(j)] = Tf
    return C, T
