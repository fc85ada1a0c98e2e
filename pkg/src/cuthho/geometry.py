"""Cut-cell geometry: classification, sub-cells, sub-faces, interface arcs,
quadrature on cut entities and the mesh-assumption diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
import shapely
from scipy.optimize import brentq

from .levelset import LevelSet
from .mesh import PolyMesh, polygon_diameter
from .quadrature import (
    QuadratureRule,
    gauss_legendre01,
    gauss_points_for_degree,
    segment_rule,
    signed_area,
    triangles_rule,
    triangulate_polygon,
)

log = logging.getLogger(__name__)

__all__ = [
    "BallCheck",
    "CellGeometry",
    "CellTag",
    "CutTopology",
    "GeometryError",
    "InterfaceArc",
    "InterfaceNotResolvedError",
    "ProjectionError",
    "ResolutionReport",
    "TangentialCutError",
    "UnresolvedInterfaceError",
    "build_subcells",
    "check_assumption_ball",
    "check_assumption_gamma",
    "check_resolution",
    "classify_cells",
    "inscribed_ball",
    "interface_quadrature",
    "subcell_quadrature",
]

EDGE_SAMPLES = 6
ROOT_RTOL = 1e-13
NEWTON_MAXIT = 50
# extra Gauss points along arcs: the arc map is not polynomial in the chord coordinate
ARC_SURPLUS = 3


class CellTag(IntEnum):
    CUT = 0
    INSIDE1 = 1
    INSIDE2 = 2


class GeometryError(RuntimeError):
    pass


class TangentialCutError(GeometryError):
    pass


class UnresolvedInterfaceError(GeometryError):
    pass


class InterfaceNotResolvedError(GeometryError):
    pass


class ProjectionError(GeometryError):
    pass


# ----------------------------------------------------------------------------
# interface arcs


@dataclass(eq=False)
class InterfaceArc:
    """Piece of the interface inside one parent cell.

    The arc is parameterised over the chord ``p_a -> p_b`` as
    ``gamma(t) = c(t) + s(t) nu`` with ``phi(gamma(t)) = 0``; ``nu`` is the
    unit chord normal oriented towards Omega^2.
    """

    levelset: LevelSet
    p_a: np.ndarray
    p_b: np.ndarray
    n_sub: int
    scale: float
    nu: np.ndarray = field(init=False)
    nodes: np.ndarray = field(init=False)
    _rules: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        d = self.p_b - self.p_a
        length = float(np.linalg.norm(d))
        if length <= 1e-12 * self.scale:
            raise UnresolvedInterfaceError("interface enters and leaves a cell at the same point")
        nu = np.array([-d[1], d[0]]) / length
        mid = 0.5 * (self.p_a + self.p_b)
        if float(self.levelset.gradient(mid)[0] @ nu) < 0.0:
            nu = -nu
        self.nu = nu
        t = np.linspace(0.0, 1.0, self.n_sub + 1)
        self.nodes, _ = self.evaluate(t)
        self.nodes[0] = self.p_a
        self.nodes[-1] = self.p_b

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Points on the interface and arc-length Jacobians |gamma'(t)|."""
        pts, tang, _ = self.evaluate_full(t)
        return pts, np.linalg.norm(tang, axis=1)

    def evaluate_full(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points gamma(t), tangents gamma'(t) and normal offsets s(t) from the chord."""
        t = np.asarray(t, dtype=float).ravel()
        cp = self.p_b - self.p_a
        base = self.p_a[None, :] + t[:, None] * cp[None, :]
        s = self._project(base)
        pts = base + s[:, None] * self.nu[None, :]
        g = self.levelset.gradient(pts)
        dsdt = -(g @ cp) / (g @ self.nu)
        tang = cp[None, :] + dsdt[:, None] * self.nu[None, :]
        return pts, tang, s

    def _project(self, base: np.ndarray) -> np.ndarray:
        ls, nu = self.levelset, self.nu
        s = np.zeros(len(base))
        val = ls.value(base)
        tol = 1e-14 * self.scale
        for _ in range(NEWTON_MAXIT):
            gx = ls.gradient(base + s[:, None] * nu)
            gn = gx @ nu
            gnorm = np.linalg.norm(gx, axis=1)
            done = np.abs(val) <= tol * np.maximum(gnorm, 1e-300)
            if done.all():
                return s
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(done, 0.0, -val / gn)
            step = np.where(np.isfinite(step), step, 0.0)
            step = np.clip(step, -self.scale, self.scale)
            for _half in range(30):
                trial = s + step
                tval = ls.value(base + trial[:, None] * nu)
                worse = (np.abs(tval) > np.abs(val)) & ~done
                if not worse.any():
                    break
                step = np.where(worse, 0.5 * step, step)
            small = np.abs(step) <= 1e-14 * self.scale
            s = s + step
            val = ls.value(base + s[:, None] * nu)
            if np.all(done | small):
                return s
        raise ProjectionError("projection onto the interface did not converge in "
                              f"{NEWTON_MAXIT} Newton iterations")

    def rule(self, order: int) -> tuple[QuadratureRule, np.ndarray]:
        """Gauss rule of the given order on each chord subinterval, mapped onto Gamma.

        Returns the rule and the unit normals n_Gamma at the points.
        """
        if order not in self._rules:
            tg, wg = gauss_legendre01(gauss_points_for_degree(order) + ARC_SURPLUS)
            edges = np.linspace(0.0, 1.0, self.n_sub + 1)
            dt = np.diff(edges)
            t = (edges[:-1, None] + dt[:, None] * tg[None, :]).ravel()
            w = (dt[:, None] * wg[None, :]).ravel()
            pts, jac = self.evaluate(t)
            normals = self.levelset.normal(pts)
            self._rules[order] = (QuadratureRule(pts, w * jac), normals)
        return self._rules[order]

    def polyline_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.nodes, axis=0), axis=1).sum())

    def samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        pts, _ = self.evaluate(np.linspace(0.0, 1.0, n))
        return pts, self.levelset.normal(pts)


# ----------------------------------------------------------------------------
# cells and topology


@dataclass(eq=False)
class CellGeometry:
    """Geometry of one computational cell (a parent cell or an agglomerate).

    ``parts[side]`` lists the polygons of the sub-cell on that side and
    ``curves[side]`` runs parallel to it: ``None`` for a plain polygon, or
    ``(arc, n_straight, forward)`` when vertices ``0..n_straight`` form the
    straight chain and the remaining edges are chords of ``arc``.
    ``faces``/``signs`` are the cell's boundary faces in the parent mesh.
    """

    tag: CellTag
    parents: tuple
    parts: dict
    arcs: list
    faces: np.ndarray
    signs: np.ndarray
    h: float
    center: np.ndarray
    curves: dict = field(default_factory=dict)
    _quad: dict = field(default_factory=dict, repr=False)

    @property
    def is_cut(self) -> bool:
        return self.tag == CellTag.CUT

    @property
    def sides(self) -> tuple:
        return (1, 2) if self.is_cut else (int(self.tag),)

    def quadrature(self, side: int, order: int) -> QuadratureRule:
        """Rule of the given order on T^side, following the exact interface."""
        key = (side, order)
        if key not in self._quad:
            polys = self.parts.get(side, [])
            curves = self.curves.get(side, [None] * len(polys))
            rules = []
            for poly, curve in zip(polys, curves):
                try:
                    if curve is None:
                        rules.append(triangles_rule(triangulate_polygon(poly), order))
                    else:
                        rules.append(_curved_polygon_rule(poly, curve, order))
                except ValueError as exc:
                    raise GeometryError(f"non-simple sub-cell polygon in cell {self.parents}") from exc
            self._quad[key] = QuadratureRule.concatenate(rules)
        return self._quad[key]

    def area(self, side: int | None = None) -> float:
        sides = self.sides if side is None else (side,)
        return sum(self.quadrature(s, 1).measure for s in sides)

    def polygon_area(self, side: int | None = None) -> float:
        sides = self.sides if side is None else (side,)
        return sum(signed_area(p) for s in sides for p in self.parts.get(s, []))

    def interface_rule(self, order: int) -> tuple[QuadratureRule, np.ndarray]:
        rules = [a.rule(order) for a in self.arcs]
        if not rules:
            return QuadratureRule(np.zeros((0, 2)), np.zeros(0)), np.zeros((0, 2))
        return (QuadratureRule.concatenate(r for r, _ in rules),
                np.concatenate([n for _, n in rules]))

    def interface_length(self) -> float:
        return sum(a.polyline_length() for a in self.arcs)

    def all_vertices(self) -> np.ndarray:
        return np.concatenate([p for polys in self.parts.values() for p in polys])


def _arc_nodes(arc: InterfaceArc, n_t: int):
    key = ("fan", n_t)
    if key not in arc._rules:
        tg, wg = gauss_legendre01(n_t)
        edges = np.linspace(0.0, 1.0, arc.n_sub + 1)
        dt = np.diff(edges)
        t = (edges[:-1, None] + dt[:, None] * tg[None, :]).ravel()
        w = (dt[:, None] * wg[None, :]).ravel()
        pts, tang, s = arc.evaluate_full(t)
        # offset of the chord polyline at the same chord coordinate
        s_nodes = arc.evaluate_full(edges)[2]
        s_lin = (s_nodes[:-1, None] * (1.0 - tg[None, :]) + s_nodes[1:, None] * tg[None, :]).ravel()
        arc._rules[key] = (pts, tang, w, s - s_lin)
    return arc._rules[key]


def _curved_polygon_rule(poly: np.ndarray, curve, order: int) -> QuadratureRule:
    arc, n_straight, forward = curve
    sigma = 1.0 if forward else -1.0
    n_t = gauss_points_for_degree(order + 2) + ARC_SURPLUS
    pts, tang, w_t, gap = _arc_nodes(arc, n_t)
    apex = _polygon_centroid([poly])[0]
    a = poly[:n_straight]
    b = poly[1:n_straight + 1]
    cr = (a[:, 0] - apex[0]) * (b[:, 1] - apex[1]) - (a[:, 1] - apex[1]) * (b[:, 0] - apex[0])
    rel = pts - apex[None, :]
    cr_arc = sigma * (rel[:, 0] * tang[:, 1] - rel[:, 1] * tang[:, 0])
    if np.all(cr > 0.0) and np.all(cr_arc > 0.0):
        # fan of straight and curved triangles from the centroid
        tris = np.stack([np.broadcast_to(apex, a.shape), a, b], axis=1)
        straight = triangles_rule(tris, order)
        eta, w_eta = gauss_legendre01(gauss_points_for_degree(order + 1))
        cpts = apex[None, None, :] + eta[None, :, None] * rel[:, None, :]
        cw = (cr_arc * w_t)[:, None] * (eta * w_eta)[None, :]
        return QuadratureRule.concatenate([straight, QuadratureRule(cpts.reshape(-1, 2), cw.ravel())])
    # general simple polygon: triangulate, then add the signed region between
    # each chord and the arc (positive where the arc bulges outward)
    base = triangles_rule(triangulate_polygon(poly), order)
    eta, w_eta = gauss_legendre01(gauss_points_for_degree(order))
    cp = arc.p_b - arc.p_a
    det = cp[0] * arc.nu[1] - cp[1] * arc.nu[0]
    lin = pts - gap[:, None] * arc.nu[None, :]
    cpts = lin[:, None, :] + eta[None, :, None] * (gap[:, None, None] * arc.nu[None, None, :])
    cw = (-sigma * det * gap * w_t)[:, None] * w_eta[None, :]
    return QuadratureRule.concatenate([base, QuadratureRule(cpts.reshape(-1, 2), cw.ravel())])


@dataclass(eq=False)
class CutTopology:
    """Cut classification of a (possibly agglomerated) mesh.

    ``face_pieces[f]`` maps side -> list of (start, end) segments of face f
    with positive length; ``cells`` is empty until sub-cells are built.
    """

    mesh: PolyMesh
    levelset: LevelSet | None
    parent_tags: np.ndarray
    face_pieces: list
    n_sub: int = 0
    cells: list = field(default_factory=list)
    parent_to_cell: np.ndarray | None = None

    @property
    def tags(self) -> np.ndarray:
        if self.cells:
            return np.array([int(c.tag) for c in self.cells])
        return self.parent_tags

    def cut_cells(self) -> list[int]:
        return [i for i, c in enumerate(self.cells) if c.is_cut]

    def census(self) -> dict:
        tags = self.tags
        return {
            "inside1": int(np.sum(tags == CellTag.INSIDE1)),
            "inside2": int(np.sum(tags == CellTag.INSIDE2)),
            "cut": int(np.sum(tags == CellTag.CUT)),
        }

    def active_faces(self) -> np.ndarray:
        mask = np.zeros(self.mesh.n_faces, dtype=bool)
        for c in self.cells:
            mask[c.faces] = True
        return mask

    def face_sides(self, f: int) -> tuple:
        return tuple(sorted(self.face_pieces[f]))


def _zero_tol(mesh: PolyMesh, tol: float | None) -> float:
    if tol is not None:
        return tol
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    return ROOT_RTOL * float(np.linalg.norm(hi - lo)) / max(1.0, np.sqrt(mesh.n_cells))


def _face_pieces(A, B, ls: LevelSet, phi_samples, tol: float) -> dict:
    """Split segment A-B at the zeros of phi; returns side -> list of segments."""
    L = float(np.linalg.norm(B - A))
    ts = np.linspace(0.0, 1.0, len(phi_samples))

    def f(t):
        return float(ls.value(A + t * (B - A))[0])

    def dist(t):
        p = A + t * (B - A)
        return abs(float(ls.value(p)[0])) / max(float(np.linalg.norm(ls.gradient(p)[0])), 1e-300)

    grads = np.linalg.norm(ls.gradient(A[None, :] + ts[:, None] * (B - A)[None, :]), axis=1)
    zero = np.abs(phi_samples) <= tol * np.maximum(grads, 1e-300)
    sgn = np.where(zero, 0, np.sign(phi_samples)).astype(int)
    breaks = [0.0, 1.0] + [float(t) for t, z in zip(ts, zero) if z]
    xtol = max(ROOT_RTOL * 1e-3, 0.1 * tol / L)
    for i in range(len(ts) - 1):
        if sgn[i] * sgn[i + 1] < 0:
            breaks.append(brentq(f, ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    breaks = np.unique(np.asarray(breaks))
    keep = [breaks[0]]
    for b in breaks[1:]:
        if (b - keep[-1]) * L > tol:
            keep.append(b)
        else:
            keep[-1] = b if b == 1.0 else keep[-1]
    keep[-1] = 1.0
    keep[0] = 0.0
    intervals = []
    for t0, t1 in zip(keep[:-1], keep[1:]):
        side = 0
        for frac in (0.5, 0.25, 0.75, 0.125, 0.875):
            tm = t0 + frac * (t1 - t0)
            if dist(tm) > tol:
                side = 1 if f(tm) < 0.0 else 2
                break
        if side == 0:
            raise TangentialCutError("level set vanishes along a mesh face (tangential cut)")
        if intervals and intervals[-1][0] == side:
            intervals[-1][2] = t1
        else:
            intervals.append([side, t0, t1])
    out: dict = {}
    for side, t0, t1 in intervals:
        out.setdefault(side, []).append((A + t0 * (B - A), A + t1 * (B - A)))
    return out


def classify_cells(mesh: PolyMesh, ls: LevelSet | None, tol: float | None = None) -> CutTopology:
    """Tag every cell Inside1 / Inside2 / Cut and split the faces at the interface."""
    nf = mesh.n_faces
    if ls is None:
        pieces = [{1: [tuple(mesh.face_points(f))]} for f in range(nf)]
        return CutTopology(mesh, None, np.full(mesh.n_cells, int(CellTag.INSIDE1)), pieces)
    tol = _zero_tol(mesh, tol)
    A = mesh.vertices[mesh.faces[:, 0]]
    B = mesh.vertices[mesh.faces[:, 1]]
    ts = np.linspace(0.0, 1.0, EDGE_SAMPLES + 2)
    pts = A[:, None, :] + ts[None, :, None] * (B - A)[:, None, :]
    phi = ls.value(pts.reshape(-1, 2)).reshape(nf, -1)
    gnorm = np.linalg.norm(ls.gradient(pts.reshape(-1, 2)), axis=1).reshape(nf, -1)
    near = np.abs(phi) <= tol * np.maximum(gnorm, 1e-300)
    simple_neg = np.all(phi < 0.0, axis=1) & ~near.any(axis=1)
    simple_pos = np.all(phi > 0.0, axis=1) & ~near.any(axis=1)
    pieces: list = [None] * nf
    for f in range(nf):
        if simple_neg[f]:
            pieces[f] = {1: [(A[f], B[f])]}
        elif simple_pos[f]:
            pieces[f] = {2: [(A[f], B[f])]}
        else:
            pieces[f] = _face_pieces(A[f], B[f], ls, phi[f], tol)

    tags = np.empty(mesh.n_cells, dtype=int)
    for c in range(mesh.n_cells):
        sides = set()
        for f in mesh.cell_faces[c]:
            sides.update(pieces[f])
        if len(sides) == 2:
            tags[c] = CellTag.CUT
        else:
            (side,) = sides
            tags[c] = side
            poly = mesh.cell_polygon(c)
            ctr = poly.mean(axis=0)
            val = float(ls.value(ctr)[0])
            gn = float(np.linalg.norm(ls.gradient(ctr)[0]))
            if abs(val) > tol * gn and (1 if val < 0 else 2) != side:
                raise UnresolvedInterfaceError(
                    f"cell {c}: interface component inside the cell is not seen by its faces; refine the mesh")
    return CutTopology(mesh, ls, tags, pieces)


def _cell_boundary_pieces(mesh: PolyMesh, pieces, c: int) -> list:
    seq = []
    for f, s in zip(mesh.cell_faces[c], mesh.cell_face_signs[c]):
        segs = [(side, a, b) for side, lst in pieces[f].items() for a, b in lst]
        A, _ = mesh.face_points(f)
        segs.sort(key=lambda x: float(np.linalg.norm(x[1] - A)))
        if s < 0:
            segs = [(side, b, a) for side, a, b in reversed(segs)]
        seq.extend(segs)
    return seq


def _polygon_centroid(polys) -> tuple[np.ndarray, float]:
    tot = 0.0
    mom = np.zeros(2)
    for p in polys:
        x, y = p[:, 0], p[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a = 0.5 * cr.sum()
        tot += a
        mom += np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / 6.0
    return mom / tot, tot


def _split_cut_cell(mesh: PolyMesh, topo: CutTopology, c: int, n_sub: int) -> tuple[dict, dict, InterfaceArc]:
    seq = _cell_boundary_pieces(mesh, topo.face_pieces, c)
    m = len(seq)
    crossings = [j for j in range(m) if seq[j][0] != seq[j - 1][0]]
    if len(crossings) != 2:
        raise UnresolvedInterfaceError(
            f"cell {c}: {len(crossings)} sign changes along the cell boundary; refine the mesh")
    j0, j1 = crossings
    run_a = [seq[j] for j in range(j0, j1)]
    run_b = [seq[j % m] for j in range(j1, j0 + m)]
    x0 = run_a[0][1]
    x1 = run_b[0][1]
    h = mesh.cell_diameter(c)
    arc = InterfaceArc(topo.levelset, np.array(x0, dtype=float), np.array(x1, dtype=float), n_sub, h)
    inner = arc.nodes[1:-1]
    poly_a = np.array([p[1] for p in run_a] + [x1] + list(inner[::-1]))
    poly_b = np.array([p[1] for p in run_b] + [x0] + list(inner))
    parts = {run_a[0][0]: [poly_a], run_b[0][0]: [poly_b]}
    curves = {run_a[0][0]: [(arc, len(run_a), False)], run_b[0][0]: [(arc, len(run_b), True)]}
    return parts, curves, arc


def build_subcells(mesh: PolyMesh, ls: LevelSet | None, topology: CutTopology | None = None,
                   n_sub: int = 16) -> CutTopology:
    """Build sub-cell polygons, interface arcs and per-cell geometry for every cell."""
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")
    topo = topology if topology is not None else classify_cells(mesh, ls)
    cells = []
    for c in range(mesh.n_cells):
        poly = mesh.cell_polygon(c)
        h = polygon_diameter(poly)
        tag = CellTag(int(topo.parent_tags[c]))
        if tag == CellTag.CUT:
            parts, curves, arc = _split_cut_cell(mesh, topo, c, n_sub)
            arcs = [arc]
        else:
            parts, curves, arcs = {int(tag): [poly]}, {int(tag): [None]}, []
        ctr, _ = _polygon_centroid([poly])
        cells.append(CellGeometry(tag, (c,), parts, arcs, mesh.cell_faces[c].copy(),
                                  mesh.cell_face_signs[c].copy(), h, ctr, curves))
    return CutTopology(mesh, topo.levelset, topo.parent_tags, topo.face_pieces, n_sub, cells,
                       np.arange(mesh.n_cells))


def merge_cells(mesh: PolyMesh, members: list[CellGeometry]) -> CellGeometry:
    """Union of several cells: interior faces shared by two members are dropped."""
    if len(members) == 1:
        return members[0]
    parents = tuple(p for m in members for p in m.parents)
    parts: dict = {}
    arcs = []
    count: dict = {}
    sign: dict = {}
    curves: dict = {}
    for m in members:
        for s, polys in m.parts.items():
            parts.setdefault(s, []).extend(polys)
            curves.setdefault(s, []).extend(m.curves.get(s, [None] * len(polys)))
        arcs.extend(m.arcs)
        for f, sg in zip(m.faces, m.signs):
            count[int(f)] = count.get(int(f), 0) + 1
            sign[int(f)] = int(sg)
    faces = np.array([f for f in count if count[f] == 1], dtype=np.int64)
    signs = np.array([sign[f] for f in faces], dtype=np.int64)
    tags = {m.tag for m in members}
    if CellTag.CUT in tags or len(tags) > 1:
        tag = CellTag.CUT
    else:
        tag = tags.pop()
    verts = np.concatenate([mesh.cell_polygon(p) for p in parents])
    h = polygon_diameter(verts)
    ctr, _ = _polygon_centroid([mesh.cell_polygon(p) for p in parents])
    return CellGeometry(tag, parents, parts, arcs, faces, signs, h, ctr, curves)


def interface_quadrature(cell: CellGeometry, order: int) -> tuple[QuadratureRule, np.ndarray]:
    """Projected Gauss rule on T^Gamma and the unit normals n_Gamma at its points."""
    if not cell.is_cut:
        raise ValueError("interface quadrature requested on an uncut cell")
    return cell.interface_rule(order)


def subcell_quadrature(cell: CellGeometry, side: int, order: int) -> QuadratureRule:
    """Rule on the sub-cell T^side; exact to ``order`` when the interface is straight."""
    return cell.quadrature(side, order)


def face_rule(segments, order: int) -> QuadratureRule:
    return QuadratureRule.concatenate(segment_rule(a, b, order) for a, b in segments)


# ----------------------------------------------------------------------------
# diagnostics


def inscribed_ball(polys, h: float, resolution: int = 64) -> tuple[np.ndarray, float]:
    """Sampled estimate of the largest ball inside the union of ``polys``.

    Grid spacing ``h/resolution`` over the bounding box, followed by a
    local pattern search; the returned radius is always a valid lower bound.
    """
    geoms = [shapely.Polygon(p) for p in polys if len(p) >= 3 and abs(signed_area(p)) > 0.0]
    if not geoms:
        return np.zeros(2), 0.0
    region = geoms[0] if len(geoms) == 1 else shapely.union_all(geoms)
    region = shapely.make_valid(region) if not region.is_valid else region
    boundary = region.boundary
    shapely.prepare(region)
    x0, y0, x1, y1 = region.bounds
    step = h / resolution
    xs = np.arange(x0 + 0.5 * step, x1, step) if x1 - x0 > step else np.array([0.5 * (x0 + x1)])
    ys = np.arange(y0 + 0.5 * step, y1, step) if y1 - y0 > step else np.array([0.5 * (y0 + y1)])
    X, Y = np.meshgrid(xs, ys)
    px, py = X.ravel(), Y.ravel()
    rep = region.representative_point()
    px = np.append(px, [rep.x, region.centroid.x])
    py = np.append(py, [rep.y, region.centroid.y])
    inside = shapely.contains_xy(region, px, py)
    if not inside.any():
        return np.array([rep.x, rep.y]), 0.0
    px, py = px[inside], py[inside]
    d = shapely.distance(boundary, shapely.points(px, py))
    best = int(np.argmax(d))
    cx, cy, r = float(px[best]), float(py[best]), float(d[best])
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    dirs[4:] /= np.sqrt(2.0)
    delta = step
    for _ in range(40):
        cand_x = cx + delta * dirs[:, 0]
        cand_y = cy + delta * dirs[:, 1]
        ok = shapely.contains_xy(region, cand_x, cand_y)
        if ok.any():
            dc = shapely.distance(boundary, shapely.points(cand_x[ok], cand_y[ok]))
            j = int(np.argmax(dc))
            if dc[j] > r:
                cx, cy, r = float(cand_x[ok][j]), float(cand_y[ok][j]), float(dc[j])
                continue
        delta *= 0.5
        if delta < 1e-13 * h:
            break
    return np.array([cx, cy]), r


@dataclass(frozen=True)
class BallCheck:
    center: np.ndarray | None
    radius: float
    passed: bool


def check_assumption_ball(cell: CellGeometry, delta: float, resolution: int = 64) -> dict:
    """Per side: sampled inscribed ball of T^i and whether radius >= delta * h_T."""
    if not cell.is_cut:
        return {1: BallCheck(None, np.inf, True), 2: BallCheck(None, np.inf, True)}
    out = {}
    for side in (1, 2):
        ctr, r = inscribed_ball(cell.parts[side], cell.h, resolution)
        out[side] = BallCheck(ctr, r, r >= delta * cell.h)
    return out


def check_assumption_gamma(cell: CellGeometry, ls: LevelSet | None = None,
                           n_samples: int = 129) -> tuple[np.ndarray, float]:
    """Achieved interface-resolution parameter gamma_T and the point x_hat realising it.

    Candidates: s0 -/+ 2 h_T n_Gamma(s0) for the arc midpoints s0, and the
    inscribed-ball centres of the sub-cells. A candidate scores 0 if some
    tangent line of the sampled interface passes through it.
    """
    if not cell.is_cut:
        raise ValueError("gamma check requested on an uncut cell")
    h = cell.h
    samples = [a.samples(n_samples) for a in cell.arcs]
    pts = np.concatenate([s for s, _ in samples])
    nrm = np.concatenate([n for _, n in samples])
    if ls is not None:
        nrm = ls.normal(pts)
    cands = []
    for a in cell.arcs:
        mid, _ = a.evaluate(np.array([0.5]))
        n0 = a.levelset.normal(mid)[0]
        cands += [mid[0] - 2.0 * h * n0, mid[0] + 2.0 * h * n0]
    for side in (1, 2):
        ctr, r = inscribed_ball(cell.parts[side], h, 16)
        if r > 0.0:
            cands.append(ctr)
    best_x, best_g = None, 0.0
    for x in cands:
        f = np.einsum("ij,ij->i", pts - x[None, :], nrm)
        if f.min() < 0.0 < f.max():
            g = 0.0
        else:
            dist = np.linalg.norm(pts - x[None, :], axis=1)
            g = min(float((h / dist).min()), float(np.abs(f).min() / h))
        if g > best_g:
            best_x, best_g = x, g
    if best_g <= 0.0:
        raise InterfaceNotResolvedError(
            f"interface not resolved in cell {cell.parents}: no point sees Gamma transversally; refine the mesh")
    return best_x, best_g


@dataclass(frozen=True)
class ResolutionReport:
    passed: bool
    h: float
    curvature_bound: float
    hM: float
    boundary_cut_cells: tuple
    messages: tuple


def check_resolution(mesh: PolyMesh, ls: LevelSet, topology: CutTopology | None = None) -> ResolutionReport:
    """h*M <= 1 and no boundary-adjacent cell cut."""
    M = getattr(ls, "curvature_bound", None)
    if M is None:
        raise ValueError("check_resolution needs a level set with a curvature bound")
    topo = topology if topology is not None else classify_cells(mesh, ls)
    h = mesh.h()
    hm = h * M
    bnd_cut = []
    for c in range(mesh.n_cells):
        if topo.parent_tags[c] == CellTag.CUT and mesh.boundary_faces[mesh.cell_faces[c]].any():
            bnd_cut.append(c)
    msgs = []
    if hm > 1.0:
        msgs.append(f"h*M = {hm:.4g} > 1: refine the mesh to at least {int(np.ceil(hm))}x finer")
    if bnd_cut:
        msgs.append(f"{len(bnd_cut)} boundary-adjacent cells are cut: interface too close to the boundary")
    return ResolutionReport(not msgs, h, float(M), hm, tuple(bnd_cut), tuple(msgs))
