"""Polygonal meshes: storage, Cartesian generation, connectivity and regularity metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import signed_area

__all__ = [
    "CellMeta",
    "MeshError",
    "PolyMesh",
    "compute_meta",
    "estimate_rho",
    "generate_cartesian",
    "read_mesh",
    "write_mesh",
]


class MeshError(ValueError):
    """Raised for invalid mesh input."""


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Immutable polygonal mesh.

    Faces are stored with the lower vertex index first; ``cell_face_signs``
    is +1 when the cell traverses the face in stored direction.
    """

    vertices: np.ndarray
    cells: tuple

    faces: np.ndarray = field(init=False, repr=False)
    cell_faces: tuple = field(init=False, repr=False)
    cell_face_signs: tuple = field(init=False, repr=False)
    face_cells: np.ndarray = field(init=False, repr=False)
    boundary_faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        cells = []
        for loop in self.cells:
            loop = np.asarray(loop, dtype=np.int64).ravel()
            if loop.size < 3:
                raise MeshError("cells need at least 3 vertices")
            if loop.min() < 0 or loop.max() >= len(verts):
                raise MeshError("cell references a missing vertex")
            area = signed_area(verts[loop])
            if area <= 0.0:
                raise MeshError("cells must be counter-clockwise with positive area")
            cells.append(loop)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", tuple(cells))

        index: dict[tuple[int, int], int] = {}
        faces: list[tuple[int, int]] = []
        face_cells: list[list[int]] = []
        cell_faces, cell_signs = [], []
        for c, loop in enumerate(cells):
            fl, sl = [], []
            for a, b in zip(loop, np.roll(loop, -1)):
                a, b = int(a), int(b)
                key = (a, b) if a < b else (b, a)
                f = index.get(key)
                if f is None:
                    f = index[key] = len(faces)
                    faces.append(key)
                    face_cells.append([c, -1])
                else:
                    if face_cells[f][1] != -1:
                        raise MeshError(f"face {key} shared by more than two cells")
                    face_cells[f][1] = c
                fl.append(f)
                sl.append(1 if a < b else -1)
            cell_faces.append(np.asarray(fl, dtype=np.int64))
            cell_signs.append(np.asarray(sl, dtype=np.int64))
        fc = np.asarray(face_cells, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "faces", np.asarray(faces, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "cell_faces", tuple(cell_faces))
        object.__setattr__(self, "cell_face_signs", tuple(cell_signs))
        object.__setattr__(self, "face_cells", fc)
        object.__setattr__(self, "boundary_faces", fc[:, 1] < 0)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def cell_polygon(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c]]

    def cell_area(self, c: int) -> float:
        return signed_area(self.cell_polygon(c))

    def cell_areas(self) -> np.ndarray:
        return np.array([self.cell_area(c) for c in range(self.n_cells)])

    def face_points(self, f: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.faces[f]
        return self.vertices[a], self.vertices[b]

    def face_lengths(self) -> np.ndarray:
        d = self.vertices[self.faces[:, 1]] - self.vertices[self.faces[:, 0]]
        return np.linalg.norm(d, axis=1)

    def cell_diameter(self, c: int) -> float:
        return polygon_diameter(self.cell_polygon(c))

    def vertex_cells(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self.vertices))]
        for c, loop in enumerate(self.cells):
            for v in loop:
                out[int(v)].append(c)
        return out

    def vertex_neighbors(self) -> list[frozenset]:
        """Delta(T): cells sharing at least one vertex with T (T included)."""
        vc = self.vertex_cells()
        return [frozenset(c2 for v in loop for c2 in vc[int(v)]) for loop in self.cells]

    def face_neighbors(self, c: int) -> set[int]:
        out = set()
        for f in self.cell_faces[c]:
            for c2 in self.face_cells[f]:
                if c2 >= 0 and c2 != c:
                    out.add(int(c2))
        return out

    def bounding_box(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def boundary_measure_area(self) -> float:
        """Area enclosed by the boundary faces (equals |Omega| for a valid tiling)."""
        total = 0.0
        for c, fl in enumerate(self.cell_faces):
            for f, s in zip(fl, self.cell_face_signs[c]):
                if self.boundary_faces[f]:
                    a, b = self.faces[f] if s > 0 else self.faces[f][::-1]
                    pa, pb = self.vertices[a], self.vertices[b]
                    total += 0.5 * (pa[0] * pb[1] - pb[0] * pa[1])
        return total

    def h(self) -> float:
        return max(self.cell_diameter(c) for c in range(self.n_cells))


def polygon_diameter(pts) -> float:
    pts = np.asarray(pts, dtype=float)
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=-1).max()))


def generate_cartesian(nx: int, ny: int, domain=((0.0, 1.0), (0.0, 1.0)),
                       perturbation: float = 0.0, seed: int | None = None) -> PolyMesh:
    """Axis-aligned quadrilateral mesh of a rectangle.

    ``perturbation`` moves interior vertices by up to that fraction of the
    local cell size, deterministically from ``seed``.
    """
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate rectangle")
    if not 0.0 <= perturbation <= 0.2:
        raise MeshError("perturbation must lie in [0, 0.2]")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    if perturbation > 0.0:
        rng = np.random.default_rng(seed)
        dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
        shift = rng.uniform(-1.0, 1.0, size=verts.shape) * perturbation * np.array([dx, dy])
        on_bnd = (np.isclose(verts[:, 0], x0) | np.isclose(verts[:, 0], x1)
                  | np.isclose(verts[:, 1], y0) | np.isclose(verts[:, 1], y1))
        shift[on_bnd] = 0.0
        verts = verts + shift
    cells = []
    for j in range(ny):
        for i in range(nx):
            v0 = j * (nx + 1) + i
            cells.append((v0, v0 + 1, v0 + nx + 2, v0 + nx + 1))
    return PolyMesh(verts, tuple(cells))


@dataclass(frozen=True)
class CellMeta:
    h: float
    center: np.ndarray
    radius: float
    neighbors: frozenset


def compute_meta(mesh: PolyMesh, resolution: int = 64) -> list[CellMeta]:
    from .geometry import inscribed_ball

    neigh = mesh.vertex_neighbors()
    cache: dict[bytes, tuple[np.ndarray, float]] = {}
    out = []
    for c in range(mesh.n_cells):
        poly = mesh.cell_polygon(c)
        h = polygon_diameter(poly)
        key = _shape_key(poly)
        if key not in cache:
            ctr, r = inscribed_ball([poly - poly[0]], h, resolution)
            cache[key] = (ctr, r)
        ctr, r = cache[key]
        out.append(CellMeta(h=h, center=ctr + poly[0], radius=r, neighbors=neigh[c]))
    return out


def _shape_key(poly: np.ndarray) -> bytes:
    rel = poly - poly[0]
    scale = max(float(np.abs(rel).max()), 1e-300)
    return np.round(rel / scale, 12).tobytes() + np.float64(scale).round(14).tobytes()


def estimate_rho(mesh: PolyMesh, meta: list[CellMeta] | None = None) -> float:
    """min over cells of r_T/h_T and of min/max diameter ratios over Delta(T)."""
    if meta is None:
        meta = compute_meta(mesh)
    hs = np.array([m.h for m in meta])
    ball = min(m.radius / m.h for m in meta)
    ratio = 1.0
    for m in meta:
        local = hs[list(m.neighbors)]
        ratio = min(ratio, local.min() / local.max())
    return float(min(ball, ratio))


def write_mesh(mesh: PolyMesh, path) -> None:
    """Write the plain-text format.

    ::

        polymesh 2d
        <nv>
        x y            (nv lines)
        <nc>
        m v0 ... v(m-1)  (nc lines, counter-clockwise)
    """
    lines = ["polymesh 2d", str(len(mesh.vertices))]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(str(mesh.n_cells))
    lines += [" ".join([str(len(c))] + [str(int(v)) for v in c]) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> PolyMesh:
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    if not tokens or tokens[0].split() != ["polymesh", "2d"]:
        raise MeshError("missing 'polymesh 2d' header")
    try:
        nv = int(tokens[1])
        verts = np.array([[float(t) for t in tokens[2 + i].split()] for i in range(nv)])
        nc = int(tokens[2 + nv])
        cells = []
        for i in range(nc):
            parts = [int(t) for t in tokens[3 + nv + i].split()]
            if parts[0] != len(parts) - 1:
                raise MeshError(f"cell {i}: vertex count mismatch")
            cells.append(tuple(parts[1:]))
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file: {exc}") from exc
    return PolyMesh(verts.reshape(-1, 2), tuple(cells))
