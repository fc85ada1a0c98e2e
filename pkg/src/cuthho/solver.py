"""End-to-end pipeline: cut geometry, agglomeration, local operators,
global solve and evaluation of the discrete solution."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .agglomerate import (
    AgglomeratedMesh,
    CutPartition,
    NeighborChoice,
    run_agglomeration,
)
from .geometry import (
    CutTopology,
    GeometryError,
    ResolutionReport,
    build_subcells,
    check_resolution,
    classify_cells,
)
from .hho import (
    CellData,
    LocalOperatorSet,
    build_cell_data,
    cell_face_blocks,
    local_rhs,
    local_system,
)
from .levelset import LevelSet
from .mesh import PolyMesh, _shape_key, compute_meta
from .problem import InterfaceProblem
from .system import (
    GlobalDofMap,
    SkeletonSystem,
    SolveStats,
    assemble,
    build_dof_map,
    build_face_bases,
    dirichlet_values,
    recover,
    solve,
)

log = logging.getLogger(__name__)

__all__ = ["Discretization", "PipelineError", "Solution", "default_n_sub", "discretize", "solve_problem"]


class PipelineError(GeometryError):
    pass


def default_n_sub(k: int) -> int:
    return 4 * (k + 1) ** 2


@dataclass(eq=False)
class Discretization:
    """Mesh, cut topology after agglomeration and the diagnostics gathered on the way."""

    mesh: PolyMesh
    levelset: LevelSet | None
    n_sub: int
    parent_topology: CutTopology
    topology: CutTopology
    agglomeration: AgglomeratedMesh | None
    partition: CutPartition | None
    choice: NeighborChoice | None
    resolution: ResolutionReport | None
    meta: list = field(repr=False, default=None)

    @property
    def h(self) -> float:
        return max(c.h for c in self.topology.cells)

    @property
    def n_cells(self) -> int:
        return len(self.topology.cells)


def discretize(mesh: PolyMesh, levelset: LevelSet | None, n_sub: int = 16, delta: float | None = None,
               agglomerate: bool = True, check: bool = True, ball_resolution: int = 64) -> Discretization:
    """Classify, split and agglomerate.

    With ``check`` the resolution diagnostics (h M <= 1, interface away from
    the boundary) must pass, otherwise ``PipelineError`` is raised.
    """
    base = classify_cells(mesh, levelset)
    topo = build_subcells(mesh, levelset, base, n_sub)
    report = None
    if levelset is not None and getattr(levelset, "curvature_bound", None) is not None:
        report = check_resolution(mesh, levelset, base)
        if check and not report.passed:
            raise PipelineError("; ".join(report.messages))
    agg = part = choice = meta = None
    final = topo
    if agglomerate and topo.cut_cells():
        meta = compute_meta(mesh, ball_resolution)
        agg, part, choice = run_agglomeration(topo, meta, delta, ball_resolution)
        final = agg.topology
    return Discretization(mesh, levelset, n_sub, topo, final, agg, part, choice, report, meta)


@dataclass(eq=False)
class Solution:
    disc: Discretization
    problem: InterfaceProblem
    k: int
    ops: list
    local: list
    dofmap: GlobalDofMap
    system: SkeletonSystem
    stats: SolveStats
    face_bases: dict = field(repr=False, default=None)

    def cell_data(self, i: int) -> CellData:
        return self.ops[i].data

    def coefficients(self, i: int, side: int) -> np.ndarray:
        lay = self.ops[i].layout
        return self.local[i][lay.cell_slice(side)]

    def energy(self) -> float:
        return float(sum(u @ op.A @ u for u, op in zip(self.local, self.ops)))

    def load(self) -> float:
        return float(sum(u @ op.rhs for u, op in zip(self.local, self.ops)))

    def user_side(self, side: int) -> int:
        return 3 - side if self.problem.swapped else side

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Cell polynomial values at points and the (user-facing) side used; NaN outside the mesh."""
        import shapely

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mesh = self.disc.mesh
        if not hasattr(self, "_tree"):
            polys = [shapely.Polygon(mesh.cell_polygon(c)) for c in range(mesh.n_cells)]
            self._tree = shapely.STRtree(polys)
        geoms = shapely.points(pts[:, 0], pts[:, 1])
        idx = self._tree.query(geoms, predicate="intersects")
        owner = np.full(len(pts), -1)
        # lowest parent index wins on shared edges
        for p, c in zip(idx[0][::-1], idx[1][::-1]):
            owner[p] = c
        ls = self.problem.levelset
        side = np.ones(len(pts), dtype=int)
        if ls is not None:
            side = np.where(ls.value(pts) < 0.0, 1, 2)
        vals = np.full(len(pts), np.nan)
        p2c = self.disc.topology.parent_to_cell
        for j in range(len(pts)):
            if owner[j] < 0:
                continue
            i = int(p2c[owner[j]])
            data = self.ops[i].data
            s = int(side[j]) if data.is_cut else data.layout.sides[0]
            vals[j] = data.bases[s].values(pts[j:j + 1])[0] @ self.coefficients(i, s)
            side[j] = s
        return vals, np.array([self.user_side(int(s)) for s in side])


def _uncut_key(mesh: PolyMesh, geom, k: int, kappa: float) -> bytes | None:
    if len(geom.parents) != 1:
        return None
    poly = mesh.cell_polygon(geom.parents[0])
    return _shape_key(poly) + np.asarray(geom.signs, dtype=np.int8).tobytes() + repr((k, kappa)).encode()


def build_local_operators(disc: Discretization, problem: InterfaceProblem, k: int, face_bases: dict,
                          eta: float | None = None, check_coercivity: bool = True, threads: int = 1,
                          cache: bool = True) -> list[LocalOperatorSet]:
    topo = disc.topology
    mesh = disc.mesh
    kappa = {1: problem.kappa1, 2: problem.kappa2}
    templates: dict = {}
    out: list = [None] * len(topo.cells)
    cut_idx = []
    for i, geom in enumerate(topo.cells):
        faces = cell_face_blocks(mesh, topo, geom, face_bases)
        if geom.is_cut:
            cut_idx.append((i, faces))
            continue
        key = _uncut_key(mesh, geom, k, kappa[geom.sides[0]]) if cache else None
        if key is not None and key in templates:
            tdata, tops = templates[key]
            data = tdata.translated(geom.center - tdata.geom.center, geom, faces)
            ops = replace(tops, data=data)
            out[i] = ops.with_rhs(local_rhs(data, problem))
        else:
            data = build_cell_data(geom, faces, k, kappa)
            ops = local_system(data, problem)
            if key is not None:
                templates[key] = (data, replace(ops, rhs=None))
            out[i] = ops

    def work(item):
        i, faces = item
        data = build_cell_data(topo.cells[i], faces, k, kappa)
        return i, local_system(data, problem, eta, check_coercivity)

    if threads and threads > 1 and len(cut_idx) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cut_idx))
    else:
        results = [work(it) for it in cut_idx]
    for i, ops in results:
        out[i] = ops
    return out


def solve_problem(disc: Discretization, problem: InterfaceProblem, k: int, eta: float | None = None,
                  check_coercivity: bool = True, threads: int = 1, cache: bool = True) -> Solution:
    """Assemble, condense, solve and recover. ``eta=None`` calibrates per cut cell."""
    if k < 0:
        raise ValueError("k must be >= 0")
    prob = problem.normalized()
    if prob.swapped and disc.levelset is not None:
        # geometry was built for the user's sign convention; rebuild for the swapped one
        disc = discretize(disc.mesh, prob.levelset, disc.n_sub,
                          disc.partition.delta if disc.partition else None,
                          disc.agglomeration is not None or bool(disc.parent_topology.cut_cells()),
                          check=False)
    faces_used = sorted({int(f) for c in disc.topology.cells for f in c.faces})
    face_bases = build_face_bases(disc.topology, k, faces_used)
    ops = build_local_operators(disc, prob, k, face_bases, eta, check_coercivity, threads, cache)
    dofmap = build_dof_map(disc.topology, k)
    gvals = dirichlet_values(dofmap, face_bases, prob)
    system = assemble(ops, dofmap, gvals)
    x, stats = solve(system)
    local = recover(x, ops, dofmap, gvals)
    return Solution(disc, prob, k, ops, local, dofmap, system, stats, face_bases)
