"""Local cell agglomeration: merge badly cut cells into a neighbour so that
every cut cell of the new mesh contains a ball of radius delta* h_T on
both sides of the interface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    BallCheck,
    CellTag,
    CutTopology,
    GeometryError,
    check_assumption_ball,
    merge_cells,
)
from .mesh import CellMeta, compute_meta, estimate_rho

__all__ = [
    "AgglomeratedMesh",
    "AgglomerationError",
    "CutPartition",
    "NeighborChoice",
    "agglomerate",
    "default_delta",
    "delta_star",
    "partition_cut_cells",
    "run_agglomeration",
    "select_neighbors",
]


class AgglomerationError(GeometryError):
    pass


def default_delta(rho: float) -> float:
    """Cut threshold used to sort cut cells: rho^3 / 4."""
    return 0.25 * rho ** 3


def delta_star(rho: float, delta: float) -> float:
    """Threshold guaranteed after merging: rho * delta / 3."""
    return rho * delta / 3.0


@dataclass(frozen=True)
class CutPartition:
    ok: tuple
    ko1: tuple
    ko2: tuple
    delta: float
    balls: dict

    def side_radius(self, c: int, side: int) -> float:
        return self.balls[c][side].radius


def partition_cut_cells(topology: CutTopology, delta: float, resolution: int = 64) -> CutPartition:
    """Sort the cut parent cells into OK, KO1 (side 1 too thin) and KO2."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    ok, ko1, ko2, balls = [], [], [], {}
    for c in topology.cut_cells():
        cell = topology.cells[c]
        res = check_assumption_ball(cell, delta, resolution)
        balls[c] = res
        p1, p2 = res[1].passed, res[2].passed
        if p1 and p2:
            ok.append(c)
        elif not p1 and not p2:
            raise AgglomerationError(
                f"cell {c}: both sub-cells fail the ball test at delta={delta:.3g}; "
                f"the mesh is too coarse for this interface, refine it (h_T={cell.h:.3g})")
        elif not p1:
            ko1.append(c)
        else:
            ko2.append(c)
    return CutPartition(tuple(ok), tuple(ko1), tuple(ko2), float(delta), balls)


@dataclass(frozen=True)
class NeighborChoice:
    n1: dict
    n2: dict
    ko2_hat: frozenset

    def __len__(self):
        return len(self.n1) + len(self.n2)


def _pick(topology: CutTopology, partition: CutPartition, meta, c: int, side: int, allowed: set) -> int:
    mesh = topology.mesh
    face_nb = mesh.face_neighbors(c)
    best_key, best = None, -1
    for cand in sorted(meta[c].neighbors):
        if cand == c or cand not in allowed:
            continue
        if cand in partition.balls:
            radius = partition.side_radius(cand, side)
        else:
            radius = meta[cand].radius
        key = (0 if cand in face_nb else 1, -radius, cand)
        if best_key is None or key < best_key:
            best_key, best = key, cand
    if best < 0:
        raise AgglomerationError(
            f"cell {c}: no suitable neighbour for side {side} (h_T={meta[c].h:.3g}, "
            f"delta={partition.delta:.3g}); refine the mesh")
    return best


def select_neighbors(partition: CutPartition, topology: CutTopology,
                     meta: list[CellMeta] | None = None) -> NeighborChoice:
    """Choose N_1(T) for T in KO1, then N_2(T) for the KO2 cells not already chosen.

    Candidates prefer face neighbours, then the largest inscribed radius on
    the side in question, then the lowest index.
    """
    if meta is None:
        meta = compute_meta(topology.mesh)
    tags = topology.parent_tags
    ok = set(partition.ok)
    ko1, ko2 = set(partition.ko1), set(partition.ko2)
    inside1 = set(np.flatnonzero(tags == CellTag.INSIDE1).tolist())
    inside2 = set(np.flatnonzero(tags == CellTag.INSIDE2).tolist())
    n1 = {}
    for c in partition.ko1:
        n1[c] = _pick(topology, partition, meta, c, 1, ok | inside1 | ko2)
    ko2_hat = frozenset(v for v in n1.values() if v in ko2)
    n2 = {}
    for c in partition.ko2:
        if c in ko2_hat:
            continue
        n2[c] = _pick(topology, partition, meta, c, 2, ok | inside2 | ko1)
    return NeighborChoice(n1, n2, ko2_hat)


@dataclass(eq=False)
class AgglomeratedMesh:
    """Grouping of parent cells into computational cells.

    ``groups[i]`` lists the parents of cell i (seed first when merged) and
    ``seeds[i]`` is the seed parent or -1 for an untouched cell.
    """

    groups: tuple
    seeds: tuple
    parent_to_cell: np.ndarray
    topology: CutTopology
    delta: float
    delta_star: float
    rho: float

    @property
    def n_cells(self) -> int:
        return len(self.groups)

    def merged(self) -> list[int]:
        return [i for i, g in enumerate(self.groups) if len(g) > 1]


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = min(ra, rb), max(ra, rb)
            self.parent[hi] = lo


def _interface_connected(cell, tol: float) -> bool:
    arcs = cell.arcs
    if len(arcs) <= 1:
        return True
    uf = _UnionFind()
    ends = [(a.p_a, a.p_b) for a in arcs]
    for i in range(len(arcs)):
        uf.find(i)
        for j in range(i):
            if any(np.linalg.norm(p - q) <= tol for p in ends[i] for q in ends[j]):
                uf.union(i, j)
    return len({uf.find(i) for i in range(len(arcs))}) == 1


def agglomerate(topology: CutTopology, partition: CutPartition, choice: NeighborChoice,
                rho: float, resolution: int = 64) -> AgglomeratedMesh:
    """Form T* = seed plus the KO cells that chose it; rebuild the cut topology.

    Overlapping groups (a KO cell that is both merged and chosen as a seed)
    are joined. Every cut cell of the result is checked at delta*.
    """
    mesh = topology.mesh
    uf = _UnionFind()
    seed_of_root = {}
    for c, nb in list(choice.n1.items()) + list(choice.n2.items()):
        uf.union(c, nb)
    seeds = set(choice.n1.values()) | set(choice.n2.values())
    members: dict = {}
    for c in sorted(uf.parent):
        members.setdefault(uf.find(c), []).append(c)
    for root, grp in members.items():
        cand = sorted(s for s in grp if s in seeds)
        seed_of_root[root] = cand[0]

    in_group = {c: root for root, grp in members.items() for c in grp}
    order = []
    done = set()
    for c in range(mesh.n_cells):
        if c in in_group:
            root = in_group[c]
            if root not in done:
                done.add(root)
                seed = seed_of_root[root]
                grp = [seed] + [p for p in members[root] if p != seed]
                order.append((tuple(grp), seed))
        else:
            order.append(((c,), -1))

    cells, parent_to_cell = [], np.empty(mesh.n_cells, dtype=np.int64)
    d_star = delta_star(rho, partition.delta)
    tol = 1e-9 * float(np.ptp(mesh.vertices, axis=0).max())
    for i, (grp, seed) in enumerate(order):
        parts = [topology.cells[p] for p in grp]
        cell = merge_cells(mesh, parts) if len(grp) > 1 else parts[0]
        parent_to_cell[list(grp)] = i
        if len(grp) > 1 and cell.is_cut:
            if not _interface_connected(cell, tol):
                raise AgglomerationError(
                    f"agglomerate of parents {grp}: interface is not a single connected piece; refine the mesh")
            res = check_assumption_ball(cell, d_star, resolution)
            if not (res[1].passed and res[2].passed):
                raise AgglomerationError(
                    f"agglomerate of parents {grp} fails the ball test at delta*={d_star:.3g} "
                    f"(radii {res[1].radius:.3g}, {res[2].radius:.3g}, h={cell.h:.3g}); refine the mesh")
        cells.append(cell)
    new_topo = CutTopology(mesh, topology.levelset, topology.parent_tags, topology.face_pieces,
                           topology.n_sub, cells, parent_to_cell)
    return AgglomeratedMesh(tuple(g for g, _ in order), tuple(s for _, s in order), parent_to_cell,
                            new_topo, partition.delta, d_star, rho)


def run_agglomeration(topology: CutTopology, meta: list[CellMeta] | None = None,
                      delta: float | None = None, resolution: int = 64):
    """Partition, select neighbours and merge; returns (AgglomeratedMesh, CutPartition, NeighborChoice)."""
    if meta is None:
        meta = compute_meta(topology.mesh, resolution)
    rho = estimate_rho(topology.mesh, meta)
    if delta is None:
        delta = default_delta(rho)
    partition = partition_cut_cells(topology, delta, resolution)
    choice = select_neighbors(partition, topology, meta)
    agg = agglomerate(topology, partition, choice, rho, resolution)
    return agg, partition, choice


def ball_summary(checks: dict[int, BallCheck]) -> tuple[float, float]:
    return checks[1].radius, checks[2].radius
