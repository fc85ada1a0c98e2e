"""Global face unknowns, assembly of the condensed skeleton system, sparse
direct solve and recovery of the cell unknowns."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .approx import FaceBasis, build_face_basis
from .geometry import CutTopology
from .hho import LocalOperatorSet, recover_cell

log = logging.getLogger(__name__)

__all__ = [
    "AssemblyError",
    "GlobalDofMap",
    "SkeletonSystem",
    "SolveStats",
    "SolverError",
    "assemble",
    "build_dof_map",
    "build_face_bases",
    "dirichlet_values",
    "recover",
    "solve",
    "write_matrix_market",
]

RESIDUAL_TOL = 1e-10


class AssemblyError(RuntimeError):
    pass


class SolverError(AssemblyError):
    pass


def build_face_bases(topology: CutTopology, k: int, faces=None) -> dict:
    """One orthonormal P^k basis per (face, side) piece, in the face's own frame."""
    mesh = topology.mesh
    out = {}
    it = range(mesh.n_faces) if faces is None else faces
    for f in it:
        a, b = mesh.face_points(int(f))
        for side, segs in topology.face_pieces[int(f)].items():
            out[(int(f), side)] = build_face_basis(a, b, segs, k)
    return out


@dataclass(frozen=True, eq=False)
class GlobalDofMap:
    """Blocks of k+1 unknowns per (face, side), numbered by face then side.

    Boundary blocks are eliminated and numbered separately.
    """

    k: int
    active: tuple
    eliminated: tuple
    index: dict

    @property
    def block_size(self) -> int:
        return self.k + 1

    @property
    def n_dofs(self) -> int:
        return len(self.active) * self.block_size

    @property
    def n_eliminated(self) -> int:
        return len(self.eliminated) * self.block_size

    def block(self, key) -> tuple[bool, np.ndarray]:
        """(is_active, global indices) of a (face, side) block."""
        active, i = self.index[key]
        n = self.block_size
        return active, np.arange(i * n, (i + 1) * n)

    def gather(self, blocks) -> tuple[np.ndarray, np.ndarray]:
        """Global indices of a local face layout: active indices (or -1) and eliminated indices (or -1)."""
        act, eli = [], []
        n = self.block_size
        for key in blocks:
            active, i = self.index[key]
            rng = np.arange(i * n, (i + 1) * n)
            if active:
                act.append(rng)
                eli.append(np.full(n, -1))
            else:
                act.append(np.full(n, -1))
                eli.append(rng)
        if not act:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(act), np.concatenate(eli)


def build_dof_map(topology: CutTopology, k: int) -> GlobalDofMap:
    mesh = topology.mesh
    used = sorted({int(f) for c in topology.cells for f in c.faces})
    active, eliminated, index = [], [], {}
    for f in used:
        sides = sorted(topology.face_pieces[f])
        boundary = bool(mesh.boundary_faces[f])
        if boundary and len(sides) > 1:
            raise AssemblyError(f"boundary face {f} is cut by the interface; move the interface away from the boundary")
        for s in sides:
            if boundary:
                index[(f, s)] = (False, len(eliminated))
                eliminated.append((f, s))
            else:
                index[(f, s)] = (True, len(active))
                active.append((f, s))
    return GlobalDofMap(k, tuple(active), tuple(eliminated), index)


def dirichlet_values(dofmap: GlobalDofMap, face_bases: dict, problem) -> np.ndarray:
    """Face projections of the boundary data (zero for homogeneous data)."""
    out = np.zeros(dofmap.n_eliminated)
    if problem is None or problem.homogeneous_dirichlet:
        return out
    n = dofmap.block_size
    order = 2 * dofmap.k + 4
    for i, (f, s) in enumerate(dofmap.eliminated):
        g = problem.dirichlet(s)
        if g is None:
            continue
        basis: FaceBasis = face_bases[(f, s)]
        r = basis.rule(order)
        out[i * n:(i + 1) * n] = basis.values(r.points).T @ (r.weights * g(r.points))
    return out


@dataclass(eq=False)
class SkeletonSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: GlobalDofMap
    dirichlet: np.ndarray


@dataclass
class SolveStats:
    residual: float
    min_pivot: float
    max_pivot: float
    nonpositive_pivots: int
    n_dofs: int
    nnz: int

    @property
    def pivot_ratio(self) -> float:
        return self.min_pivot / self.max_pivot if self.max_pivot > 0 else 0.0


def assemble(ops: list[LocalOperatorSet], dofmap: GlobalDofMap, dirichlet: np.ndarray | None = None) -> SkeletonSystem:
    """Scatter-add the condensed cell matrices; eliminated blocks move to the right-hand side."""
    n = dofmap.n_dofs
    if dirichlet is None:
        dirichlet = np.zeros(dofmap.n_eliminated)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for op in ops:
        act, eli = dofmap.gather(op.layout.blocks)
        Sc = op.Sc
        rc = op.condensed_rhs()
        a = act >= 0
        e = eli >= 0
        if e.any():
            rc = rc - Sc[:, e] @ dirichlet[eli[e]]
        ia = act[a]
        assert ia.size == 0 or (ia.min() >= 0 and ia.max() < n)
        np.add.at(rhs, ia, rc[a])
        sub = Sc[np.ix_(a, a)]
        rows.append(np.repeat(ia, ia.size))
        cols.append(np.tile(ia, ia.size))
        vals.append(sub.ravel())
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    A = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A = ((A + A.T) * 0.5).tocsr()
    return SkeletonSystem(A, rhs, dofmap, dirichlet)


def solve(system: SkeletonSystem) -> tuple[np.ndarray, SolveStats]:
    """Sparse LU in symmetric mode (diagonal pivoting) with a residual contract."""
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), SolveStats(0.0, np.inf, np.inf, 0, 0, 0)
    try:
        lu = splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    piv = lu.U.diagonal()
    nonpos = int(np.sum(piv <= 0.0))
    x = lu.solve(b)
    bn = float(np.linalg.norm(b))
    res = float(np.linalg.norm(A @ x - b))
    rel = res / bn if bn > 0 else res
    stats = SolveStats(rel, float(np.abs(piv).min()), float(np.abs(piv).max()), nonpos, n, int(A.nnz))
    if nonpos:
        log.warning("factorisation reports %d nonpositive pivots (min pivot %.3g)", nonpos, piv.min())
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise SolverError(f"relative residual {rel:.3g} exceeds {RESIDUAL_TOL:g} "
                          f"(pivots in [{stats.min_pivot:.3g}, {stats.max_pivot:.3g}], {nonpos} nonpositive)")
    return x, stats


def recover(x: np.ndarray, ops: list[LocalOperatorSet], dofmap: GlobalDofMap,
            dirichlet: np.ndarray | None = None) -> list[np.ndarray]:
    """Full local unknown vectors (cell blocks then face blocks) for every cell."""
    if dirichlet is None:
        dirichlet = np.zeros(dofmap.n_eliminated)
    out = []
    for op in ops:
        act, eli = dofmap.gather(op.layout.blocks)
        uf = np.zeros(act.size)
        a = act >= 0
        uf[a] = x[act[a]]
        e = eli >= 0
        uf[e] = dirichlet[eli[e]]
        uc = recover_cell(op, uf)
        out.append(np.concatenate([uc, uf]))
    return out


def write_matrix_market(system: SkeletonSystem, path) -> None:
    """Coordinate-format dump (lower triangle, symmetric)."""
    A = sp.tril(system.matrix).tocoo()
    order = np.lexsort((A.row, A.col))
    lines = ["%%MatrixMarket matrix coordinate real symmetric",
             f"{A.shape[0]} {A.shape[1]} {A.nnz}"]
    lines += [f"{A.row[i] + 1} {A.col[i] + 1} {A.data[i]:.17g}" for i in order]
    Path(path).write_text("\n".join(lines) + "\n")
