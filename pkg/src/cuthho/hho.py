"""Cell-local HHO operators for uncut and cut cells.

Local unknowns are ordered cell blocks first (one per side present, degree
k+1) followed by face blocks (one per (face, side) of the cell boundary,
degree k). Uncut cells are the one-sided special case of the cut
formulas: the Nitsche form reduces to the stiffness matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, null_space

from .approx import FaceBasis, build_cell_basis, poly_dim
from .geometry import CellGeometry
from .problem import InterfaceProblem
from .quadrature import QuadratureRule

__all__ = [
    "ETA_SAFETY",
    "CellData",
    "CoercivityError",
    "CondensationError",
    "FaceBlock",
    "HHOError",
    "LocalDofLayout",
    "LocalOperatorSet",
    "build_cell_data",
    "calibrate_eta",
    "coercivity_constant",
    "condense",
    "interface_operators",
    "interpolate",
    "local_rhs",
    "local_system",
    "nitsche_form",
    "reconstruct",
    "reconstruct_cut",
    "reconstruct_uncut",
    "recover_cell",
    "seminorm_matrix",
    "stabilize",
    "stabilize_cut",
    "stabilize_uncut",
    "stiffness",
]

ETA_SAFETY = 1.1
COERCIVITY_TARGET = 0.5


class HHOError(RuntimeError):
    pass


class CoercivityError(HHOError):
    pass


class CondensationError(HHOError):
    pass


@dataclass(frozen=True, eq=False)
class FaceBlock:
    face: int
    side: int
    basis: FaceBasis
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class LocalDofLayout:
    sides: tuple
    n_cell: int
    n_face: int
    blocks: tuple

    @property
    def n_cell_dofs(self) -> int:
        return len(self.sides) * self.n_cell

    @property
    def n_face_dofs(self) -> int:
        return len(self.blocks) * self.n_face

    @property
    def size(self) -> int:
        return self.n_cell_dofs + self.n_face_dofs

    def cell_slice(self, side: int) -> slice:
        i = self.sides.index(side)
        return slice(i * self.n_cell, (i + 1) * self.n_cell)

    def face_slice(self, j: int) -> slice:
        s = self.n_cell_dofs + j * self.n_face
        return slice(s, s + self.n_face)


@dataclass(eq=False)
class CellData:
    """Bases, quadratures and faces of one cell for degree k."""

    geom: CellGeometry
    k: int
    kappa: dict
    h: float
    bases: dict
    rules: dict
    faces: tuple
    layout: LocalDofLayout
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def is_cut(self) -> bool:
        return len(self.layout.sides) == 2

    def rule(self, side: int, order: int) -> QuadratureRule:
        key = (side, order)
        if key not in self.rules:
            self.rules[key] = self.geom.quadrature(side, order)
        return self.rules[key]

    def gamma(self, order: int):
        return self.geom.interface_rule(order)

    def mean_vector(self) -> np.ndarray:
        """Coefficients of the constant 1 on every side (= integrals of the orthonormal basis)."""
        order = 2 * self.k + 2
        return np.concatenate([
            self.bases[s].values(self.rule(s, order).points).T @ self.rule(s, order).weights
            for s in self.layout.sides])

    def translated(self, shift, geom: CellGeometry, faces: tuple) -> CellData:
        """Copy of a template for a congruent cell displaced by ``shift``."""
        shift = np.asarray(shift, dtype=float)
        bases = {s: b.translated(shift) for s, b in self.bases.items()}
        rules = {key: QuadratureRule(r.points + shift[None, :], r.weights) for key, r in self.rules.items()}
        blocks = tuple((fb.face, fb.side) for fb in faces)
        layout = replace(self.layout, blocks=blocks)
        return CellData(geom, self.k, self.kappa, self.h, bases, rules, faces, layout)


def outward_normal(mesh, f: int, sign: int) -> np.ndarray:
    a, b = mesh.face_points(f)
    d = b - a
    return sign * np.array([d[1], -d[0]]) / np.linalg.norm(d)


def cell_face_blocks(mesh, topology, geom: CellGeometry, face_bases: dict) -> tuple:
    out = []
    for f, sgn in zip(geom.faces, geom.signs):
        f = int(f)
        n = outward_normal(mesh, f, int(sgn))
        for side in sorted(topology.face_pieces[f]):
            if side not in geom.sides:
                raise HHOError(f"face {f} has a side-{side} piece but its cell {geom.parents} has no side {side}")
            out.append(FaceBlock(f, side, face_bases[(f, side)], n))
    return tuple(out)


def interface_order(k: int) -> int:
    # the normal varies along curved arcs, so matrix and load share a surplus order
    return 2 * k + 4


def build_cell_data(geom: CellGeometry, faces: tuple, k: int, kappa: dict) -> CellData:
    if k < 0:
        raise ValueError("k must be >= 0")
    order = 2 * k + 2
    rules, bases = {}, {}
    for s in geom.sides:
        rules[(s, order)] = geom.quadrature(s, order)
        bases[s] = build_cell_basis(geom.center, geom.h, k + 1, rules[(s, order)])
    layout = LocalDofLayout(tuple(geom.sides), poly_dim(k + 1), k + 1,
                            tuple((fb.face, fb.side) for fb in faces))
    return CellData(geom, k, {s: float(kappa[s]) for s in geom.sides}, float(geom.h), bases, rules,
                    faces, layout)


# ----------------------------------------------------------------------------
# bilinear forms on the cell space


def stiffness(data: CellData) -> dict:
    """Per side kappa^i int grad phi . grad phi."""
    if "K" not in data._cache:
        out = {}
        for s in data.layout.sides:
            r = data.rule(s, 2 * data.k + 2)
            g = data.bases[s].gradients(r.points)
            out[s] = data.kappa[s] * np.einsum("q,qad,qbd->ab", r.weights, g, g)
        data._cache["K"] = out
    return data._cache["K"]


def interface_operators(data: CellData, order: int | None = None):
    """Jump values J = [phi1, -phi2], side-1 fluxes F = [kappa1 grad phi1 . n, 0] and weights on T^Gamma."""
    order = interface_order(data.k) if order is None else order
    key = ("gamma", order)
    if key not in data._cache:
        rule, normals = data.gamma(order)
        nc = data.layout.n_cell
        p1 = data.bases[1].values(rule.points)
        p2 = data.bases[2].values(rule.points)
        g1 = np.einsum("qad,qd->qa", data.bases[1].gradients(rule.points), normals)
        J = np.hstack([p1, -p2])
        F = np.hstack([data.kappa[1] * g1, np.zeros((len(rule), nc))])
        data._cache[key] = (J, F, rule.weights)
    return data._cache[key]


def _blockdiag(data: CellData, mats: dict) -> np.ndarray:
    n = data.layout.n_cell_dofs
    out = np.zeros((n, n))
    for s in data.layout.sides:
        sl = data.layout.cell_slice(s)
        out[sl, sl] = mats[s]
    return out


def nitsche_form(data: CellData, eta: float | None = None) -> np.ndarray:
    """Matrix of n_T on the cell space (the stiffness matrix on uncut cells)."""
    K = _blockdiag(data, stiffness(data))
    if not data.is_cut:
        return K
    J, F, w = interface_operators(data)
    JW = J.T * w
    cross = F.T @ (w[:, None] * J)
    N = K - cross - cross.T + eta * data.kappa[1] / data.h * (JW @ J)
    return 0.5 * (N + N.T)


def seminorm_matrix(data: CellData, eta: float | None = None) -> np.ndarray:
    """Matrix of |V|^2_{n_T}: broken kappa-weighted gradients plus the penalised jump."""
    K = _blockdiag(data, stiffness(data))
    if not data.is_cut:
        return K
    J, _, w = interface_operators(data)
    return K + eta * data.kappa[1] / data.h * ((J.T * w) @ J)


def calibrate_eta(data: CellData, safety: float = ETA_SAFETY) -> float:
    """4 * safety * c^2 where c^2 is the largest h_T ||v||^2_{T^Gamma} / ||v||^2_{T^1} over P^k(T^1)."""
    if not data.is_cut:
        raise HHOError("penalty calibration requested on an uncut cell")
    if "eta" not in data._cache:
        k = data.k
        r1 = data.rule(1, 2 * k + 2)
        basis = build_cell_basis(data.geom.center, data.h, k, r1)
        rule, _ = data.gamma(interface_order(k))
        psi = basis.values(rule.points)
        G = data.h * (psi.T * rule.weights) @ psi
        try:
            lam = float(np.linalg.eigvalsh(0.5 * (G + G.T))[-1])
        except np.linalg.LinAlgError as exc:
            raise HHOError(f"eigen-solve failed in penalty calibration for cell {data.geom.parents}") from exc
        data._cache["lambda"] = lam
        data._cache["eta"] = 4.0 * safety * lam
    return data._cache["eta"]


def coercivity_constant(data: CellData, eta: float) -> float:
    """Smallest generalised eigenvalue of n_T against |.|^2_{n_T} off the constant kernel."""
    N = nitsche_form(data, eta)
    M = seminorm_matrix(data, eta)
    Z = null_space(data.mean_vector()[None, :])
    return float(eigh(Z.T @ N @ Z, Z.T @ M @ Z, eigvals_only=True)[0])


# ----------------------------------------------------------------------------
# reconstruction and stabilisation


def _face_traces(data: CellData, fb: FaceBlock):
    key = ("trace", fb.face, fb.side)
    if key not in data._cache:
        rule = fb.basis.rule(2 * data.k + 2)
        basis = data.bases[fb.side]
        phi = basis.values(rule.points)
        dphi = basis.gradients(rule.points) @ fb.normal
        psi = fb.basis.values(rule.points)
        wd = dphi * rule.weights[:, None]
        data._cache[key] = (
            (psi * rule.weights[:, None]).T @ phi,   # P: psi x phi
            wd.T @ phi,                              # grad phi.n x phi
            wd.T @ psi,                              # grad phi.n x psi
        )
    return data._cache[key]


def reconstruct(data: CellData, N: np.ndarray) -> np.ndarray:
    """Matrix mapping local unknowns to reconstruction coefficients.

    Solves N(R, Z) = N(V_T, Z) - sum_F int_F kappa grad z . n (v_T - v_F) with
    the shared-mean constraint through a bordered system.
    """
    lay = data.layout
    nc = lay.n_cell_dofs
    B = np.zeros((nc, lay.size))
    B[:, :nc] = N
    for j, fb in enumerate(data.faces):
        _, Tcc, Tcf = _face_traces(data, fb)
        rows = lay.cell_slice(fb.side)
        kap = data.kappa[fb.side]
        B[rows, rows] -= kap * Tcc
        B[rows, lay.face_slice(j)] += kap * Tcf
    m = data.mean_vector()
    K = np.zeros((nc + 1, nc + 1))
    K[:nc, :nc] = N
    K[:nc, nc] = m
    K[nc, :nc] = m
    rhs = np.zeros((nc + 1, lay.size))
    rhs[:nc] = B
    rhs[nc, :nc] = m
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise HHOError(f"singular reconstruction system in cell {data.geom.parents}") from exc
    return sol[:nc]


def reconstruct_uncut(data: CellData) -> np.ndarray:
    if data.is_cut:
        raise HHOError("reconstruct_uncut called on a cut cell")
    return reconstruct(data, nitsche_form(data))


def reconstruct_cut(data: CellData, eta: float) -> np.ndarray:
    if not data.is_cut:
        raise HHOError("reconstruct_cut called on an uncut cell")
    return reconstruct(data, nitsche_form(data, eta))


def stabilize(data: CellData) -> np.ndarray:
    """sum over (sub-)faces of kappa^i / h_T ||Pi_F(v_T^i) - v_F||^2 in the orthonormal face basis."""
    lay = data.layout
    S = np.zeros((lay.size, lay.size))
    for j, fb in enumerate(data.faces):
        P, _, _ = _face_traces(data, fb)
        D = np.zeros((lay.n_face, lay.size))
        D[:, lay.cell_slice(fb.side)] = P
        D[:, lay.face_slice(j)] = -np.eye(lay.n_face)
        S += data.kappa[fb.side] / data.h * (D.T @ D)
    return S


stabilize_uncut = stabilize
stabilize_cut = stabilize


# ----------------------------------------------------------------------------
# local problem


def local_rhs(data: CellData, problem: InterfaceProblem, eta: float | None = None,
              order: int | None = None) -> np.ndarray:
    """Volume loads per side; on cut cells also the g_N and g_D interface terms."""
    lay = data.layout
    order = interface_order(data.k) if order is None else order
    b = np.zeros(lay.size)
    for s in lay.sides:
        r = data.rule(s, order)
        if len(r):
            b[lay.cell_slice(s)] = data.bases[s].values(r.points).T @ (r.weights * problem.f(s)(r.points))
    if data.is_cut:
        rule, normals = data.gamma(order)
        x, w = rule.points, rule.weights
        gD = np.asarray(problem.g_D(x), dtype=float)
        gN = np.asarray(problem.g_N(x), dtype=float)
        p1 = data.bases[1].values(x)
        p2 = data.bases[2].values(x)
        d1 = np.einsum("qad,qd->qa", data.bases[1].gradients(x), normals)
        k1 = data.kappa[1]
        pen = eta * k1 / data.h
        b[lay.cell_slice(1)] += (-k1 * d1 + pen * p1).T @ (w * gD)
        b[lay.cell_slice(2)] += p2.T @ (w * gN) - pen * (p2.T @ (w * gD))
    return b


@dataclass(frozen=True, eq=False)
class LocalOperatorSet:
    """Local matrices of one cell and its static-condensation data.

    ``A = R^T N R + S``; ``X = A_cc^{-1} A_cf`` and ``Sc = A_ff - A_fc X``.
    """

    data: CellData
    eta: float | None
    N: np.ndarray
    R: np.ndarray
    S: np.ndarray
    A: np.ndarray
    factor: tuple
    X: np.ndarray
    Sc: np.ndarray
    rhs: np.ndarray | None = None
    coercivity: float | None = None

    @property
    def layout(self) -> LocalDofLayout:
        return self.data.layout

    def with_rhs(self, rhs: np.ndarray) -> LocalOperatorSet:
        return replace(self, rhs=rhs)

    def condensed_rhs(self) -> np.ndarray:
        nc = self.layout.n_cell_dofs
        return self.rhs[nc:] - self.X.T @ self.rhs[:nc]


def local_system(data: CellData, problem: InterfaceProblem | None = None, eta: float | None = None,
                 check_coercivity: bool = True) -> LocalOperatorSet:
    """Assemble and condense the local problem.

    ``eta=None`` calibrates the penalty on cut cells.
    """
    if data.is_cut:
        if eta is None:
            eta = calibrate_eta(data)
        coer = None
        if check_coercivity:
            coer = coercivity_constant(data, eta)
            if coer < COERCIVITY_TARGET:
                raise CoercivityError(
                    f"cell {data.geom.parents}: Nitsche form coercivity constant {coer:.3g} < 0.5 "
                    f"with eta={eta:.3g}; increase eta (calibrated value {calibrate_eta(data):.3g})")
    else:
        eta, coer = None, None
    N = nitsche_form(data, eta)
    R = reconstruct(data, N)
    S = stabilize(data)
    A = R.T @ N @ R + S
    A = 0.5 * (A + A.T)
    factor, X, Sc = condense_matrix(A, data.layout.n_cell_dofs, data.geom.parents)
    rhs = local_rhs(data, problem, eta) if problem is not None else None
    return LocalOperatorSet(data, eta, N, R, S, A, factor, X, Sc, rhs, coer)


def condense_matrix(A: np.ndarray, nc: int, name=None):
    Acc = A[:nc, :nc]
    try:
        factor = cho_factor(Acc, lower=True)
    except np.linalg.LinAlgError as exc:
        raise CondensationError(f"cell block of cell {name} is not positive definite") from exc
    d = np.abs(np.diag(factor[0]))
    if d.min() <= 1e-7 * d.max():
        raise CondensationError(f"cell block of cell {name} is numerically singular "
                                f"(pivot ratio {(d.min() / d.max()) ** 2:.3g})")
    X = cho_solve(factor, A[:nc, nc:])
    Sc = A[nc:, nc:] - A[nc:, :nc] @ X
    return factor, X, 0.5 * (Sc + Sc.T)


def condense(ops: LocalOperatorSet) -> tuple[np.ndarray, np.ndarray]:
    """Condensed face matrix and right-hand side."""
    if ops.rhs is None:
        raise HHOError("local right-hand side missing")
    return ops.Sc, ops.condensed_rhs()


def recover_cell(ops: LocalOperatorSet, face_values: np.ndarray) -> np.ndarray:
    """Cell unknowns minimising the local energy for the given face values."""
    nc = ops.layout.n_cell_dofs
    return cho_solve(ops.factor, ops.rhs[:nc]) - ops.X @ face_values


def interpolate(data: CellData, u: dict, order: int | None = None) -> np.ndarray:
    """L2 projections of u[side] onto the local cell and face spaces."""
    lay = data.layout
    order = 2 * data.k + 4 if order is None else order
    out = np.zeros(lay.size)
    for s in lay.sides:
        r = data.rule(s, order)
        out[lay.cell_slice(s)] = data.bases[s].values(r.points).T @ (r.weights * u[s](r.points))
    for j, fb in enumerate(data.faces):
        r = fb.basis.rule(order)
        out[lay.face_slice(j)] = fb.basis.values(r.points).T @ (r.weights * u[fb.side](r.points))
    return out
