"""Manufactured solutions, energy-error evaluation and convergence studies.

Manufactured fields on (-1, 1)^2 use the cutoff q = cos(pi x / 2) cos(pi y / 2),
which vanishes on the boundary, so homogeneous Dirichlet data hold exactly.
Closed-form derivatives are checked against central finite differences before
a case is handed out.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .levelset import CircleLevelSet, LevelSet, LineLevelSet
from .mesh import PolyMesh
from .problem import InterfaceProblem
from .solver import Solution, default_n_sub, discretize, solve_problem

__all__ = [
    "CASE_NAMES",
    "EOC_COLUMNS",
    "ERROR_COLUMNS",
    "CaseError",
    "ConvergenceRow",
    "ErrorReport",
    "ManufacturedCase",
    "SweepResult",
    "compute_errors",
    "contrast_sweep",
    "convergence_study",
    "cut_robustness_sweep",
    "eoc",
    "format_eoc_csv",
    "format_error_csv",
    "make_case",
    "run_case",
]

CASE_NAMES = ("radial_circle", "planar_kink", "smooth_nojump")
SQUARE = ((-1.0, 1.0), (-1.0, 1.0))
HALF_PI = 0.5 * math.pi


class CaseError(ValueError):
    pass


Field = Callable[[np.ndarray], np.ndarray]


def _pts(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def _q(x):
    x = _pts(x)
    return np.cos(HALF_PI * x[:, 0]) * np.cos(HALF_PI * x[:, 1])


def _grad_q(x):
    x = _pts(x)
    cx, cy = np.cos(HALF_PI * x[:, 0]), np.cos(HALF_PI * x[:, 1])
    sx, sy = np.sin(HALF_PI * x[:, 0]), np.sin(HALF_PI * x[:, 1])
    return -HALF_PI * np.column_stack([sx * cy, cx * sy])


def _lap_q(x):
    return -2.0 * HALF_PI ** 2 * _q(x)


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """Exact per-side solution with the matching data of the interface problem."""

    name: str
    levelset: LevelSet
    kappa1: float
    kappa2: float
    u1: Field
    u2: Field
    grad1: Field
    grad2: Field
    f1: Field
    f2: Field
    g_D: Field
    g_N: Field
    domain: tuple = SQUARE
    dirichlet: bool = False
    params: dict = field(default_factory=dict)
    interface_sampler: Callable | None = field(default=None, repr=False)

    def u(self, side: int) -> Field:
        return self.u1 if side == 1 else self.u2

    def grad(self, side: int) -> Field:
        return self.grad1 if side == 1 else self.grad2

    def kappa(self, side: int) -> float:
        return self.kappa1 if side == 1 else self.kappa2

    def problem(self) -> InterfaceProblem:
        d1 = self.u1 if self.dirichlet else None
        d2 = self.u2 if self.dirichlet else None
        return InterfaceProblem(self.levelset, self.kappa1, self.kappa2, self.f1, self.f2,
                                self.g_D, self.g_N, d1, d2)

    def with_params(self, **changes) -> ManufacturedCase:
        p = dict(self.params)
        p.update(changes)
        return make_case(self.name, p)

    def shifted(self, shift) -> ManufacturedCase:
        """Same case with the interface translated by ``shift``."""
        off = np.asarray(self.params.get("offset", (0.0, 0.0)), dtype=float) + np.asarray(shift, dtype=float)
        return self.with_params(offset=(float(off[0]), float(off[1])))

    def interface_residual(self, n: int = 100, seed: int = 0) -> float:
        """Max mismatch of g_D, g_N against the exact fields at points on Gamma."""
        if self.interface_sampler is None:
            return 0.0
        x = self.interface_sampler(n, np.random.default_rng(seed))
        nrm = self.levelset.normal(x)
        r_d = self.u1(x) - self.u2(x) - self.g_D(x)
        flux = self.kappa1 * self.grad1(x) - self.kappa2 * self.grad2(x)
        r_n = np.einsum("pd,pd->p", flux, nrm) - self.g_N(x)
        return float(max(np.abs(r_d).max(), np.abs(r_n).max()))

    def validate(self, n: int = 1000, seed: int = 0, rel_step: float = 1e-6, tol: float = 1e-6) -> None:
        """Finite-difference check of the closed-form gradients and sources."""
        rng = np.random.default_rng(seed)
        (x0, x1), (y0, y1) = self.domain
        diam = math.hypot(x1 - x0, y1 - y0)
        step = rel_step * diam
        x = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
        e = [np.array([step, 0.0]), np.array([0.0, step])]
        for side in (1, 2):
            u, g, f, kap = self.u(side), self.grad(side), (self.f1 if side == 1 else self.f2), self.kappa(side)
            fd = np.column_stack([(u(x + d) - u(x - d)) / (2 * step) for d in e])
            gx = g(x)
            err = np.abs(fd - gx).max() / max(1.0, np.abs(gx).max())
            if err > tol:
                raise CaseError(f"{self.name}: gradient of side {side} fails the difference check ({err:.3g})")
            div = sum((g(x + d)[:, j] - g(x - d)[:, j]) / (2 * step) for j, d in enumerate(e))
            fx = f(x)
            err = np.abs(-kap * div - fx).max() / max(1.0, np.abs(fx).max())
            if err > tol:
                raise CaseError(f"{self.name}: source of side {side} fails the difference check ({err:.3g})")
        res = self.interface_residual()
        if res > 1e-10:
            raise CaseError(f"{self.name}: interface data inconsistent with the exact fields ({res:.3g})")


def _circle_sampler(cx, cy, r):
    def sample(n, rng):
        t = rng.uniform(0.0, 2 * math.pi, n)
        return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])
    return sample


def _radial_circle(p: dict) -> ManufacturedCase:
    # u^i = q / kappa^i + c_i: the flux kappa grad u = grad q is continuous
    r0 = float(p.get("r0", 0.71))
    k1, k2 = float(p.get("kappa1", 1.0)), float(p.get("kappa2", 100.0))
    shift = float(p.get("shift", 1.0))
    ox, oy = (float(v) for v in p.get("offset", (0.0, 0.0)))
    if r0 <= 0.0 or max(abs(ox), abs(oy)) + r0 >= 1.0:
        raise CaseError("radial_circle: the circle must lie strictly inside (-1, 1)^2")

    def u1(x):
        return _q(x) / k1 + shift

    def u2(x):
        return _q(x) / k2

    def f(x):
        return -_lap_q(x)

    return ManufacturedCase(
        "radial_circle", CircleLevelSet(ox, oy, r0), k1, k2, u1, u2,
        lambda x: _grad_q(x) / k1, lambda x: _grad_q(x) / k2, f, f,
        lambda x: _q(x) * (1.0 / k1 - 1.0 / k2) + shift,
        lambda x: np.zeros(_pts(x).shape[0]),
        params=dict(p), interface_sampler=_circle_sampler(ox, oy, r0))


def _planar_kink(p: dict) -> ManufacturedCase:
    # u^i = q (a_i + b_i s) with s the signed distance to the line
    normal = np.asarray(p.get("normal", (1.0, 0.0)), dtype=float)
    normal = normal / np.linalg.norm(normal)
    c0 = float(p.get("c", 0.0))
    off = np.asarray(p.get("offset", (0.0, 0.0)), dtype=float)
    c = c0 - float(normal @ off)
    k1, k2 = float(p.get("kappa1", 1.0)), float(p.get("kappa2", 10.0))
    a = {1: float(p.get("a1", 1.0)), 2: float(p.get("a2", 0.5))}
    b = {1: float(p.get("b1", 1.0)), 2: float(p.get("b2", 0.25))}
    kap = {1: k1, 2: k2}
    if abs(c) >= 1.0:
        raise CaseError("planar_kink: the line misses the domain")

    def s(x):
        return _pts(x) @ normal + c

    def make(i):
        def u(x):
            return _q(x) * (a[i] + b[i] * s(x))

        def g(x):
            return _grad_q(x) * (a[i] + b[i] * s(x))[:, None] + b[i] * _q(x)[:, None] * normal[None, :]

        def f(x):
            return -kap[i] * (_lap_q(x) * (a[i] + b[i] * s(x)) + 2.0 * b[i] * (_grad_q(x) @ normal))
        return u, g, f

    u1, g1, f1 = make(1)
    u2, g2, f2 = make(2)

    def g_d(x):
        return _q(x) * (a[1] - a[2])

    def g_n(x):
        return (_grad_q(x) @ normal) * (k1 * a[1] - k2 * a[2]) + _q(x) * (k1 * b[1] - k2 * b[2])

    def sample(n, rng):
        t = rng.uniform(-0.9, 0.9, n)
        tang = np.array([-normal[1], normal[0]])
        return -c * normal[None, :] + t[:, None] * tang[None, :]

    return ManufacturedCase("planar_kink", LineLevelSet(float(normal[0]), float(normal[1]), c),
                            k1, k2, u1, u2, g1, g2, f1, f2, g_d, g_n,
                            params=dict(p), interface_sampler=sample)


def _default_poly_coef(degree: int) -> np.ndarray:
    c = np.zeros((degree + 1, degree + 1))
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            c[i, j] = 1.0 / (1.0 + i + 2 * j)
    return c


def _smooth_nojump(p: dict) -> ManufacturedCase:
    kind = str(p.get("u", "trig"))
    kap = float(p.get("kappa", p.get("kappa1", 1.0)))
    if "kappa2" in p and float(p["kappa2"]) != kap:
        raise CaseError("smooth_nojump needs equal coefficients on both sides")
    ls = p.get("levelset")
    off = np.asarray(p.get("offset", (0.0, 0.0)), dtype=float)
    if ls is None:
        ls = CircleLevelSet(float(off[0]), float(off[1]), float(p.get("r0", 0.5)))
    elif np.any(off != 0.0):
        ls = ls.translated(off)
    zero = lambda x: np.zeros(_pts(x).shape[0])
    P = np.polynomial.polynomial
    if kind == "trig":
        u, g = _q, _grad_q
        f = lambda x: -kap * _lap_q(x)
        dirichlet = False
    elif kind in ("linear", "poly"):
        if kind == "linear":
            coef = np.zeros((2, 2))
            coef[1, 0] = 1.0
        else:
            coef = np.asarray(p.get("coef", _default_poly_coef(int(p.get("degree", 2)))), dtype=float)
        cx, cy = P.polyder(coef, axis=0), P.polyder(coef, axis=1)
        lap = P.polyder(coef, 2, axis=0)
        lap_y = P.polyder(coef, 2, axis=1)
        u = lambda x: P.polyval2d(_pts(x)[:, 0], _pts(x)[:, 1], coef)
        g = lambda x: np.column_stack([P.polyval2d(_pts(x)[:, 0], _pts(x)[:, 1], cx),
                                       P.polyval2d(_pts(x)[:, 0], _pts(x)[:, 1], cy)])
        f = lambda x: -kap * (P.polyval2d(_pts(x)[:, 0], _pts(x)[:, 1], lap)
                              + P.polyval2d(_pts(x)[:, 0], _pts(x)[:, 1], lap_y))
        dirichlet = True
    else:
        raise CaseError(f"smooth_nojump: unknown field {kind!r} (trig, linear, poly)")
    return ManufacturedCase("smooth_nojump", ls, kap, kap, u, u, g, g, f, f, zero, zero,
                            dirichlet=dirichlet, params=dict(p))


_BUILDERS = {"radial_circle": _radial_circle, "planar_kink": _planar_kink, "smooth_nojump": _smooth_nojump}


def make_case(name: str, params: dict | None = None, validate: bool = True) -> ManufacturedCase:
    if name not in _BUILDERS:
        raise CaseError(f"unknown case {name!r}; choose one of {', '.join(CASE_NAMES)}")
    case = _BUILDERS[name](dict(params or {}))
    if validate:
        case.validate()
    return case


@dataclass(frozen=True)
class ErrorReport:
    grad1: float
    grad2: float
    jump: float
    flux: float
    h: float
    n_dofs: int
    n_cells: int
    k: int

    @property
    def total(self) -> float:
        return self.grad1 + self.grad2 + self.jump + self.flux

    @property
    def energy(self) -> float:
        return math.sqrt(max(self.total, 0.0))


def compute_errors(solution: Solution, case: ManufacturedCase) -> ErrorReport:
    """Energy error of the cell unknowns against the exact solution.

    Gradient terms are kappa-weighted per side (labelled by the user's sides);
    the interface terms use the normalised problem (kappa1 <= kappa2).
    """
    k = solution.k
    order = 2 * k + 4
    prob = solution.problem
    grad = {1: 0.0, 2: 0.0}
    jump = flux = 0.0
    for i, op in enumerate(solution.ops):
        data = op.data
        for s in data.layout.sides:
            us = solution.user_side(s)
            r = data.rule(s, order)
            gh = np.einsum("pnd,n->pd", data.bases[s].gradients(r.points), solution.coefficients(i, s))
            d = case.grad(us)(r.points) - gh
            grad[us] += data.kappa[s] * float(r.weights @ np.einsum("pd,pd->p", d, d))
        if data.is_cut:
            rg, nrm = data.gamma(order)
            x = rg.points
            c1, c2 = solution.coefficients(i, 1), solution.coefficients(i, 2)
            u1 = data.bases[1].values(x) @ c1
            u2 = data.bases[2].values(x) @ c2
            d1 = np.einsum("pnd,n->pd", data.bases[1].gradients(x), c1)
            d2 = np.einsum("pnd,n->pd", data.bases[2].gradients(x), c2)
            fl = np.einsum("pd,pd->p", prob.kappa1 * d1 - prob.kappa2 * d2, nrm)
            jump += prob.kappa1 / data.h * float(rg.weights @ (prob.g_D(x) - (u1 - u2)) ** 2)
            flux += data.h / prob.kappa2 * float(rg.weights @ (prob.g_N(x) - fl) ** 2)
    return ErrorReport(grad[1], grad[2], jump, flux, solution.disc.mesh.h(), solution.dofmap.n_dofs,
                       solution.disc.n_cells, k)


def run_case(case: ManufacturedCase, mesh: PolyMesh, k: int, n_sub: int | None = None,
             eta: float | None = None, threads: int = 1, check: bool = True) -> tuple[Solution, ErrorReport]:
    disc = discretize(mesh, case.levelset, n_sub or default_n_sub(k), check=check)
    sol = solve_problem(disc, case.problem(), k, eta=eta, threads=threads)
    return sol, compute_errors(sol, case)


def eoc(errors: Sequence[float], hs: Sequence[float]) -> list[float | None]:
    out: list[float | None] = [None]
    for j in range(1, len(errors)):
        e0, e1 = errors[j - 1], errors[j]
        if e0 <= 0.0 or e1 <= 0.0 or hs[j - 1] == hs[j]:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(hs[j - 1] / hs[j]))
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    label: str
    report: ErrorReport
    eoc: float | None


def convergence_study(case: ManufacturedCase, meshes: Sequence[PolyMesh], k: int, labels: Sequence[str] | None = None,
                      n_sub: int | None = None, eta: float | None = None, threads: int = 1,
                      rounding_floor: float = 1e-24) -> list[ConvergenceRow]:
    """Run the pipeline on each mesh; EOC on E^{1/2}. Needs at least three meshes."""
    if len(meshes) < 3:
        raise ValueError(f"a convergence study needs at least 3 meshes, got {len(meshes)}")
    reports = [run_case(case, m, k, n_sub, eta, threads)[1] for m in meshes]
    errs = [r.energy for r in reports]
    rates = eoc(errs, [r.h for r in reports])
    # rounding-level errors carry no rate information
    rates = [None if (e is None or reports[j].total <= rounding_floor) else e for j, e in enumerate(rates)]
    labels = list(labels) if labels is not None else [str(j) for j in range(len(meshes))]
    return [ConvergenceRow(j, labels[j], r, rates[j]) for j, r in enumerate(reports)]


@dataclass(frozen=True)
class SweepResult:
    values: tuple
    errors: tuple
    pivot_ratios: tuple

    @property
    def ratio(self) -> float:
        return max(self.errors) / min(self.errors)

    @property
    def worst_pivot_ratio(self) -> float:
        return min(self.pivot_ratios)


def cut_robustness_sweep(case: ManufacturedCase, mesh: PolyMesh, k: int,
                         offsets: Sequence[float] = (1e-2, 1e-4, 1e-6, 1e-8),
                         direction=(1.0, 0.0), threads: int = 1) -> SweepResult:
    """Translate the interface by offset * h along ``direction`` and rerun the full pipeline."""
    h = _edge_scale(mesh)
    d = np.asarray(direction, dtype=float)
    errs, piv = [], []
    for eps in offsets:
        sol, rep = run_case(case.shifted(eps * h * d), mesh, k, threads=threads)
        errs.append(rep.energy)
        piv.append(sol.stats.pivot_ratio)
    return SweepResult(tuple(offsets), tuple(errs), tuple(piv))


def _edge_scale(mesh: PolyMesh) -> float:
    return float(mesh.face_lengths().max())


def contrast_sweep(case: ManufacturedCase, mesh: PolyMesh, k: int,
                   contrasts: Sequence[float] = (1.0, 1e2, 1e4, 1e6), threads: int = 1) -> SweepResult:
    """Rerun with kappa2 = contrast * kappa1."""
    errs, piv = [], []
    for c in contrasts:
        cs = case.with_params(kappa1=case.kappa1, kappa2=case.kappa1 * c)
        sol, rep = run_case(cs, mesh, k, threads=threads)
        errs.append(rep.energy)
        piv.append(sol.stats.pivot_ratio)
    return SweepResult(tuple(contrasts), tuple(errs), tuple(piv))


ERROR_COLUMNS = ("level", "mesh", "h", "n_cells", "n_dofs", "k",
                 "grad1", "grad2", "jump", "flux", "E", "sqrtE")
EOC_COLUMNS = ERROR_COLUMNS + ("eoc",)


def _num(v: float) -> str:
    return f"{v:.12e}"


def _row(level: int, label: str, r: ErrorReport) -> list[str]:
    return [str(level), label, _num(r.h), str(r.n_cells), str(r.n_dofs), str(r.k),
            _num(r.grad1), _num(r.grad2), _num(r.jump), _num(r.flux), _num(r.total), _num(r.energy)]


def format_error_csv(rows: Sequence[tuple[str, ErrorReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ERROR_COLUMNS)
    for j, (label, r) in enumerate(rows):
        w.writerow(_row(j, label, r))
    return buf.getvalue()


def format_eoc_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EOC_COLUMNS)
    for row in rows:
        w.writerow(_row(row.level, row.label, row.report) + ["n/a" if row.eoc is None else f"{row.eoc:.6f}"])
    return buf.getvalue()
