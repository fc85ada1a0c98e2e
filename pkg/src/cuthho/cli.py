"""Command-line driver: ``cuthho {check-mesh,solve,convergence}``.

Exit codes: 0 success; 1 failed check, failed pipeline or missed EOC
threshold; 2 usage or configuration error (a missing key is named).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .approx import BasisError
from .config import ConfigError, RunConfig, load_config
from .geometry import CellTag, GeometryError, check_assumption_ball
from .hho import HHOError
from .levelset import CircleLevelSet, LineLevelSet
from .mesh import MeshError, PolyMesh, generate_cartesian, read_mesh
from .solver import default_n_sub, discretize, solve_problem
from .system import AssemblyError, write_matrix_market
from .verify import (
    CaseError,
    compute_errors,
    convergence_study,
    format_eoc_csv,
    format_error_csv,
    make_case,
)

__all__ = ["EXIT_FAIL", "EXIT_OK", "EXIT_USAGE", "build_parser", "case_from_config", "main"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
PIPELINE_ERRORS = (GeometryError, HHOError, AssemblyError, BasisError, MeshError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="run configuration file")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for cell-local work (0 = auto)")
    common.add_argument("--out", default="cuthho-out", metavar="DIR", help="output directory")
    common.add_argument("--k", type=int, default=None, metavar="N", help="polynomial degree (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="cuthho", description="Unfitted hybrid high-order solver for elliptic interface problems")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check-mesh", parents=[common], help="resolution, cut census and agglomeration diagnostics")
    sub.add_parser("solve", parents=[common], help="solve a manufactured case, write fields and errors")
    sub.add_parser("convergence", parents=[common], help="run a mesh sequence and write the EOC table")
    return p


def _threads(n: int) -> int:
    if n < 0:
        raise UsageError("--threads must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _mesh(cfg: RunConfig) -> PolyMesh:
    if cfg.mesh_file is not None:
        return read_mesh(cfg.mesh_file)
    cfg.require_mesh()
    return generate_cartesian(cfg.nx, cfg.ny, cfg.domain, cfg.perturbation, cfg.seed)


def _mesh_sequence(cfg: RunConfig) -> tuple[list[PolyMesh], list[str]]:
    if cfg.mesh_files:
        return [read_mesh(p) for p in cfg.mesh_files], [p.name for p in cfg.mesh_files]
    cfg.require_sequence()
    meshes = [generate_cartesian(n, n, cfg.domain, cfg.perturbation, cfg.seed) for n in cfg.sizes]
    return meshes, [f"{n}x{n}" for n in cfg.sizes]


def case_from_config(cfg: RunConfig):
    """Manufactured case whose interface and coefficients come from the config."""
    cfg.require("case", "levelset", "kappa1", "kappa2")
    params = dict(cfg.case_params)
    ls = cfg.levelset
    if cfg.case == "radial_circle":
        if not isinstance(ls, CircleLevelSet):
            raise CaseError("radial_circle needs interface.levelset = circle(cx, cy, r)")
        params.update(r0=ls.r, offset=(ls.cx, ls.cy))
    elif cfg.case == "planar_kink":
        if not isinstance(ls, LineLevelSet):
            raise CaseError("planar_kink needs interface.levelset = line(a, b, c)")
        nrm = math.hypot(ls.a, ls.b)
        params.update(normal=(ls.a, ls.b), c=ls.c / nrm)
    elif cfg.case == "smooth_nojump":
        if cfg.kappa1 != cfg.kappa2:
            raise CaseError("smooth_nojump needs kappa1 = kappa2")
        params.update(levelset=ls, kappa=cfg.kappa1)
    params.update(kappa1=cfg.kappa1, kappa2=cfg.kappa2)
    return make_case(cfg.case, params)


def _line(label: str, value, ok: bool | None = None) -> str:
    tag = "" if ok is None else ("  [PASS]" if ok else "  [FAIL]")
    return f"{label:<34}{value}{tag}"


def cmd_check_mesh(cfg: RunConfig, args) -> int:
    cfg.require("levelset")
    mesh = _mesh(cfg)
    ls = cfg.levelset
    k = args.k if args.k is not None else (cfg.k if cfg.k is not None else 0)
    n_sub = cfg.n_sub or default_n_sub(k)
    print(_line("mesh", f"{mesh.n_cells} cells, h = {mesh.h():.6g}"))
    print(_line("interface", str(ls)))
    ok = True
    try:
        disc = discretize(mesh, ls, n_sub, agglomerate=cfg.agglomerate, check=False)
    except PIPELINE_ERRORS as exc:
        print(_line("pipeline", f"error: {exc}", False))
        return EXIT_FAIL
    rep = disc.resolution
    if rep is None:
        print(_line("resolution h*M <= 1", "skipped (no curvature bound for this level set)"))
        bnd = [c for c in range(mesh.n_cells)
               if disc.parent_topology.parent_tags[c] == CellTag.CUT and mesh.boundary_faces[mesh.cell_faces[c]].any()]
        ok &= not bnd
        print(_line("cut cells touching the boundary", len(bnd), not bnd))
    else:
        print(_line("resolution h*M <= 1", f"h*M = {rep.hM:.4g}", rep.hM <= 1.0))
        print(_line("cut cells touching the boundary", len(rep.boundary_cut_cells), not rep.boundary_cut_cells))
        for m in rep.messages:
            print(f"  advice: {m}")
        ok &= rep.passed
    census = disc.parent_topology.census()
    print(_line("census", f"{census['inside1']} inside side 1, {census['inside2']} inside side 2"))
    print(f"{census['cut']} cut cells")
    if disc.partition is not None:
        part, agg = disc.partition, disc.agglomeration
        print(_line("pre-merge partition", f"OK {len(part.ok)}, KO1 {len(part.ko1)}, KO2 {len(part.ko2)} "
                                           f"(delta = {part.delta:.4g})"))
        post1 = post2 = 0
        for c in disc.topology.cut_cells():
            res = check_assumption_ball(disc.topology.cells[c], agg.delta_star)
            post1 += not res[1].passed
            post2 += not res[2].passed
        print(_line("agglomeration", f"{len(agg.merged())} merged cells, {disc.n_cells} cells in total"))
        print(_line("post-merge check", f"KO1 {post1}, KO2 {post2} (delta* = {agg.delta_star:.4g})",
                    post1 == 0 and post2 == 0))
        ok &= post1 == 0 and post2 == 0
    print("check-mesh: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(cfg: RunConfig, args) -> int:
    k = args.k if args.k is not None else cfg.k
    if k is None:
        cfg.require("k")
    case = case_from_config(cfg)
    mesh = _mesh(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    disc = discretize(mesh, case.levelset, cfg.n_sub or default_n_sub(k), agglomerate=cfg.agglomerate)
    sol = solve_problem(disc, case.problem(), k, eta=cfg.eta, threads=_threads(args.threads))
    rep = compute_errors(sol, case)
    label = f"{cfg.nx}x{cfg.ny}" if cfg.mesh_file is None else cfg.mesh_file.name
    (out / "errors.csv").write_text(format_error_csv([(label, rep)]))
    written = ["errors.csv"]
    if cfg.fields:
        from .output import write_fields
        write_fields(sol, out, cfg.samples, case)
        written += ["field.vtk", "field.csv"]
    if cfg.matrix:
        write_matrix_market(sol.system, out / "matrix.mtx")
        written.append("matrix.mtx")
    print(_line("unknowns", f"{sol.stats.n_dofs} face dofs, {disc.n_cells} cells"))
    print(_line("relative residual", f"{sol.stats.residual:.3e}"))
    print(_line("energy error E^(1/2)", f"{rep.energy:.6e}"))
    print(_line("written to " + str(out), ", ".join(written)))
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, args) -> int:
    k = args.k if args.k is not None else cfg.k
    if k is None:
        cfg.require("k")
    cfg.k = k
    case = case_from_config(cfg)
    meshes, labels = _mesh_sequence(cfg)
    if len(meshes) < 3:
        raise UsageError(f"a convergence study needs at least 3 meshes, got {len(meshes)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence_study(case, meshes, k, labels, cfg.n_sub, cfg.eta, _threads(args.threads))
    (out / "eoc.csv").write_text(format_eoc_csv(rows))
    for r in rows:
        rate = "n/a" if r.eoc is None else f"{r.eoc:.3f}"
        print(f"{r.label:>10}  h = {r.report.h:.4e}  E^(1/2) = {r.report.energy:.4e}  EOC = {rate}")
    final = rows[-1].eoc
    thr = cfg.eoc_threshold
    ok = final is not None and final >= thr
    print(f"final EOC {'n/a' if final is None else f'{final:.3f}'} vs threshold {thr:.3f}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"check-mesh": cmd_check_mesh, "solve": cmd_solve, "convergence": cmd_convergence}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.k is not None and args.k < 0:
            raise UsageError("--k must be >= 0")
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, CaseError, UsageError) as exc:
        print(f"cuthho: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PIPELINE_ERRORS as exc:
        print(f"cuthho: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
