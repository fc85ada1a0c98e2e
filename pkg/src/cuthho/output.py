"""Write-only emitters for sampled discrete fields (legacy VTK and CSV)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quadrature import triangulate_polygon

__all__ = ["FieldSamples", "format_field_csv", "format_vtk", "sample_solution", "write_fields"]


@dataclass(frozen=True)
class FieldSamples:
    """Triangulated per-cell, per-side samples; points are never shared across cells or sides."""

    points: np.ndarray
    triangles: np.ndarray
    values: np.ndarray
    exact: np.ndarray | None
    cell: np.ndarray        # per point
    side: np.ndarray        # per point, user-facing side
    tri_cell: np.ndarray
    tri_side: np.ndarray


def _lattice(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric lattice of a triangle split into n^2 sub-triangles."""
    idx = {}
    bary = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            idx[(i, j)] = len(bary)
            bary.append((i / n, j / n))
    tris = []
    for i in range(n):
        for j in range(n - i):
            tris.append((idx[(i, j)], idx[(i + 1, j)], idx[(i, j + 1)]))
            if i + j < n - 1:
                tris.append((idx[(i + 1, j)], idx[(i + 1, j + 1)], idx[(i, j + 1)]))
    return np.array(bary), np.array(tris, dtype=np.int64)


def sample_solution(solution, samples: int = 3, case=None) -> FieldSamples:
    bary, sub = _lattice(samples)
    pts, tris, vals, ex, pc, ps, tc, ts = [], [], [], [], [], [], [], []
    offset = 0
    for i, op in enumerate(solution.ops):
        data = op.data
        for s in data.layout.sides:
            coef = solution.coefficients(i, s)
            us = solution.user_side(s)
            for poly in data.geom.parts[s]:
                for tri in triangulate_polygon(poly):
                    p0, p1, p2 = tri
                    x = p0[None, :] + bary[:, :1] * (p1 - p0)[None, :] + bary[:, 1:] * (p2 - p0)[None, :]
                    pts.append(x)
                    tris.append(sub + offset)
                    vals.append(data.bases[s].values(x) @ coef)
                    if case is not None:
                        ex.append(case.u(us)(x))
                    pc.append(np.full(len(x), i))
                    ps.append(np.full(len(x), us))
                    tc.append(np.full(len(sub), i))
                    ts.append(np.full(len(sub), us))
                    offset += len(x)
    cat = np.concatenate
    return FieldSamples(cat(pts), cat(tris), cat(vals), cat(ex) if case is not None else None,
                        cat(pc), cat(ps), cat(tc), cat(ts))


def _f(v) -> str:
    return f"{float(v):.12e}"


def format_vtk(fs: FieldSamples, title: str = "cut HHO solution") -> str:
    n, m = len(fs.points), len(fs.triangles)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    out += [f"{_f(x)} {_f(y)} 0" for x, y in fs.points]
    out.append(f"CELLS {m} {4 * m}")
    out += [f"3 {a} {b} {c}" for a, b, c in fs.triangles]
    out.append(f"CELL_TYPES {m}")
    out += ["5"] * m
    out += [f"POINT_DATA {n}", "SCALARS u_h double 1", "LOOKUP_TABLE default"]
    out += [_f(v) for v in fs.values]
    if fs.exact is not None:
        out += ["SCALARS u_exact double 1", "LOOKUP_TABLE default"]
        out += [_f(v) for v in fs.exact]
    out += [f"CELL_DATA {m}", "SCALARS side int 1", "LOOKUP_TABLE default"]
    out += [str(int(s)) for s in fs.tri_side]
    out += ["SCALARS cell int 1", "LOOKUP_TABLE default"]
    out += [str(int(c)) for c in fs.tri_cell]
    return "\n".join(out) + "\n"


def format_field_csv(fs: FieldSamples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["x", "y", "cell", "side", "u_h"] + (["u_exact"] if fs.exact is not None else [])
    w.writerow(head)
    for j in range(len(fs.points)):
        row = [_f(fs.points[j, 0]), _f(fs.points[j, 1]), str(int(fs.cell[j])), str(int(fs.side[j])), _f(fs.values[j])]
        if fs.exact is not None:
            row.append(_f(fs.exact[j]))
        w.writerow(row)
    return buf.getvalue()


def write_fields(solution, out_dir, samples: int = 3, case=None, stem: str = "field") -> tuple[Path, Path]:
    fs = sample_solution(solution, samples, case)
    out = Path(out_dir)
    vtk, csv_path = out / f"{stem}.vtk", out / f"{stem}.csv"
    vtk.write_text(format_vtk(fs))
    csv_path.write_text(format_field_csv(fs))
    return vtk, csv_path
