"""Convergence CSV, legacy ASCII VTK and JSON summary output."""
import csv
import json
import math

import numpy as np

from . import kernels

CSV_HEADER = ["h", "tau", "err_uf_L2", "rate_uf", "err_up_L2", "rate_up", "err_phi_L2", "rate_phi", "wall_s"]
_ERR_COLUMNS = (("err_uf", "rate_uf"), ("err_up", "rate_up"), ("err_phi", "rate_phi"))


def _num(x):
    return f"{x:.10e}"


def _rate(prev, cur):
    if prev is None or not (prev > 0 and cur > 0):
        return ""
    return f"{math.log2(prev / cur):.4f}"


class ConvergenceCsv:
    """Streams study rows to disk; each line is flushed as soon as it is known.

    Set ``wall_time=False`` to leave the ``wall_s`` column empty so that the
    file is byte-identical across runs.
    """

    def __init__(self, path, wall_time=True):
        self.path = path
        self.wall_time = wall_time
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_HEADER)
        self._fh.flush()
        self._prev = None

    def add(self, row):
        cells = [f"{row.h:.10g}", f"{row.tau:.10g}"]
        for err, _ in _ERR_COLUMNS:
            cur = getattr(row, err)
            cells += [_num(cur), _rate(None if self._prev is None else getattr(self._prev, err), cur)]
        cells.append(f"{row.wall_s:.3f}" if self.wall_time else "")
        self._w.writerow(cells)
        self._fh.flush()
        self._prev = row

    def fail(self, h, reason):
        reason = " ".join(str(reason).split())
        self._fh.write(f"# FAILED at h={h:.10g}: {reason}\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_convergence_csv(path, report, wall_time=True, failed_h=None):
    with ConvergenceCsv(path, wall_time) as out:
        for row in report.rows:
            out.add(row)
        if report.failure is not None:
            out.fail(failed_h if failed_h is not None else float("nan"), report.failure)


def read_convergence_csv(path):
    """Rows as dicts of floats (blank cells -> None); comment lines skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append({k: (float(v) if v != "" else None) for k, v in rec.items()})
    return rows


# ---------------------------------------------------------------------------
# VTK


def vertex_fields(mesh, spaces, state):
    """Per-vertex Stokes velocity and pressure, zero outside the fluid region."""
    Vf, Qf, _, _ = spaces
    nv = len(mesh.vertices)
    u = np.zeros((nv, 2))
    p = np.zeros(nv)
    u[Vf.vertices] = np.asarray(state.u_f)[Vf.vertex_dofs(Vf.vertices)]
    p[Qf.vertices] = np.asarray(state.p_f)
    return u, p


def cell_fields(mesh, spaces, state):
    """Per-cell Darcy pressure and cell-averaged Darcy velocity (zero in the fluid)."""
    _, _, Vp, Qp = spaces
    nt = len(mesh.triangles)
    phi = np.zeros(nt)
    up = np.zeros((nt, 2))
    phi[Qp.triangles] = np.asarray(state.phi_p)
    # RT0 fields are affine per cell, so the centroid value is the average
    centroid = np.full((1, 3), 1.0 / 3.0)
    psi = kernels.rt0_values(mesh.triangle_coords(Vp.triangles), Vp.cell_signs, centroid)
    up[Vp.triangles] = np.einsum("ti,tic->tc", np.asarray(state.u_p)[Vp.cell_dofs], psi[:, :, 0, :])
    return phi, up


def write_vtk(path, mesh, spaces, state, title="stokes-darcy fields"):
    """Legacy ASCII unstructured grid (version 2.0) with point and cell data."""
    u, p = vertex_fields(mesh, spaces, state)
    phi, up = cell_fields(mesh, spaces, state)
    nv, nt = len(mesh.vertices), len(mesh.triangles)
    lines = [
        "# vtk DataFile Version 2.0",
        f"{title} t={state.t:.10g}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")
    lines.append("VECTORS u_f double")
    lines += [f"{a:.16g} {b:.16g} 0" for a, b in u]
    lines += ["SCALARS p_f double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.16g}" for v in p]
    lines.append(f"CELL_DATA {nt}")
    lines += ["SCALARS phi_p double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.16g}" for v in phi]
    lines += ["SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.triangle_region]
    lines.append("VECTORS u_p double")
    lines += [f"{a:.16g} {b:.16g} 0" for a, b in up]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_sections(path):
    """Minimal reader for files produced by :func:`write_vtk` (used in tests)."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    out = {"header": tokens[0]}
    i = 0
    while i < len(tokens):
        parts = tokens[i].split()
        if parts and parts[0] == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
            i += n
        elif parts and parts[0] in ("VECTORS", "SCALARS"):
            name = parts[1]
            skip = 2 if parts[0] == "SCALARS" else 1
            n = out["_count"]
            vals = [[float(v) for v in tokens[i + skip + k].split()] for k in range(n)]
            out[name] = np.array(vals).squeeze()
            i += n + skip - 1
        elif parts and parts[0] in ("POINT_DATA", "CELL_DATA", "CELLS"):
            out["_count"] = int(parts[1])
            if parts[0] == "CELLS":
                out["n_cells"] = int(parts[1])
        i += 1
    out.pop("_count", None)
    return out


# ---------------------------------------------------------------------------
# JSON


def row_dict(row):
    return {
        "n": row.n,
        "h": row.h,
        "tau": row.tau,
        "err_uf_L2": row.err_uf,
        "err_up_L2": row.err_up,
        "err_phi_L2": row.err_phi,
        "err_uf_H1": row.err_uf_h1,
        "jump_L2": row.jump,
        "wall_s": row.wall_s,
    }


def write_summary(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

