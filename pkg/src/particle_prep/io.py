"""Artifact writers.

All floats are rendered with %.17g so identical runs produce byte-identical
files. Writers go through `artifact`, which leaves a ".incomplete" file
behind if writing is interrupted and renames to the final path on success.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .levelset import CORE, FAR_NEGATIVE, FAR_POSITIVE, INNER, LevelSetField

_TAG_CHARS = {FAR_POSITIVE: "P", FAR_NEGATIVE: "N", INNER: "I", CORE: "C"}


def _fmt(x):
    return "%.17g" % float(x)


@contextmanager
def artifact(path):
    """Write to '<path>.incomplete', renaming to `path` on clean completion."""
    path = Path(path)
    tmp = path.with_name(path.name + ".incomplete")
    with open(tmp, "w", encoding="utf-8") as f:
        yield f
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def write_field_dump(field: LevelSetField, path):
    """ASCII structured-grid dump: one line per stored fine cell
    "i j [k] phi nx ny [nz] Ix Iy [Iz] id", plus a run-length-encoded
    coarse-tag table from which the far cells are reconstructable."""
    d = field.dimension
    gidx = field.global_fine_indices().reshape(-1, d)
    phi = field.phi.reshape(-1)
    nrm = field.normal.reshape(-1, d)
    comp = field.completion.reshape(-1, d)
    iface = field.iface.reshape(-1)
    with artifact(path) as f:
        origin = ",".join(_fmt(v) for v in field.origin)
        dims = ",".join(str(int(v)) for v in field.coarse_dims)
        f.write(f"LEVELSET d={d} lc={_fmt(field.l_c)} origin={origin} dims={dims}\n")
        for i in range(len(phi)):
            cols = [str(int(v)) for v in gidx[i]]
            cols.append(_fmt(phi[i]))
            cols += [_fmt(v) for v in nrm[i]]
            cols += [_fmt(v) for v in comp[i]]
            cols.append(str(int(iface[i])))
            f.write(" ".join(cols) + "\n")
        f.write("TAGS ")
        f.write(" ".join(_rle(field.coarse_tags.ravel())))
        f.write("\n")


def _rle(tags):
    out = []
    run_tag = int(tags[0])
    run_len = 1
    for t in tags[1:]:
        t = int(t)
        if t == run_tag:
            run_len += 1
        else:
            out.append(f"{run_len}{_TAG_CHARS[run_tag]}")
            run_tag = t
            run_len = 1
    out.append(f"{run_len}{_TAG_CHARS[run_tag]}")
    return out


def read_tag_table(path):
    """Decode the RLE tag table of a field dump (round-trip check helper)."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        dims = [int(v) for v in header[-1].split("=")[1].split(",")]
        for line in f:
            if line.startswith("TAGS "):
                tokens = line[5:].split()
                break
        else:
            raise ValueError(f"{path}: no TAGS table")
    rev = {v: k for k, v in _TAG_CHARS.items()}
    vals = []
    for tok in tokens:
        vals.extend([rev[tok[-1]]] * int(tok[:-1]))
    return np.array(vals, dtype=np.uint8).reshape(dims)


def write_particles_csv(ps, path):
    d = ps.dimension
    header = ("x,y,volume" if d == 2 else "x,y,z,volume") + "\n"
    with artifact(path) as f:
        f.write(header)
        for row in ps.positions:
            f.write(",".join(_fmt(v) for v in row))
            f.write("," + _fmt(ps.volume) + "\n")


def write_particles_vtk(ps, path, title="particle-prep point cloud"):
    """Legacy ASCII VTK polydata point cloud with per-particle volume."""
    n = len(ps)
    pos = ps.positions
    with artifact(path) as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(title + "\n")
        f.write("ASCII\n")
        f.write("DATASET POLYDATA\n")
        f.write(f"POINTS {n} double\n")
        for row in pos:
            coords = list(row) + [0.0] * (3 - len(row))
            f.write(" ".join(_fmt(v) for v in coords) + "\n")
        f.write(f"VERTICES {n} {2 * n}\n")
        for i in range(n):
            f.write(f"1 {i}\n")
        f.write(f"POINT_DATA {n}\n")
        f.write("SCALARS volume double\n")
        f.write("LOOKUP_TABLE default\n")
        for _ in range(n):
            f.write(_fmt(ps.volume) + "\n")


def write_diagnostics_csv(diag, path):
    with artifact(path) as f:
        f.write("iter,avg_kinetic_energy,max_disp,bounded_count\n")
        for i in range(len(diag)):
            f.write(
                f"{i},{_fmt(diag.avg_kinetic_energy[i])},"
                f"{_fmt(diag.max_displacement[i])},{diag.bounded_count[i]}\n"
            )


def write_clean_report(report, path):
    cols = [
        "pass", "zero_cut", "pos_cut", "neg_cut", "gap_cut",
        "non_plus", "non_minus", "modified", "reinit_residual",
    ]
    with artifact(path) as f:
        f.write(" ".join(f"{c:>15}" for c in cols) + "\n")
        for p in report.passes:
            row = [
                p.index, p.n_zero, p.n_pos, p.n_neg, p.n_gap,
                p.n_non_plus, p.n_non_minus, p.modified,
            ]
            f.write(" ".join(f"{v:>15}" for v in row))
            f.write(f" {p.residual:>15.6g}\n")
        f.write(f"complete: {'yes' if report.complete else 'no'}\n")


def write_resolved_config(resolved: dict, path):
    with artifact(path) as f:
        for k in sorted(resolved):
            f.write(f"{k}={resolved[k]}\n")


def write_polyline_csv(geom, path):
    """Export a single-loop 2D surface as a polyline CSV."""
    loops = _chain_loops(geom)
    if len(loops) != 1:
        raise ValueError(
            f"polyline CSV holds one loop; geometry has {len(loops)}"
        )
    with artifact(path) as f:
        for v in loops[0]:
            f.write(f"{_fmt(v[0])},{_fmt(v[1])}\n")


def _chain_loops(geom):
    segs = geom.elements
    n = len(segs)
    start_of = {}
    for i in range(n):
        start_of[tuple(segs[i, 0])] = i
    used = np.zeros(n, dtype=bool)
    loops = []
    for i in range(n):
        if used[i]:
            continue
        loop = [segs[i, 0]]
        j = i
        while True:
            used[j] = True
            nxt = tuple(segs[j, 1])
            j = start_of.get(nxt)
            if j is None or used[j]:
                break
            loop.append(segs[j, 0])
        loops.append(np.asarray(loop))
    return loops


def write_stl_ascii(geom, path, name="surface"):
    tris = geom.elements
    with artifact(path) as f:
        f.write(f"solid {name}\n")
        for t in tris:
            n = np.cross(t[1] - t[0], t[2] - t[0])
            mag = np.linalg.norm(n)
            n = n / mag if mag > 0 else n
            f.write(f"  facet normal {_fmt(n[0])} {_fmt(n[1])} {_fmt(n[2])}\n")
            f.write("    outer loop\n")
            for v in t:
                f.write(f"      vertex {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
            f.write("    endloop\n")
            f.write("  endfacet\n")
        f.write(f"endsolid {name}\n")
