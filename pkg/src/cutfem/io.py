"""CSV and legacy VTK output."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .mesh import Family


def fmt(v) -> str:
    """Round-trip formatting for numbers; other values pass through str()."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return "" if v is None else str(v)


def write_csv(path, rows: list[dict], columns: list[str] | None = None):
    """Write dict rows with a header; columns default to the keys of the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def _vtk_cells(space):
    """Corner-node connectivity of the active elements (linear cells) and VTK cell type."""
    p = space.p
    ref = np.rint(space.ref_nodes * p).astype(int)
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(ref)}
    if space.family is Family.QUAD:
        corners = [lookup[(0, 0)], lookup[(p, 0)], lookup[(p, p)], lookup[(0, p)]]
        ctype = 9
    else:
        corners = [lookup[(0, 0)], lookup[(p, 0)], lookup[(0, p)]]
        ctype = 5
    return space.cell_nodes[:, corners], ctype


def write_vtk(path, space, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "cutfem field", polylines=None):
    """Legacy ASCII UNSTRUCTURED_GRID with the active cells (corner nodes) and nodal fields.

    ``point_data`` maps names to arrays of shape (n_nodes,) or (n_nodes, 2);
    2-vectors are written as VECTORS with zero z.  ``polylines`` (list of point
    arrays) are appended as extra line cells, e.g. fibre overlays.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    conn, ctype = _vtk_cells(space)
    pts = space.node_coords
    extra_pts = []
    lines = []
    if polylines:
        base = len(pts)
        for pl in polylines:
            pl = np.asarray(pl, dtype=float)
            lines.append(list(range(base, base + len(pl))))
            extra_pts.append(pl)
            base += len(pl)
    allpts = np.vstack([pts] + extra_pts) if extra_pts else pts
    npts = len(allpts)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {npts} double\n")
        for x, y in allpts:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        ncell = len(conn) + len(lines)
        size = conn.size + len(conn) + sum(len(l) + 1 for l in lines)
        fh.write(f"CELLS {ncell} {size}\n")
        for c in conn:
            fh.write(f"{len(c)} " + " ".join(str(int(i)) for i in c) + "\n")
        for l in lines:
            fh.write(f"{len(l)} " + " ".join(str(i) for i in l) + "\n")
        fh.write(f"CELL_TYPES {ncell}\n")
        fh.write("".join(f"{ctype}\n" for _ in conn))
        fh.write("".join("4\n" for _ in lines))
        if cell_data:
            fh.write(f"CELL_DATA {ncell}\n")
            for name, arr in cell_data.items():
                arr = np.concatenate([np.asarray(arr, dtype=float), np.zeros(len(lines))])
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("".join(f"{v:.17g}\n" for v in arr))
        if point_data:
            fh.write(f"POINT_DATA {npts}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr, dtype=float)
                pad = npts - len(arr)
                if arr.ndim == 2:
                    arr = np.vstack([arr, np.zeros((pad, arr.shape[1]))])
                    fh.write(f"VECTORS {name} double\n")
                    fh.write("".join(f"{a:.17g} {b:.17g} 0\n" for a, b in arr[:, :2]))
                else:
                    arr = np.concatenate([arr, np.zeros(pad)])
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    fh.write("".join(f"{v:.17g}\n" for v in arr))
    return path


def nodal_von_mises(space, u, material):
    """Von Mises stress at nodes, averaged over the incident active elements."""
    from .forms import von_mises
    from .space import shape_eval

    acc = np.zeros(space.n_nodes)
    cnt = np.zeros(space.n_nodes)
    xi = space.ref_nodes
    for li, e in enumerate(space.mesh.elements):
        k = space.element_type(e)
        G = space.physical_gradients(k, xi)
        ue = u[space.cell_dofs[li]].reshape(-1, 2)
        grad = np.einsum("qnb,na->qab", G, ue)
        np.add.at(acc, space.cell_nodes[li], von_mises(material, grad))
        np.add.at(cnt, space.cell_nodes[li], 1.0)
    return acc / np.maximum(cnt, 1)


def write_field_vtk(path, space, u, material, title="displacement", polylines=None):
    disp = u.reshape(-1, 2)
    vm = nodal_von_mises(space, u, material)
    return write_vtk(path, space, {"displacement": disp, "von_mises": vm}, title=title, polylines=polylines)
