"""Legacy ASCII VTK and CSV writers."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh

VTK_TRIANGLE = 5


def von_mises(sigma: np.ndarray) -> np.ndarray:
    """Plane von Mises magnitude of ``[xx, yy, xy]`` stress components."""
    s = np.asarray(sigma, dtype=float)
    xx, yy, xy = s[..., 0], s[..., 1], s[..., 2]
    return np.sqrt(xx * xx - xx * yy + yy * yy + 3.0 * xy * xy)


def _vectors(a):
    a = np.asarray(a, dtype=float)
    return np.column_stack([a, np.zeros(len(a))])


def write_vtk(path, mesh: Mesh, point_data: dict, cell_data: dict | None = None,
              title: str = "viscodamage") -> Path:
    """Write an unstructured triangle grid.

    1-D arrays become SCALARS, 2-column arrays VECTORS and 3-column arrays
    (``[xx, yy, xy]``) symmetric TENSORS.
    """
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [f"{x:.16e} {y:.16e} 0.0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt

    def block(count, data, kind):
        out = [f"{kind} {count}"]
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"field {name!r} has non-finite values")
            if arr.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [f"{v:.16e}" for v in arr]
            elif arr.shape[1] == 2:
                out.append(f"VECTORS {name} double")
                out += [f"{a:.16e} {b:.16e} {c:.16e}" for a, b, c in _vectors(arr)]
            elif arr.shape[1] == 3:
                out.append(f"TENSORS {name} double")
                for xx, yy, xy in arr:
                    out += [f"{xx:.16e} {xy:.16e} 0.0", f"{xy:.16e} {yy:.16e} 0.0", "0.0 0.0 0.0"]
            else:
                raise ValueError(f"unsupported field shape {arr.shape} for {name!r}")
        return out

    if point_data:
        lines += block(mesh.n_vertices, point_data, "POINT_DATA")
    if cell_data:
        lines += block(nt, cell_data, "CELL_DATA")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_state_vtk(path, mesh: Mesh, state) -> Path:
    point = {"displacement": state.u, "damage": state.zeta}
    if state.w is not None:
        point["velocity"] = state.w
    cell = None
    if state.sigma is not None:
        cell = {"stress": state.sigma, "von_mises": von_mises(state.sigma)}
    return write_vtk(path, mesh, point, cell, title=f"step {state.n} t={state.t:.6g}")


def read_vtk(path) -> dict:
    """Parse a file written by :func:`write_vtk` and check its structure.

    Returns points, cells and the named data arrays; raises ``ValueError`` on
    inconsistent counts or non-finite values.
    """
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile") or tokens[2].strip() != "ASCII":
        raise ValueError("not a legacy ASCII VTK file")
    words = " ".join(tokens[4:]).split()
    pos = 0

    def take(n):
        nonlocal pos
        out = words[pos:pos + n]
        if len(out) != n:
            raise ValueError("unexpected end of file")
        pos += n
        return out

    result = {"point_data": {}, "cell_data": {}}
    kw, npts, _ = take(3)
    if kw != "POINTS":
        raise ValueError("missing POINTS section")
    npts = int(npts)
    result["points"] = np.array(take(3 * npts), dtype=float).reshape(npts, 3)
    if not np.all(np.isfinite(result["points"])):
        raise ValueError("non-finite point coordinates")
    kw, ncells, size = take(3)
    ncells, size = int(ncells), int(size)
    raw = np.array(take(size), dtype=int)
    if kw != "CELLS" or size != 4 * ncells or np.any(raw[0::4] != 3):
        raise ValueError("CELLS section is not a triangle list")
    cells = raw.reshape(ncells, 4)[:, 1:]
    if cells.min() < 0 or cells.max() >= npts:
        raise ValueError("cell references a missing point")
    result["cells"] = cells
    kw, ntypes = take(2)
    if kw != "CELL_TYPES" or int(ntypes) != ncells:
        raise ValueError("CELL_TYPES count mismatch")
    if np.any(np.array(take(ncells), dtype=int) != VTK_TRIANGLE):
        raise ValueError("non-triangle cell type")

    section, count = None, 0
    while pos < len(words):
        kw = take(1)[0]
        if kw in ("POINT_DATA", "CELL_DATA"):
            count = int(take(1)[0])
            expected = npts if kw == "POINT_DATA" else ncells
            if count != expected:
                raise ValueError(f"{kw} count {count} != {expected}")
            section = "point_data" if kw == "POINT_DATA" else "cell_data"
        elif section is None:
            raise ValueError("data array outside a data section")
        elif kw == "SCALARS":
            name, _, _ = take(3)
            take(2)
            arr = np.array(take(count), dtype=float)
            result[section][name] = arr
        elif kw in ("VECTORS", "TENSORS"):
            name, _ = take(2)
            width = 3 if kw == "VECTORS" else 9
            arr = np.array(take(width * count), dtype=float).reshape(count, width)
            result[section][name] = arr
        else:
            raise ValueError(f"unexpected keyword {kw!r}")
        if kw not in ("POINT_DATA", "CELL_DATA") and not np.all(np.isfinite(result[section][name])):
            raise ValueError(f"non-finite values in {name!r}")
    return result


TIMESERIES_COLUMNS = ("n", "t", "zeta_min", "zeta_max", "w_norm_V")


def write_timeseries(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for n, t, zmin, zmax, wv in rows:
            writer.writerow([n] + [f"{v:.5e}" for v in (t, zmin, zmax, wv)])
    return path
