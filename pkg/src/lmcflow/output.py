"""Deterministic, atomically written artifacts: CSV, key=value, PGM (P5).

All floating point goes out with 17 significant digits so identical runs
produce byte-identical files; every file is staged in a temp sibling and
renamed into place so aborted runs never leave truncated artifacts.
"""

import os
import tempfile

import numpy as np

from . import grid
from .errors import SolverError

__all__ = ["atomic_write", "write_field_csv", "read_field_csv",
           "write_diagnostics_csv", "write_summary", "write_heatmap",
           "format_float"]


def format_float(x):
    return f"{float(x):.17g}"


def atomic_write(path, data):
    """Write bytes/str to path via temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _node_ij(lat, flat):
    if lat.dim == 1:
        return (int(flat),)
    nx = lat.npts[0]
    return int(flat % nx), int(flat // nx)


def write_field_csv(path, fld):
    """Field rows over active nodes, boundary Hessian columns written as nan."""
    lat = fld.lattice
    ff = format_float
    lines = []
    if lat.dim == 1:
        lines.append("i,x,u,ux,uxx,lam_min,lam_max")
    else:
        lines.append("i,j,x,y,u,ux,uy,uxx,uxy,uyy,lam_min,lam_max")

    g_int = grid.interior_gradient(lat, fld.values)
    comps = grid.interior_hessian(lat, fld.values)
    g_bnd = grid.boundary_gradient_raw(lat, fld.values)
    int_pos = {int(f): k for k, f in enumerate(lat.interior_idx)}
    bnd_pos = {int(f): k for k, f in enumerate(lat.boundary_idx)}

    for flat in lat.active_idx:
        flat = int(flat)
        ij = _node_ij(lat, flat)
        xy = np.atleast_1d(lat.node_coords(flat))
        u = fld.values[flat]
        if flat in int_pos:
            k = int_pos[flat]
            gvec = g_int[k]
            if lat.dim == 1:
                uxx = comps[0][k]
                hess_cols = [ff(uxx), ff(uxx), ff(uxx)]
            else:
                uxx, uyy, uxy = comps[0][k], comps[1][k], comps[2][k]
                mean = 0.5 * (uxx + uyy)
                r = np.sqrt(0.25 * (uxx - uyy) ** 2 + uxy ** 2)
                hess_cols = [ff(uxx), ff(uxy), ff(uyy), ff(mean - r), ff(mean + r)]
        else:
            k = bnd_pos[flat]
            gvec = g_bnd[k]
            hess_cols = ["nan"] * (3 if lat.dim == 1 else 5)
        cols = [str(v) for v in ij] + [ff(c) for c in xy] + [ff(u)] \
            + [ff(c) for c in np.atleast_1d(gvec)] + hess_cols
        lines.append(",".join(cols))
    atomic_write(path, "\n".join(lines) + "\n")


def read_field_csv(path, lat):
    """Load a field written by write_field_csv back onto a matching lattice."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        n_ij = 1 if lat.dim == 1 else 2
        u_col = header.index("u")
        values = np.zeros(lat.size)
        seen = np.zeros(lat.size, dtype=bool)
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            ij = tuple(int(p) for p in parts[:n_ij])
            flat = lat.node_flat(ij)
            values[flat] = float(parts[u_col])
            seen[flat] = True
    if not np.all(seen[lat.active_idx]):
        raise SolverError("cli", "field-mismatch",
                          "field file does not cover every active node of the lattice")
    return grid.Field(lat, values)


DIAG_HEADER = ("t,dt,udot_min,udot_max,udot_mean,udot_osc,lam_min,lam_max,"
               "obliq_min,bc_residual_max,image_violation,"
               "sumF_min,sumF_max,sumFl2_min,sumFl2_max")


def write_diagnostics_csv(path, diags):
    ff = format_float
    lines = [DIAG_HEADER]
    for d in diags:
        lines.append(",".join(ff(v) for v in (
            d.t, d.dt, d.udot_min, d.udot_max, d.udot_mean, d.udot_osc,
            d.lam_min, d.lam_max, d.obliq_min, d.bc_residual_max,
            d.image_violation, d.sumF_min, d.sumF_max, d.sumFl2_min,
            d.sumFl2_max)))
    atomic_write(path, "\n".join(lines) + "\n")


def write_summary(path, items):
    """key=value lines in insertion order; floats at 17 significant digits."""
    lines = []
    for key, value in items.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = format_float(value)
        lines.append(f"{key}={value}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_summary(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                k, _, v = line.partition("=")
                out[k] = v
    return out


def write_heatmap(path, lat, values):
    """Binary 8-bit P5 raster, linear min->0 max->255 over active nodes,
    exterior black; rows run from the top (largest y) down."""
    if lat.dim != 2:
        raise SolverError("cli", "heatmap-1d", "heatmaps are only written for 2D lattices")
    nx, ny = lat.npts
    act = lat.active_idx
    vmin = float(values[act].min())
    vmax = float(values[act].max())
    span = vmax - vmin
    img = np.zeros(lat.size, dtype=np.uint8)
    if span > 0:
        scaled = np.clip((values[act] - vmin) / span * 255.0, 0.0, 255.0)
        img[act] = np.round(scaled).astype(np.uint8)
    else:
        img[act] = 255
    rows = img.reshape(ny, nx)[::-1, :]
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    atomic_write(path, header + rows.tobytes())
