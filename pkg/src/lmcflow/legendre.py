"""Discrete Legendre transform and duality diagnostics.

The conjugate is evaluated brute force, u~(p) = max over active source
nodes of (x . p - u(x)), which is robust for the desk-scale node counts
used here (the fast linear-time transform is out of scope).  The duality
report measures how well the discrete pair inverts gradients and Hessians
and how close the double conjugate returns to the original data.
"""

from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import GridError, SolverError
from .operator import eigenvalues_2x2

__all__ = ["legendre_transform", "DualityReport", "duality_checks",
           "dual_translator_residual"]

_CHUNK = 1024


def legendre_transform(u, target_lattice):
    """Convex conjugate of a strictly convex field, sampled on target nodes."""
    lat = u.lattice
    comps = grid.interior_hessian(lat, u.values)
    lam_min = comps[0].min() if lat.dim == 1 else eigenvalues_2x2(*comps)[0].min()
    if lam_min <= 0:
        raise SolverError("legendre", "not-convex",
                          f"conjugation needs strictly convex data (lam_min = {lam_min:.3e})")
    X = lat.node_coords(lat.active_idx).reshape(len(lat.active_idx), lat.dim)
    U = u.values[lat.active_idx]
    P = target_lattice.node_coords(target_lattice.active_idx)
    P = P.reshape(len(target_lattice.active_idx), target_lattice.dim)
    out = np.zeros(target_lattice.size)
    vals = np.empty(len(P))
    for start in range(0, len(P), _CHUNK):
        block = P[start:start + _CHUNK]
        scores = X @ block.T - U[:, None]
        vals[start:start + len(block)] = scores.max(axis=0)
    out[target_lattice.active_idx] = vals
    return grid.Field(target_lattice, out)


def _derivative_maps(lat, values):
    """Full-grid maps of the stencil derivatives, NaN off the interior."""
    g = grid.interior_gradient(lat, values)
    comps = grid.interior_hessian(lat, values)
    maps = {}
    for k in range(lat.dim):
        m = np.full(lat.size, np.nan)
        m[lat.interior_idx] = g[:, k]
        maps[f"g{k}"] = m
    names = ("h00",) if lat.dim == 1 else ("h00", "h11", "h01")
    for name, comp in zip(names, comps):
        m = np.full(lat.size, np.nan)
        m[lat.interior_idx] = comp
        maps[name] = m
    return maps


def _interior_valid(lat):
    valid = np.zeros(lat.size, dtype=bool)
    valid[lat.interior_idx] = True
    return valid


@dataclass
class DualityReport:
    grad_inverse_error: float
    hessian_product_error: float
    involution_error: float
    checked_points: int
    skipped_points: int


def duality_checks(u, u_tilde, target_lattice):
    """Measure D(u~) o Du = id and D2u~ . D2u = I at mapped interior nodes.

    Mapped points whose interpolation cell touches the target hull ring are
    skipped (their derivative stencils are incomplete).  Also reports the
    involution error max |L(L(u)) - u| over interior source nodes.
    """
    lat = u.lattice
    tl = target_lattice
    maps = _derivative_maps(tl, u_tilde.values)
    valid = _interior_valid(tl)
    g_src = grid.interior_gradient(lat, u.values)
    comps_src = grid.interior_hessian(lat, u.values)
    x_src = lat.interior_x

    checked = 0
    skipped = 0
    grad_err = 0.0
    hess_err = 0.0
    for k in range(lat.n_interior):
        p = g_src[k]
        try:
            gt = np.array([grid.interpolate(tl, maps[f"g{d}"], p, valid)
                           for d in range(lat.dim)])
            if lat.dim == 1:
                Ht = np.array([[grid.interpolate(tl, maps["h00"], p, valid)]])
                Hs = np.array([[comps_src[0][k]]])
            else:
                h00 = grid.interpolate(tl, maps["h00"], p, valid)
                h11 = grid.interpolate(tl, maps["h11"], p, valid)
                h01 = grid.interpolate(tl, maps["h01"], p, valid)
                Ht = np.array([[h00, h01], [h01, h11]])
                Hs = np.array([[comps_src[0][k], comps_src[2][k]],
                               [comps_src[2][k], comps_src[1][k]]])
        except GridError:
            skipped += 1
            continue
        if not np.all(np.isfinite(gt)) or not np.all(np.isfinite(Ht)):
            skipped += 1
            continue
        checked += 1
        grad_err = max(grad_err, float(np.max(np.abs(gt - x_src[k]))))
        hess_err = max(hess_err, float(np.max(np.abs(Ht @ Hs - np.eye(lat.dim)))))

    back = legendre_transform(u_tilde, lat)
    inv_err = float(np.max(np.abs(back.values[lat.interior_idx]
                                  - u.values[lat.interior_idx])))
    return DualityReport(grad_inverse_error=grad_err,
                         hessian_product_error=hess_err,
                         involution_error=inv_err,
                         checked_points=checked, skipped_points=skipped)


def dual_translator_residual(u_tilde, src, c_inf):
    """Residual of the dual translator relation at interior target nodes.

    The dual evolution reads u~_t = (n pi/2 - sum arctan(1/mu_i))
    + f(Du~, p) - n pi/2, and a translator moving at c has u~_t = -c, so the
    reported quantity is max |c - sum arctan(1/mu_i) + f(Du~, p)|.  The sign
    convention for the dual speed is not pinned down here; the residual is
    reported raw rather than gated.
    """
    tl = u_tilde.lattice
    comps = grid.interior_hessian(tl, u_tilde.values)
    if tl.dim == 1:
        mu = comps[0]
        if mu.min() <= 0:
            raise SolverError("legendre", "not-convex", "dual field is not convex")
        s = np.arctan(1.0 / mu)
    else:
        m1, m2 = eigenvalues_2x2(*comps)
        if m1.min() <= 0:
            raise SolverError("legendre", "not-convex", "dual field is not convex")
        s = np.arctan(1.0 / m1) + np.arctan(1.0 / m2)
    g = grid.interior_gradient(tl, u_tilde.values)
    f = src.f_eval(g, tl.interior_x)
    return float(np.max(np.abs(c_inf - s + f)))
