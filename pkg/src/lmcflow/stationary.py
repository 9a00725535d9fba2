"""Damped Newton oracle for the stationary system F[D2u] = f(x, Du) + c.

Independent of the flow: solves the same discrete equations (interior
operator rows, per-node boundary conditions, mean-zero normalisation over
the interior) for the pair (u, c) with a dense direct linear solve and a
backtracking line search safeguarded by the convexity of the iterate.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry, grid
from .errors import StationaryError
from .operator import eigenvalues_2x2

__all__ = ["NewtonOptions", "NewtonResult", "residual", "newton_solve"]


@dataclass
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50
    max_backtrack: int = 20
    eps_convex: float = 1e-6


@dataclass
class NewtonResult:
    u: grid.Field
    c: float
    iterations: int
    converged: bool
    residual_norms: list


def _interior_operator(lat, values, src):
    comps = grid.interior_hessian(lat, values)
    g = grid.interior_gradient(lat, values)
    if lat.dim == 1:
        F = np.arctan(comps[0])
        lam_min = comps[0].min()
    else:
        l1, l2 = eigenvalues_2x2(*comps)
        F = np.arctan(l1) + np.arctan(l2)
        lam_min = l1.min()
    return F - src.f_eval(lat.interior_x, g), comps, g, float(lam_min)


def residual(u, c, src, lattice, target):
    """Stacked residual: interior F - f - c, boundary h(Ghat), mean(u) = 0."""
    lat = lattice
    vals = u.values if isinstance(u, grid.Field) else u
    rint, _, _, _ = _interior_operator(lat, vals, src)
    rb = grid.bc_residual(lat, vals, target)
    rn = float(vals[lat.interior_idx].mean())
    return np.concatenate([rint - c, rb, [rn]])


def _column_map(lat):
    act = lat.active_idx
    colmap = np.full(lat.size, -1, dtype=np.int64)
    colmap[act] = np.arange(len(act))
    return colmap, len(act) + 1  # + c column


def _jacobian(lat, values, src, target, colmap, ncols):
    d = lat.delta
    d2 = d * d
    ni = lat.n_interior
    nb = lat.n_boundary
    J = np.zeros((ni + nb + 1, ncols))

    comps = grid.interior_hessian(lat, values)
    g = grid.interior_gradient(lat, values)
    fp = src.f_grad_p(lat.interior_x, g)
    rows = np.arange(ni)

    def acc(rows_, flats, vals_):
        np.add.at(J, (rows_, colmap[flats]), vals_)

    if lat.dim == 1:
        f11 = 1.0 / (1.0 + comps[0] ** 2)
        acc(rows, lat.iE, f11 / d2 - fp[:, 0] / (2 * d))
        acc(rows, lat.iW, f11 / d2 + fp[:, 0] / (2 * d))
        acc(rows, lat.interior_idx, -2.0 * f11 / d2)
    else:
        uxx, uyy, uxy = comps
        # (I + A^2)^{-1} in closed form for A = [[uxx, uxy], [uxy, uyy]]
        a11 = 1.0 + uxx ** 2 + uxy ** 2
        a22 = 1.0 + uyy ** 2 + uxy ** 2
        a12 = uxy * (uxx + uyy)
        det = a11 * a22 - a12 ** 2
        f11 = a22 / det
        f22 = a11 / det
        f12 = -a12 / det
        acc(rows, lat.iE, f11 / d2 - fp[:, 0] / (2 * d))
        acc(rows, lat.iW, f11 / d2 + fp[:, 0] / (2 * d))
        acc(rows, lat.iN, f22 / d2 - fp[:, 1] / (2 * d))
        acc(rows, lat.iS, f22 / d2 + fp[:, 1] / (2 * d))
        acc(rows, lat.interior_idx, -2.0 * (f11 + f22) / d2)
        acc(rows, lat.iNE, f12 / (2 * d2))
        acc(rows, lat.iSW, f12 / (2 * d2))
        acc(rows, lat.iNW, -f12 / (2 * d2))
        acc(rows, lat.iSE, -f12 / (2 * d2))
    J[:ni, -1] = -1.0

    ghat = grid.boundary_wall_gradient(lat, values)
    hp = np.atleast_2d(geometry.defining_gradient(target, ghat))
    br = ni + np.arange(nb)
    s = lat.orient
    w = lat.w_anchor
    if lat.dim == 1:
        sx = s[:, 0]
        wx = w[:, 0]
        hx = hp[:, 0]
        acc(br, lat.boundary_idx, hx * (-3 * sx / (2 * d) + wx / d2))
        acc(br, lat.b_one[:, 0], hx * (4 * sx / (2 * d) - 2 * wx / d2))
        acc(br, lat.b_two[:, 0], hx * (-sx / (2 * d) + wx / d2))
    else:
        sx, sy = s[:, 0], s[:, 1]
        wx, wy = w[:, 0], w[:, 1]
        hx, hy = hp[:, 0], hp[:, 1]
        sxy = np.where(lat.diag_ok, sx * sy, 0)  # cross estimate absent -> no coupling
        acc(br, lat.boundary_idx,
            hx * (-3 * sx / (2 * d) + wx / d2 + sxy * wy / d2)
            + hy * (-3 * sy / (2 * d) + wy / d2 + sxy * wx / d2))
        acc(br, lat.b_one[:, 0],
            hx * (4 * sx / (2 * d) - 2 * wx / d2 - sxy * wy / d2)
            + hy * (-sxy * wx / d2))
        acc(br, lat.b_two[:, 0], hx * (-sx / (2 * d) + wx / d2))
        acc(br, lat.b_one[:, 1],
            hx * (-sxy * wy / d2)
            + hy * (4 * sy / (2 * d) - 2 * wy / d2 - sxy * wx / d2))
        acc(br, lat.b_two[:, 1], hy * (-sy / (2 * d) + wy / d2))
        diag_rows = br[lat.diag_ok]
        diag_vals = (hx * (sx * sy * wy / d2) + hy * (sx * sy * wx / d2))[lat.diag_ok]
        np.add.at(J, (diag_rows, colmap[lat.b_diag[lat.diag_ok]]), diag_vals)

    J[-1, colmap[lat.interior_idx]] = 1.0 / lat.n_interior
    return J


def newton_solve(u_init, src, lattice, target, opts=None):
    """Damped Newton on (u, c) from a convex start with admissible boundary
    residual; dense direct linear algebra (desk-scale unknown counts)."""
    opts = opts or NewtonOptions()
    lat = lattice
    values = u_init.values.copy()

    _, _, _, lam_min = _interior_operator(lat, values, src)
    if lam_min <= 0.0:
        raise StationaryError("convexity-lost",
                              f"initial iterate not convex (lam_min = {lam_min:.3e})")
    bc0 = np.abs(grid.bc_residual(lat, values, target)).max()
    if bc0 > 10.0 * lat.delta:
        raise StationaryError(
            "initial-data-inadmissible",
            f"initial boundary residual {bc0:.3e} exceeds 10 D = {10*lat.delta:.3e}")

    beta = np.atleast_2d(geometry.defining_gradient(
        target, grid.boundary_wall_gradient(lat, values)))
    lat.reorient(beta)

    # mean-zero shift of the whole field keeps the normalisation row small
    values[lat.active_idx] -= values[lat.interior_idx].mean()
    rint, _, _, _ = _interior_operator(lat, values, src)
    c = float(rint.mean())

    colmap, ncols = _column_map(lat)
    act = lat.active_idx
    norms = []
    for it in range(opts.max_iter):
        R = residual(values, c, src, lat, target)
        rn = float(np.abs(R).max())
        norms.append(rn)
        if rn <= opts.tol:
            return NewtonResult(u=grid.Field(lat, values), c=c, iterations=it,
                                converged=True, residual_norms=norms)
        J = _jacobian(lat, values, src, target, colmap, ncols)
        try:
            delta = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:
            raise StationaryError("singular-jacobian", str(exc))
        r2 = float(np.linalg.norm(R))
        lam = 1.0
        convexity_blocked = True
        for _ in range(opts.max_backtrack + 1):
            trial = values.copy()
            trial[act] += lam * delta[:-1]
            c_trial = c + lam * delta[-1]
            r_trial, _, _, lam_min = _interior_operator(lat, trial, src)
            if lam_min >= opts.eps_convex:
                convexity_blocked = False
                R_trial = residual(trial, c_trial, src, lat, target)
                if float(np.linalg.norm(R_trial)) < r2:
                    values, c = trial, c_trial
                    break
            lam *= 0.5
        else:
            code = "convexity-lost" if convexity_blocked else "newton-stagnated"
            raise StationaryError(code,
                                  f"backtracking exhausted at iteration {it} "
                                  f"(residual {rn:.3e})")
    raise StationaryError("newton-stagnated",
                          f"no convergence in {opts.max_iter} iterations "
                          f"(residual {norms[-1]:.3e})")
