"""Uniform lattice over the source domain with oblique boundary solves.

Node classification uses a half-spacing collar around the wall: nodes with
h >= -D/2 are active, active nodes within the band |h| <= D/2 (or lacking a
full interior stencil) carry the boundary condition, the rest are interior
PDE nodes.  Interior derivatives are the standard second-order central
stencils; boundary nodes use per-axis second-order one-sided differences
along stored upwind orientations.

The gradient-image condition is enforced per boundary node as

    h_target( G(u_b) + H(u_b) . w ) = 0,

where G is the one-sided node gradient, H the one-sided Hessian estimate
(both exact on quadratics) and w the offset from the node to its exact
projection onto the inset level set {h_source = min(D^2, D/4)}.  Anchoring
every constraint on a single level set makes the boundary error of the
scheme a smooth function of D instead of node-placement noise; see the
refinement study.  The scalar equation is a concave quadratic in u_b and is
solved in closed form on the branch of the current value, which is exactly
the limit of the safeguarded Newton iteration that `solve_boundary_node`
implements node by node.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import GridError

__all__ = ["Lattice", "Field", "build_lattice", "gradient", "hessian",
           "solve_boundary_node", "boundary_sweep", "interpolate"]

STATUS_EXTERIOR = 0
STATUS_INTERIOR = 1
STATUS_BOUNDARY = 2


@dataclass
class Lattice:
    """Grid geometry, classification and precomputed stencil indices.

    All index arrays are flat (row-major, x fastest).  Orientation state is
    owned by the lattice and updated by the solvers through `reorient`;
    everything else is immutable after construction.
    """

    omega: object
    dim: int
    delta: float
    origin: np.ndarray
    npts: tuple                      # nodes per axis, x first
    status: np.ndarray               # flat int8
    interior_idx: np.ndarray
    boundary_idx: np.ndarray
    active_idx: np.ndarray
    interior_x: np.ndarray           # (ni, dim)
    boundary_x: np.ndarray           # (nb, dim)
    bc_level: float                  # inset level for the boundary anchor
    proj_wall: np.ndarray            # (nb, dim) projection onto {h = 0}
    proj_anchor: np.ndarray          # (nb, dim) projection onto {h = bc_level}
    w_anchor: np.ndarray             # proj_anchor - node
    nearest_interior: np.ndarray     # (nb,) positions into interior arrays
    orient: np.ndarray               # (nb, dim) in {-1, +1}
    avail: np.ndarray                # (nb, dim, 2) usable orientations (+1, -1)
    # filled by _rebuild_neighbors:
    b_one: np.ndarray = None         # (nb, dim) flat of node + s e_k
    b_two: np.ndarray = None         # (nb, dim) flat of node + 2 s e_k
    b_diag: np.ndarray = None        # (nb,) flat of node + sx ex + sy ey (2D)
    diag_ok: np.ndarray = None
    # interior stencil flats:
    iE: np.ndarray = None
    iW: np.ndarray = None
    iN: np.ndarray = None
    iS: np.ndarray = None
    iNE: np.ndarray = None
    iNW: np.ndarray = None
    iSE: np.ndarray = None
    iSW: np.ndarray = None

    @property
    def n_interior(self):
        return len(self.interior_idx)

    @property
    def n_boundary(self):
        return len(self.boundary_idx)

    @property
    def size(self):
        n = 1
        for k in self.npts:
            n *= k
        return n

    def node_flat(self, node):
        node = tuple(np.atleast_1d(node).astype(int))
        if self.dim == 1:
            return int(node[0])
        i, j = node
        return int(j) * self.npts[0] + int(i)

    def node_coords(self, flat):
        flat = np.asarray(flat)
        if self.dim == 1:
            return self.origin[0] + flat * self.delta
        nx = self.npts[0]
        i = flat % nx
        j = flat // nx
        return np.stack([self.origin[0] + i * self.delta,
                         self.origin[1] + j * self.delta], axis=-1)

    def _strides(self):
        return (1,) if self.dim == 1 else (1, self.npts[0])

    def _rebuild_neighbors(self):
        strides = self._strides()
        nb = self.n_boundary
        self.b_one = np.empty((nb, self.dim), dtype=np.int64)
        self.b_two = np.empty((nb, self.dim), dtype=np.int64)
        for k in range(self.dim):
            self.b_one[:, k] = self.boundary_idx + self.orient[:, k] * strides[k]
            self.b_two[:, k] = self.boundary_idx + 2 * self.orient[:, k] * strides[k]
        if self.dim == 2:
            diag = (self.boundary_idx + self.orient[:, 0] * strides[0]
                    + self.orient[:, 1] * strides[1])
            ok = np.zeros(nb, dtype=bool)
            in_range = (diag >= 0) & (diag < self.size)
            ok[in_range] = self.status[diag[in_range]] != STATUS_EXTERIOR
            self.b_diag = np.where(ok, diag, self.boundary_idx)
            self.diag_ok = ok

    def desired_orientation(self, beta):
        """Upwind orientation from the sign pattern of beta, clamped to
        availability; geometric inward direction breaks ties."""
        geo = geometry.defining_gradient(self.omega, self.boundary_x)
        geo = np.atleast_2d(geo)
        want = np.sign(beta).astype(np.int64)
        fallback = np.where(np.sign(geo) != 0, np.sign(geo), 1.0).astype(np.int64)
        want = np.where(want != 0, want, fallback)
        plus_ok = self.avail[:, :, 0]
        minus_ok = self.avail[:, :, 1]
        want = np.where((want > 0) & ~plus_ok, -1, want)
        want = np.where((want < 0) & ~minus_ok, 1, want)
        return want

    def reorient(self, beta):
        """Adopt the orientation implied by beta; True if anything changed."""
        want = self.desired_orientation(beta)
        if np.array_equal(want, self.orient):
            return False
        self.orient = want
        self._rebuild_neighbors()
        return True


@dataclass
class Field:
    """Scalar values on the active nodes of a lattice (flat full-grid array)."""

    lattice: Lattice
    values: np.ndarray

    @classmethod
    def from_function(cls, lattice, fn):
        vals = np.zeros(lattice.size)
        pts = lattice.node_coords(lattice.active_idx)
        if lattice.dim == 1:
            vals[lattice.active_idx] = fn(pts)
        else:
            vals[lattice.active_idx] = fn(pts[:, 0], pts[:, 1])
        return cls(lattice, vals)

    def copy(self):
        return Field(self.lattice, self.values.copy())

    def check_finite(self):
        if not np.all(np.isfinite(self.values[self.lattice.active_idx])):
            raise GridError("state-corrupted", "non-finite value at an active node")

    def active_values(self):
        return self.values[self.lattice.active_idx]


def build_lattice(omega, resolution):
    """Cover the bounding box of omega with `resolution` nodes per axis.

    The box is padded symmetrically so the spacing is equal on both axes.
    Raises "resolution-too-coarse" when a boundary node lacks two
    consecutive active inward neighbours on some axis.
    """
    if resolution < 9:
        raise GridError("resolution-too-coarse",
                        f"resolution {resolution} < 9 cannot resolve the domain")
    lo, hi = geometry.bounding_box(omega)
    extent = hi - lo
    delta = float(np.max(extent)) / (resolution - 1)
    pad = ((resolution - 1) * delta - extent) / 2.0
    origin = lo - pad
    dim = omega.dim

    if dim == 1:
        xs = origin[0] + delta * np.arange(resolution)
        pts = xs.reshape(-1, 1)
        npts = (resolution,)
    else:
        idx = np.arange(resolution)
        I, J = np.meshgrid(idx, idx, indexing="xy")
        pts = np.stack([origin[0] + delta * I.ravel(),
                        origin[1] + delta * J.ravel()], axis=1)
        npts = (resolution, resolution)

    h = np.atleast_1d(geometry.defining_value(omega, pts))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(h))))
    active = h >= -delta / 2.0 - tol

    size = len(pts)
    status = np.zeros(size, dtype=np.int8)
    if dim == 1:
        full = np.zeros(size, dtype=bool)
        full[1:-1] = active[1:-1] & active[:-2] & active[2:]
    else:
        nx = resolution
        a2 = active.reshape(resolution, nx)
        f2 = np.zeros_like(a2)
        f2[1:-1, 1:-1] = (
            a2[1:-1, 1:-1]
            & a2[1:-1, 2:] & a2[1:-1, :-2] & a2[2:, 1:-1] & a2[:-2, 1:-1]
            & a2[2:, 2:] & a2[2:, :-2] & a2[:-2, 2:] & a2[:-2, :-2])
        full = f2.ravel()

    interior = active & (h > delta / 2.0 + tol) & full
    boundary = active & ~interior
    status[interior] = STATUS_INTERIOR
    status[boundary] = STATUS_BOUNDARY

    interior_idx = np.flatnonzero(interior)
    boundary_idx = np.flatnonzero(boundary)
    active_idx = np.flatnonzero(active)
    if len(interior_idx) == 0:
        raise GridError("resolution-too-coarse", "no interior nodes inside the domain")

    # per-axis availability of one-sided stencils at boundary nodes
    strides = (1,) if dim == 1 else (1, resolution)
    nb = len(boundary_idx)
    avail = np.zeros((nb, dim, 2), dtype=bool)
    if dim == 1:
        coords = [boundary_idx]
    else:
        coords = [boundary_idx % resolution, boundary_idx // resolution]
    for k in range(dim):
        for d_i, sgn in enumerate((1, -1)):
            c2 = coords[k] + 2 * sgn
            ok = (c2 >= 0) & (c2 < resolution)
            n1 = boundary_idx + sgn * strides[k]
            n2 = boundary_idx + 2 * sgn * strides[k]
            good = np.zeros(nb, dtype=bool)
            good[ok] = active[n1[ok]] & active[n2[ok]]
            avail[:, k, d_i] = good
    if not np.all(avail.any(axis=2)):
        bad = np.flatnonzero(~avail.any(axis=2).all(axis=1))[0]
        raise GridError("resolution-too-coarse",
                        f"boundary node at {pts[boundary_idx[bad]]} lacks two inward "
                        f"neighbours on some axis")

    bx = pts[boundary_idx]
    bc_level = min(delta ** 2, delta / 4.0)
    proj_wall = np.atleast_2d(geometry.project_to_level(omega, bx, 0.0))
    proj_anchor = np.atleast_2d(geometry.project_to_level(omega, bx, bc_level))

    ix = pts[interior_idx]
    nearest = np.empty(nb, dtype=np.int64)
    for start in range(0, nb, 256):
        chunk = bx[start:start + 256]
        d2 = np.sum((chunk[:, None, :] - ix[None, :, :]) ** 2, axis=2)
        nearest[start:start + len(chunk)] = np.argmin(d2, axis=1)

    lat = Lattice(
        omega=omega, dim=dim, delta=delta, origin=origin, npts=npts,
        status=status, interior_idx=interior_idx, boundary_idx=boundary_idx,
        active_idx=active_idx, interior_x=ix, boundary_x=bx,
        bc_level=bc_level, proj_wall=proj_wall, proj_anchor=proj_anchor,
        w_anchor=proj_anchor - bx, nearest_interior=nearest,
        orient=np.ones((nb, dim), dtype=np.int64), avail=avail,
    )
    # geometric inward orientation to start with
    lat.orient = lat.desired_orientation(np.zeros((nb, dim)))
    lat._rebuild_neighbors()

    if dim == 1:
        lat.iE = interior_idx + 1
        lat.iW = interior_idx - 1
    else:
        nx = resolution
        lat.iE = interior_idx + 1
        lat.iW = interior_idx - 1
        lat.iN = interior_idx + nx
        lat.iS = interior_idx - nx
        lat.iNE = interior_idx + nx + 1
        lat.iNW = interior_idx + nx - 1
        lat.iSE = interior_idx - nx + 1
        lat.iSW = interior_idx - nx - 1
    return lat


# -- vectorised interior derivatives -------------------------------------

def interior_gradient(lat, values):
    """Central-difference gradient at all interior nodes, (ni, dim)."""
    two_d = 2.0 * lat.delta
    if lat.dim == 1:
        return ((values[lat.iE] - values[lat.iW]) / two_d).reshape(-1, 1)
    gx = (values[lat.iE] - values[lat.iW]) / two_d
    gy = (values[lat.iN] - values[lat.iS]) / two_d
    return np.stack([gx, gy], axis=1)


def interior_hessian(lat, values):
    """Central second differences at all interior nodes.

    Returns (uxx,) in 1D and (uxx, uyy, uxy) in 2D.
    """
    d2 = lat.delta ** 2
    c = values[lat.interior_idx]
    uxx = (values[lat.iE] - 2.0 * c + values[lat.iW]) / d2
    if lat.dim == 1:
        return (uxx,)
    uyy = (values[lat.iN] - 2.0 * c + values[lat.iS]) / d2
    uxy = (values[lat.iNE] - values[lat.iNW] - values[lat.iSE] + values[lat.iSW]) / (4.0 * d2)
    return uxx, uyy, uxy


# -- boundary machinery ---------------------------------------------------

def boundary_gradient_raw(lat, values):
    """One-sided second-order gradient at boundary nodes, (nb, dim)."""
    u0 = values[lat.boundary_idx]
    G = np.empty((lat.n_boundary, lat.dim))
    for k in range(lat.dim):
        s = lat.orient[:, k]
        G[:, k] = s * (-3.0 * u0 + 4.0 * values[lat.b_one[:, k]]
                       - values[lat.b_two[:, k]]) / (2.0 * lat.delta)
    return G


def boundary_hessian_estimate(lat, values):
    """One-sided Hessian estimate at boundary nodes (exact on quadratics)."""
    d2 = lat.delta ** 2
    u0 = values[lat.boundary_idx]
    H = np.zeros((lat.n_boundary, lat.dim, lat.dim))
    for k in range(lat.dim):
        H[:, k, k] = (u0 - 2.0 * values[lat.b_one[:, k]] + values[lat.b_two[:, k]]) / d2
    if lat.dim == 2:
        sxy = lat.orient[:, 0] * lat.orient[:, 1]
        hxy = sxy * (u0 - values[lat.b_one[:, 0]] - values[lat.b_one[:, 1]]
                     + values[lat.b_diag]) / d2
        hxy = np.where(lat.diag_ok, hxy, 0.0)
        H[:, 0, 1] = hxy
        H[:, 1, 0] = hxy
    return H


def boundary_wall_gradient(lat, values):
    """Gradient extrapolated from the nodes to the anchor level set."""
    G = boundary_gradient_raw(lat, values)
    H = boundary_hessian_estimate(lat, values)
    return G + np.einsum("nkl,nl->nk", H, lat.w_anchor)


def bc_residual(lat, values, target):
    """h_target at the extrapolated gradient, one entry per boundary node."""
    return np.atleast_1d(geometry.defining_value(target, boundary_wall_gradient(lat, values)))


def _scalar_quadratic(lat, values, target):
    """Coefficients of phi(u_b) = h(Ghat(u_b)) = qa + qb u + qc u^2 per node.

    The Hessian estimate is frozen at the current field, so Ghat is affine
    in u_b with slope c_k = -3 s_k / (2 D) per axis; h is a quadratic
    polynomial for every supported kind, making phi exactly quadratic.
    """
    u0 = values[lat.boundary_idx]
    G = boundary_gradient_raw(lat, values)
    H = boundary_hessian_estimate(lat, values)
    Ghat = G + np.einsum("nkl,nl->nk", H, lat.w_anchor)
    cvec = -3.0 * lat.orient / (2.0 * lat.delta)
    base = Ghat - cvec * u0[:, None]
    D2h = geometry.defining_hessian(target)
    qa = np.atleast_1d(geometry.defining_value(target, base))
    Dh = np.atleast_2d(geometry.defining_gradient(target, base))
    qb = np.sum(Dh * cvec, axis=1)
    qc = 0.5 * np.einsum("nk,kl,nl->n", cvec, D2h, cvec)
    return qa, qb, qc, u0


def boundary_sweep(lat, values, target, passes=2, breakdown_tol=1e-10):
    """Jacobi sweep of the boundary condition over all boundary nodes.

    Each pass solves every node's scalar quadratic against a frozen copy of
    the field, so the result is independent of node ordering.  Two passes
    let nodes whose one-sided stencils read other boundary nodes settle.
    """
    out = values
    for _ in range(passes):
        qa, qb, qc, u0 = _scalar_quadratic(lat, out, target)
        disc = qb * qb - 4.0 * qc * qa
        if np.any(disc <= breakdown_tol ** 2):
            k = int(np.argmin(disc))
            raise GridError(
                "obliqueness-breakdown",
                f"boundary node at {lat.boundary_x[k]} cannot reach the target "
                f"boundary (discriminant {disc[k]:.3e})")
        vtx = -qb / (2.0 * qc)
        side = np.where(u0 >= vtx, 1.0, -1.0)
        root = vtx + side * np.sqrt(disc) / (2.0 * np.abs(qc))
        out = out.copy()
        out[lat.boundary_idx] = root
    return out


def solve_boundary_node(fld, node, target, tol_factor=1e-12):
    """Solve one boundary node's scalar condition with the interior frozen.

    The map u_b -> h(Ghat(u_b)) is a concave quadratic, so the safeguarded
    Newton iteration from the current value lands on the root of the current
    branch; that limit is taken in closed form here (and polished with one
    Newton step) so the per-node op agrees exactly with `boundary_sweep`.
    Raises "obliqueness-breakdown" when the target boundary is unreachable
    (no real root) or the scalar derivative degenerates at the solution.
    """
    lat = fld.lattice
    flat = lat.node_flat(node)
    pos = np.flatnonzero(lat.boundary_idx == flat)
    if len(pos) == 0:
        raise GridError("not-a-boundary-node", f"node {node} is not a boundary node")
    k = int(pos[0])

    qa, qb, qc, u0 = _scalar_quadratic(lat, fld.values, target)
    a, b, c, u = qa[k], qb[k], qc[k], u0[k]
    disc = b * b - 4.0 * c * a
    if disc <= 1e-20:
        raise GridError("obliqueness-breakdown",
                        f"target boundary unreachable at node {node} "
                        f"(discriminant {disc:.3e})")
    vtx = -b / (2.0 * c)
    side = 1.0 if u >= vtx else -1.0
    v = vtx + side * np.sqrt(disc) / (2.0 * abs(c))
    dv = b + 2.0 * c * v
    if abs(dv) < 1e-10:
        raise GridError("obliqueness-breakdown",
                        f"scalar derivative below 1e-10 at node {node}")
    v = v - (a + b * v + c * v * v) / dv
    scale = max(1.0, abs(a))
    if abs(a + b * v + c * v * v) > tol_factor * scale:
        raise GridError("obliqueness-breakdown",
                        f"boundary solve did not converge at node {node}")
    return float(v)


def interpolate(lat, values, point, valid=None):
    """Multilinear interpolation at a point inside the active hull.

    `values` is a flat array over the grid; `valid` optionally restricts the
    usable nodes (all four/two cell corners must be valid).  Exact on affine
    data by construction.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    rel = (point - lat.origin) / lat.delta
    cell = np.floor(rel).astype(int)
    frac = rel - cell
    # clamp points sitting exactly on the upper edge into the last cell
    for k, nk in enumerate(lat.npts):
        if cell[k] == nk - 1 and abs(frac[k]) < 1e-12:
            cell[k] -= 1
            frac[k] = 1.0
        if cell[k] < 0 or cell[k] >= nk - 1:
            raise GridError("out-of-hull", f"point {point} is outside the lattice")

    def ok(flat):
        if lat.status[flat] == STATUS_EXTERIOR:
            return False
        return valid is None or bool(valid[flat])

    if lat.dim == 1:
        f0 = int(cell[0])
        if not (ok(f0) and ok(f0 + 1)):
            raise GridError("out-of-hull", f"point {point} is outside the active hull")
        t = frac[0]
        return float((1 - t) * values[f0] + t * values[f0 + 1])

    nx = lat.npts[0]
    f00 = int(cell[1]) * nx + int(cell[0])
    corners = [f00, f00 + 1, f00 + nx, f00 + nx + 1]
    if not all(ok(f) for f in corners):
        raise GridError("out-of-hull", f"point {point} is outside the active hull")
    tx, ty = frac
    v00, v10, v01, v11 = (values[f] for f in corners)
    return float((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
                 + (1 - tx) * ty * v01 + tx * ty * v11)


# -- spec-facing per-node derivative ops ----------------------------------

def gradient(fld, node):
    """Gradient at one node: central at interior, one-sided at boundary."""
    lat = fld.lattice
    flat = lat.node_flat(node)
    st = lat.status[flat]
    if st == STATUS_INTERIOR:
        pos = int(np.flatnonzero(lat.interior_idx == flat)[0])
        return interior_gradient(lat, fld.values)[pos]
    if st == STATUS_BOUNDARY:
        pos = int(np.flatnonzero(lat.boundary_idx == flat)[0])
        return boundary_gradient_raw(lat, fld.values)[pos]
    raise GridError("not-an-active-node", f"node {node} is exterior")


def hessian(fld, node):
    """Central-difference Hessian at an interior node."""
    lat = fld.lattice
    flat = lat.node_flat(node)
    if lat.status[flat] != STATUS_INTERIOR:
        raise GridError("not-an-interior-node",
                        f"hessian needs an interior node, got {node}")
    pos = int(np.flatnonzero(lat.interior_idx == flat)[0])
    comps = interior_hessian(lat, fld.values)
    if lat.dim == 1:
        return np.array([[comps[0][pos]]])
    uxx, uyy, uxy = (c[pos] for c in comps)
    return np.array([[uxx, uxy], [uxy, uyy]])
