"""Uniformly convex domains carried by smooth concave defining functions.

A domain is one of: an interval (a, b) on the line, a ball, or an ellipse
{x : (x-q)^T M (x-q) < 1} with M symmetric positive definite.  Each kind
supplies an analytic defining function h with h > 0 inside, h = 0 on the
boundary, and constant negative-definite Hessian, so that the concavity
constants theta, Theta and the gradient/value maxima are exact numbers
rather than sampled estimates.

Ellipses are normalised so that max |Dh| over the boundary equals 1 (the
ball formula h = (R^2 - |p-q|^2)/(2R) is the special case where |Dh| = 1
holds on the whole boundary).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

__all__ = [
    "ConvexDomain",
    "ball",
    "ellipse",
    "interval",
    "defining_value",
    "defining_gradient",
    "defining_hessian",
    "inward_normal",
    "boundary_points",
    "project_to_level",
    "support_max",
    "squared_distance_range",
    "quadratic_initial_map",
]


@dataclass(frozen=True)
class ConvexDomain:
    """Immutable description of a uniformly convex domain."""

    kind: str                 # "interval" | "ball" | "ellipse"
    dim: int
    center: np.ndarray
    radius: float = 0.0       # ball only
    matrix: np.ndarray = None  # ellipse only, SPD
    a: float = 0.0            # interval only
    b: float = 0.0
    theta: float = 0.0        # -Theta I <= D2h <= -theta I
    Theta: float = 0.0
    grad_h_max: float = 0.0   # max of |Dh| over the closed domain
    abs_h_max: float = 0.0    # max of |h| over the closed domain
    diameter: float = 0.0
    norm_scale: float = 1.0   # s in h = (1 - y^T M y)/s for the ellipse kind

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


def ball(center, radius):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if radius <= 0:
        raise GeometryError("invalid-domain", f"ball radius must be positive, got {radius}")
    R = float(radius)
    return ConvexDomain(
        kind="ball", dim=len(center), center=center, radius=R,
        theta=1.0 / R, Theta=1.0 / R, grad_h_max=1.0,
        abs_h_max=R / 2.0, diameter=2.0 * R,
    )


def ellipse(center, matrix):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    M = np.asarray(matrix, dtype=float)
    if M.shape != (2, 2) or abs(M[0, 1] - M[1, 0]) > 1e-12:
        raise GeometryError("invalid-domain", "ellipse matrix must be symmetric 2x2")
    evals = np.linalg.eigvalsh(M)
    if evals[0] <= 0:
        raise GeometryError("invalid-domain", "ellipse matrix must be positive definite")
    lam_min, lam_max = float(evals[0]), float(evals[-1])
    s = 2.0 * np.sqrt(lam_max)  # makes max |Dh| = 1 on the boundary
    return ConvexDomain(
        kind="ellipse", dim=2, center=center, matrix=0.5 * (M + M.T),
        theta=2.0 * lam_min / s, Theta=2.0 * lam_max / s,
        grad_h_max=1.0, abs_h_max=1.0 / s,
        diameter=2.0 / np.sqrt(lam_min), norm_scale=s,
    )


def interval(a, b):
    if not b > a:
        raise GeometryError("invalid-domain", f"interval needs b > a, got ({a}, {b})")
    a, b = float(a), float(b)
    return ConvexDomain(
        kind="interval", dim=1, center=np.array([(a + b) / 2.0]), a=a, b=b,
        theta=2.0 / (b - a), Theta=2.0 / (b - a),
        grad_h_max=1.0, abs_h_max=(b - a) / 4.0, diameter=b - a,
    )


def _points(dom, p):
    """Normalise p to shape (m, dim); return (array, was_single)."""
    p = np.asarray(p, dtype=float)
    if dom.dim == 1:
        if p.ndim == 0:
            return p.reshape(1, 1), True
        if p.ndim == 1 and p.shape == (1,):
            return p.reshape(1, 1), True
        return p.reshape(-1, 1), False
    if p.ndim == 1:
        return p.reshape(1, -1), True
    return p, False


def defining_value(dom, p):
    """h(p), positive inside, zero on the boundary, negative outside."""
    pts, single = _points(dom, p)
    y = pts - dom.center
    if dom.kind == "ball":
        h = (dom.radius ** 2 - np.sum(y * y, axis=1)) / (2.0 * dom.radius)
    elif dom.kind == "ellipse":
        h = (1.0 - np.einsum("ij,jk,ik->i", y, dom.matrix, y)) / dom.norm_scale
    else:
        x = pts[:, 0]
        h = (dom.b - x) * (x - dom.a) / (dom.b - dom.a)
    return float(h[0]) if single else h


def defining_gradient(dom, p):
    """Exact analytic Dh; points inward from the boundary."""
    pts, single = _points(dom, p)
    y = pts - dom.center
    if dom.kind == "ball":
        g = -y / dom.radius
    elif dom.kind == "ellipse":
        g = -2.0 * y @ dom.matrix / dom.norm_scale
    else:
        g = (dom.a + dom.b - 2.0 * pts) / (dom.b - dom.a)
    return g[0] if single else g


def defining_hessian(dom, p=None):
    """D2h, a constant negative-definite matrix for every supported kind."""
    if dom.kind == "ball":
        return -np.eye(dom.dim) / dom.radius
    if dom.kind == "ellipse":
        return -2.0 * dom.matrix / dom.norm_scale
    return np.array([[-2.0 / (dom.b - dom.a)]])


def inward_normal(dom, x, tol_boundary=1e-8):
    """Unit inward normal at a boundary point (h increases inward)."""
    h = defining_value(dom, x)
    if abs(h) > tol_boundary:
        raise GeometryError("not-on-boundary",
                            f"point has |h| = {abs(h):.3e} > tol {tol_boundary:.3e}")
    g = defining_gradient(dom, x)
    norm = np.linalg.norm(g)
    if norm < 1e-12:
        raise GeometryError("degenerate-normal", "|Dh| < 1e-12 at requested point")
    return g / norm


def boundary_points(dom, count=512):
    """Sample the boundary: angle-uniform for ball/ellipse, endpoints in 1D."""
    if dom.kind == "interval":
        return np.array([[dom.a], [dom.b]])
    ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    circ = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dom.kind == "ball":
        return dom.center + dom.radius * circ
    evals, vecs = np.linalg.eigh(dom.matrix)
    m_inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(evals)) @ vecs.T
    return dom.center + circ @ m_inv_sqrt.T


def project_to_level(dom, p, level=0.0, max_iter=8, tol=1e-13):
    """Project points onto the level set {h = level} by Newton steps along Dh.

    Exact (to roundoff) for all supported kinds given a starting point near
    the level set; used to anchor per-node boundary constraints.
    """
    pts, single = _points(dom, p)
    x = pts.copy()
    scale = max(1.0, abs(level))
    for _ in range(max_iter):
        h = np.atleast_1d(defining_value(dom, x))
        g = np.atleast_2d(defining_gradient(dom, x))
        g2 = np.sum(g * g, axis=1)
        if np.any(g2 < 1e-24):
            raise GeometryError("degenerate-normal", "projection hit a critical point of h")
        step = (level - h) / g2
        x = x + step[:, None] * g
        if np.max(np.abs(h - level)) < tol * scale:
            break
    return x[0] if single else x


def support_max(dom, v):
    """max of v . x over the closed domain (support function plus offset)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    base = float(v @ dom.center)
    if dom.kind == "ball":
        return base + dom.radius * float(np.linalg.norm(v))
    if dom.kind == "ellipse":
        m_inv = np.linalg.inv(dom.matrix)
        return base + float(np.sqrt(v @ m_inv @ v))
    return base + abs(v[0]) * (dom.b - dom.a) / 2.0


def squared_distance_range(dom, x0, scan=4096):
    """(min, max) of |x - x0|^2 over the closed domain.

    Closed form for ball and interval; for an off-centre ellipse the
    extrema are located by a dense boundary scan (the values feed
    smallness bounds, not tight arithmetic).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if dom.kind == "ball":
        d = float(np.linalg.norm(x0 - dom.center))
        lo = max(0.0, d - dom.radius) ** 2
        hi = (d + dom.radius) ** 2
        return lo, hi
    if dom.kind == "interval":
        x = x0[0]
        lo = 0.0 if dom.a <= x <= dom.b else min((x - dom.a) ** 2, (x - dom.b) ** 2)
        hi = max((x - dom.a) ** 2, (x - dom.b) ** 2)
        return lo, hi
    if np.allclose(x0, dom.center):
        evals = np.linalg.eigvalsh(dom.matrix)
        return 0.0, 1.0 / float(evals[0])
    pts = boundary_points(dom, scan)
    d2 = np.sum((pts - x0) ** 2, axis=1)
    inside = defining_value(dom, x0) >= 0.0
    return (0.0 if inside else float(d2.min())), float(d2.max())


def matrix_form(dom):
    """Return (M, q) with the domain written as {x : (x-q)^T M (x-q) < 1}."""
    if dom.kind == "ball":
        return np.eye(dom.dim) / dom.radius ** 2, dom.center
    if dom.kind == "ellipse":
        return dom.matrix.copy(), dom.center
    r = (dom.b - dom.a) / 2.0
    return np.array([[1.0 / r ** 2]]), dom.center


def _spd_sqrt(M):
    evals, vecs = np.linalg.eigh(M)
    return vecs @ np.diag(np.sqrt(evals)) @ vecs.T


def quadratic_initial_map(omega, target):
    """The unique SPD matrix A with A^T N A = M, mapping d-Omega onto d-target.

    With Du0(x) = A (x - q) + q_target, the quadratic
    u0 = (x-q)^T A (x-q)/2 + q_target . x carries Omega onto the target.
    """
    if omega.dim != target.dim:
        raise GeometryError("dimension-mismatch",
                            f"domain dim {omega.dim} vs target dim {target.dim}")
    M, _ = matrix_form(omega)
    N, _ = matrix_form(target)
    if omega.dim == 1:
        return np.array([[float(np.sqrt(M[0, 0] / N[0, 0]))]])
    S = _spd_sqrt(N)
    S_inv = np.linalg.inv(S)
    return S_inv @ _spd_sqrt(S @ M @ S) @ S_inv


def bounding_box(dom):
    """Axis-aligned bounding box (lo, hi) of the closed domain."""
    if dom.kind == "interval":
        return np.array([dom.a]), np.array([dom.b])
    if dom.kind == "ball":
        return dom.center - dom.radius, dom.center + dom.radius
    m_inv = np.linalg.inv(dom.matrix)
    half = np.sqrt(np.diag(m_inv))
    return dom.center - half, dom.center + half
