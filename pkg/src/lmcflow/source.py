"""Inhomogeneity f(x, p), concave in x and convex in p, with exact calculus.

Two parametric families are supported:

  affine:               f = iota . p + kappa . x + c0
  separable_quadratic:  f = eps * (-a |x - x0|^2 + b |p - p0|^2)

Both keep every derivative analytic, which lets the admissibility checker
evaluate the four smallness conditions and the certified threshold eps0
without numerical sup-norms.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import SourceError
from .operator import structure_constants

__all__ = ["SourceTerm", "affine", "separable_quadratic", "zero",
           "AdmissibilityReport", "oscillation_in_p", "f_range", "admissibility"]


@dataclass(frozen=True)
class SourceTerm:
    kind: str                      # "affine" | "separable_quadratic"
    dim: int
    iota: np.ndarray = None        # affine
    kappa: np.ndarray = None
    c0: float = 0.0
    eps: float = 0.0               # separable_quadratic
    a: float = 0.0
    b: float = 0.0
    x0: np.ndarray = None
    p0: np.ndarray = None
    delta_override: float = None   # optional fixed oscillation allowance

    # -- evaluation ------------------------------------------------------
    def f_eval(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.kind == "affine":
            return p @ self.iota + x @ self.kappa + self.c0
        dx = x - self.x0
        dp = p - self.p0
        return self.eps * (-self.a * np.sum(dx * dx, axis=-1)
                           + self.b * np.sum(dp * dp, axis=-1))

    def f_grad_x(self, x, p):
        x = np.asarray(x, dtype=float)
        if self.kind == "affine":
            return np.broadcast_to(self.kappa, x.shape).copy()
        return -2.0 * self.eps * self.a * (x - self.x0)

    def f_grad_p(self, x, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "affine":
            return np.broadcast_to(self.iota, p.shape).copy()
        return 2.0 * self.eps * self.b * (p - self.p0)

    def f_hess_xx(self, x=None, p=None):
        if self.kind == "affine":
            return np.zeros((self.dim, self.dim))
        return -2.0 * self.eps * self.a * np.eye(self.dim)

    def f_hess_pp(self, x=None, p=None):
        if self.kind == "affine":
            return np.zeros((self.dim, self.dim))
        return 2.0 * self.eps * self.b * np.eye(self.dim)

    def f_hess_xp(self, x=None, p=None):
        return np.zeros((self.dim, self.dim))

    # -- exact sup-norms (both kinds are separable in (x, p)) ------------
    def sup_grad_x(self, omega):
        if self.kind == "affine":
            return float(np.linalg.norm(self.kappa))
        _, hi = geometry.squared_distance_range(omega, self.x0)
        return 2.0 * self.eps * self.a * float(np.sqrt(hi))

    def sup_grad_p(self, target):
        if self.kind == "affine":
            return float(np.linalg.norm(self.iota))
        _, hi = geometry.squared_distance_range(target, self.p0)
        return 2.0 * self.eps * self.b * float(np.sqrt(hi))

    def sup_grad_xp(self):
        return 0.0


def affine(iota, kappa, c0=0.0, dim=None):
    iota = np.atleast_1d(np.asarray(iota, dtype=float))
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if iota.shape != kappa.shape:
        raise SourceError("invalid-source", "iota and kappa must have equal length")
    return SourceTerm(kind="affine", dim=dim or len(iota), iota=iota, kappa=kappa,
                      c0=float(c0))


def separable_quadratic(eps, a, b, x0, p0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if eps < 0 or a < 0 or b < 0:
        raise SourceError("invalid-source",
                          "separable_quadratic needs eps, a, b >= 0 to stay in the admissible class")
    return SourceTerm(kind="separable_quadratic", dim=len(x0), eps=float(eps),
                      a=float(a), b=float(b), x0=x0, p0=p0)


def zero(dim):
    return affine(np.zeros(dim), np.zeros(dim), 0.0)


def oscillation_in_p(src, target):
    """max over x and p, q in the closed target of |f(x,p) - f(x,q)|."""
    if src.kind == "affine":
        return float(np.linalg.norm(src.iota)) * target.diameter
    lo, hi = geometry.squared_distance_range(target, src.p0)
    return src.eps * src.b * (hi - lo)


def f_range(src, omega, target):
    """(inf, sup) of f over the closed product domain, both exact per kind."""
    if src.kind == "affine":
        hi = (geometry.support_max(omega, src.kappa)
              + geometry.support_max(target, src.iota) + src.c0)
        lo = (-geometry.support_max(omega, -src.kappa)
              - geometry.support_max(target, -src.iota) + src.c0)
        return lo, hi
    xlo, xhi = geometry.squared_distance_range(omega, src.x0)
    plo, phi = geometry.squared_distance_range(target, src.p0)
    return (src.eps * (-src.a * xhi + src.b * plo),
            src.eps * (-src.a * xlo + src.b * phi))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Evaluation of the four smallness conditions for a given problem."""

    delta: float
    delta_max: float
    Lambda1: float
    osc_p: float
    sup_Dx: float
    sup_Dp: float
    sup_Dxp: float
    bound_lcond: float       # |D_p f| threshold (source-domain side)
    bound_dfcond: float      # |D_x f| threshold (target-domain side)
    bound_Dxp_omega: float
    bound_Dxp_target: float
    pass_delta: bool
    pass_lcond: bool
    pass_dfcond: bool
    pass_Dxp_omega: bool
    pass_Dxp_target: bool
    eps0: float = None       # affine only: certified joint threshold

    @property
    def passed(self):
        return (self.pass_delta and self.pass_lcond and self.pass_dfcond
                and self.pass_Dxp_omega and self.pass_Dxp_target)

    def failures(self):
        names = [("delta", self.pass_delta), ("lcond", self.pass_lcond),
                 ("dfcond", self.pass_dfcond), ("Dxp-omega", self.pass_Dxp_omega),
                 ("Dxp-target", self.pass_Dxp_target)]
        return [n for n, ok in names if not ok]


def _bounds_for_delta(delta, Fmax0, Fmin0, n, omega, target):
    sc = structure_constants(Fmax0, Fmin0, delta, n)
    L = sc.Lambda1
    return (
        L,
        omega.theta * L / (2.0 * omega.grad_h_max),      # |D_p f|
        target.theta * L / (2.0 * target.grad_h_max),    # |D_x f|
        L * omega.theta / (8.0 * omega.abs_h_max),       # |D_xp f|, source side
        L * target.theta / (8.0 * target.abs_h_max),     # |D_xp f|, target side
    )


def _affine_passes(eps, Fmax0, Fmin0, n, omega, target, delta_max):
    """Would |iota| = |kappa| = eps pass every condition?"""
    delta = eps * target.diameter
    if delta >= delta_max:
        return False
    _, b_l, b_df, _, _ = _bounds_for_delta(delta, Fmax0, Fmin0, n, omega, target)
    return eps <= b_l and eps <= b_df


def admissibility(src, omega, target, u0_hessian_range, n):
    """Evaluate every smallness condition; never passes silently.

    u0_hessian_range is (Fmax0, Fmin0), the range of the operator on the
    initial Hessian over the closed source domain.
    """
    Fmax0, Fmin0 = u0_hessian_range
    if not (Fmin0 > 0 and Fmax0 < n * np.pi / 2.0):
        raise SourceError("inadmissible-initial",
                          f"operator range of u0 must lie in (0, n pi/2), got "
                          f"[{Fmin0:.6g}, {Fmax0:.6g}]")
    osc = oscillation_in_p(src, target)
    delta = osc if src.delta_override is None else float(src.delta_override)
    delta_max = min(n * np.pi / 2.0 - Fmax0, Fmin0)
    pass_delta = delta < delta_max

    if pass_delta:
        L, b_l, b_df, b_xo, b_xt = _bounds_for_delta(delta, Fmax0, Fmin0, n, omega, target)
    else:
        # report bounds at the largest legal delta so the numbers stay meaningful
        L, b_l, b_df, b_xo, b_xt = _bounds_for_delta(
            np.nextafter(delta_max, 0.0) * 0.999, Fmax0, Fmin0, n, omega, target)

    sup_dx = src.sup_grad_x(omega)
    sup_dp = src.sup_grad_p(target)
    sup_dxp = src.sup_grad_xp()

    eps0 = None
    if src.kind == "affine":
        # largest eps with |iota| = |kappa| = eps passing everything; the pass
        # predicate is monotone in eps, bisect to 1e-6
        hi = min(delta_max / max(target.diameter, 1e-300), b_l, b_df) * 2.0 + 1e-6
        lo = 0.0
        if _affine_passes(hi, Fmax0, Fmin0, n, omega, target, delta_max):
            eps0 = hi
        else:
            while hi - lo > 1e-6:
                mid = 0.5 * (lo + hi)
                if _affine_passes(mid, Fmax0, Fmin0, n, omega, target, delta_max):
                    lo = mid
                else:
                    hi = mid
            eps0 = lo

    return AdmissibilityReport(
        delta=delta, delta_max=delta_max, Lambda1=L, osc_p=osc,
        sup_Dx=sup_dx, sup_Dp=sup_dp, sup_Dxp=sup_dxp,
        bound_lcond=b_l, bound_dfcond=b_df,
        bound_Dxp_omega=b_xo, bound_Dxp_target=b_xt,
        pass_delta=pass_delta,
        pass_lcond=sup_dp <= b_l,
        pass_dfcond=sup_dx <= b_df,
        pass_Dxp_omega=sup_dxp <= b_xo,
        pass_Dxp_target=sup_dxp <= b_xt,
        eps0=eps0,
    )
