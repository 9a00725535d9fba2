"""Explicit evolution of u_t = F[D2u] - f(x, Du) with the gradient-image BC.

Each step evaluates the spatial operator at interior nodes, advances the
interior by forward Euler under dt = cfl D^2 / (2n), advances boundary
values by the same dt with the nearest-interior extension of u_t (so the
boundary solve sees a time-consistent field on a translating solution),
and re-solves every boundary node.  Convergence to a translating solution
is detected through the oscillation of u_t over the interior nodes, and
the speed c_inf is read off as the interior mean of u_t.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, grid, source as source_mod
from .errors import FlowError
from .operator import eigenvalues_2x2, structure_constants

__all__ = ["FlowConfig", "FlowState", "Diagnostics", "TranslatorResult",
           "udot_field", "step", "check_monitors", "run_to_translator"]

EPS_CONVEX = 1e-6


@dataclass
class FlowConfig:
    cfl: float = 0.5
    t_max: float = 50.0
    tol_osc: float = 1e-8      # relative to max(1, |udot_mean|)
    sample_every: int = 50
    eps_convex: float = EPS_CONVEX


@dataclass
class FlowState:
    u: grid.Field
    t: float = 0.0
    step_count: int = 0
    dt: float = None            # None: use the CFL-bound default


@dataclass
class Diagnostics:
    """One monitored sample along the flow."""

    t: float
    dt: float
    udot_min: float
    udot_max: float
    udot_mean: float
    udot_osc: float
    lam_min: float
    lam_max: float
    obliq_min: float
    bc_residual_max: float
    image_violation: float
    sumF_min: float
    sumF_max: float
    sumFl2_min: float
    sumFl2_max: float


@dataclass
class TranslatorResult:
    u_profile: grid.Field
    c_inf: float
    c_lsq: float               # consistency slope of mean(u) vs t
    t_final: float
    steps: int
    converged: bool
    translator_residual: float
    diagnostics: list
    violations: list           # (t, name) monitor flags over all samples
    final: Diagnostics


class _Evaluation:
    """u_t and eigenvalue extremes at the interior nodes of one state."""

    __slots__ = ("udot", "lam_min", "lam_max", "mean", "osc", "hess", "grad")

    def __init__(self, udot, lam_min, lam_max, hess, grad):
        self.udot = udot
        self.lam_min = lam_min
        self.lam_max = lam_max
        self.hess = hess
        self.grad = grad
        self.mean = float(udot.mean())
        self.osc = float(udot.max() - udot.min())


def _evaluate(lat, values, src):
    comps = grid.interior_hessian(lat, values)
    g = grid.interior_gradient(lat, values)
    if lat.dim == 1:
        lam_lo = lam_hi = comps[0]
        F = np.arctan(comps[0])
    else:
        lam_lo, lam_hi = eigenvalues_2x2(*comps)
        F = np.arctan(lam_lo) + np.arctan(lam_hi)
    if not np.all(np.isfinite(F)):
        raise FlowError("state-corrupted", "non-finite operator value at an interior node")
    f = src.f_eval(lat.interior_x, g)
    udot = F - f
    return _Evaluation(udot, float(lam_lo.min()), float(lam_hi.max()), comps, g)


def udot_field(state, src):
    """u_t as a Field: spatial operator at interior nodes, boundary values
    copied from the nearest interior node."""
    lat = state.u.lattice
    ev = _evaluate(lat, state.u.values, src)
    out = np.zeros(lat.size)
    out[lat.interior_idx] = ev.udot
    out[lat.boundary_idx] = ev.udot[lat.nearest_interior]
    return grid.Field(lat, out)


def _advance(lat, values, ev, dt, src, target):
    """Euler update + boundary predictor + Jacobi sweep + re-orientation."""
    new = values.copy()
    new[lat.interior_idx] += dt * ev.udot
    new[lat.boundary_idx] += dt * ev.udot[lat.nearest_interior]
    new = grid.boundary_sweep(lat, new, target, passes=2)
    beta = np.atleast_2d(geometry.defining_gradient(
        target, grid.boundary_wall_gradient(lat, new)))
    if lat.reorient(beta):
        new = grid.boundary_sweep(lat, new, target, passes=1)
    return new


def step(state, src, lattice, target, config=None):
    """One forward-Euler step; aborts on convexity loss or breakdown."""
    cfg = config or FlowConfig()
    n = lattice.dim
    dt_max = cfg.cfl * lattice.delta ** 2 / (2.0 * n)
    dt = dt_max if state.dt is None else state.dt
    if dt > dt_max * (1 + 1e-12):
        raise FlowError("cfl-violated", f"dt = {dt:.3e} exceeds cfl bound {dt_max:.3e}")
    ev = _evaluate(lattice, state.u.values, src)
    if ev.lam_min < cfg.eps_convex:
        raise FlowError("convexity-lost",
                        f"min Hessian eigenvalue {ev.lam_min:.3e} below {cfg.eps_convex:.1e}")
    new_values = _advance(lattice, state.u.values, ev, dt, src, target)
    return FlowState(u=grid.Field(lattice, new_values), t=state.t + dt,
                     step_count=state.step_count + 1, dt=dt)


def _nu_at_projection(lat):
    g = np.atleast_2d(geometry.defining_gradient(lat.omega, lat.proj_wall))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _sample(lat, values, src, target, ev, nu, t, dt):
    ghat = grid.boundary_wall_gradient(lat, values)
    beta = np.atleast_2d(geometry.defining_gradient(target, ghat))
    obliq = np.sum(beta * nu, axis=1)
    bc = np.abs(np.atleast_1d(geometry.defining_value(target, ghat)))
    h_img = np.atleast_1d(geometry.defining_value(target, ev.grad))
    image_violation = float(np.maximum(0.0, -h_img).max())
    if lat.dim == 1:
        lam_sq = ev.hess[0] ** 2
        sF = 1.0 / (1.0 + lam_sq)
        sF2 = lam_sq / (1.0 + lam_sq)
    else:
        l1, l2 = eigenvalues_2x2(*ev.hess)
        sF = 1.0 / (1.0 + l1 ** 2) + 1.0 / (1.0 + l2 ** 2)
        sF2 = l1 ** 2 / (1.0 + l1 ** 2) + l2 ** 2 / (1.0 + l2 ** 2)
    return Diagnostics(
        t=t, dt=dt,
        udot_min=float(ev.udot.min()), udot_max=float(ev.udot.max()),
        udot_mean=ev.mean, udot_osc=ev.osc,
        lam_min=ev.lam_min, lam_max=ev.lam_max,
        obliq_min=float(obliq.min()), bc_residual_max=float(bc.max()),
        image_violation=image_violation,
        sumF_min=float(sF.min()), sumF_max=float(sF.max()),
        sumFl2_min=float(sF2.min()), sumFl2_max=float(sF2.max()),
    )


def check_monitors(diag, udot_bounds, structure, slack, n=None):
    """Flag samples that leave the a-priori windows (pure check).

    udot_bounds = (min F[D2u0] - sup f, max F[D2u0] - inf f); the slack
    absorbs the discrete boundary error and scales with the spacing.
    `n` is only needed when no structure constants are available.
    """
    lower, upper = udot_bounds
    violations = []
    if diag.udot_min < lower - slack:
        violations.append("udot-lower")
    if diag.udot_max > upper + slack:
        violations.append("udot-upper")
    n = structure.n if structure is not None else (n or 1)
    lam1 = 0.0 if structure is None else structure.Lambda1
    if diag.sumF_min < lam1 - slack or diag.sumF_max > n + 1e-12:
        violations.append("sumF-range")
    if diag.sumFl2_min < lam1 - slack or diag.sumFl2_max > n + 1e-12:
        violations.append("sumFl2-range")
    if diag.obliq_min <= 0.0:
        violations.append("obliqueness")
    return violations


def run_to_translator(u0, src, lattice, target, config=None):
    """Advance the flow until u_t flattens into a translating solution.

    Preconditions: u0 strictly convex on the lattice while its boundary
    residual |h(Ghat(u0))| stays within 10 D.  Samples diagnostics every
    `sample_every` steps, records monitor flags, and extracts (c_inf,
    profile) on convergence.
    """
    cfg = config or FlowConfig()
    lat = lattice
    n = lat.dim
    dt = cfg.cfl * lat.delta ** 2 / (2.0 * n)

    values = u0.values.copy()
    ev0 = _evaluate(lat, values, src)
    if ev0.lam_min <= 0.0:
        raise FlowError("convexity-lost",
                        f"initial data is not strictly convex (lam_min = {ev0.lam_min:.3e})")
    bc0 = np.abs(grid.bc_residual(lat, values, target))
    if bc0.max() > 10.0 * lat.delta:
        raise FlowError(
            "initial-data-inadmissible",
            f"initial boundary residual {bc0.max():.3e} exceeds 10 D = {10*lat.delta:.3e}")

    # a-priori monitor windows, fixed at t = 0
    F0 = ev0.udot + src.f_eval(lat.interior_x, ev0.grad)
    Fmax0, Fmin0 = float(F0.max()), float(F0.min())
    f_lo, f_hi = source_mod.f_range(src, lat.omega, target)
    udot_bounds = (Fmin0 - f_hi, Fmax0 - f_lo)
    delta_osc = (src.delta_override if src.delta_override is not None
                 else source_mod.oscillation_in_p(src, target))
    try:
        structure = structure_constants(Fmax0, Fmin0, delta_osc, n)
    except ValueError:
        structure = None  # inadmissible delta: structure monitors get no floor
    slack = 10.0 * lat.delta

    # orientations from the initial state, then make the state BC-consistent
    beta = np.atleast_2d(geometry.defining_gradient(
        target, grid.boundary_wall_gradient(lat, values)))
    lat.reorient(beta)
    values = grid.boundary_sweep(lat, values, target, passes=2)

    nu = _nu_at_projection(lat)
    diags = []
    violations = []
    mean_history = []
    t = 0.0
    steps = 0
    converged = False
    ev = _evaluate(lat, values, src)
    max_steps = int(math.ceil(cfg.t_max / dt)) + 1 if cfg.t_max > 0 else 0

    def record(ev_cur):
        d = _sample(lat, values, src, target, ev_cur, nu, t, dt)
        diags.append(d)
        mean_history.append((t, float(values[lat.interior_idx].mean())))
        for name in check_monitors(d, udot_bounds, structure, slack, n=n):
            violations.append((t, name))
        return d

    record(ev)
    while True:
        tol = cfg.tol_osc * max(1.0, abs(ev.mean))
        if ev.osc <= tol:
            converged = True
            break
        if steps >= max_steps or t >= cfg.t_max:
            break
        if ev.lam_min < cfg.eps_convex:
            raise FlowError(
                "convexity-lost",
                f"min Hessian eigenvalue {ev.lam_min:.3e} below {cfg.eps_convex:.1e} "
                f"at t = {t:.4f}", diagnostics=diags)
        values = _advance(lat, values, ev, dt, src, target)
        t += dt
        steps += 1
        ev = _evaluate(lat, values, src)
        if steps % cfg.sample_every == 0:
            record(ev)

    final = record(ev) if (not diags or diags[-1].t < t) else diags[-1]
    c_inf = ev.mean
    if len(mean_history) >= 2:
        tail = mean_history[-max(2, len(mean_history) // 4):]
        ts = np.array([p[0] for p in tail])
        ms = np.array([p[1] for p in tail])
        c_lsq = float(np.polyfit(ts, ms, 1)[0])
    else:
        c_lsq = c_inf

    if not converged:
        raise FlowError("did-not-converge",
                        f"udot oscillation {ev.osc:.3e} above tolerance at t_max = "
                        f"{cfg.t_max:.4g}", diagnostics=diags)

    profile = values.copy()
    active = lat.active_idx
    profile[active] -= profile[active].min()
    residual = float(np.abs(ev.udot - c_inf).max())
    return TranslatorResult(
        u_profile=grid.Field(lat, profile), c_inf=c_inf, c_lsq=c_lsq,
        t_final=t, steps=steps, converged=True,
        translator_residual=residual, diagnostics=diags,
        violations=violations, final=final,
    )
