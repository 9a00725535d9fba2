"""Run orchestration behind both the service endpoints and the CLI.

Every entry point takes a parsed RunConfig, performs the computation and
writes the configured artifacts, returning a plain-dict record that the
service layer can serialise untouched.
"""

import math
import os

import numpy as np

from . import flow as flow_mod
from . import geometry, grid, legendre as legendre_mod, output, source as source_mod
from . import stationary
from .errors import SolverError
from .operator import F_value, eigenvalues_2x2

__all__ = ["build_problem", "run_flow", "solve_stationary",
           "check_admissibility", "legendre_report", "refine_study"]

REFINE_LEVELS = (33, 65, 129)


def _initial_matrix(cfg):
    if cfg.initial_mode == "explicit":
        A = cfg.initial_matrix
        shift = cfg.initial_shift
    else:
        A = geometry.quadratic_initial_map(cfg.omega, cfg.target)
        shift = cfg.target.center
    return A, shift


def build_problem(cfg, resolution=None):
    """Lattice plus initial quadratic field for a parsed configuration."""
    lat = grid.build_lattice(cfg.omega, resolution or cfg.resolution)
    A, shift = _initial_matrix(cfg)
    q = cfg.omega.center

    def u0_fn_1d(pts):
        y = pts - q
        return 0.5 * A[0, 0] * y[:, 0] ** 2 + shift[0] * pts[:, 0]

    def u0_fn_2d(x, y):
        dx = x - q[0]
        dy = y - q[1]
        quad = 0.5 * (A[0, 0] * dx * dx + 2 * A[0, 1] * dx * dy + A[1, 1] * dy * dy)
        return quad + shift[0] * x + shift[1] * y

    if cfg.omega.dim == 1:
        u0 = grid.Field.from_function(lat, lambda pts: u0_fn_1d(pts.reshape(-1, 1)))
    else:
        u0 = grid.Field.from_function(lat, u0_fn_2d)
    return lat, u0, A


def _admissibility_for(cfg, A):
    fmax0 = fmin0 = F_value(A)
    return source_mod.admissibility(cfg.source, cfg.omega, cfg.target,
                                    (fmax0, fmin0), cfg.omega.dim)


def _flow_summary(cfg, result, report, resolution):
    summary = {
        "c_inf": result.c_inf,
        "t_final": result.t_final,
        "steps": result.steps,
        "converged": result.converged,
        "translator_residual": result.translator_residual,
        "resolution": resolution,
        "delta": report.delta,
        "Lambda1": report.Lambda1,
    }
    if report.eps0 is not None:
        summary["eps0"] = report.eps0
    summary["c_lsq"] = result.c_lsq
    summary["monitor_violations"] = len(result.violations)
    return summary


def run_flow(cfg, resolution=None, write=True):
    """Flow to the translating solution; writes field, diagnostics, summary."""
    resolution = resolution or cfg.resolution
    lat, u0, A = build_problem(cfg, resolution)
    result = flow_mod.run_to_translator(u0, cfg.source, lat, cfg.target, cfg.flow)
    report = _admissibility_for(cfg, A)
    summary = _flow_summary(cfg, result, report, resolution)
    outputs = []
    if write:
        outdir = cfg.output_dir
        field_path = os.path.join(outdir, "field.csv")
        output.write_field_csv(field_path, result.u_profile)
        diag_path = os.path.join(outdir, "diagnostics.csv")
        output.write_diagnostics_csv(diag_path, result.diagnostics)
        summary_path = os.path.join(outdir, "summary.txt")
        output.write_summary(summary_path, summary)
        outputs = [field_path, diag_path, summary_path]
        if cfg.heatmaps and lat.dim == 2:
            ud = flow_mod.udot_field(flow_mod.FlowState(u=result.u_profile), cfg.source)
            comps = grid.interior_hessian(lat, result.u_profile.values)
            l1, l2 = eigenvalues_2x2(*comps)
            for name, vals in (("u", result.u_profile.values),
                               ("udot", ud.values),
                               ("lam_min", _interior_map(lat, l1)),
                               ("lam_max", _interior_map(lat, l2))):
                p = os.path.join(outdir, f"heatmap_{name}.pgm")
                output.write_heatmap(p, lat, vals)
                outputs.append(p)
    return {"summary": summary, "outputs": outputs, "result": result}


def _interior_map(lat, interior_values):
    m = np.zeros(lat.size)
    m[lat.interior_idx] = interior_values
    m[lat.boundary_idx] = interior_values[lat.nearest_interior]
    return m


def solve_stationary(cfg, resolution=None, write=True, u_init=None):
    """Newton oracle on the same discrete system; same artifact formats."""
    resolution = resolution or cfg.resolution
    lat, u0, A = build_problem(cfg, resolution)
    if u_init is not None:
        u0 = u_init
    res = stationary.newton_solve(u0, cfg.source, lat, cfg.target)
    summary = {
        "c_inf": res.c,
        "converged": res.converged,
        "iterations": res.iterations,
        "residual_inf": res.residual_norms[-1],
        "resolution": resolution,
    }
    outputs = []
    if write:
        outdir = cfg.output_dir
        field_path = os.path.join(outdir, "newton_field.csv")
        profile = res.u.copy()
        act = lat.active_idx
        profile.values[act] -= profile.values[act].min()
        output.write_field_csv(field_path, profile)
        hist_path = os.path.join(outdir, "newton_history.csv")
        lines = ["iteration,residual_inf"]
        lines += [f"{k},{output.format_float(v)}" for k, v in enumerate(res.residual_norms)]
        output.atomic_write(hist_path, "\n".join(lines) + "\n")
        summary_path = os.path.join(outdir, "newton_summary.txt")
        output.write_summary(summary_path, summary)
        outputs = [field_path, hist_path, summary_path]
    return {"summary": summary, "outputs": outputs, "newton": res}


def _check_items(cfg):
    A, _ = _initial_matrix(cfg)
    report = _admissibility_for(cfg, A)
    items = {
        "delta": report.delta,
        "delta_max": report.delta_max,
        "Lambda1": report.Lambda1,
        "osc_p": report.osc_p,
        "sup_Dx": report.sup_Dx,
        "sup_Dp": report.sup_Dp,
        "sup_Dxp": report.sup_Dxp,
        "bound_lcond": report.bound_lcond,
        "bound_dfcond": report.bound_dfcond,
        "bound_Dxp_omega": report.bound_Dxp_omega,
        "bound_Dxp_target": report.bound_Dxp_target,
        "pass_delta": "PASS" if report.pass_delta else "FAIL",
        "pass_lcond": "PASS" if report.pass_lcond else "FAIL",
        "pass_dfcond": "PASS" if report.pass_dfcond else "FAIL",
        "pass_Dxp_omega": "PASS" if report.pass_Dxp_omega else "FAIL",
        "pass_Dxp_target": "PASS" if report.pass_Dxp_target else "FAIL",
    }
    if report.eps0 is not None:
        items["eps0"] = report.eps0
    items["overall"] = "PASS" if report.passed else "FAIL"
    if not report.passed:
        items["failed_conditions"] = ",".join(report.failures())
        if not report.pass_delta:
            items["reason"] = "delta exceeds delta_max"
    return items, report


def check_admissibility(cfg, write=True):
    """Evaluate the smallness conditions; emits a key=value block."""
    items, report = _check_items(cfg)
    text = "\n".join(
        f"{k}={output.format_float(v) if isinstance(v, float) else v}"
        for k, v in items.items()) + "\n"
    outputs = []
    if write:
        path = os.path.join(cfg.output_dir, "check_report.txt")
        output.atomic_write(path, text)
        outputs = [path]
    return {"report": {k: str(v) for k, v in items.items()}, "text": text,
            "outputs": outputs, "admissibility": report}


def legendre_report(cfg, field_path=None, write=True):
    """Conjugate a saved field and report the duality diagnostics."""
    lat = grid.build_lattice(cfg.omega, cfg.resolution)
    target_lat = grid.build_lattice(cfg.target, cfg.resolution)
    field_path = field_path or os.path.join(cfg.output_dir, "field.csv")
    if not os.path.exists(field_path):
        raise SolverError("cli", "missing-field",
                          f"no field file at {field_path}; run the flow first")
    u = output.read_field_csv(field_path, lat)
    u_t = legendre_mod.legendre_transform(u, target_lat)
    rep = legendre_mod.duality_checks(u, u_t, target_lat)
    items = {
        "involution_error": rep.involution_error,
        "grad_inverse_error": rep.grad_inverse_error,
        "hessian_product_error": rep.hessian_product_error,
        "checked_points": rep.checked_points,
        "skipped_points": rep.skipped_points,
    }
    summary_path = os.path.join(cfg.output_dir, "summary.txt")
    if os.path.exists(summary_path):
        summary = output.read_summary(summary_path)
        if "c_inf" in summary:
            items["dual_translator_residual"] = legendre_mod.dual_translator_residual(
                u_t, cfg.source, float(summary["c_inf"]))
            items["dual_speed_note"] = ("sign convention for the dual speed is "
                                        "unresolved; residual reported raw")
    outputs = []
    if write:
        conj_path = os.path.join(cfg.output_dir, "conjugate_field.csv")
        output.write_field_csv(conj_path, u_t)
        rep_path = os.path.join(cfg.output_dir, "legendre_report.txt")
        output.write_summary(rep_path, items)
        outputs = [conj_path, rep_path]
    return {"report": {k: str(v) for k, v in items.items()}, "outputs": outputs,
            "duality": rep}


def refine_study(cfg, levels=REFINE_LEVELS, write=True):
    """Run the flow at the three study resolutions and report the order."""
    cs = {}
    details = {}
    for res in levels:
        rec = run_flow(cfg, resolution=res, write=False)
        cs[res] = rec["summary"]["c_inf"]
        details[res] = rec["summary"]
    d01 = abs(cs[levels[0]] - cs[levels[1]])
    d12 = abs(cs[levels[1]] - cs[levels[2]])
    order = math.log2(d01 / d12) if d12 > 0 else float("inf")
    items = {}
    for res in levels:
        items[f"c_inf_{res}"] = cs[res]
    items["observed_order"] = order
    outputs = []
    if write:
        path = os.path.join(cfg.output_dir, "refine_report.txt")
        output.write_summary(path, items)
        outputs = [path]
    return {"summary": {k: (output.format_float(v) if isinstance(v, float) else str(v))
                        for k, v in items.items()},
            "levels": details, "observed_order": order, "outputs": outputs}
