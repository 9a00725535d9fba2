"""FastAPI service wrapping the solver package.

Clients POST the configuration text; the service parses it, runs the
requested computation, writes the configured artifacts on its own
filesystem and returns the summary.  The bundled CLI talks to this app
in-process by default and over HTTP when pointed at a server.
"""

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from . import config as config_mod
from . import runner
from .errors import ConfigError, SolverError

app = FastAPI(title="lmcflow", version=__version__)


class ConfigRequest(BaseModel):
    config_text: str = Field(description="contents of an INI run configuration")


class LegendreRequest(ConfigRequest):
    field_path: Optional[str] = Field(
        default=None, description="field CSV to conjugate (default: <output>/field.csv)")


class RunResponse(BaseModel):
    summary: dict
    outputs: list[str]


class CheckResponse(BaseModel):
    report: dict
    text: str
    outputs: list[str]


class RefineResponse(BaseModel):
    summary: dict
    observed_order: float
    outputs: list[str]


class HealthResponse(BaseModel):
    status: str
    version: str


def _parse(req):
    try:
        return config_mod.parse_config_text(req.config_text)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={
            "module": exc.module, "code": exc.code, "message": exc.message})


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={
            "module": exc.module, "code": exc.code, "message": exc.message})
    except SolverError as exc:
        raise HTTPException(status_code=422, detail={
            "module": exc.module, "code": exc.code, "message": exc.message})


def _stringify(summary):
    out = {}
    for k, v in summary.items():
        if isinstance(v, bool):
            out[k] = "true" if v else "false"
        elif isinstance(v, float):
            out[k] = f"{v:.17g}"
        else:
            out[k] = str(v)
    return out


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run_endpoint(req: ConfigRequest):
    cfg = _parse(req)
    rec = _guard(runner.run_flow, cfg)
    return RunResponse(summary=_stringify(rec["summary"]), outputs=rec["outputs"])


@app.post("/solve", response_model=RunResponse)
def solve_endpoint(req: ConfigRequest):
    cfg = _parse(req)
    rec = _guard(runner.solve_stationary, cfg)
    return RunResponse(summary=_stringify(rec["summary"]), outputs=rec["outputs"])


@app.post("/check", response_model=CheckResponse)
def check_endpoint(req: ConfigRequest):
    cfg = _parse(req)
    rec = _guard(runner.check_admissibility, cfg)
    return CheckResponse(report=rec["report"], text=rec["text"], outputs=rec["outputs"])


@app.post("/legendre", response_model=CheckResponse)
def legendre_endpoint(req: LegendreRequest):
    cfg = _parse(req)
    rec = _guard(runner.legendre_report, cfg, field_path=req.field_path)
    text = "\n".join(f"{k}={v}" for k, v in rec["report"].items()) + "\n"
    return CheckResponse(report=rec["report"], text=text, outputs=rec["outputs"])


@app.post("/refine", response_model=RefineResponse)
def refine_endpoint(req: ConfigRequest):
    cfg = _parse(req)
    rec = _guard(runner.refine_study, cfg)
    return RefineResponse(summary=rec["summary"],
                          observed_order=rec["observed_order"],
                          outputs=rec["outputs"])
