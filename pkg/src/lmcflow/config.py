"""Flat INI-style run configuration.

Sections: [domain] [target] [initial] [source] [grid] [flow] [output].
Keys are `key = value`, comments start with # or ;, booleans are
true|false, vectors and matrices are comma-separated numbers.  Unknown
sections or keys are hard errors with line context; [domain] and [target]
are required, everything else has defaults.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry, source as source_mod
from .errors import ConfigError
from .flow import FlowConfig

__all__ = ["RunConfig", "parse_config", "parse_config_text"]

_SECTIONS = {
    "domain": {"kind", "center", "radius", "matrix", "a", "b"},
    "target": {"kind", "center", "radius", "matrix", "a", "b"},
    "initial": {"mode", "matrix", "shift"},
    "source": {"kind", "iota", "kappa", "c0", "eps", "a", "b", "x0", "p0",
               "delta_override"},
    "grid": {"resolution"},
    "flow": {"cfl", "t_max", "tol_osc", "sample_every"},
    "output": {"directory", "heatmaps"},
}


@dataclass
class RunConfig:
    omega: object
    target: object
    initial_mode: str = "auto"          # "auto" | "explicit"
    initial_matrix: np.ndarray = None
    initial_shift: np.ndarray = None
    source: object = None
    resolution: int = 65
    flow: FlowConfig = field(default_factory=FlowConfig)
    output_dir: str = "out"
    heatmaps: bool = False


def _tokenize(text):
    """-> {section: {key: (value, line)}} with duplicate/unknown checks."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ConfigError("unknown-section", f"unknown section [{name}]", lineno)
            if name in sections:
                raise ConfigError("duplicate-section", f"section [{name}] repeated", lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError("invalid-value", f"expected key = value, got {line!r}", lineno)
        if current is None:
            raise ConfigError("invalid-value", f"key before any section: {line!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _SECTIONS[current]:
            raise ConfigError("unknown-key", f"unknown key {key!r} in [{current}]", lineno)
        if key in sections[current]:
            raise ConfigError("duplicate-key", f"duplicate key {key!r} in [{current}]", lineno)
        sections[current][key] = (value, lineno)
    return sections


def _pop(sec, key, default=None):
    return sec.pop(key, (default, None))


def _as_float(value, line, key):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError("invalid-value", f"{key} must be a number, got {value!r}", line)


def _as_int(value, line, key):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError("invalid-value", f"{key} must be an integer, got {value!r}", line)


def _as_vector(value, line, key):
    try:
        return np.array([float(v) for v in value.split(",")])
    except (AttributeError, ValueError):
        raise ConfigError("invalid-value",
                          f"{key} must be comma-separated numbers, got {value!r}", line)


def _as_bool(value, line, key):
    if value == "true":
        return True
    if value == "false":
        return False
    raise ConfigError("invalid-value", f"{key} must be true or false, got {value!r}", line)


def _parse_domain(name, sec):
    kind, kline = _pop(sec, "kind")
    if kind is None:
        raise ConfigError("invalid-value", f"[{name}] needs a kind")
    kind = kind.lower()
    if kind == "ball":
        center, cl = _pop(sec, "center", "0, 0")
        radius, rl = _pop(sec, "radius")
        if radius is None:
            raise ConfigError("invalid-value", f"[{name}] ball needs a radius", kline)
        dom = geometry.ball(_as_vector(center, cl, "center"),
                            _as_float(radius, rl, "radius"))
    elif kind == "ellipse":
        center, cl = _pop(sec, "center", "0, 0")
        matrix, ml = _pop(sec, "matrix")
        if matrix is None:
            raise ConfigError("invalid-value", f"[{name}] ellipse needs a matrix", kline)
        m = _as_vector(matrix, ml, "matrix")
        if len(m) != 4:
            raise ConfigError("invalid-value", "ellipse matrix needs 4 entries", ml)
        dom = geometry.ellipse(_as_vector(center, cl, "center"), m.reshape(2, 2))
    elif kind == "interval":
        a, al = _pop(sec, "a")
        b, bl = _pop(sec, "b")
        if a is None or b is None:
            raise ConfigError("invalid-value", f"[{name}] interval needs a and b", kline)
        dom = geometry.interval(_as_float(a, al, "a"), _as_float(b, bl, "b"))
    else:
        raise ConfigError("invalid-value", f"unknown domain kind {kind!r}", kline)
    if sec:
        key = next(iter(sec))
        raise ConfigError("unknown-key",
                          f"key {key!r} does not apply to kind {kind!r}", sec[key][1])
    return dom


def _parse_source(sec, dim):
    kind, kline = _pop(sec, "kind", "affine")
    kind = kind.lower()
    delta_override, dl = _pop(sec, "delta_override")
    if kind == "affine":
        iota, il = _pop(sec, "iota", ", ".join(["0"] * dim))
        kappa, kl = _pop(sec, "kappa", ", ".join(["0"] * dim))
        c0, cl = _pop(sec, "c0", "0")
        src = source_mod.affine(_as_vector(iota, il, "iota"),
                                _as_vector(kappa, kl, "kappa"),
                                _as_float(c0, cl, "c0"))
    elif kind == "separable_quadratic":
        eps, el = _pop(sec, "eps", "0")
        a, al = _pop(sec, "a", "0")
        b, bl = _pop(sec, "b", "0")
        x0, xl = _pop(sec, "x0", ", ".join(["0"] * dim))
        p0, pl = _pop(sec, "p0", ", ".join(["0"] * dim))
        src = source_mod.separable_quadratic(
            _as_float(eps, el, "eps"), _as_float(a, al, "a"), _as_float(b, bl, "b"),
            _as_vector(x0, xl, "x0"), _as_vector(p0, pl, "p0"))
    else:
        raise ConfigError("invalid-value", f"unknown source kind {kind!r}", kline)
    if src.dim != dim:
        raise ConfigError("invalid-value",
                          f"source dimension {src.dim} does not match domain dimension {dim}")
    if delta_override is not None:
        src = source_mod.SourceTerm(
            **{**src.__dict__, "delta_override": _as_float(delta_override, dl,
                                                           "delta_override")})
    if sec:
        key = next(iter(sec))
        raise ConfigError("unknown-key",
                          f"key {key!r} does not apply to source kind {kind!r}",
                          sec[key][1])
    return src


def parse_config_text(text):
    sections = _tokenize(text)
    for required in ("domain", "target"):
        if required not in sections:
            raise ConfigError("missing-section", f"missing required section [{required}]")

    omega = _parse_domain("domain", sections.pop("domain"))
    target = _parse_domain("target", sections.pop("target"))
    if omega.dim != target.dim:
        raise ConfigError("invalid-value",
                          f"domain dimension {omega.dim} != target dimension {target.dim}")

    init = sections.pop("initial", {})
    mode, mline = _pop(init, "mode", "auto")
    mode = mode.lower()
    imatrix = ishift = None
    if mode == "explicit":
        matrix, ml = _pop(init, "matrix")
        shift, sl = _pop(init, "shift", ", ".join(["0"] * omega.dim))
        if matrix is None:
            raise ConfigError("invalid-value", "[initial] explicit mode needs a matrix", mline)
        m = _as_vector(matrix, ml, "matrix")
        if len(m) != omega.dim ** 2:
            raise ConfigError("invalid-value",
                              f"initial matrix needs {omega.dim ** 2} entries", ml)
        imatrix = m.reshape(omega.dim, omega.dim)
        ishift = _as_vector(shift, sl, "shift")
    elif mode != "auto":
        raise ConfigError("invalid-value", f"initial mode must be auto or explicit, got {mode!r}",
                          mline)
    if init:
        key = next(iter(init))
        raise ConfigError("unknown-key",
                          f"key {key!r} does not apply to initial mode {mode!r}",
                          init[key][1])

    src = _parse_source(sections.pop("source", {}), omega.dim)

    gsec = sections.pop("grid", {})
    resolution, rl = _pop(gsec, "resolution", "65")
    resolution = _as_int(resolution, rl, "resolution")

    fsec = sections.pop("flow", {})
    cfl, c1 = _pop(fsec, "cfl", "0.5")
    t_max, c2 = _pop(fsec, "t_max", "50")
    tol_osc, c3 = _pop(fsec, "tol_osc", "1e-8")
    sample_every, c4 = _pop(fsec, "sample_every", "50")
    fc = FlowConfig(cfl=_as_float(cfl, c1, "cfl"),
                    t_max=_as_float(t_max, c2, "t_max"),
                    tol_osc=_as_float(tol_osc, c3, "tol_osc"),
                    sample_every=_as_int(sample_every, c4, "sample_every"))
    if not (0.0 < fc.cfl <= 1.0):
        raise ConfigError("invalid-value", f"cfl must lie in (0, 1], got {fc.cfl}", c1)

    osec = sections.pop("output", {})
    directory, _ = _pop(osec, "directory", "out")
    heatmaps, hl = _pop(osec, "heatmaps", "false")

    return RunConfig(
        omega=omega, target=target, initial_mode=mode,
        initial_matrix=imatrix, initial_shift=ishift, source=src,
        resolution=resolution, flow=fc, output_dir=directory,
        heatmaps=_as_bool(heatmaps, hl, "heatmaps"),
    )


def parse_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("missing-file", f"cannot read config: {exc}")
    return parse_config_text(text)
