"""Experiment configuration: YAML loading, validation and object construction.

Algebra elements and momenta are given as upper-triangle coordinate lists in
lexicographic ``(i, j)`` order, ``i < j``.  Group elements accept
``identity``, ``{matrix: [[...]]}``, ``{exp: [coords]}`` or
``{random: {seed: int}}``.  Every random draw needs an explicit seed; a
top-level ``seed`` serves as the fallback and is what ``--seed`` overrides.
"""
import copy
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import liecore
from .control import PLANAR_FIELDS, ControlSystem, SteerBudget, line_x1, strip_x1
from .errors import ConfigError
from .inertia import InertiaOperator
from .reduction import DEFAULT_DRIFT_BUDGET, DEFAULT_H, DEFAULT_T, ReducedSystem

COMMANDS = ("simulate", "chaplygin", "vortex", "stiefel", "steer", "transfer", "rank-check", "transversality")

# blocks each command needs besides the optional ones
REQUIRED = {
    "simulate": ("n", "operator", "momentum"),
    "chaplygin": ("chaplygin",),
    "vortex": ("n", "momentum"),
    "stiefel": ("n", "operator", "momentum"),
    "steer": ("n", "operator", "momentum", "controls", "steering"),
    "transfer": ("n", "operator", "momentum", "controls", "transfer"),
    "rank-check": (),
    "transversality": ("transversality",),
}

FIXTURE_PREFIX = "fixture:"


def fixture_names():
    root = resources.files("lievortex") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_text(path):
    path = str(path)
    if path.startswith(FIXTURE_PREFIX):
        name = path[len(FIXTURE_PREFIX):]
        if name not in fixture_names():
            raise ConfigError("config", f"unknown fixture {name!r}; available: {', '.join(fixture_names())}")
        return (resources.files("lievortex") / "fixtures" / f"{name}.yaml").read_text()
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"no such file: {path}")
    return p.read_text()


def load(path, command=None, seed=None):
    """Parse and validate a config file; returns the resolved config dict."""
    try:
        raw = yaml.safe_load(read_text(path))
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    return resolve(raw, command, seed)


def resolve(raw, command=None, seed=None):
    cfg = copy.deepcopy(raw)
    declared = cfg.get("command")
    if command is None:
        command = declared
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}, got {command!r}")
    if declared is not None and declared != command:
        raise ConfigError("command", f"config is for {declared!r} but {command!r} was requested")
    cfg["command"] = command
    if seed is not None:
        cfg["seed"] = int(seed)
    for key in REQUIRED[command]:
        if key not in cfg:
            raise ConfigError(key, f"block required by the {command} command is missing")
    if command == "rank-check" and not any(k in cfg for k in ("controls", "two_generator", "planar")):
        raise ConfigError("rank-check", "needs a controls, two_generator or planar block")
    if command == "simulate" and "controls" in cfg and "signal" not in cfg["controls"] \
            and "signal_file" not in cfg["controls"]:
        raise ConfigError("controls.signal_file", "simulate with controls needs a signal or signal_file")
    integ = cfg.setdefault("integration", {})
    integ.setdefault("T", DEFAULT_T)
    integ.setdefault("h", DEFAULT_H)
    integ.setdefault("drift_budget", DEFAULT_DRIFT_BUDGET)
    integ.setdefault("sample_every", 1)
    cfg.setdefault("chirality", "left")
    if "controls" in cfg:
        c = cfg["controls"]
        c.setdefault("segments", 20)
        c.setdefault("T", 10.0)
        c.setdefault("steps_per_segment", 25)
        if "eps" not in c:
            raise ConfigError("controls.eps", "control bound is required")
        if "directions" not in c:
            raise ConfigError("controls.directions", "list of control directions is required")
    if command in ("steer", "transfer"):
        st = cfg.setdefault("steering", {})
        defaults = SteerBudget()
        for key in ("starts", "max_iter", "tol", "max_distance", "fd_step", "workers"):
            st.setdefault(key, getattr(defaults, key))
        if "seed" not in st:
            st["seed"] = _seed(cfg, "steering.seed")
        elif seed is not None:
            st["seed"] = int(seed)
    out = cfg.setdefault("output", {})
    out.setdefault("dir", "lievortex-out")
    return cfg


def _seed(cfg, field):
    if "seed" not in cfg:
        raise ConfigError(field, "random draws need an explicit seed (or a top-level seed)")
    return int(cfg["seed"])


def _get(block, key, field):
    if not isinstance(block, dict) or key not in block:
        raise ConfigError(field, "missing")
    return block[key]


def _float(x, field):
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {x!r}") from None
    if not np.isfinite(v):
        raise ConfigError(field, "must be finite")
    return v


def _array(x, field, shape=None):
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(field, "expected a numeric list") from None
    if shape is not None and a.shape != shape:
        raise ConfigError(field, f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(field, "entries must be finite")
    return a


def dimension(cfg):
    n = cfg.get("n")
    if not isinstance(n, int) or n < 2:
        raise ConfigError("n", f"group dimension must be an integer >= 2, got {n!r}")
    return n


def algebra(x, n, field):
    return liecore.unvec(_array(x, field, (liecore.dim_algebra(n),)), n)


def momentum(cfg, n):
    block = cfg["momentum"]
    if isinstance(block, dict) and "random" in block:
        r = block["random"] or {}
        seed = int(r["seed"]) if "seed" in r else _seed(cfg, "momentum.random.seed")
        scale = _float(r.get("scale", 1.0), "momentum.random.scale")
        return liecore.random_algebra(n, np.random.default_rng(seed), scale)
    coords = block.get("coords") if isinstance(block, dict) else block
    return algebra(coords, n, "momentum.coords")


def group(spec, n, field, cfg):
    if spec is None or spec == "identity":
        return np.eye(n)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(field, "expected identity, {matrix: ...}, {exp: ...} or {random: {seed: ...}}")
    (kind, value), = spec.items()
    if kind == "matrix":
        g = _array(value, field + ".matrix", (n, n))
        try:
            return liecore.group_element(g)
        except ValueError as exc:
            raise ConfigError(field + ".matrix", str(exc)) from None
    if kind == "exp":
        return liecore.exp(algebra(value, n, field + ".exp"))
    if kind == "random":
        value = value or {}
        seed = int(value["seed"]) if "seed" in value else _seed(cfg, field + ".random.seed")
        return liecore.random_group(n, np.random.default_rng(seed))
    raise ConfigError(field, f"unknown group element kind {kind!r}")


def operator(cfg, n):
    block = _get(cfg, "operator", "operator")
    kind = block.get("kind", "manakov")
    try:
        if kind == "manakov":
            return InertiaOperator.manakov(_array(_get(block, "U", "operator.U"), "operator.U"))
        if kind == "dense":
            return InertiaOperator.dense(_array(_get(block, "A", "operator.A"), "operator.A"), n)
        if kind == "rigid_body":
            if n != 3:
                raise ConfigError("operator.kind", "rigid_body needs n = 3")
            return InertiaOperator.rigid_body3(_array(_get(block, "I", "operator.I"), "operator.I"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("operator", str(exc)) from None
    raise ConfigError("operator.kind", f"expected manakov, dense or rigid_body, got {kind!r}")


def system(cfg):
    n = dimension(cfg)
    op = operator(cfg, n)
    if op.n != n:
        raise ConfigError("operator", f"operator acts on so({op.n}) but n = {n}")
    m_s = momentum(cfg, n)
    lam = algebra(cfg["lam"], n, "lam") if "lam" in cfg else None
    chir = cfg.get("chirality", "left")
    if chir not in ("left", "right"):
        raise ConfigError("chirality", "must be left or right")
    return ReducedSystem(op, m_s, lam, chir)


def control_system(cfg, sys):
    c = cfg["controls"]
    n = sys.n
    dirs = [algebra(d, n, f"controls.directions[{i}]") for i, d in enumerate(_get(c, "directions", "controls.directions"))]
    if not dirs:
        raise ConfigError("controls.directions", "at least one control direction is required")
    eps = _float(c["eps"], "controls.eps")
    if eps <= 0:
        raise ConfigError("controls.eps", "must be positive")
    segments = c["segments"]
    if not isinstance(segments, int) or segments < 1:
        raise ConfigError("controls.segments", "must be a positive integer")
    sps = c["steps_per_segment"]
    if not isinstance(sps, int) or sps < 1:
        raise ConfigError("controls.steps_per_segment", "must be a positive integer")
    T = _float(c["T"], "controls.T")
    if T <= 0:
        raise ConfigError("controls.T", "must be positive")
    if sys.chirality != "left":
        raise ConfigError("chirality", "controlled systems must be left-invariant")
    return ControlSystem(sys, dirs, eps, segments, T, sps)


def budget(cfg):
    st = cfg["steering"]
    tl = st.get("time_limit")
    return SteerBudget(
        starts=int(st["starts"]), max_iter=int(st["max_iter"]), tol=_float(st["tol"], "steering.tol"),
        max_distance=_float(st["max_distance"], "steering.max_distance"), seed=int(st["seed"]),
        fd_step=_float(st["fd_step"], "steering.fd_step"),
        time_limit=None if tl is None else _float(tl, "steering.time_limit"), workers=int(st["workers"]))


def integration(cfg):
    b = cfg["integration"]
    T = _float(b["T"], "integration.T")
    h = _float(b["h"], "integration.h")
    if h <= 0 or T <= 0:
        raise ConfigError("integration", "T and h must be positive")
    return T, h, _float(b["drift_budget"], "integration.drift_budget"), int(b["sample_every"])


def planar_field(name, field):
    if name not in PLANAR_FIELDS:
        raise ConfigError(field, f"unknown planar field {name!r}; choose from {', '.join(PLANAR_FIELDS)}")
    return PLANAR_FIELDS[name]


def region(spec, field):
    kind = _get(spec, "kind", field + ".kind")
    if kind == "line":
        return line_x1(_float(spec.get("c", 0.0), field + ".c"))
    if kind == "strip":
        lo = _float(_get(spec, "lo", field + ".lo"), field + ".lo")
        hi = _float(_get(spec, "hi", field + ".hi"), field + ".hi")
        if not 0 <= lo <= hi <= 2 * np.pi:
            raise ConfigError(field, "strip needs 0 <= lo <= hi <= 2*pi")
        return strip_x1(lo, hi)
    raise ConfigError(field + ".kind", f"expected line or strip, got {kind!r}")
