"""JSON run configuration: schema, defaults and problem construction."""

import copy
import json

import jsonschema
import numpy as np

from .errors import ConfigError
from .geometry import surface_from_config
from .system import ProblemSpec, SolverOptions

_point = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_points = {"type": "array", "items": _point}

_surface = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["sphere", "star"]},
        "center": _point,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "profile": {"type": "string"},
        "order": {"type": "integer", "minimum": 2},
        "quad_order": {"type": "integer", "minimum": 2},
    },
    "required": ["kind"],
    "allOf": [
        {"if": {"properties": {"kind": {"const": "sphere"}}}, "then": {"required": ["radius"]}},
        {"if": {"properties": {"kind": {"const": "star"}}}, "then": {"required": ["profile"]}},
    ],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "geometry": {
            "type": "object",
            "properties": {"outer": _surface, "inner": _surface},
            "required": ["outer", "inner"],
            "additionalProperties": False,
        },
        "expressions": {
            "type": "object",
            "properties": {k: {"type": "string"} for k in ("f_o", "F", "G")},
            "required": ["f_o", "F", "G"],
            "additionalProperties": False,
        },
        "discretization": {
            "type": "object",
            "properties": {
                "order": {"type": "integer", "minimum": 2},
                "quadrature": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "epsilons": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}},
                {
                    "type": "object",
                    "properties": {
                        "start": {"type": "number", "exclusiveMinimum": 0},
                        "stop": {"type": "number", "exclusiveMinimum": 0},
                        "num": {"type": "integer", "minimum": 1},
                        "spacing": {"enum": ["log", "linear"]},
                    },
                    "required": ["start", "stop", "num"],
                    "additionalProperties": False,
                },
            ]
        },
        "probes": {
            "type": "object",
            "properties": {"omega_M": _points, "omega_m": _points, "inner": _points},
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "maxit": {"type": "integer", "minimum": 0},
                "damping": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "fit": {
            "type": "object",
            "properties": {"degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            "additionalProperties": False,
        },
        "checks": {
            "type": "object",
            "properties": {
                "zeta_identity": {"type": "boolean"},
                "boundary_residuals": {"type": "boolean"},
                "residual_tol": {"type": "number", "exclusiveMinimum": 0},
                "rates": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
    },
    "required": ["geometry", "expressions"],
    "additionalProperties": False,
}

DEFAULTS = {
    "discretization": {"order": 8},
    "epsilons": [],
    "probes": {"omega_M": [], "omega_m": [], "inner": []},
    "solver": {"tol": 1e-11, "maxit": 20, "damping": False},
    "fit": {"degrees": [0, 1, 2, 3, 4, 5, 6]},
    "checks": {"zeta_identity": True, "boundary_residuals": True, "residual_tol": 1e-5, "rates": False},
    "output": "out",
}

_DIRS = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                  [-0.6, 0.0, 0.8], [0.0, -0.8, -0.6], [0.48, 0.6, -0.64]])

# nonlinear problem on concentric unit spheres
DEFAULT_CONFIG = {
    "geometry": {"outer": {"kind": "sphere", "center": [0, 0, 0], "radius": 1.0},
                 "inner": {"kind": "sphere", "center": [0, 0, 0], "radius": 1.0}},
    "expressions": {"f_o": "1 + x3 + 1/(3 - x1)", "F": "2*zeta + eps*t1", "G": "zeta^2 + 1/(4*pi)"},
    "discretization": {"order": 8},
    "epsilons": {"start": 1e-3, "stop": 1e-1, "num": 8, "spacing": "log"},
    "probes": {"omega_M": (0.6 * _DIRS).tolist(), "omega_m": (2.5 * _DIRS).tolist(),
               "inner": (0.5 * _DIRS).tolist()},
    "fit": {"degrees": [0, 1, 2, 3, 4, 5, 6]},
}

# linear problem with a closed-form solution on concentric unit spheres
ORACLE_CONFIG = {
    **DEFAULT_CONFIG,
    "expressions": {"f_o": "1", "F": "2*zeta", "G": "1"},
    "epsilons": [0.025, 0.05, 0.075, 0.1],
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg):
    """Schema-validate and fill defaults; returns a new dict."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {err.message}") from None
    return _merge(DEFAULTS, cfg)


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return validate(cfg)


def epsilon_grid(cfg):
    e = cfg["epsilons"]
    if isinstance(e, list):
        return [float(v) for v in e]
    if e.get("spacing", "log") == "log":
        return np.geomspace(e["start"], e["stop"], e["num"]).tolist()
    return np.linspace(e["start"], e["stop"], e["num"]).tolist()


def _surface(desc, disc):
    d = dict(desc)
    d.setdefault("order", disc["order"])
    if "quadrature" in disc:
        d.setdefault("quad_order", disc["quadrature"])
    return surface_from_config(d)


def build_problem(cfg):
    """ProblemSpec from a validated config; raises the library's errors."""
    disc = cfg["discretization"]
    outer = _surface(cfg["geometry"]["outer"], disc)
    inner = _surface(cfg["geometry"]["inner"], disc)
    ex = cfg["expressions"]
    s = cfg["solver"]
    opts = SolverOptions(tol=float(s["tol"]), maxit=int(s["maxit"]), damping=bool(s["damping"]))
    return ProblemSpec(outer, inner, ex["f_o"], ex["F"], ex["G"], epsilon_grid(cfg), opts)


def probes(cfg):
    return {k: np.asarray(cfg["probes"].get(k, []), dtype=float).reshape(-1, 3)
            for k in ("omega_M", "omega_m", "inner")}
