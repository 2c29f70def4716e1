"""Scenario files: schema, validation, unit conversion and model registry."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from uqprop.dynamics import (
    DuffingParams,
    GravityParams,
    KeplerSdeParams,
    SdeModel,
    ThrustSdeParams,
    convert,
    duffing_model,
    kepler_planar_sde,
    linear_model,
    orbit_drift,
    ou_model,
    thrust_sde,
    thrust_sde_mee,
)
from uqprop.runner.units import UnitError, parse_quantity, parse_vector

SCHEMA_VERSION = 1

_QTY = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_VEC = {"type": "array", "items": _QTY, "minItems": 1}
_MODEL_IDS = ["duffing", "ou", "linear", "kepler_planar", "two_body", "j2", "thrust"]
_MODEL = {
    "type": "object",
    "required": ["id"],
    "additionalProperties": False,
    "properties": {"id": {"enum": _MODEL_IDS}, "params": {"type": "object"}},
}
_ADAPT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["eps_nu"],
    "properties": {
        "eps_nu": {"type": "number", "exclusiveMinimum": 0},
        "n_max": {"type": "integer", "minimum": 0},
        "alpha_min": {"type": "number", "minimum": 0},
        "zeta": {"type": "number", "exclusiveMinimum": 0},
        "split_penalty": {"type": "number", "minimum": 0},
        "ut_kappa": {"type": "number"},
        "order": {"type": "integer", "minimum": 2},
    },
}
_INTEG = {"enum": ["euler_maruyama", "rk4", "map"]}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "uqprop scenario",
    "type": "object",
    "required": ["schema_version", "name", "model", "initial", "time", "method"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "long_running": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": "integer", "minimum": 1},
        "model": _MODEL,
        "initial": {
            "type": "object",
            "required": ["kind", "state"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["deterministic", "gaussian"]},
                "frame": {"enum": ["state", "cartesian", "keplerian", "mee", "mee_mean"]},
                "state": _VEC,
                "std": _VEC,
                "cov": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "time": {
            "type": "object",
            "required": ["tf"],
            "additionalProperties": False,
            "properties": {"t0": _QTY, "tf": _QTY},
        },
        "method": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["plasma", "plasma_bifidelity", "gmm_adaptive", "mf_deterministic", "mf_stochastic", "mc"]},
                "h": _QTY,
                "order": {"type": "integer", "minimum": 1},
                "integ": _INTEG,
                "substeps": {"type": "integer", "minimum": 1},
                "lf_model": _MODEL,
                "adapt": _ADAPT,
                "bifidelity": {"type": "boolean"},
                "n_samples": {"type": "integer", "minimum": 1},
                "scheme": {"enum": ["euler_maruyama", "rk4_additive_noise"]},
            },
        },
        "reference": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "mc", "plasma", "duffing_closed_form", "ou_closed_form"]},
                "n_samples": {"type": "integer", "minimum": 2},
                "h": _QTY,
                "scheme": {"enum": ["euler_maruyama", "rk4_additive_noise"]},
                "integ": _INTEG,
                "tolerances": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        k: {"type": "number", "minimum": 0}
                        for k in ("mean_rel", "cov_diag_rel", "oracle_rel", "eps_mu_ratio", "eps_lambda_ratio_dev")
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "frame": {"enum": ["state", "cartesian", "keplerian", "mee", "mee_mean"]},
                "samples": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Validation failure; ``path`` locates the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


# ---------------------------------------------------------------------------
# model registry

_PARAM_DIMS = {
    "duffing": {"a": "none", "b": "none", "sigma": "none"},
    "ou": {"a": "rate", "sigma": "none"},
    "linear": {},
    "kepler_planar": {"mu": "gm", "sigma_w": "kepler_noise"},
    "two_body": {"mu": "gm"},
    "j2": {"mu": "gm", "r_e": "length", "j2": "none"},
    "thrust": {
        "mu": "gm",
        "r_e": "length",
        "j2": "none",
        "a_t": "accel",
        "sigma_at": "accel_noise",
        "sigma_alpha": "angle_noise",
        "sigma_beta": "angle_noise",
    },
}
_EXTRA_PARAMS = {"linear": {"A", "G"}, "thrust": {"include_j2", "coords"}}

STATE_LABELS = {
    "cartesian": [("x", "km"), ("y", "km"), ("z", "km"), ("vx", "km/s"), ("vy", "km/s"), ("vz", "km/s")],
    "planar": [("x", "km"), ("y", "km"), ("vx", "km/s"), ("vy", "km/s")],
    "keplerian": [("a", "km"), ("e", "-"), ("i", "rad"), ("raan", "rad"), ("argp", "rad"), ("nu", "rad")],
    "mee": [("p", "km"), ("f", "-"), ("g", "-"), ("h", "-"), ("k", "-"), ("L", "rad")],
    "mee_mean": [("p", "km"), ("f", "-"), ("g", "-"), ("h", "-"), ("k", "-"), ("lambda", "rad")],
}
_FRAME_DIMS = {
    "cartesian": ["length"] * 3 + ["speed"] * 3,
    "planar": ["length"] * 2 + ["speed"] * 2,
    "keplerian": ["length", "none", "angle", "angle", "angle", "angle"],
    "mee": ["length", "none", "none", "none", "none", "angle"],
    "mee_mean": ["length", "none", "none", "none", "none", "angle"],
}


@dataclass
class ModelInfo:
    model: SdeModel
    coords: str  # "generic", "planar", "cartesian" or "mee"
    mu: float | None = None
    params: dict = field(default_factory=dict)

    def labels(self, frame: str | None = None) -> list[tuple[str, str]]:
        key = frame if frame not in (None, "state") else self.coords
        if key in STATE_LABELS:
            return STATE_LABELS[key]
        return [(f"x{i}", "-") for i in range(self.model.n)]


def build_model(spec: dict, path: str = "model") -> ModelInfo:
    """Instantiate a registered model from its ``{id, params}`` block."""
    mid = spec["id"]
    raw = dict(spec.get("params", {}))
    dims = _PARAM_DIMS[mid]
    unknown = set(raw) - set(dims) - _EXTRA_PARAMS.get(mid, set())
    if unknown:
        raise ConfigError(f"{path}.params", f"unknown parameters {sorted(unknown)} for model {mid!r}")
    p = {k: parse_quantity(v, dims[k], f"{path}.params.{k}") for k, v in raw.items() if k in dims}
    if mid == "duffing":
        return ModelInfo(duffing_model(DuffingParams(**p)), "generic", params=p)
    if mid == "ou":
        return ModelInfo(ou_model(p.get("a", 1.0), p.get("sigma", 0.5)), "generic", params=p)
    if mid == "linear":
        if "A" not in raw or "G" not in raw:
            raise ConfigError(f"{path}.params", "linear model needs matrices A and G")
        A, G = np.asarray(raw["A"], dtype=float), np.asarray(raw["G"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or G.ndim != 2 or G.shape[0] != A.shape[0]:
            raise ConfigError(f"{path}.params", "A must be n x n and G n x m")
        return ModelInfo(linear_model(A, G), "generic", params={"A": A.tolist(), "G": G.tolist()})
    if mid == "kepler_planar":
        kp = KeplerSdeParams(**p)
        return ModelInfo(kepler_planar_sde(kp), "planar", kp.mu, p)
    if mid in ("two_body", "j2"):
        gp = GravityParams(**p) if mid == "j2" else GravityParams(mu=p.get("mu", GravityParams.mu), j2=0.0)
        return ModelInfo(SdeModel(orbit_drift(gp, j2=mid == "j2"), n=6, name=mid), "cartesian", gp.mu, p)
    if mid == "thrust":
        tp = ThrustSdeParams(**p)
        include_j2 = bool(raw.get("include_j2", True))
        coords = raw.get("coords", "cartesian")
        if coords not in ("cartesian", "mee"):
            raise ConfigError(f"{path}.params.coords", "must be 'cartesian' or 'mee'")
        factory = thrust_sde_mee if coords == "mee" else thrust_sde
        return ModelInfo(factory(tp, j2=include_j2), coords, tp.mu, {**p, "include_j2": include_j2})
    raise ConfigError(f"{path}.id", f"unknown model {mid!r}")  # pragma: no cover - schema guards this


# ---------------------------------------------------------------------------
# loading, validation and resolution


def bundled_dir():
    return resources.files("uqprop.runner") / "scenarios"


def bundled_scenarios() -> dict[str, Path]:
    return {p.name[:-5]: p for p in sorted(bundled_dir().iterdir(), key=lambda q: q.name) if p.name.endswith(".yaml")}


def read_config(source) -> dict:
    """Parse a YAML file (path or bundled scenario name) without validating."""
    path = Path(source)
    if not path.exists():
        named = bundled_scenarios()
        if str(source) in named:
            path = named[str(source)]
        else:
            raise ConfigError("", f"no such file or bundled scenario: {source}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"YAML syntax error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a mapping")
    return data


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def validate(cfg: dict) -> "Scenario":
    """Schema check plus semantic checks; returns the resolved scenario."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(path, e.message)
    try:
        return resolve(cfg)
    except UnitError as exc:
        raise ConfigError(exc.path, str(exc).split(": ", 1)[-1]) from exc


def load_config(source) -> tuple[dict, "Scenario"]:
    raw = read_config(source)
    return raw, validate(raw)


@dataclass
class Scenario:
    raw: dict
    name: str
    info: ModelInfo
    lf: ModelInfo | None
    kind: str  # deterministic | gaussian
    mean: np.ndarray
    cov: np.ndarray | None
    t0: float
    tf: float
    method: dict
    reference: dict
    output_frame: str
    write_samples: bool
    seed: int
    threads: int

    @property
    def ic_cov(self) -> np.ndarray:
        return self.cov if self.cov is not None else np.zeros((self.mean.size, self.mean.size))


_NEEDS_ORBIT_FRAME = {"cartesian", "keplerian", "mee", "mee_mean"}


def _initial(block: dict, info: ModelInfo):
    """Mean (converted from ``frame`` to model coordinates) and covariance.

    ``std``/``cov`` are always in the model's own coordinates.
    """
    frame = block.get("frame", "state")
    n = info.model.n
    own = _FRAME_DIMS.get(info.coords, ["none"] * n)
    if frame == "state":
        dims = own
    else:
        if info.mu is None or info.coords not in ("cartesian", "mee"):
            raise ConfigError("initial.frame", f"frame {frame!r} needs an orbital model")
        dims = _FRAME_DIMS[frame]
    mean = np.array(parse_vector(block["state"], dims, "initial.state"))
    if mean.size != n:
        raise ConfigError("initial.state", f"model state has {n} components")
    target = info.coords if info.coords in ("cartesian", "mee") else "state"
    if frame not in ("state", target):
        mean = np.array(convert(mean, frame, target, info.mu), dtype=float)
    cov = None
    if block["kind"] == "gaussian":
        if ("std" in block) == ("cov" in block):
            raise ConfigError("initial", "a gaussian initial condition needs exactly one of std or cov")
        if "std" in block:
            std = np.array(parse_vector(block["std"], own, "initial.std"))
            cov = np.diag(std**2)
        else:
            cov = np.asarray(block["cov"], dtype=float)
            if cov.shape != (n, n) or not np.allclose(cov, cov.T):
                raise ConfigError("initial.cov", f"must be a symmetric {n}x{n} matrix")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, abs(cov).max()):
            raise ConfigError("initial.cov", "not positive semi-definite")
    return block["kind"], mean, cov


def resolve(cfg: dict) -> Scenario:
    cfg_in = copy.deepcopy(cfg)
    info = build_model(cfg_in["model"])
    meth = dict(cfg_in["method"])
    kind = meth["kind"]
    lf = build_model(meth["lf_model"], "method.lf_model") if "lf_model" in meth else None
    if kind in ("plasma_bifidelity", "mf_deterministic", "mf_stochastic") and lf is None:
        raise ConfigError("method.lf_model", f"method {kind!r} needs a low-fidelity model")
    if lf is not None and lf.model.n != info.model.n:
        raise ConfigError("method.lf_model", "low-fidelity model has a different state dimension")
    if kind in ("gmm_adaptive", "mf_deterministic", "mf_stochastic"):
        if "adapt" not in meth:
            raise ConfigError("method.adapt", f"method {kind!r} needs an adapt block")
        if cfg_in["initial"]["kind"] != "gaussian":
            raise ConfigError("initial.kind", f"method {kind!r} needs a gaussian initial condition")
    if kind == "mc" and "n_samples" not in meth:
        raise ConfigError("method.n_samples", "required for the mc method")
    if meth.get("integ") == "map" and info.model.discrete_step is None:
        raise ConfigError("method.integ", "'map' needs a model defined as a discrete map")
    ic_kind, mean, cov = _initial(cfg_in["initial"], info)

    tb = cfg_in["time"]
    t0 = parse_quantity(tb.get("t0", 0.0), "time", "time.t0")
    tf = parse_quantity(tb["tf"], "time", "time.tf")
    if tf < t0:
        raise ConfigError("time.tf", "must not precede t0")
    if "h" not in meth:
        raise ConfigError("method.h", "step size is required")
    meth["h"] = parse_quantity(meth["h"], "time", "method.h")
    if not meth["h"] > 0:
        raise ConfigError("method.h", "must be positive")

    ref = dict(cfg_in.get("reference", {"kind": "none"}))
    if "h" in ref:
        ref["h"] = parse_quantity(ref["h"], "time", "reference.h")
    if ref["kind"] == "mc" and "n_samples" not in ref:
        raise ConfigError("reference.n_samples", "required for an mc reference")
    if ref["kind"] == "duffing_closed_form" and cfg_in["model"]["id"] != "duffing":
        raise ConfigError("reference.kind", "the closed form exists only for the duffing model")
    if ref["kind"] == "ou_closed_form" and cfg_in["model"]["id"] != "ou":
        raise ConfigError("reference.kind", "the closed form exists only for the ou model")

    out = cfg_in.get("output", {})
    frame = out.get("frame", "state")
    if frame in _NEEDS_ORBIT_FRAME and (info.mu is None or info.coords not in ("cartesian", "mee")):
        raise ConfigError("output.frame", f"frame {frame!r} needs an orbital model")
    return Scenario(
        raw=cfg,
        name=cfg_in["name"],
        info=info,
        lf=lf,
        kind=ic_kind,
        mean=mean,
        cov=cov,
        t0=t0,
        tf=tf,
        method=meth,
        reference=ref,
        output_frame=frame,
        write_samples=bool(out.get("samples", False)),
        seed=int(cfg_in.get("seed", 0)),
        threads=int(cfg_in.get("threads", 1)),
    )
