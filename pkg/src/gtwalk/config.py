"""Declarative experiment configuration.

Experiments are described by JSON documents of known keys; unknown keys are
rejected with the offending key path. A config normalizes to a canonical
dict (defaults applied, key order fixed) whose serialization hashes stably
across platforms.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError
from .manifolds import ManifoldModel, make_model

EXPERIMENT_KINDS = (
    "walk", "couple", "verify-coupling-bound", "verify-contraction",
    "verify-gradient", "convergence", "feller-test", "ou-survival",
    "radial-domination",
)

_COMMON_KEYS = {"kind", "manifold", "t1", "t2", "seed", "out", "n_dump"}
_KEYS_BY_KIND = {
    "walk": {"alpha", "n_paths", "start", "origin", "exit_radius", "use_drift"},
    "couple": {"alpha", "n_paths", "start1", "start2", "d0", "delta_couple",
               "k", "coupling", "stick", "use_drift", "origin", "exit_radius"},
    "verify-coupling-bound": {"alpha", "n_paths", "start1", "start2", "d0",
                              "delta_couple", "k", "bias", "use_drift"},
    "verify-contraction": {"alpha", "n_paths", "start1", "start2", "d0",
                           "delta_couple", "k", "contraction_coefficient",
                           "use_drift"},
    "verify-gradient": {"alpha", "n_paths", "start1", "start2", "d0",
                        "delta_couple", "k", "f", "osc", "use_drift"},
    "convergence": {"alphas", "n_paths", "start", "reference"},
    "feller-test": {"b", "C", "y_max", "expect"},
    "ou-survival": {"a", "k", "ou_h", "n_paths"},
    "radial-domination": {"alpha", "n_paths", "start", "origin",
                          "exit_radius", "b", "c0", "r0", "margin"},
}
_MANIFOLD_KEYS = {"kind", "dim", "radius_c0", "flow", "k", "base"}

_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "n_paths": 1000,
    "n_dump": 0,
    "exit_radius": 8.0,
    "k": 0.0,
    "coupling": "reflection",
    "stick": True,
    "use_drift": False,
    "bias": 0.0,
    "contraction_coefficient": 5.0,
    "osc": 1.0,
    "C": 1.0,
    "y_max": 20.0,
    "c0": 1.0,
    "r0": 0.5,
    "margin": 0.1,
    "ou_h": 1e-4,
    "out": None,
    "reference": None,
    "expect": None,
}


@dataclass
class ExperimentConfig:
    """A validated experiment description with defaults applied."""
    kind: str
    data: dict

    def __getitem__(self, key: str):
        return self.data[key]

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def build_model(self) -> ManifoldModel:
        return make_model(self.data["manifold"],
                          (self.data["t1"], self.data["t2"]))

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _check_manifold(desc: Any) -> dict:
    if not isinstance(desc, dict):
        _fail("manifold", "must be an object with a 'kind' tag")
    extra = set(desc) - _MANIFOLD_KEYS
    if extra:
        _fail(f"manifold.{sorted(extra)[0]}", "unknown key")
    if "kind" not in desc:
        _fail("manifold.kind", "missing")
    if desc["kind"] not in ("euclidean", "sphere", "scaled", "hyperbolic"):
        _fail("manifold.kind", f"unknown manifold kind {desc['kind']!r}")
    if desc["kind"] == "scaled" and "base" in desc:
        _check_manifold(desc["base"])
    return dict(desc)


def parse_config(document: str | dict) -> ExperimentConfig:
    """Validate a config document and apply defaults.

    Accepts JSON text or an already-decoded mapping. Unknown keys, missing
    required keys and schedule-invalid alphas raise ConfigError naming the
    key path.
    """
    if isinstance(document, str):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
    else:
        raw = dict(document)
    if not isinstance(raw, dict):
        _fail("config", "top level must be an object")

    kind = raw.get("kind")
    if kind is None:
        _fail("kind", "missing")
    if kind not in EXPERIMENT_KINDS:
        _fail("kind", f"unknown experiment kind {kind!r}")

    allowed = _COMMON_KEYS | _KEYS_BY_KIND[kind]
    extra = sorted(set(raw) - allowed)
    if extra:
        _fail(extra[0], f"unknown key for kind {kind!r}")

    for req in ("manifold", "t1", "t2"):
        if req not in raw:
            _fail(req, "missing")
    data: dict[str, Any] = {"kind": kind}
    data["manifold"] = _check_manifold(raw["manifold"])
    t1, t2 = float(raw["t1"]), float(raw["t2"])
    if not t1 < t2:
        _fail("t2", "must exceed t1")
    data["t1"], data["t2"] = t1, t2

    for key in sorted(allowed - {"kind", "manifold", "t1", "t2"}):
        if key in raw:
            data[key] = raw[key]
        elif key in _DEFAULTS:
            data[key] = _DEFAULTS[key]

    if kind == "convergence":
        alphas = data.get("alphas")
        if not isinstance(alphas, list) or not alphas:
            _fail("alphas", "must be a nonempty list")
        for a in alphas:
            _check_alpha(float(a), t1, t2)
        data["alphas"] = [float(a) for a in alphas]
    elif kind not in ("feller-test", "ou-survival"):
        if "alpha" not in data:
            _fail("alpha", "missing")
        data["alpha"] = float(data["alpha"])
        _check_alpha(data["alpha"], t1, t2)

    if kind in ("couple", "verify-coupling-bound", "verify-contraction",
                "verify-gradient"):
        has_pair = "start1" in data and "start2" in data
        if not has_pair and "d0" not in data:
            _fail("start1", "couple kinds need start1/start2 or d0")
        if "delta_couple" in data:
            delta = float(data["delta_couple"])
            if delta > 0 and delta < data["alpha"]:
                _fail("delta_couple", "must be at least alpha (or 0)")
        else:
            data["delta_couple"] = 2.0 * data["alpha"]
    if kind == "verify-gradient":
        f = data.get("f")
        if not isinstance(f, dict) or f.get("type") != "halfspace" \
                or "normal" not in f or "offset" not in f:
            _fail("f", "needs {'type': 'halfspace', 'normal': [...], 'offset': h}")
    if kind in ("feller-test", "radial-domination"):
        if "b" not in data:
            _fail("b", "missing")
    if kind == "ou-survival":
        if "a" not in data:
            _fail("a", "missing")
        data["a"] = float(data["a"])
    n_paths = data.get("n_paths")
    if n_paths is not None and int(n_paths) <= 0:
        _fail("n_paths", "must be positive")
    return ExperimentConfig(kind, data)


def _check_alpha(alpha: float, t1: float, t2: float):
    if alpha <= 0:
        _fail("alpha", "must be positive")
    if alpha ** 2 >= t2 - t1:
        _fail("alpha", f"alpha^2 = {alpha ** 2} must be < t2 - t1 = {t2 - t1}")


def parse_suite(document: str | dict) -> list[ExperimentConfig]:
    """A single experiment or a {'experiments': [...]} list document."""
    if isinstance(document, str):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
    else:
        raw = document
    if isinstance(raw, dict) and "experiments" in raw:
        extra = set(raw) - {"experiments"}
        if extra:
            _fail(sorted(extra)[0], "unknown key beside 'experiments'")
        return [parse_config(item) for item in raw["experiments"]]
    return [parse_config(raw)]


def resolve_start_points(config: ExperimentConfig, model: ManifoldModel):
    """start1/start2 arrays, built from d0 around the origin when needed."""
    data = config.data
    if "start1" in data and "start2" in data:
        return (np.asarray(data["start1"], dtype=float),
                np.asarray(data["start2"], dtype=float))
    d0 = float(data["d0"])
    o = model.origin()
    e1 = model.frame(data["t1"], o)[0]
    x1 = model.exp(data["t1"], o, -0.5 * d0 * e1)
    x2 = model.exp(data["t1"], o, +0.5 * d0 * e1)
    return x1, x2


def resolve_start(config: ExperimentConfig, model: ManifoldModel) -> np.ndarray:
    if config.get("start") is not None:
        return np.asarray(config["start"], dtype=float)
    return model.origin()


@dataclass
class RunManifest:
    """What a run produced: version, config hash, timing, report files."""
    tool_version: str
    config_hash: str
    wall_time_s: float
    reports: list[str]

    def to_dict(self) -> dict:
        return {"tool_version": self.tool_version,
                "config_hash": self.config_hash,
                "wall_time_s": self.wall_time_s,
                "reports": self.reports}
