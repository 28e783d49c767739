"""JSON run configuration.

A config has the top-level sections ``grid``, ``scheme``, ``initial``,
``obstacles``, ``experiment`` and ``output``. Unknown sections or keys are
errors. Every error names the offending field as ``section.key``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .grid import (GridGeometry, ObstacleSet, PHASE_DTYPE, phase_from_mask,
                   rasterize_disks)
from .fileio import load_mask, load_phase


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


_REQUIRED = object()

SCHEMA: dict[str, dict[str, Any]] = {
    "grid": {"n": _REQUIRED},
    "scheme": {"h": None, "max_iters": 1000, "volume_target": None, "record_energy": True},
    "initial": {"type": "disks", "centers": [], "radius": None, "value": -1, "path": None,
                "width": None, "p": 0.5},
    "obstacles": {"phi": None, "psi": None},
    "experiment": {"kind": "run", "seed": 0, "run_id": "run", "A_syst": 400.0, "C": 0.3,
                   "padding_width": None, "radius": 1.0 / 6.0, "left_x": 0.32, "gap": 0.1,
                   "hs": [1e-5, 8.5e-4, 9e-4], "expected": ["pinned", "hull", "merged"]},
    "output": {"dir": "out", "snapshot_stride": 0, "save_final": True},
}
SHAPE_KEYS = {"type", "centers", "radius", "path"}
INITIAL_TYPES = {"disks", "constant", "band", "random", "file"}
KINDS = {"run", "invasion", "study"}


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return validate(raw, base=Path(path).parent)


def validate(raw: dict, base: Path = Path(".")) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
    cfg: dict[str, dict] = {}
    for section, fields in SCHEMA.items():
        given = raw.get(section, {})
        if given is None:
            given = {}
        if not isinstance(given, dict):
            raise ConfigError(section, "section must be an object")
        for key in given:
            if key not in fields:
                raise ConfigError(f"{section}.{key}", "unknown key")
        out = {}
        for key, default in fields.items():
            if key in given:
                out[key] = given[key]
            elif default is _REQUIRED:
                if section == "grid":
                    raise ConfigError(f"{section}.{key}", "required")
            else:
                out[key] = default
        cfg[section] = out
    cfg["_base"] = base
    _check(cfg)
    return cfg


def _number(field, value, *, positive=False, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {value!r}")
    return value


def _check(cfg: dict) -> None:
    grid, scheme, init, exp, out = (cfg["grid"], cfg["scheme"], cfg["initial"],
                                    cfg["experiment"], cfg["output"])
    if "n" in grid:
        _number("grid.n", grid["n"], integer=True, minimum=2)
    if exp["kind"] not in KINDS:
        raise ConfigError("experiment.kind", f"must be one of {sorted(KINDS)}")
    if scheme["h"] is not None:
        _number("scheme.h", scheme["h"], positive=True)
    elif exp["kind"] != "invasion":
        raise ConfigError("scheme.h", "required")
    _number("scheme.max_iters", scheme["max_iters"], integer=True, minimum=1)
    if scheme["volume_target"] is not None:
        _number("scheme.volume_target", scheme["volume_target"], integer=True, minimum=0)
    _number("experiment.seed", exp["seed"], integer=True, minimum=0)
    _number("output.snapshot_stride", out["snapshot_stride"], integer=True, minimum=0)
    if not isinstance(exp["run_id"], str) or not exp["run_id"]:
        raise ConfigError("experiment.run_id", "must be a non-empty string")
    if init["type"] not in INITIAL_TYPES:
        raise ConfigError("initial.type", f"must be one of {sorted(INITIAL_TYPES)}")
    if init["type"] == "disks" and exp["kind"] == "run":
        _shape("initial", init)
    if init["type"] == "constant" and init["value"] not in (-1, 1):
        raise ConfigError("initial.value", "must be -1 or +1")
    if init["type"] == "band":
        _number("initial.width", init["width"], positive=True)
    for side in ("phi", "psi"):
        spec = cfg["obstacles"][side]
        if spec is None:
            continue
        if not isinstance(spec, dict):
            raise ConfigError(f"obstacles.{side}", "must be an object or null")
        for key in spec:
            if key not in SHAPE_KEYS:
                raise ConfigError(f"obstacles.{side}.{key}", "unknown key")
        _shape(f"obstacles.{side}", spec)
    if exp["kind"] == "invasion":
        c = _number("experiment.C", exp["C"], positive=True)
        if c >= 1:
            raise ConfigError("experiment.C", "must lie in (0, 1)")
        _number("experiment.A_syst", exp["A_syst"], positive=True)
    if exp["kind"] == "study":
        _number("experiment.gap", exp["gap"], positive=True)
        if not exp["hs"]:
            raise ConfigError("experiment.hs", "needs at least one value")
        for h in exp["hs"]:
            _number("experiment.hs", h, positive=True)


def _shape(field: str, spec: dict) -> None:
    kind = spec.get("type", "disks")
    if kind == "disks":
        r = spec.get("radius")
        _number(f"{field}.radius", r, positive=True)
        if r >= 0.5:
            raise ConfigError(f"{field}.radius", "must be below 0.5")
        centers = spec.get("centers", [])
        if not isinstance(centers, list) or any(
                not isinstance(c, list) or len(c) != 2 for c in centers):
            raise ConfigError(f"{field}.centers", "expected a list of [x, y] pairs")
        for c in centers:
            for v in c:
                _number(f"{field}.centers", v)
                if not 0 <= v < 1:
                    raise ConfigError(f"{field}.centers", "coordinates must lie in [0, 1)")
    elif kind == "file":
        if not isinstance(spec.get("path"), str):
            raise ConfigError(f"{field}.path", "required for type 'file'")
    else:
        raise ConfigError(f"{field}.type", "must be 'disks' or 'file'")


def _mask(spec, geom: GridGeometry, base: Path, field: str) -> np.ndarray:
    if spec is None:
        return np.zeros(geom.shape, dtype=bool)
    if spec.get("type", "disks") == "file":
        mask = load_mask(base / spec["path"])
    else:
        mask = rasterize_disks([tuple(c) for c in spec.get("centers", [])],
                               spec["radius"], geom)
    if mask.shape != geom.shape:
        raise ConfigError(f"{field}.path", f"mask shape {mask.shape} does not match grid")
    return mask


def build_obstacles(cfg: dict, geom: GridGeometry) -> ObstacleSet:
    obs = cfg["obstacles"]
    phi = _mask(obs["phi"], geom, cfg["_base"], "obstacles.phi")
    psi = _mask(obs["psi"], geom, cfg["_base"], "obstacles.psi")
    if np.any(phi & psi):
        raise ConfigError("obstacles", "obstacles overlap")
    return ObstacleSet(phi, psi)


def build_initial(cfg: dict, geom: GridGeometry) -> np.ndarray:
    init = cfg["initial"]
    kind = init["type"]
    if kind == "disks":
        return phase_from_mask(rasterize_disks([tuple(c) for c in init["centers"]],
                                               init["radius"], geom))
    if kind == "constant":
        return np.full(geom.shape, init["value"], dtype=PHASE_DTYPE)
    if kind == "band":
        u = np.full(geom.shape, -1, dtype=PHASE_DTYPE)
        u[: int(round(init["width"] * geom.n)), :] = 1
        return u
    if kind == "random":
        rng = np.random.Generator(np.random.PCG64(cfg["experiment"]["seed"]))
        return np.where(rng.random(geom.shape) < init["p"], 1, -1).astype(PHASE_DTYPE)
    u = load_phase(cfg["_base"] / init["path"])
    if u.shape != geom.shape:
        raise ConfigError("initial.path", f"field shape {u.shape} does not match grid")
    return u


def echo(cfg: dict) -> dict:
    """The validated config without private entries, for manifests."""
    return {k: v for k, v in cfg.items() if not k.startswith("_")}
