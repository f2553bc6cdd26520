"""Experiment configuration: JSON schema version 1, validation and overrides."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import ConfigError
from .fiber import family_from_spec
from .geometry import geometry_from_spec

SCHEMA_VERSION = 1
MODES = ("spectrum", "dynamics", "spacing")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "band": 0,
    "eps": [0.2, 0.1, 0.05, 0.025],
    "resolution": {"N": 64, "Nq": 32, "Nn": 24, "levels": 4, "I_max": None},
    "E_max": None,
    "count": 5,
    "mode": "spectrum",
    "order": 2,
    "orders": [0, 1, 2],
    "gap_tol": None,
    "output": {"dir": "out"},
    "dynamics": {"center": 0.0, "concentration": 4.0, "momentum": 2, "t_max": None,
                 "n_times": 41, "modes": 31, "leak_tol": 1e-6},
    "spacing": {"source": "effective", "window_low": 1.0, "window_high": [0.4, 0.8], "min_levels": 30},
    "seed": 0,
    "force_large": False,
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def apply_overrides(raw, overrides):
    """Apply ``dotted.key=value`` strings; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return raw


def _positive_int(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{path}: expected an integer >= {minimum}, got {value!r}")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class Resolution:
    N: int
    Nq: int
    Nn: int
    levels: int
    I_max: int


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict = field(repr=False)
    band: int
    eps: tuple
    resolution: Resolution
    E_max: float | None
    count: int
    mode: str
    order: int
    orders: tuple
    gap_tol: float | None
    output_dir: Path
    dynamics: dict
    spacing: dict
    seed: int
    force_large: bool = False

    @cached_property
    def geometry(self):
        return geometry_from_spec(self.raw["geometry"])

    @cached_property
    def family(self):
        return family_from_spec(self.raw["family"], self.geometry.length)

    @property
    def config_hash(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def validate(raw):
    """Check a raw config dict and return an ExperimentConfig.

    Errors name the offending field. Geometry and family are built eagerly
    so that malformed profiles are reported here rather than mid-run.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {raw.get('schema_version')!r}")
    for key in ("geometry", "family"):
        if key not in raw:
            raise ConfigError(f"{key}: missing")
    cfg = _merge(DEFAULTS, raw)

    eps = cfg["eps"]
    if not isinstance(eps, list) or not eps:
        raise ConfigError("eps: expected a non-empty list")
    eps = [_number(e, f"eps[{i}]") for i, e in enumerate(eps)]
    for i, e in enumerate(eps):
        if e <= 0:
            raise ConfigError(f"eps[{i}]: must be positive")
        if i and e >= eps[i - 1]:
            raise ConfigError(f"eps[{i}]: list must be strictly decreasing")

    band = _positive_int(cfg["band"], "band", 0)
    res = cfg["resolution"]
    if not isinstance(res, dict):
        raise ConfigError("resolution: expected an object")
    i_max = res.get("I_max")
    i_max = band + 20 if i_max is None else _positive_int(i_max, "resolution.I_max", band + 3)
    resolution = Resolution(_positive_int(res["N"], "resolution.N", 8), _positive_int(res["Nq"], "resolution.Nq", 8),
                            _positive_int(res["Nn"], "resolution.Nn", 2), _positive_int(res["levels"], "resolution.levels"),
                            i_max)
    e_max = None if cfg["E_max"] is None else _number(cfg["E_max"], "E_max")
    count = _positive_int(cfg["count"], "count")
    mode = cfg["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    order = cfg["order"]
    if order not in (0, 1, 2):
        raise ConfigError("order: expected 0, 1 or 2")
    orders = cfg["orders"]
    if not isinstance(orders, list) or any(o not in (0, 1, 2) for o in orders):
        raise ConfigError("orders: expected a list drawn from 0, 1, 2")
    gap_tol = None if cfg["gap_tol"] is None else _number(cfg["gap_tol"], "gap_tol")
    out = cfg["output"].get("dir", "out") if isinstance(cfg["output"], dict) else None
    if not isinstance(out, str):
        raise ConfigError("output.dir: expected a path string")
    dyn = cfg["dynamics"]
    _number(dyn["concentration"], "dynamics.concentration")
    _number(dyn["center"], "dynamics.center")
    _positive_int(dyn["n_times"], "dynamics.n_times", 2)
    _positive_int(dyn["modes"], "dynamics.modes", 2)
    if not isinstance(dyn["momentum"], int) or isinstance(dyn["momentum"], bool):
        raise ConfigError("dynamics.momentum: expected an integer")
    if dyn["t_max"] is not None:
        _number(dyn["t_max"], "dynamics.t_max")
    spc = cfg["spacing"]
    if spc["source"] not in ("effective", "tube"):
        raise ConfigError("spacing.source: expected 'effective' or 'tube'")
    seed = _positive_int(cfg["seed"], "seed", 0)
    if not isinstance(cfg["force_large"], bool):
        raise ConfigError("force_large: expected true or false")

    conf = ExperimentConfig(cfg, band, tuple(eps), resolution, e_max, count, mode, order,
                            tuple(orders), gap_tol, Path(out), dyn, spc, seed, cfg["force_large"])
    try:
        conf.geometry
    except ConfigError as exc:
        raise ConfigError(f"geometry: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"geometry: malformed ({exc})") from None
    try:
        conf.family.check(conf.geometry)
    except ConfigError as exc:
        raise ConfigError(f"family: {exc}") from None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"family: malformed ({exc})") from None
    return conf


def load_config(path, overrides=()):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
    return validate(apply_overrides(raw, overrides))
