"""Pipeline configuration: one JSON document, validated before any work starts."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import MissionProfileError

__all__ = ["ConfigError", "CONFIG_SCHEMA", "PipelineConfig", "load_config", "config_hash"]


class ConfigError(MissionProfileError, ValueError):
    """Invalid configuration."""


_positive_number = {"type": "number", "exclusiveMinimum": 0}
_edges = {"type": "array", "items": {"type": "number"}, "minItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "missionprofile pipeline configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "input": {"type": "string"},
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["fleet", "day"]},
                "params": {"type": "object"},
            },
        },
        "basis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_basis": {"oneOf": [
                    {"type": "integer", "minimum": 1},
                    {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                ]},
                "order": {"type": "integer", "minimum": 1},
                "penalty_order": {"type": "integer", "minimum": 0},
            },
        },
        "smoothing": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": "number", "minimum": 0},
                "lambda_grid": {"type": "array", "items": _positive_number, "minItems": 1},
            },
        },
        "domain_end": _positive_number,
        "grid": {"type": "integer", "minimum": 2},
        "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "directions": {"type": ["integer", "null"], "minimum": 1},
        "coordinates": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "histograms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["coordinate", "edges"],
                "properties": {"coordinate": {"type": "string"}, "edges": _edges},
            },
        },
        "endpoint": {
            "type": "object",
            "additionalProperties": False,
            "required": ["coordinate"],
            "properties": {
                "coordinate": {"type": "string"},
                "edges": _edges,
                "lower_q": {"type": "number", "minimum": 0, "maximum": 1},
                "upper_q": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
    },
}


@dataclass
class PipelineConfig:
    """Validated configuration with defaults filled in."""

    raw: dict

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def grid(self) -> int:
        return int(self.raw.get("grid", 512))

    @property
    def gamma(self) -> float:
        return float(self.raw.get("gamma", 0.95))

    @property
    def directions(self):
        return self.raw.get("directions")

    @property
    def order(self) -> int:
        return int(self.raw.get("basis", {}).get("order", 4))

    @property
    def penalty_order(self) -> int:
        return int(self.raw.get("basis", {}).get("penalty_order", 2))

    def with_overrides(self, **overrides) -> "PipelineConfig":
        raw = copy.deepcopy(self.raw)
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("lambda", "lambda_grid"):
                sm = raw.setdefault("smoothing", {})
                sm.pop("lambda", None)
                sm.pop("lambda_grid", None)
                sm[key] = value
            else:
                raw[key] = value
        return validate(raw)


def validate(raw: dict) -> PipelineConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None
    basis = raw.get("basis", {})
    order = basis.get("order", 4)
    if basis.get("penalty_order", 2) >= order:
        raise ConfigError(f"basis.penalty_order must be < order={order}")
    ns = basis.get("n_basis")
    sizes = ns.values() if isinstance(ns, dict) else ([ns] if ns is not None else [])
    if any(k < order for k in sizes):
        raise ConfigError(f"basis.n_basis must be >= order={order}")
    sm = raw.get("smoothing", {})
    if "lambda" in sm and "lambda_grid" in sm:
        raise ConfigError("give either smoothing.lambda or smoothing.lambda_grid, not both")
    ep = raw.get("endpoint")
    if ep and not ep.get("lower_q", 0.025) < ep.get("upper_q", 0.975):
        raise ConfigError("endpoint.lower_q must be < endpoint.upper_q")
    for h in raw.get("histograms", []) + ([ep] if ep and "edges" in ep else []):
        e = h["edges"]
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ConfigError(f"histogram edges for {h['coordinate']!r} must be strictly increasing")
    return PipelineConfig(raw)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return validate({})
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return validate(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: PipelineConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.raw).encode("utf-8")).hexdigest()
