"""JSON configuration: schemas, validation with JSON-path error messages, presets."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .estimators import CLI_METHODS

PRESETS = ("table1", "table2", "figure1", "figure2")

_COVARIANCE = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["wiener", "generalized-wiener", "ou"]},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma2": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "minimum": 0},
                "lambda": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

_COMMON = {
    "curve": {"enum": ["M1", "M2"]},
    "covariance": _COVARIANCE,
    "design": {"enum": ["midpoint", "regular-uniform"]},
    "n": {"type": "integer", "minimum": 2},
    "kernel": {"enum": ["quartic", "uniform"]},
    "grid": {"type": "integer", "minimum": 3},
    "boundary": {"enum": ["none", "renorm"]},
    "interval": {
        "type": "array",
        "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "minItems": 2,
        "maxItems": 2,
    },
}

_BANDWIDTH = {"oneOf": [{"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, {"const": "optimal-exact"}]}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_METHOD = {"enum": list(CLI_METHODS)}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["kind", "curve", "covariance", "n", "m"],
    "additionalProperties": False,
    "properties": {
        "kind": {"const": "scenario"},
        **_COMMON,
        "m": {"type": "integer", "minimum": 1},
        "method": _METHOD,
        "h": _BANDWIDTH,
        "replications": {"type": "integer", "minimum": 1},
        "seed": _SEED,
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ybar": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "csv": {"type": "string"},
                "noiseless": {"type": "boolean"},
            },
        },
    },
}

BENCH_SCHEMA = {
    "type": "object",
    "required": ["kind", "blocks"],
    "additionalProperties": False,
    "properties": {
        "kind": {"const": "bench"},
        "blocks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "curve", "covariance", "n", "m", "methods"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    **_COMMON,
                    "m": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                    "methods": {"type": "array", "items": _METHOD, "minItems": 1},
                },
            },
        },
    },
}

FIGURE_SCHEMA = {
    "type": "object",
    "required": ["kind", "curve", "covariance", "n", "m"],
    "additionalProperties": False,
    "properties": {
        "kind": {"const": "figure"},
        **_COMMON,
        "m": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "method": _METHOD,
        "h": _BANDWIDTH,
        "replications": {"type": "integer", "minimum": 1},
        "seed": _SEED,
    },
}

SCHEMAS = {"scenario": SCENARIO_SCHEMA, "bench": BENCH_SCHEMA, "figure": FIGURE_SCHEMA}


class ConfigError(ValueError):
    """Schema violation or unreadable config; ``path`` is a JSON path like ``$.blocks[0].m``."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.detail = message


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate(obj: Any, kind: str | None = None) -> dict:
    """Validate ``obj`` against the schema named by ``kind`` (or its own ``kind`` field)."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    kind = kind or obj.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(f"'kind' must be one of {sorted(SCHEMAS)}", "$.kind")
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(obj), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _json_path(err.absolute_path))
    return obj


def load(path, kind: str | None = None) -> dict:
    """Read a config file or a preset name and validate it."""
    if str(path) in PRESETS:
        return validate(preset(str(path)), kind)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate(obj, kind)


def preset(name: str) -> dict:
    """Bundled config for a benchmark table or figure."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {list(PRESETS)}")
    return json.loads(resources.files("rkhsreg.presets").joinpath(f"{name}.json").read_text())
