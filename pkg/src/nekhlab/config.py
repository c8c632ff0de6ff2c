"""Config schemas, validation, and object builders for the command line.

Every subcommand config is validated against a published JSON schema
(draft 2020-12) before anything runs; unknown keys are rejected
everywhere and violations are reported with their JSON path.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .experiments import HorizonRule, ScanFamily
from .hamcore import (
    State,
    _integrable_from_dict,
    mechanical_from_dict,
    system_from_dict,
)
from .integrators import StepperSpec

__all__ = [
    "ConfigError",
    "schema_for",
    "validate_config",
    "load_config",
    "content_hash",
    "build_system",
    "build_family",
    "build_mechanical",
    "build_integrable",
    "build_state",
    "build_stepper",
    "build_horizon",
]


class ConfigError(Exception):
    """A config file failed validation; the message carries the JSON path."""


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}

_DEFS = {
    "envelope": {
        "type": "object",
        "properties": {
            "kind": {"enum": ["constant", "cosine", "sech", "ramp"]},
            "param": {"type": "number"},
        },
        "required": ["kind"],
        "additionalProperties": False,
    },
    "poly_term": {
        "type": "object",
        "properties": {
            "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 1},
            "coeff": {"type": "number"},
        },
        "required": ["alpha", "coeff"],
        "additionalProperties": False,
    },
    "mode": {
        "type": "object",
        "properties": {
            "k": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            "poly": {"type": "array", "items": {"$ref": "#/$defs/poly_term"},
                     "minItems": 1},
            "phase": {"type": "number"},
            "envelope": {"$ref": "#/$defs/envelope"},
        },
        "required": ["k", "poly"],
        "additionalProperties": False,
    },
    "perturbation": {
        "type": "object",
        "properties": {
            "modes": {"type": "array", "items": {"$ref": "#/$defs/mode"},
                      "minItems": 1},
            "scale": _POS,
        },
        "required": ["modes"],
        "additionalProperties": False,
    },
    "integrable": {
        "oneOf": [
            {
                "type": "object",
                "properties": {
                    "variant": {"const": "power_law"},
                    "p": {"type": "integer", "minimum": 2},
                    "dimension": _POS_INT,
                    "radius": _POS,
                },
                "required": ["variant", "p", "dimension", "radius"],
                "additionalProperties": False,
            },
            {
                "type": "object",
                "properties": {
                    "variant": {"const": "quadratic_form"},
                    "matrix": {"type": "array",
                               "items": {"type": "array",
                                         "items": {"type": "number"},
                                         "minItems": 1},
                               "minItems": 1},
                    "radius": _POS,
                },
                "required": ["variant", "matrix", "radius"],
                "additionalProperties": False,
            },
            {
                "type": "object",
                "properties": {
                    "variant": {"const": "polynomial"},
                    "terms": {"type": "array",
                              "items": {"$ref": "#/$defs/poly_term"},
                              "minItems": 1},
                    "dimension": _POS_INT,
                    "radius": _POS,
                },
                "required": ["variant", "terms", "dimension", "radius"],
                "additionalProperties": False,
            },
        ],
    },
    "system": {
        "type": "object",
        "properties": {
            "integrable": {"$ref": "#/$defs/integrable"},
            "perturbation": {"$ref": "#/$defs/perturbation"},
            "epsilon": _NONNEG,
            "c": {"type": "number", "minimum": 0.5, "maximum": 1.0},
            "widths": {
                "type": "object",
                "properties": {"r": _POS, "s": _POS},
                "required": ["r", "s"],
                "additionalProperties": False,
            },
        },
        "required": ["integrable", "perturbation", "epsilon", "c"],
        "additionalProperties": False,
    },
    "family": {
        "type": "object",
        "properties": {
            "integrable": {"$ref": "#/$defs/integrable"},
            "perturbation": {"$ref": "#/$defs/perturbation"},
            "c": {"type": "number", "minimum": 0.5, "maximum": 1.0},
        },
        "required": ["integrable", "perturbation", "c"],
        "additionalProperties": False,
    },
    "mechanical": {
        "type": "object",
        "properties": {
            "p": {"type": "integer", "minimum": 2},
            "potential": {"$ref": "#/$defs/perturbation"},
            "width": _POS,
        },
        "required": ["p", "potential"],
        "additionalProperties": False,
    },
    "state": {
        "type": "object",
        "properties": {
            "theta": {"type": "array", "items": {"type": "number"},
                      "minItems": 1},
            "action": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
            "time": {"type": "number"},
        },
        "required": ["theta", "action"],
        "additionalProperties": False,
    },
    "stepper": {
        "type": "object",
        "properties": {
            "method": {"enum": ["yoshida4", "yoshida6", "yoshida8",
                                "implicit_midpoint"]},
            "dt": _POS,
            "newton_tol": _POS,
            "max_iters": _POS_INT,
        },
        "required": ["method", "dt"],
        "additionalProperties": False,
    },
    "horizon": {
        "type": "object",
        "properties": {
            "kind": {"enum": ["fixed", "power"]},
            "t0": _POS,
            "q": _POS,
            "cap_steps": _POS_INT,
        },
        "required": ["kind", "t0"],
        "additionalProperties": False,
    },
    "seeds": {"type": "array", "items": _SEED, "minItems": 1},
}


def _schema(properties: dict, required: list) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
        "$defs": _DEFS,
    }


SCHEMAS: dict[str, dict] = {
    "simulate": _schema(
        {
            "system": {"$ref": "#/$defs/system"},
            "state": {"$ref": "#/$defs/state"},
            "t_final": _NONNEG,
            "stepper": {"$ref": "#/$defs/stepper"},
            "stride": _POS_INT,
            "drift_threshold": _POS,
            "stop_at_threshold": {"type": "boolean"},
        },
        ["system", "state", "t_final", "stepper"],
    ),
    "drift-scan": _schema(
        {
            "family": {"$ref": "#/$defs/family"},
            "epsilon_grid": {"type": "array", "items": _POS, "minItems": 1},
            "horizon": {"$ref": "#/$defs/horizon"},
            "seeds": {"$ref": "#/$defs/seeds"},
            "stepper": {"$ref": "#/$defs/stepper"},
            "master_seed": _SEED,
            "threshold": _POS,
        },
        ["family", "epsilon_grid", "horizon", "seeds", "stepper"],
    ),
    "theorem2": _schema(
        {
            "mechanical": {"$ref": "#/$defs/mechanical"},
            "R_grid": {"type": "array", "items": {"type": "number", "minimum": 1},
                       "minItems": 3},
            "seeds": {"$ref": "#/$defs/seeds"},
            "horizon": {"$ref": "#/$defs/horizon"},
            "stepper": {"$ref": "#/$defs/stepper"},
            "master_seed": _SEED,
        },
        ["mechanical", "R_grid", "seeds", "horizon", "stepper"],
    ),
    "scaling-check": _schema(
        {
            "mechanical": {"$ref": "#/$defs/mechanical"},
            "R": _POS,
            "state": {"$ref": "#/$defs/state"},
            "t_prime": _POS,
            "stepper": {"$ref": "#/$defs/stepper"},
            "n_field_points": _POS_INT,
            "field_seed": _SEED,
        },
        ["mechanical", "R", "state", "t_prime", "stepper"],
    ),
    "steepness": _schema(
        {
            "hamiltonian": {"$ref": "#/$defs/integrable"},
            "k": _POS_INT,
            "n_subspaces": _POS_INT,
            "n_curves": _POS_INT,
            "delta_grid": {"type": "array", "items": _POS, "minItems": 1},
            "constants": {"type": "array", "items": {"type": "number"},
                          "minItems": 3, "maxItems": 3},
            "seed": _SEED,
        },
        ["hamiltonian", "n_subspaces", "n_curves"],
    ),
    "autonomize-verify": _schema(
        {
            "system": {"$ref": "#/$defs/system"},
            "state": {"$ref": "#/$defs/state"},
            "t_final": _NONNEG,
            "stepper": {"$ref": "#/$defs/stepper"},
            "stride": _POS_INT,
        },
        ["system", "state", "t_final"],
    ),
    "diophantine": _schema(
        {
            "omega": {"type": "array", "items": {"type": "number"},
                      "minItems": 1},
            "tau": _NONNEG,
            "K_grid": {"type": "array", "items": _POS_INT, "minItems": 1},
        },
        ["omega", "tau", "K_grid"],
    ),
}


def schema_for(command: str) -> dict:
    """The published JSON schema for a subcommand's config."""
    try:
        return SCHEMAS[command]
    except KeyError:
        raise ConfigError(
            f"no config schema for command {command!r}; "
            f"expected one of {sorted(SCHEMAS)}"
        ) from None


def _semantic_checks(cfg: dict, command: str) -> None:
    if command == "drift-scan":
        grid = cfg["epsilon_grid"]
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("$.epsilon_grid: must be strictly decreasing")
        dim = _family_dimension(cfg["family"])
        if dim is None:
            raise ConfigError("$.family: integrable part and perturbation "
                              "dimensions differ")
    if command == "theorem2":
        grid = cfg["R_grid"]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("$.R_grid: must be strictly increasing")
    if command in ("simulate", "autonomize-verify", "scaling-check"):
        block = "system" if "system" in cfg else "mechanical"
        dim = _block_dimension(cfg[block])
        state = cfg["state"]
        for field in ("theta", "action"):
            if dim is not None and len(state[field]) != dim:
                raise ConfigError(
                    f"$.state.{field}: length {len(state[field])} does not "
                    f"match the system dimension {dim}"
                )
    if command == "autonomize-verify":
        stepper = cfg.get("stepper")
        if stepper is not None and stepper["method"] != "implicit_midpoint":
            raise ConfigError(
                "$.stepper.method: autonomize-verify compares direct stepping, "
                "which supports implicit_midpoint only"
            )


def _integrable_dimension(d: dict):
    if d["variant"] == "power_law":
        return d["dimension"]
    if d["variant"] == "quadratic_form":
        return len(d["matrix"])
    return d["dimension"]


def _family_dimension(d: dict):
    hd = _integrable_dimension(d["integrable"])
    fd = len(d["perturbation"]["modes"][0]["k"])
    return hd if hd == fd else None


def _block_dimension(d: dict):
    if "integrable" in d:
        return _integrable_dimension(d["integrable"])
    if "potential" in d:
        return len(d["potential"]["modes"][0]["k"])
    return None


def validate_config(cfg, command: str) -> None:
    """Raise ConfigError with a JSON-path message on any violation."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"$: config must be a JSON object, got {type(cfg).__name__}")
    validator = Draft202012Validator(schema_for(command))
    err = best_match(validator.iter_errors(cfg))
    if err is not None:
        raise ConfigError(f"{err.json_path}: {err.message}")
    _semantic_checks(cfg, command)


def load_config(path, command: str) -> dict:
    """Read, parse, and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    validate_config(cfg, command)
    return cfg


def content_hash(data: bytes) -> str:
    """Git-style blob hash of raw bytes (sha1 over a 'blob <len>' header)."""
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


# --- builders: validated config blocks to package objects -------------------


def build_system(d: dict):
    return system_from_dict(d)


def build_family(d: dict) -> ScanFamily:
    probe = dict(d)
    probe["epsilon"] = 1.0
    return ScanFamily.from_system(system_from_dict(probe))


def build_mechanical(d: dict):
    return mechanical_from_dict(d)


def build_integrable(d: dict):
    return _integrable_from_dict(d)


def build_state(d: dict) -> State:
    return State(np.array(d["theta"], dtype=float),
                 np.array(d["action"], dtype=float),
                 float(d.get("time", 0.0)))


def build_stepper(d: dict) -> StepperSpec:
    return StepperSpec(**d)


def build_horizon(d: dict) -> HorizonRule:
    return HorizonRule(**d)
