"""Experiment configuration: JSON schema, defaults and model construction.

Random couplings are drawn with numpy's PCG64 generator seeded with
``[seed, stream]`` (stream 0 for couplings, 1 for environment energies);
PCG64 output is identical across platforms for a given seed.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .evolution import PATHS, TimeGrid
from .exceptions import ConfigError
from .linalg import PureState
from .models import MeasurementModel, SpinBathHamiltonian, bloch_env_state, build_spin_bath

__all__ = [
    "EXPERIMENTS",
    "SWEEPABLE",
    "CONFIG_SCHEMA",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "draw_values",
]

EXPERIMENTS = ("measurement_run", "regime_sweep", "sieve", "pointer_check")
# CLI name -> dotted path inside the config document
SWEEPABLE = {
    "lambda": ("model", "interaction_scale"),
    "delta": ("model", "pointer_energy"),
    "n_env": ("model", "n_env"),
}
STREAM_COUPLINGS = 0
STREAM_ENERGIES = 1

_number = {"type": "number"}
_random_spec = {
    "type": "object",
    "required": ["distribution", "range"],
    "additionalProperties": False,
    "properties": {
        "distribution": {"enum": ["uniform"]},
        "range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "seed": {"type": "integer", "minimum": 0},
    },
}
_value_list = {"type": "array", "items": _number}
_positive = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["experiment", "model"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "model": {
            "type": "object",
            "required": ["n_env"],
            "additionalProperties": False,
            "properties": {
                "n_env": {"type": "integer", "minimum": 0, "maximum": 14},
                "couplings": {"oneOf": [_value_list, _random_spec]},
                "env_energies": {"oneOf": [_value_list, _random_spec, {"type": "null"}]},
                "pointer_energy": _number,
                "pointer_axis": {"enum": ["x", "z"]},
                "interaction_scale": _number,
                "coefficients": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "oneOf": [
                            _number,
                            {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                        ]
                    },
                },
                "system_dim": {"type": "integer", "minimum": 1},
                "env_bloch_angles": {
                    "type": ["array", "null"],
                    "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_start": _number,
                "t_end": _number,
                "n_steps": {"type": "integer", "minimum": 1},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "decoherence_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "convergence_window": {"type": ["integer", "null"], "minimum": 1},
                "convergence_tol": _positive,
                "context_tol": _positive,
                "regime_thresholds": {"type": "array", "items": _positive, "minItems": 2, "maxItems": 2},
            },
        },
        "sieve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "n_candidates": {"type": "integer", "minimum": 1},
                "t_probe": {"oneOf": [_positive, {"type": "null"}]},
                "n_periods": _positive,
            },
        },
        "pointer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"observable": {"enum": ["x", "y", "z"]}},
        },
        "path": {"enum": list(PATHS)},
        "output_dir": {"type": "string"},
    },
}

DEFAULTS: dict[str, Any] = {
    "model": {
        "couplings": {"distribution": "uniform", "range": [0.5, 1.5], "seed": 0},
        "env_energies": None,
        "pointer_energy": 0.0,
        "pointer_axis": "z",
        "interaction_scale": 1.0,
        "coefficients": [1 / math.sqrt(2), 1 / math.sqrt(2)],
        "system_dim": 2,
        "env_bloch_angles": None,
    },
    "grid": {"t_start": 0.0, "t_end": 2.0, "n_steps": 2000},
    "analysis": {
        "decoherence_threshold": 0.01,
        "convergence_window": None,
        "convergence_tol": 0.02,
        "context_tol": 1e-9,
        "regime_thresholds": [0.1, 10.0],
    },
    "sieve": {"enabled": True, "n_candidates": 200, "t_probe": None, "n_periods": 10.0},
    "pointer": {"observable": "z"},
    "path": "auto",
    "output_dir": "out",
}


def draw_values(spec, n: int, stream: int) -> np.ndarray:
    """Resolve an explicit list or a seeded ``{"distribution": "uniform", ...}`` spec."""
    if spec is None:
        return np.zeros(n)
    if isinstance(spec, dict):
        lo, hi = spec["range"]
        rng = np.random.Generator(np.random.PCG64([int(spec.get("seed", 0)), stream]))
        return rng.uniform(lo, hi, n)
    values = np.asarray(spec, dtype=float)
    if values.size != n:
        raise ConfigError(f"expected {n} values, got {values.size}")
    return values


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("couplings", "env_energies"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated configuration with defaults filled in (``doc``)."""

    doc: dict

    @property
    def experiment(self) -> str:
        return self.doc["experiment"]

    @property
    def model_doc(self) -> dict:
        return self.doc["model"]

    @property
    def analysis(self) -> dict:
        return self.doc["analysis"]

    @property
    def sieve(self) -> dict:
        return self.doc["sieve"]

    @property
    def path(self) -> str:
        return self.doc["path"]

    @property
    def output_dir(self) -> str:
        return self.doc["output_dir"]

    @property
    def grid(self) -> TimeGrid:
        g = self.doc["grid"]
        return TimeGrid(float(g["t_start"]), float(g["t_end"]), int(g["n_steps"]))

    def couplings(self) -> np.ndarray:
        return draw_values(self.model_doc["couplings"], self.model_doc["n_env"], STREAM_COUPLINGS)

    def env_energies(self) -> np.ndarray:
        return draw_values(self.model_doc["env_energies"], self.model_doc["n_env"], STREAM_ENERGIES)

    def hamiltonian(self) -> SpinBathHamiltonian:
        m = self.model_doc
        return build_spin_bath(m["n_env"], self.couplings(), self.env_energies(),
                               m["pointer_energy"], m["pointer_axis"], m["interaction_scale"])

    def coefficients(self) -> np.ndarray:
        raw = self.model_doc["coefficients"]
        c = np.array([complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in raw])
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ConfigError("coefficients must not all vanish")
        return c / norm

    def env_state(self) -> PureState | None:
        angles = self.model_doc["env_bloch_angles"]
        if angles is None:
            return None
        if len(angles) != self.model_doc["n_env"]:
            raise ConfigError(f"need {self.model_doc['n_env']} Bloch angle pairs, got {len(angles)}")
        return bloch_env_state(angles)

    def measurement_model(self) -> MeasurementModel:
        n_env = self.model_doc["n_env"]
        return MeasurementModel(self.coefficients(), self.model_doc["system_dim"], 2,
                                (2,) * n_env, self.env_state())

    def with_value(self, param: str, value) -> "ExperimentConfig":
        """Copy with one sweepable scalar replaced."""
        if param not in SWEEPABLE:
            raise ConfigError(f"{param!r} is not sweepable; choose from {sorted(SWEEPABLE)}")
        section, key = SWEEPABLE[param]
        doc = copy.deepcopy(self.doc)
        if key == "n_env":
            if float(value) != int(value) or int(value) < 0:
                raise ConfigError(f"n_env must be a non-negative integer, got {value}")
            value = int(value)
            for name in ("couplings", "env_energies"):
                if isinstance(doc["model"][name], list):
                    raise ConfigError(f"cannot sweep n_env with an explicit {name} list")
        doc[section][key] = value
        return parse_config(doc)

    def with_overrides(self, seed: int | None = None, tol: float | None = None) -> "ExperimentConfig":
        doc = copy.deepcopy(self.doc)
        if seed is not None:
            for name in ("couplings", "env_energies"):
                if isinstance(doc["model"][name], dict):
                    doc["model"][name]["seed"] = int(seed)
        if tol is not None:
            doc["analysis"]["context_tol"] = float(tol)
        return parse_config(doc)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate ``doc`` against :data:`CONFIG_SCHEMA` and fill defaults."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from None
    full = _merge(DEFAULTS, doc)
    cfg = ExperimentConfig(full)
    m = full["model"]
    for name in ("couplings", "env_energies"):
        if isinstance(m[name], list) and len(m[name]) != m["n_env"]:
            raise ConfigError(f"model.{name} has {len(m[name])} entries, n_env is {m['n_env']}")
    if len(m["coefficients"]) > min(m["system_dim"], 2):
        raise ConfigError("more coefficients than min(system_dim, 2)")
    low, high = full["analysis"]["regime_thresholds"]
    if not low < high:
        raise ConfigError("regime_thresholds must be increasing")
    try:
        cfg.grid
        cfg.coefficients()
        cfg.env_state()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(doc)
