"""Config documents: JSON schema validation and object construction.

Every run is driven by one JSON document, schema-versioned "afd-config/1".
Unknown keys are rejected everywhere so typos fail loudly.  A run's
sidecar (schema "afd-run/1") embeds its resolved config and is accepted
wherever a config is, which makes any past run re-runnable from its
sidecar alone.
"""

from __future__ import annotations

import json

import jsonschema
import numpy as np

from .estimation import TruthSpec, fixed_design
from .exceptions import ConfigError
from .model import BinarySequenceModel, TwoBlockBinomialModel
from .prior import heterogeneity_law

CONFIG_SCHEMA_ID = "afd-config/1"
RUN_SCHEMA_ID = "afd-run/1"

_DIST = {
    "type": "object",
    "properties": {
        "dist": {"enum": ["normal", "uniform", "point"]},
        "mean": {"type": "number"},
        "sd": {"type": "number", "exclusiveMinimum": 0},
        "a": {"type": "number"},
        "b": {"type": "number"},
        "z": {"type": "number"},
        "M": {"type": "integer", "minimum": 1},
    },
    "required": ["dist"],
    "additionalProperties": False,
}

_DESIGN = {
    "type": "object",
    "properties": {
        "type": {"enum": ["two_block", "gaussian_covariates", "file"]},
        "n": {"type": "integer", "minimum": 1},
        "mean": {"type": "number"},
        "var": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "path": {"type": "string"},
    },
    "required": ["type"],
    "additionalProperties": False,
}

_Q = {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "inf"}]}
_Q_LIST = {"type": "array", "items": _Q, "minItems": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": CONFIG_SCHEMA_ID},
        "model": {
            "type": "object",
            "properties": {
                "family": {"enum": ["two_block", "binary_sequence"]},
                "T0": {"type": "integer", "minimum": 0},
                "T1": {"type": "integer", "minimum": 0},
                "T": {"type": "integer", "minimum": 1},
                "error": {"enum": ["probit", "logit", "logit_std", "laplace"]},
                "theta_dim": {"type": "integer", "minimum": 1},
            },
            "required": ["family", "error"],
            "additionalProperties": False,
        },
        "prior": _DIST,
        "truth": {
            "type": "object",
            "properties": {
                "theta0": {"type": "number"},
                "pi0": _DIST,
                "design": _DESIGN,
                "quad_M": {"type": "integer", "minimum": 1},
            },
            "required": ["theta0", "pi0"],
            "additionalProperties": False,
        },
        "score": {
            "type": "object",
            "properties": {
                "score": {"enum": ["integrated", "profile"]},
                "q": {"oneOf": [_Q, _Q_LIST]},
                "threshold": {"type": "number", "exclusiveMinimum": 0},
                "limit_mode": {"enum": ["smallest", "threshold"]},
                "stem": {"enum": ["power", "softexp"]},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "alternative_q_tilde": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "estimation": {
            "type": "object",
            "properties": {
                "bracket": {"type": "array", "items": {"type": "number"},
                            "minItems": 2, "maxItems": 2},
                "n": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "reps": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "workers": {"type": "integer", "minimum": 0},
                "q_list": _Q_LIST,
            },
            "required": ["n", "reps", "seed"],
            "additionalProperties": False,
        },
        "eigen": {
            "type": "object",
            "properties": {
                "T_list": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "designs": {"type": "array",
                            "items": {"type": "array", "items": {"type": "integer"},
                                      "minItems": 2, "maxItems": 2}},
                "theta": {"type": "number"},
                "fp_floor": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["theta"],
            "additionalProperties": False,
        },
        "rates": {
            "type": "object",
            "properties": {
                "T_list": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "q_list": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "pi0_list": {"type": "array", "items": _DIST, "minItems": 1},
                "theta0": {"type": "number"},
                "error": {"enum": ["probit", "logit", "logit_std", "laplace"]},
                "M": {"type": "integer", "minimum": 1},
            },
            "required": ["T_list", "q_list", "pi0_list"],
            "additionalProperties": False,
        },
        "effects": {
            "type": "object",
            "properties": {
                "q_list": _Q_LIST,
                "mu": {"enum": ["partial_effect"]},
                "threshold": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["q_list"],
            "additionalProperties": False,
        },
        "data": {
            "type": "object",
            "properties": {
                "file": {"type": "string"},
                "simulate": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"},
                    },
                    "required": ["n", "seed"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
            "required": ["path"],
            "additionalProperties": False,
        },
    },
    "required": ["schema"],
    "additionalProperties": False,
}


def load_config(path) -> dict:
    """Read, unwrap (sidecars allowed), and schema-validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from None
    if isinstance(doc, dict) and doc.get("schema") == RUN_SCHEMA_ID:
        doc = doc.get("config")
    return validate_config(doc)


def validate_config(doc) -> dict:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {err.message}") from None
    return doc


def require(doc: dict, *blocks) -> None:
    missing = [b for b in blocks if b not in doc]
    if missing:
        raise ConfigError(f"config is missing required block(s): {', '.join(missing)}")


def build_model(spec: dict):
    if spec["family"] == "two_block":
        if "T0" not in spec or "T1" not in spec:
            raise ConfigError("two_block model needs T0 and T1")
        return TwoBlockBinomialModel(spec["T0"], spec["T1"], error=spec["error"])
    if "T" not in spec:
        raise ConfigError("binary_sequence model needs T")
    return BinarySequenceModel(spec["T"], error=spec["error"],
                               d_theta=spec.get("theta_dim", 1))


def build_design(spec: dict | None, model):
    """Design points from the truth block; defaults to the shared design."""
    if spec is None or spec["type"] == "two_block":
        return ((None, 1.0),)
    if spec["type"] == "gaussian_covariates":
        for key in ("n", "seed"):
            if key not in spec:
                raise ConfigError(f"gaussian_covariates design needs {key!r}")
        rng = np.random.default_rng(spec["seed"])
        sd = np.sqrt(spec.get("var", 0.25))
        xs = rng.normal(spec.get("mean", 0.5), sd, size=(spec["n"], model.T))
        return fixed_design(list(xs))
    if "path" not in spec:
        raise ConfigError("file design needs a path")
    xs = np.load(spec["path"])
    return fixed_design(list(np.asarray(xs, dtype=float)))


def build_truth(doc: dict, model) -> TruthSpec:
    spec = doc["truth"]
    return TruthSpec(theta0=float(spec["theta0"]),
                     pi0=heterogeneity_law(spec["pi0"]),
                     design=build_design(spec.get("design"), model),
                     quad_points=spec.get("quad_M", 1000))


def prior_grid(doc: dict):
    spec = doc["prior"]
    return heterogeneity_law(spec).quadrature(spec.get("M", 1000))


def score_q_list(doc: dict):
    spec = doc.get("score", {})
    q = spec.get("q", 1)
    return list(q) if isinstance(q, list) else [q]


def builder_kwargs(doc: dict) -> dict:
    spec = doc.get("score", {})
    kwargs = {"score": spec.get("score", "integrated")}
    if "threshold" in spec:
        kwargs["threshold"] = spec["threshold"]
    if "limit_mode" in spec:
        kwargs["limit_mode"] = spec["limit_mode"]
    if spec.get("stem") == "softexp":
        kwargs["stem"] = "softexp"
        kwargs["soft_c"] = spec.get("c", 1e-6)
    if spec.get("alternative_q_tilde"):
        kwargs["use_q_tilde"] = True
    return kwargs
