"""Run reports: a versioned JSON document per CLI invocation.

The schema lives in :data:`SCHEMA` (also shipped as ``docs/report_schema.json``).
Floats are written with ``repr`` precision, so ``load_report(dump_report(r))``
gives back an equal dict.
"""

from __future__ import annotations

import json
from typing import Any, Dict

import jsonschema

SCHEMA_VERSION = 1

_num = {"type": "number"}
_int = {"type": "integer", "minimum": 0}

_spectral = {
    "type": "object",
    "required": ["lambda_min", "lambda_max", "epsilon", "passed", "rank_reference", "rank_candidate"],
    "properties": {
        "lambda_min": _num,
        "lambda_max": _num,
        "epsilon": _num,
        "passed": {"type": "boolean"},
        "rank_reference": _int,
        "rank_candidate": _int,
        "leakage": _num,
    },
}

_bound = {
    "type": "object",
    "required": ["value", "log10"],
    "properties": {"value": _num, "log10": _num},
}

_bounds = {
    "type": "object",
    "description": (
        "Right-hand sides of the matrix Chernoff and matrix Freedman tail bounds at the run's "
        "parameters. The Freedman exponent is -(t^2/2)/(sigma^2 + R t/3), i.e. the decaying form."
    ),
    "required": ["chernoff", "freedman"],
    "properties": {"chernoff": _bound, "freedman": _bound},
}

_quantiles = {
    "type": "object",
    "required": ["q50", "q95", "max"],
    "properties": {"q50": _num, "q95": _num, "max": _num},
}

_common = {
    "schema_version": {"const": SCHEMA_VERSION},
    "seed": _int,
    "config": {"type": "object"},
    "wall_clock_seconds": _num,
    "bounds": _bounds,
}

SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "resparsify run report",
    "oneOf": [
        {
            "type": "object",
            "required": ["schema_version", "kind", "seed", "config", "wall_clock_seconds", "bounds",
                         "rows_seen", "rounds", "output_rows", "peak_buffer", "spectral",
                         "stale_ratios", "round_log", "failure"],
            "properties": {
                **_common,
                "kind": {"const": "sparsify"},
                "rows_seen": _int,
                "rounds": _int,
                "output_rows": _int,
                "peak_buffer": _int,
                "spectral": {"oneOf": [_spectral, {"type": "null"}]},
                "stale_ratios": {"type": "array", "items": _num},
                "round_log": {"type": "array", "items": {"type": "object"}},
                "failure": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["schema_version", "kind", "seed", "config", "wall_clock_seconds", "bounds",
                         "trials", "strategy", "augmented", "win_rate", "moves",
                         "variation_norm_times_c", "quadratic_variation_norm_times_c", "per_trial"],
            "properties": {
                **_common,
                "kind": {"const": "game"},
                "trials": _int,
                "strategy": {"type": "string"},
                "augmented": {"type": "boolean"},
                "win_rate": {"type": "number", "minimum": 0, "maximum": 1},
                "moves": {
                    "type": "object",
                    "required": ["mean", "min", "max"],
                    "properties": {"mean": _num, "min": _int, "max": _int},
                },
                "variation_norm_times_c": _quantiles,
                "quadratic_variation_norm_times_c": _quantiles,
                "per_trial": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["status", "moves", "variation_norm",
                                     "quadratic_variation_norm", "martingale_norm"],
                    },
                },
            },
            "additionalProperties": False,
        },
    ],
}


def validate(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match :data:`SCHEMA`."""
    jsonschema.validate(report, SCHEMA)


def dumps(report: dict) -> str:
    validate(report)
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def loads(text: str) -> dict:
    report = json.loads(text)
    validate(report)
    return report


def dump_report(report: dict, path: str) -> None:
    text = dumps(report)
    with open(path, "w") as f:
        f.write(text)


def load_report(path: str) -> dict:
    with open(path) as f:
        return loads(f.read())
