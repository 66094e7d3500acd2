"""Deterministic CSV/JSON artifact writers and schema validation.

Artifacts must be byte-identical across runs with the same config and seed,
so JSON is dumped with sorted keys and fixed separators, floats go through
repr, and no timestamps are recorded.
"""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

__all__ = [
    "canonical_json",
    "write_json",
    "write_csv",
    "validate_artifact",
    "config_hash",
]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _sanitize(obj):
    """Replace non-finite floats so the artifact stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float):
        if obj != obj:
            return "nan"
        if obj == float("inf"):
            return "inf"
        if obj == float("-inf"):
            return "-inf"
    return obj


def write_json(path: str | Path, obj, schema: str | None = None) -> Path:
    path = Path(path)
    obj = _sanitize(obj)
    if schema is not None:
        validate_artifact(obj, schema)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj))
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(c) if isinstance(c, float) else c for c in row])
    return path


def _load_schema(name: str) -> dict:
    with resources.files("kinspec.schemas").joinpath(f"{name}.schema.json").open() as fh:
        return json.load(fh)


def validate_artifact(obj, schema_name: str) -> None:
    jsonschema.validate(obj, _load_schema(schema_name))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
