"""Request parsing and deterministic report serialization.

Reports are JSON objects with a top-level ``"schema": 1`` field. Keys keep
the order in which they were inserted and floats are written with 17
significant digits, so identical runs give byte-identical files. Non-finite
floats become ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .classifier import Configuration
from .errors import MultipolarError, ValidationError
from .special import ProblemParams

__all__ = [
    "SCHEMA_VERSION",
    "RequestError",
    "load_document",
    "parse_configuration",
    "configuration_to_dict",
    "dumps",
    "rows_to_csv",
]

SCHEMA_VERSION = 1


class RequestError(MultipolarError):
    """The request file is missing or is not valid JSON."""


def load_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RequestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RequestError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise RequestError(f"{path}: top level must be a JSON object")
    return doc


def _require(doc: dict, key: str, kind, what: str):
    if key not in doc:
        raise ValidationError(f"missing required field {key!r} ({what})")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ValidationError(f"field {key!r} must be {what}, got {type(value).__name__}")
    return value


def check_schema(doc: dict) -> None:
    version = doc.get("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")


def parse_params(doc: dict) -> ProblemParams:
    N = _require(doc, "N", int, "a positive integer")
    s = _require(doc, "s", (int, float), "a number in (0, 1)")
    return ProblemParams(N, float(s))


def parse_configuration(doc: dict) -> Configuration:
    """Configuration from {"schema": 1, "N", "s", "masses", "poles"}."""
    check_schema(doc)
    params = parse_params(doc)
    masses = _require(doc, "masses", list, "a list of numbers")
    poles = _require(doc, "poles", list, "a list of coordinate lists")
    for m in masses:
        if not isinstance(m, (int, float)) or isinstance(m, bool):
            raise ValidationError(f"masses must be numbers, got {m!r}")
    parsed_poles = []
    for p in poles:
        if isinstance(p, (int, float)) and not isinstance(p, bool) and params.N == 1:
            p = [p]
        if not isinstance(p, list) or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p):
            raise ValidationError(f"each pole must be a list of {params.N} numbers, got {p!r}")
        parsed_poles.append(tuple(float(c) for c in p))
    return Configuration(params, tuple(float(m) for m in masses), tuple(parsed_poles))


def configuration_to_dict(config: Configuration) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "N": config.params.N,
        "s": config.params.s,
        "masses": list(config.masses),
        "poles": [list(p) for p in config.poles],
    }


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0.0"
    text = format(x, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, Enum):
        return _encode(obj.value, indent, level)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.number, type(None))) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text, newline terminated."""
    return _encode(obj, indent, 0) + "\n"


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str] | None = None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row.get(c)
            if isinstance(v, (float, np.floating)):
                v = "" if not math.isfinite(float(v)) else format(float(v), ".17g")
            elif isinstance(v, Enum):
                v = v.value
            out.append("" if v is None else v)
        writer.writerow(out)
    return buf.getvalue()
