"""Canonical JSON artifacts: sets, invariants, traces, reports.

All persisted numbers go through Python's shortest round-trip float repr, so
serialized values reconstruct the exact binary doubles (15-17 significant
digits). Dictionaries are written with sorted keys and fixed separators so
identical inputs produce identical bytes; wall-clock measurements live only
inside a "timing" object.
"""

from __future__ import annotations

import hashlib
import json
import math


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if hasattr(obj, "tolist"):
        return jsonable(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return obj


def canonical_dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def canonical_dump(obj, path):
    with open(path, "w") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def fingerprint(config) -> str:
    """Content hash of a canonicalized configuration object."""
    return hashlib.sha256(canonical_dumps(config).encode()).hexdigest()


def dump_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(canonical_dumps(rec))
            fh.write("\n")


def load_jsonl(path):
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
