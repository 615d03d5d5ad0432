"""Canonical report serialization.

Primary outputs must be byte-identical across runs and thread counts, so
JSON is emitted with sorted keys and floats canonicalized to 12 significant
digits before encoding.
"""

from __future__ import annotations

import json


def round_floats(obj):
    """Recursively canonicalize floats to 12 significant digits."""
    if isinstance(obj, float):
        return float(format(obj, ".12g"))
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(round_floats(obj), sort_keys=True, indent=2) + "\n"


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))
