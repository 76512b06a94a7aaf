"""Deterministic JSON writing.

All output files go through this module so that reruns with identical
inputs produce byte-identical files. Floats are written with 17 significant
digits (lossless float64 round-trip); dict keys keep insertion order.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def _write(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("cannot serialize non-finite float")
        parts.append(format(x, ".17g"))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        for idx, (key, value) in enumerate(obj.items()):
            if idx:
                parts.append(",")
            parts.append(json.dumps(str(key)))
            parts.append(":")
            _write(value, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for idx, value in enumerate(obj):
            if idx:
                parts.append(",")
            _write(value, parts)
        parts.append("]")
    elif isinstance(obj, np.ndarray):
        _write(obj.tolist(), parts)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def dump(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load(path):
    return json.loads(Path(path).read_text())
