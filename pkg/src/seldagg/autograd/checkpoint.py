"""Parameter checkpoints.

Format (JSON, version 1)::

    {
      "format": "seldagg-checkpoint",
      "version": 1,
      "parameters": {"<name>": {"shape": [..], "values": [.. row-major ..]}, ...},
      "buffers":    {"<name>": {"shape": [..], "values": [..]}, ...},
      "meta": {...}
    }

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import DimensionError, Parameter

FORMAT = "seldagg-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode(arrays: Mapping[str, np.ndarray]) -> dict:
    return {name: {"shape": list(a.shape), "values": np.asarray(a, dtype=np.float64).reshape(-1).tolist()} for name, a in arrays.items()}


def _decode(entries: Mapping[str, dict]) -> dict[str, np.ndarray]:
    out = {}
    for name, entry in entries.items():
        shape = tuple(int(s) for s in entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"{name}: {values.size} values for shape {shape}")
        out[name] = values.reshape(shape)
    return out


def save_checkpoint(
    path: str | Path,
    params: Mapping[str, Parameter | np.ndarray],
    buffers: Mapping[str, np.ndarray] | None = None,
    meta: dict | None = None,
) -> None:
    arrays = {k: (v.data if isinstance(v, Parameter) else v) for k, v in params.items()}
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "parameters": _encode(arrays),
        "buffers": _encode(buffers or {}),
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a JSON checkpoint") from exc
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    return _decode(doc["parameters"]), _decode(doc.get("buffers", {})), doc.get("meta", {})


def assign_parameters(params: Mapping[str, Parameter], values: Mapping[str, np.ndarray]) -> None:
    """Copy ``values`` into ``params``; names and shapes must agree exactly."""
    missing = set(params) - set(values)
    extra = set(values) - set(params)
    if missing or extra:
        raise DimensionError(f"checkpoint/model mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
    for name, p in params.items():
        v = values[name]
        if v.shape != p.shape:
            raise DimensionError(f"{name}: checkpoint shape {v.shape} != model shape {p.shape}")
        p.data[...] = v
