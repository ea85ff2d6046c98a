"""Versioned JSON weight checkpoints: parameter name -> shape + values."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tensor

CHECKPOINT_SCHEMA = "monrec.checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def dump_params(params: Mapping[str, Tensor], meta: dict | None = None) -> str:
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "params": {name: {"shape": list(params[name].shape),
                          "values": params[name].data.reshape(-1).tolist()}
                   for name in sorted(params)},
    }
    return json.dumps(doc, sort_keys=True)


def load_params(text: str) -> tuple[dict[str, Tensor], dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if doc.get("schema") != CHECKPOINT_SCHEMA or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint header {doc.get('schema')!r} v{doc.get('version')!r}")
    params = {}
    for name, rec in doc["params"].items():
        values = np.asarray(rec["values"], dtype=np.float64)
        shape = tuple(rec["shape"])
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"parameter {name!r}: {values.size} values for shape {shape}")
        params[name] = Tensor(values.reshape(shape), requires_grad=True, name=name)
    return params, doc.get("meta", {})


def save(path: str | Path, params: Mapping[str, Tensor], meta: dict | None = None) -> None:
    Path(path).write_text(dump_params(params, meta))


def load(path: str | Path) -> tuple[dict[str, Tensor], dict]:
    return load_params(Path(path).read_text())
