"""Random-walk context vectors along node-kind schemas."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..graph import NodeKind
from .taskgraph import TaskGraph


def _walk(tg: TaskGraph, start: int, schema: Sequence[NodeKind] | None, length: int,
          rng: np.random.Generator) -> list[int]:
    visited, cur = [], start
    for step in range(length):
        nbrs = tg.adj[cur]
        if schema is None:
            options = sorted({n for v in nbrs.values() for n in v})
        else:
            options = nbrs.get(schema[step % len(schema)], [])
        if not options:
            break  # dead end truncates the walk
        cur = options[int(rng.integers(len(options)))]
        visited.append(cur)
    return visited


def metapath_context(node: int, tg: TaskGraph, schemas: Sequence[Sequence[NodeKind]] | None = None,
                     length: int = 4, walks: int = 8, seed: int = 0,
                     features: np.ndarray | None = None) -> np.ndarray:
    """Mean initial feature of the nodes visited by ``walks`` schema walks from ``node``.

    ``node`` is a local index. Walk ``w`` follows ``schemas[w % len(schemas)]``;
    ``None`` walks to any neighbour. Isolated nodes get a zero vector. The
    random stream depends only on ``seed`` and the node's graph id, so the
    result does not depend on the order nodes are processed in.
    """
    feats = tg.x0 if features is None else features
    rng = np.random.default_rng([seed, tg.ids[node]])
    acc = np.zeros(feats.shape[1])
    count = 0
    for w in range(walks):
        schema = None if not schemas else schemas[w % len(schemas)]
        for v in _walk(tg, node, schema, length, rng):
            acc += feats[v]
            count += 1
    return acc / count if count else acc


def metapath_contexts(tg: TaskGraph, length: int = 4, walks: int = 8, seed: int = 0,
                      schemas: dict | None = None) -> np.ndarray:
    """Context matrix for every node using the task's per-kind schemas."""
    schemas = tg.schema.metapaths if schemas is None else schemas
    out = np.zeros_like(tg.x0)
    for i in range(len(tg)):
        out[i] = metapath_context(i, tg, schemas.get(tg.kind_of[i]), length, walks, seed)
    return out
