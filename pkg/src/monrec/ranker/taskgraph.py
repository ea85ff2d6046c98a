"""Array view of the entity graph restricted to one task's node and edge kinds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..embed import EmbeddingProvider
from ..graph import EDGE_SCHEMA, EntityGraph, NodeKind
from .schema import TaskSchema


@dataclass(frozen=True)
class Relation:
    """Messages flowing from ``src_kind`` nodes to ``dst_kind`` nodes along one edge kind."""

    name: str
    src_kind: NodeKind
    dst_kind: NodeKind
    src: np.ndarray   # row offsets within the source kind block
    dst: np.ndarray   # global local-index of the receiving node


def node_features(graph: EntityGraph, provider: EmbeddingProvider | None = None) -> dict[int, np.ndarray]:
    """Ontology embedding per node; nodes without text fall back to their key."""
    provider = provider or EmbeddingProvider()
    nodes = list(graph)
    vecs = provider.embed_many([n.ontology or n.key for n in nodes])
    return {n.id: v for n, v in zip(nodes, vecs)}


class TaskGraph:
    """Nodes ordered by kind (contiguous blocks) plus per-relation edge arrays.

    Edges whose ids are in ``hidden`` are left out of message passing.
    """

    def __init__(self, graph: EntityGraph, schema: TaskSchema, features: Mapping[int, np.ndarray],
                 hidden: Iterable[int] = ()):
        hidden = set(hidden)
        self.schema = schema
        self.kinds = list(schema.node_kinds)
        self.ids: list[int] = []
        self.blocks: dict[NodeKind, slice] = {}
        for k in self.kinds:
            start = len(self.ids)
            self.ids.extend(n.id for n in graph.nodes_of(k))
            self.blocks[k] = slice(start, len(self.ids))
        self.local = {gid: i for i, gid in enumerate(self.ids)}
        self.kind_of = np.empty(len(self.ids), dtype=object)
        for k, sl in self.blocks.items():
            self.kind_of[sl] = k
        self.x0 = np.stack([features[g] for g in self.ids]) if self.ids else np.zeros((0, 1))
        self.relations: list[Relation] = []
        self.adj: list[dict[NodeKind, list[int]]] = [dict() for _ in self.ids]
        for ek in schema.edge_kinds:
            fwd_src, fwd_dst = [], []
            for e in graph.edges_of(ek):
                if e.id in hidden or e.src not in self.local or e.dst not in self.local:
                    continue
                fwd_src.append(self.local[e.src])
                fwd_dst.append(self.local[e.dst])
            s = np.array(fwd_src, dtype=np.int64)
            d = np.array(fwd_dst, dtype=np.int64)
            sk, dk = EDGE_SCHEMA[ek]
            # forward: src -> dst; reverse: dst -> src
            self.relations.append(Relation(ek.value, sk, dk, s - self.blocks[sk].start, d))
            self.relations.append(Relation("rev:" + ek.value, dk, sk, d - self.blocks[dk].start, s))
            for a, b in zip(fwd_src, fwd_dst):
                self.adj[a].setdefault(dk, []).append(b)
                self.adj[b].setdefault(sk, []).append(a)
        for nbrs in self.adj:
            for k in nbrs:
                nbrs[k] = sorted(nbrs[k])

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def width(self) -> int:
        return self.x0.shape[1]

    def index(self, gid: int) -> int:
        return self.local[gid]
