"""Heterogeneous monitor entity graph.

Nodes are services, monitors, metrics, dimensions and expressions. Edges are
typed and every edge kind fixes the kinds of its two endpoints. Reverse
traversal is served from an indexed reverse adjacency, so an edge is stored
once but can be walked in both directions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

SNAPSHOT_SCHEMA = "monrec.graph"
SNAPSHOT_VERSION = 1


class NodeKind(str, Enum):
    SERVICE = "Service"
    MONITOR = "Monitor"
    METRIC = "Metric"
    DIMENSION = "Dimension"
    EXPRESSION = "Expression"


class EdgeKind(str, Enum):
    SERVICE_HAS_MONITOR = "ServiceHasMonitor"
    MONITOR_HAS_METRIC = "MonitorHasMetric"
    METRIC_HAS_DIMENSION = "MetricHasDimension"
    MONITOR_ASSOCIATED_DIMENSION = "MonitorAssociatedDimension"
    MONITOR_USES_EXPRESSION = "MonitorUsesExpression"
    METRIC_USES_EXPRESSION = "MetricUsesExpression"
    DIMENSION_USES_EXPRESSION = "DimensionUsesExpression"


EDGE_SCHEMA: dict[EdgeKind, tuple[NodeKind, NodeKind]] = {
    EdgeKind.SERVICE_HAS_MONITOR: (NodeKind.SERVICE, NodeKind.MONITOR),
    EdgeKind.MONITOR_HAS_METRIC: (NodeKind.MONITOR, NodeKind.METRIC),
    EdgeKind.METRIC_HAS_DIMENSION: (NodeKind.METRIC, NodeKind.DIMENSION),
    EdgeKind.MONITOR_ASSOCIATED_DIMENSION: (NodeKind.MONITOR, NodeKind.DIMENSION),
    EdgeKind.MONITOR_USES_EXPRESSION: (NodeKind.MONITOR, NodeKind.EXPRESSION),
    EdgeKind.METRIC_USES_EXPRESSION: (NodeKind.METRIC, NodeKind.EXPRESSION),
    EdgeKind.DIMENSION_USES_EXPRESSION: (NodeKind.DIMENSION, NodeKind.EXPRESSION),
}


class GraphError(Exception):
    pass


class DuplicateError(GraphError):
    pass


class SchemaError(GraphError):
    pass


class SnapshotParseError(GraphError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class NodeRef:
    id: int
    kind: NodeKind
    key: str
    ontology: str = ""


@dataclass(frozen=True)
class EdgeRef:
    id: int
    src: int
    dst: int
    kind: EdgeKind
    attrs: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass
class EdgeSplit:
    train: list[int]
    val: list[int]
    test: list[int]
    train_mp: list[int]
    train_sup: list[int]


class EntityGraph:
    """Typed multigraph with forward and reverse adjacency indexes."""

    def __init__(self) -> None:
        self.nodes: list[NodeRef] = []
        self.edges: list[EdgeRef] = []
        self._by_key: dict[tuple[NodeKind, str], int] = {}
        self._edge_keys: dict[tuple[int, int, EdgeKind], int] = {}
        self._out: dict[tuple[int, EdgeKind], list[int]] = {}
        self._in: dict[tuple[int, EdgeKind], list[int]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, kind: NodeKind | str, key: str, ontology: str = "") -> NodeRef:
        kind = NodeKind(kind)
        if ontology is None:
            raise ValueError("ontology text may be empty but not None")
        if (kind, key) in self._by_key:
            raise DuplicateError(f"duplicate node key {kind.value}:{key!r}")
        node = NodeRef(len(self.nodes), kind, key, ontology)
        self.nodes.append(node)
        self._by_key[(kind, key)] = node.id
        return node

    def add_edge(self, src: NodeRef | int, dst: NodeRef | int, kind: EdgeKind | str,
                 attrs: dict | None = None) -> EdgeRef:
        kind = EdgeKind(kind)
        s = self.node(src)
        d = self.node(dst)
        want_src, want_dst = EDGE_SCHEMA[kind]
        if s.kind != want_src or d.kind != want_dst:
            raise SchemaError(
                f"{kind.value} expects ({want_src.value} -> {want_dst.value}), "
                f"got ({s.kind.value} -> {d.kind.value})")
        triple = (s.id, d.id, kind)
        if triple in self._edge_keys:
            raise DuplicateError(f"duplicate edge {kind.value} {s.key!r} -> {d.key!r}")
        edge = EdgeRef(len(self.edges), s.id, d.id, kind, dict(attrs or {}))
        self.edges.append(edge)
        self._edge_keys[triple] = edge.id
        self._out.setdefault((s.id, kind), []).append(d.id)
        self._in.setdefault((d.id, kind), []).append(s.id)
        return edge

    def node(self, ref: NodeRef | int) -> NodeRef:
        idx = ref.id if isinstance(ref, NodeRef) else int(ref)
        if not 0 <= idx < len(self.nodes):
            raise GraphError(f"unknown node id {idx}")
        return self.nodes[idx]

    def get(self, kind: NodeKind | str, key: str) -> NodeRef:
        try:
            return self.nodes[self._by_key[(NodeKind(kind), key)]]
        except KeyError:
            raise GraphError(f"no {NodeKind(kind).value} node with key {key!r}") from None

    def has(self, kind: NodeKind | str, key: str) -> bool:
        return (NodeKind(kind), key) in self._by_key

    def has_edge(self, src: NodeRef | int, dst: NodeRef | int, kind: EdgeKind | str) -> bool:
        return (self.node(src).id, self.node(dst).id, EdgeKind(kind)) in self._edge_keys

    def edge_id(self, src: NodeRef | int, dst: NodeRef | int, kind: EdgeKind | str) -> int:
        return self._edge_keys[(self.node(src).id, self.node(dst).id, EdgeKind(kind))]

    def nodes_of(self, kind: NodeKind | str) -> list[NodeRef]:
        kind = NodeKind(kind)
        return [n for n in self.nodes if n.kind == kind]

    def edges_of(self, kind: EdgeKind | str) -> list[EdgeRef]:
        kind = EdgeKind(kind)
        return [e for e in self.edges if e.kind == kind]

    def neighbors(self, node: NodeRef | int, kind: EdgeKind | str) -> list[NodeRef]:
        """Forward neighbors along ``kind``, ordered by node id."""
        ids = self._out.get((self.node(node).id, EdgeKind(kind)), [])
        return [self.nodes[i] for i in sorted(ids)]

    def reverse_neighbors(self, node: NodeRef | int, kind: EdgeKind | str) -> list[NodeRef]:
        ids = self._in.get((self.node(node).id, EdgeKind(kind)), [])
        return [self.nodes[i] for i in sorted(ids)]

    def candidate_dimensions(self, metric: NodeRef | int) -> list[NodeRef]:
        m = self.node(metric)
        if m.kind != NodeKind.METRIC:
            raise SchemaError(f"candidate_dimensions needs a Metric node, got {m.kind.value}")
        return self.neighbors(m, EdgeKind.METRIC_HAS_DIMENSION)

    def validate(self) -> None:
        """Re-check every edge against the schema table."""
        for e in self.edges:
            want = EDGE_SCHEMA[e.kind]
            got = (self.nodes[e.src].kind, self.nodes[e.dst].kind)
            if got != want:
                raise SchemaError(f"edge {e.id} {e.kind.value} has endpoints {got}, expected {want}")

    def subgraph(self, edge_ids: Iterable[int]) -> "EntityGraph":
        """Same node set, only the given edges (ids are re-assigned)."""
        g = EntityGraph()
        for n in self.nodes:
            g.add_node(n.kind, n.key, n.ontology)
        for eid in sorted(set(edge_ids)):
            e = self.edges[eid]
            g.add_edge(e.src, e.dst, e.kind, e.attrs)
        return g

    def without_edges(self, edge_ids: Iterable[int]) -> "EntityGraph":
        drop = set(edge_ids)
        return self.subgraph(e.id for e in self.edges if e.id not in drop)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EntityGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __iter__(self) -> Iterator[NodeRef]:
        return iter(self.nodes)


def split_edges(graph: EntityGraph, kind: EdgeKind | str,
                ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                mp_fraction: float = 0.7, seed: int = 0) -> EdgeSplit:
    """Random train/val/test split of one edge kind, with train further cut
    into message-passing and supervision parts."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
    if not 0.0 < mp_fraction < 1.0:
        raise ValueError(f"mp_fraction must lie in (0, 1), got {mp_fraction}")
    ids = np.array([e.id for e in graph.edges_of(kind)], dtype=int)
    rng = np.random.default_rng(seed)
    ids = ids[rng.permutation(len(ids))]
    n = len(ids)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_val = min(n_val, n - n_train)
    train = ids[:n_train]
    val = ids[n_train:n_train + n_val]
    test = ids[n_train + n_val:]
    n_mp = int(round(mp_fraction * len(train)))
    return EdgeSplit(train=train.tolist(), val=val.tolist(), test=test.tolist(),
                     train_mp=train[:n_mp].tolist(), train_sup=train[n_mp:].tolist())


def serialize(graph: EntityGraph) -> str:
    lines = [json.dumps({"schema": SNAPSHOT_SCHEMA, "version": SNAPSHOT_VERSION,
                         "node_fields": ["id", "kind", "key", "ontology"],
                         "edge_fields": ["src", "dst", "kind", "attrs"]})]
    for n in graph.nodes:
        lines.append(json.dumps({"record": "node", "id": n.id, "kind": n.kind.value,
                                 "key": n.key, "ontology": n.ontology}))
    for e in graph.edges:
        lines.append(json.dumps({"record": "edge", "src": e.src, "dst": e.dst,
                                 "kind": e.kind.value, "attrs": e.attrs}, sort_keys=True))
    lines.append(json.dumps({"record": "end", "nodes": len(graph.nodes), "edges": len(graph.edges)}))
    return "\n".join(lines) + "\n"


def deserialize(document: str) -> EntityGraph:
    lines = document.splitlines()
    if not lines:
        raise SnapshotParseError("empty document, missing schema header", 1)
    header = _parse_line(lines[0], 1)
    if header.get("schema") != SNAPSHOT_SCHEMA:
        raise SnapshotParseError(f"unexpected schema {header.get('schema')!r}", 1)
    if header.get("version") != SNAPSHOT_VERSION:
        raise SnapshotParseError(f"unsupported version {header.get('version')!r}", 1)
    g = EntityGraph()
    ended = False
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        if ended:
            raise SnapshotParseError("content after end record", lineno)
        rec = _parse_line(raw, lineno)
        try:
            if rec["record"] == "end":
                if rec["nodes"] != len(g.nodes) or rec["edges"] != len(g.edges):
                    raise SnapshotParseError(
                        f"end record expects {rec['nodes']} nodes/{rec['edges']} edges, "
                        f"read {len(g.nodes)}/{len(g.edges)}", lineno)
                ended = True
            elif rec["record"] == "node":
                node = g.add_node(rec["kind"], rec["key"], rec["ontology"])
                if node.id != rec["id"]:
                    raise SnapshotParseError(f"node id {rec['id']} out of order", lineno)
            elif rec["record"] == "edge":
                g.add_edge(rec["src"], rec["dst"], rec["kind"], rec.get("attrs") or {})
            else:
                raise SnapshotParseError(f"unknown record type {rec['record']!r}", lineno)
        except (KeyError, ValueError, GraphError) as exc:
            if isinstance(exc, SnapshotParseError):
                raise
            raise SnapshotParseError(f"bad record: {exc}", lineno) from exc
    if not ended:
        raise SnapshotParseError("document truncated: no end record", len(lines))
    return g


def _parse_line(raw: str, lineno: int) -> dict:
    try:
        rec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"malformed JSON at column {exc.colno}: {exc.msg}", lineno) from exc
    if not isinstance(rec, dict):
        raise SnapshotParseError("record is not an object", lineno)
    return rec
