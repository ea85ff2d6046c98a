import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monrec.graph import (EDGE_SCHEMA, DuplicateError, EdgeKind, EntityGraph, NodeKind, SchemaError,
                          SnapshotParseError, deserialize, serialize, split_edges)


def _tiny():
    g = EntityGraph()
    m = g.add_node(NodeKind.METRIC, "ram_util_raw", "Raw RAM utilization in MBs")
    dims = [g.add_node(NodeKind.DIMENSION, f"d{i}", f"dimension {i}") for i in range(3)]
    for d in dims:
        g.add_edge(m, d, EdgeKind.METRIC_HAS_DIMENSION)
    return g, m, dims


def test_add_node_and_lookup():
    g, m, _ = _tiny()
    assert m.kind == NodeKind.METRIC
    assert g.get(NodeKind.METRIC, "ram_util_raw") == m
    assert g.node(m.id).ontology == "Raw RAM utilization in MBs"
    s = g.add_node(NodeKind.SERVICE, "svc-a", "")
    assert s.ontology == ""


def test_duplicate_node_names_key():
    g, _, _ = _tiny()
    with pytest.raises(DuplicateError, match="ram_util_raw"):
        g.add_node(NodeKind.METRIC, "ram_util_raw")


def test_edge_schema_enforced():
    g, m, dims = _tiny()
    with pytest.raises(SchemaError, match="expects"):
        g.add_edge(dims[0], m, EdgeKind.METRIC_HAS_DIMENSION)
    with pytest.raises(DuplicateError):
        g.add_edge(m, dims[0], EdgeKind.METRIC_HAS_DIMENSION)


def test_candidate_dimensions():
    g, m, dims = _tiny()
    assert g.candidate_dimensions(m) == dims
    lonely = g.add_node(NodeKind.METRIC, "lonely")
    assert g.candidate_dimensions(lonely) == []
    with pytest.raises(SchemaError):
        g.candidate_dimensions(dims[0])


def test_candidate_dimensions_match_generator(small_dataset):
    g = small_dataset.graph
    planted = {}
    for m, d in small_dataset.truth.candidate_edges:
        planted.setdefault(m, set()).add(d)
    for m in g.nodes_of(NodeKind.METRIC):
        assert {d.key for d in g.candidate_dimensions(m)} == planted.get(m.key, set())


def test_reverse_neighbors_consistent(small_dataset):
    g = small_dataset.graph
    for kind in EdgeKind:
        for e in g.edges_of(kind)[:200]:
            assert g.node(e.dst) in g.neighbors(e.src, kind)
            assert g.node(e.src) in g.reverse_neighbors(e.dst, kind)


def test_split_arithmetic():
    g = EntityGraph()
    m = g.add_node(NodeKind.MONITOR, "m")
    for i in range(100):
        d = g.add_node(NodeKind.DIMENSION, f"d{i}")
        g.add_edge(m, d, EdgeKind.MONITOR_ASSOCIATED_DIMENSION)
    s = split_edges(g, EdgeKind.MONITOR_ASSOCIATED_DIMENSION, (0.8, 0.1, 0.1), 0.7, seed=1)
    assert (len(s.train), len(s.train_mp), len(s.train_sup)) == (80, 56, 24)
    assert s == split_edges(g, EdgeKind.MONITOR_ASSOCIATED_DIMENSION, (0.8, 0.1, 0.1), 0.7, seed=1)
    with pytest.raises(ValueError):
        split_edges(g, EdgeKind.MONITOR_ASSOCIATED_DIMENSION, (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        split_edges(g, EdgeKind.MONITOR_ASSOCIATED_DIMENSION, (0.8, 0.1, 0.1), 1.0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 60), seed=st.integers(0, 10_000),
       r=st.tuples(st.integers(1, 10), st.integers(0, 10), st.integers(0, 10)),
       mp=st.floats(0.05, 0.95))
def test_split_partitions_property(n, seed, r, mp):
    g = EntityGraph()
    m = g.add_node(NodeKind.MONITOR, "m")
    for i in range(n):
        g.add_edge(m, g.add_node(NodeKind.DIMENSION, f"d{i}"), EdgeKind.MONITOR_ASSOCIATED_DIMENSION)
    total = sum(r)
    ratios = (r[0] / total, r[1] / total, 1.0 - r[0] / total - r[1] / total)
    s = split_edges(g, EdgeKind.MONITOR_ASSOCIATED_DIMENSION, ratios, mp, seed)
    parts = [set(s.train), set(s.val), set(s.test)]
    assert sum(len(p) for p in parts) == n
    assert set().union(*parts) == {e.id for e in g.edges}
    assert set(s.train_mp) | set(s.train_sup) == set(s.train)
    assert not set(s.train_mp) & set(s.train_sup)
    assert abs(len(s.train) - ratios[0] * n) <= 1
    assert abs(len(s.val) - ratios[1] * n) <= 1


def test_serialize_round_trip(small_dataset):
    empty = EntityGraph()
    assert deserialize(serialize(empty)) == empty
    g = small_dataset.graph
    g2 = deserialize(serialize(g))
    assert g2 == g
    assert [e.attrs for e in g2.edges] == [e.attrs for e in g.edges]


def test_truncated_snapshot_errors():
    g, _, _ = _tiny()
    doc = serialize(g).splitlines()
    with pytest.raises(SnapshotParseError, match="truncated"):
        deserialize("\n".join(doc[:-2]))
    with pytest.raises(SnapshotParseError) as exc:
        deserialize("\n".join(doc[:2] + ['{"record": "node", bad']))
    assert exc.value.line == 3


def test_schema_table_exhaustive(small_dataset):
    small_dataset.graph.validate()
    assert set(EDGE_SCHEMA) == set(EdgeKind)
