from dataclasses import replace

import numpy as np
import pytest

from monrec.datagen import (Dataset, GenConfig, InfeasibleConfigError, SelectRecord, generate,
                            generate_select_dataset, operator_shares, select_records_from_dataset,
                            similarity_threshold_correlation, stratified_counts, subset_fraction,
                            two_cluster_silhouette, validate_stats)
from monrec.graph import EdgeKind, EntityGraph, NodeKind, serialize
from conftest import SMALL


def test_same_seed_same_graph(small_dataset):
    again = generate(GenConfig(seed=3, **SMALL))
    assert serialize(again.graph) == serialize(small_dataset.graph)
    assert again.truth == small_dataset.truth
    other = generate(GenConfig(seed=4, **SMALL))
    assert serialize(other.graph) != serialize(small_dataset.graph)


def test_default_dataset_passes_stats(default_dataset):
    report = validate_stats(default_dataset)
    assert report.passed, report.checks
    assert abs(report.subset_fraction - 0.94) <= 0.03
    assert abs(report.top3_operator_share - 0.83) <= 0.03
    assert report.listed_operator_share >= 0.95


def test_default_counts(default_dataset):
    g = default_dataset.graph
    counts = {k: len(g.nodes_of(k)) for k in NodeKind}
    assert counts[NodeKind.SERVICE] == 100 and counts[NodeKind.MONITOR] == 1000
    assert counts[NodeKind.METRIC] == 700 and counts[NodeKind.DIMENSION] == 350
    assert counts[NodeKind.EXPRESSION] == 500


def test_truth_dimensions_are_candidates(small_dataset):
    g, truth = small_dataset.graph, small_dataset.truth
    for mon, dims in truth.monitor_dimensions.items():
        metric = g.get(NodeKind.METRIC, truth.monitor_metric[mon])
        assert set(dims) <= {d.key for d in g.candidate_dimensions(metric)}
    g.validate()


def test_planted_conditions_are_valid(small_dataset):
    for conds in small_dataset.truth.conditions.values():
        for c in conds:
            assert c.problems() == []


def test_save_load_round_trip(tmp_path, small_dataset):
    small_dataset.save(tmp_path / "d")
    ds = Dataset.load(tmp_path / "d")
    assert ds.truth == small_dataset.truth and ds.config == small_dataset.config
    assert serialize(ds.graph) == serialize(small_dataset.graph)
    key = sorted(ds.series)[0]
    np.testing.assert_array_equal(ds.series[key].values, small_dataset.series[key].values)


def test_full_dimension_usage_fails_subset_check():
    g = EntityGraph()
    for i in range(10):
        mon = g.add_node(NodeKind.MONITOR, f"mon{i}")
        met = g.add_node(NodeKind.METRIC, f"met{i}")
        g.add_edge(mon, met, EdgeKind.MONITOR_HAS_METRIC)
        for j in range(3):
            d = g.add_node(NodeKind.DIMENSION, f"d{i}_{j}")
            g.add_edge(met, d, EdgeKind.METRIC_HAS_DIMENSION)
            g.add_edge(mon, d, EdgeKind.MONITOR_ASSOCIATED_DIMENSION)
    assert subset_fraction(g) == 0.0


def test_shuffled_thresholds_remove_correlation(small_dataset):
    ds = small_dataset
    planted = similarity_threshold_correlation(ds, pairs=600)
    keys = sorted(ds.truth.metric_threshold)
    vals = np.random.default_rng(0).permutation([ds.truth.metric_threshold[k] for k in keys])
    null = similarity_threshold_correlation(ds, pairs=600, thresholds=dict(zip(keys, vals)))
    assert planted >= 0.25
    assert abs(null) < 0.15


def test_operator_shares_from_ontology():
    g = EntityGraph()
    for i, op in enumerate(["Count", "Sum", "Average", "Median"]):
        g.add_node(NodeKind.EXPRESSION, f"e{i}", f"{op} of something")
    assert operator_shares(g) == (0.75, 0.75)


def test_stratified_counts_exact():
    c = stratified_counts({"a": 0.5, "b": 0.3, "c": 0.2}, 7)
    assert sum(c.values()) == 7 and c["a"] >= 3


def test_silhouette_bimodal():
    v = np.r_[np.full(20, 0.05), np.full(20, 0.7)] + np.random.default_rng(0).normal(0, 0.02, 40)
    sil, centers = two_cluster_silhouette(v)
    assert sil > 0.8 and centers[0] < 0.2 < 0.6 < centers[1]
    assert two_cluster_silhouette(np.ones(5))[0] == 0.0


@pytest.mark.parametrize("bad", [dict(services=0), dict(subset_rate=1.0), dict(candidate_range=(2, 4)),
                                 dict(candidate_range=(5, 100)), dict(dimensions=5), dict(metrics=10),
                                 dict(operator_mix={"Count": 0.5}), dict(series_length=8)])
def test_infeasible_configs(bad):
    with pytest.raises(InfeasibleConfigError):
        generate(GenConfig(**bad))


def test_select_datasets():
    for kind in ("separable", "local", "null"):
        recs = generate_select_dataset(kind, n_metrics=100, seed=0)
        assert len(recs) == 100 and all(isinstance(r, SelectRecord) for r in recs)
        assert len({r.metric for r in recs}) == 100
    null = generate_select_dataset("null", n_metrics=2000, seed=1)
    assert abs(np.mean([r.label for r in null]) - 0.5) < 0.05
    with pytest.raises(ValueError):
        generate_select_dataset("weird")


def test_select_records_from_dataset(small_dataset):
    recs = select_records_from_dataset(small_dataset)
    assert len(recs) == len(small_dataset.truth.metric_label)
    r = recs[0]
    assert r.label == small_dataset.truth.metric_label[r.metric]


def test_gen_config_dict_round_trip():
    cfg = GenConfig(seed=11)
    assert GenConfig.from_dict(cfg.to_dict()) == cfg
    assert replace(cfg, seed=12) != cfg
