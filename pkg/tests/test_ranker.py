import math

import numpy as np
import pytest

from monrec.autodiff import Tensor
from monrec.graph import NodeKind
from monrec.ranker import (DIMENSION_REC, DIMENSION_TASK, EXPRESSION_REC, EXPRESSION_TASK, RankerConfig, TaskGraph,
                           attention_scores, batch_top1max, link_bce, load_ranker, loss_rec, loss_top1max,
                           metapath_context, metapath_contexts, node_features, rank_queries, save_ranker,
                           score_candidates, task_queries, train_ranker)


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


@pytest.fixture(scope="module")
def trained(small_dataset):
    g = small_dataset.graph
    feats = node_features(g)
    res = train_ranker(g, RankerConfig(DIMENSION_REC, hidden=16, out=8, epochs=15, seed=0), feats)
    return g, feats, res


def test_top1max_matches_formula():
    rp, rn = 0.3, np.array([0.1, -0.4, 1.2])
    s = np.exp(rn) / np.exp(rn).sum()
    expected = sum(si * (_sig(r - rp) + _sig(r * r)) for si, r in zip(s, rn))
    assert loss_top1max(Tensor(np.array([rp])), Tensor(rn)).item() == pytest.approx(expected)
    with pytest.raises(ValueError):
        loss_top1max(Tensor(np.array([rp])), Tensor(np.zeros(0)))


def test_batch_top1max_is_mean_of_singles():
    rng = np.random.default_rng(0)
    rp, rn = rng.normal(size=3), rng.normal(size=7)
    owner = np.array([0, 0, 1, 1, 1, 2, 2])
    singles = [loss_top1max(Tensor(rp[i:i + 1]), Tensor(rn[owner == i])).item() for i in range(3)]
    assert batch_top1max(Tensor(rp), Tensor(rn), owner).item() == pytest.approx(np.mean(singles))


def test_loss_rec_is_sum_of_parts():
    rp, rn, owner = Tensor(np.array([1.0, -0.5])), Tensor(np.array([0.2, 0.1, -1.0])), np.array([0, 1, 1])
    full = loss_rec(rp, rn, owner).item()
    parts = link_bce(rp, rn).item() + batch_top1max(rp, rn, owner).item()
    assert full == pytest.approx(parts)
    assert loss_rec(rp, rn, owner, ranking=False).item() == pytest.approx(link_bce(rp, rn).item())


def test_attention_scores_scaling():
    q = np.array([1.0, 2.0])
    keys = np.array([[1.0, 0.0], [0.0, 1.0]])
    a = attention_scores(q, keys, d_h=4, d_o=2)
    raw = keys @ q / math.sqrt(8)
    np.testing.assert_allclose(a, np.exp(raw) / np.exp(raw).sum())
    assert attention_scores(q, np.zeros((0, 2)), 4, 2).size == 0


def test_score_candidates_tie_break_and_empty():
    rl = score_candidates(("m",), np.array([1.0]), [(5, "b"), (2, "a"), (9, "c")], np.array([[1.0], [1.0], [2.0]]))
    assert rl.keys == ["c", "a", "b"]
    assert score_candidates(("m",), np.array([1.0]), [], np.zeros((0, 1))).candidates == ()
    with pytest.raises(FloatingPointError):
        score_candidates(("m",), np.array([1.0]), [(1, "a")], np.array([[np.nan]]))


def test_config_errors():
    with pytest.raises(ValueError, match="layers"):
        RankerConfig(layers=0).validate()
    with pytest.raises(ValueError, match="divisible"):
        RankerConfig(hidden=10, out=8, heads=4).validate()
    with pytest.raises(ValueError, match="unknown task"):
        RankerConfig(task="Nope")
    assert RankerConfig(EXPRESSION_REC).widths == [256, 256, 128]


def test_task_graph_contains_only_task_kinds(small_dataset):
    g = small_dataset.graph
    tg = TaskGraph(g, DIMENSION_TASK, node_features(g))
    assert set(tg.kind_of) <= set(DIMENSION_TASK.node_kinds)
    assert len(tg) == sum(len(g.nodes_of(k)) for k in DIMENSION_TASK.node_kinds)


def test_metapath_context_is_order_independent(small_dataset):
    g = small_dataset.graph
    tg = TaskGraph(g, EXPRESSION_TASK, node_features(g))
    full = metapath_contexts(tg, seed=3)
    i = len(tg) // 2
    single = metapath_context(i, tg, EXPRESSION_TASK.metapaths.get(tg.kind_of[i]), seed=3)
    np.testing.assert_array_equal(full[i], single)
    np.testing.assert_array_equal(full, metapath_contexts(tg, seed=3))


def test_queries_have_metric_candidates(small_dataset):
    g = small_dataset.graph
    for q in list(task_queries(g, DIMENSION_TASK).values())[:50]:
        metric = g.node(q.ids[1])
        assert set(q.candidates) == {d.id for d in g.candidate_dimensions(metric)}


def test_ranked_lists_respect_candidate_sets(trained):
    g, feats, res = trained
    tg = TaskGraph(g, DIMENSION_TASK, feats)
    queries = list(task_queries(g, DIMENSION_TASK).values())
    ranked = rank_queries(res.model, g, tg, queries)
    for q, rl in zip(queries, ranked):
        metric = g.node(q.ids[1])
        allowed = {d.key for d in g.candidate_dimensions(metric)}
        assert set(rl.keys) == allowed
        scores = [s for _, s in rl.candidates]
        assert scores == sorted(scores, reverse=True)


def test_training_beats_random_and_is_deterministic(small_dataset, trained):
    g, feats, res = trained
    assert res.val.report.mrr > res.val.random_mrr
    assert len(res.history) <= 15
    again = train_ranker(g, RankerConfig(DIMENSION_REC, hidden=16, out=8, epochs=15, seed=0), feats)
    assert [h["val_mrr"] for h in again.history] == [h["val_mrr"] for h in res.history]


def test_save_load_fidelity(tmp_path, trained):
    g, feats, res = trained
    save_ranker(res.model, tmp_path / "r.json", {"note": 1})
    model, meta = load_ranker(tmp_path / "r.json")
    assert meta["note"] == 1 and model.config == res.model.config
    tg = TaskGraph(g, DIMENSION_TASK, feats)
    queries = list(task_queries(g, DIMENSION_TASK).values())[:30]
    a = rank_queries(res.model, g, tg, queries)
    b = rank_queries(model, g, tg, queries)
    for x, y in zip(a, b):
        assert x.keys == y.keys
        np.testing.assert_allclose([s for _, s in x.candidates], [s for _, s in y.candidates], atol=1e-6)


def test_encode_requires_context(trained):
    g, feats, res = trained
    tg = TaskGraph(g, DIMENSION_TASK, feats)
    with pytest.raises(ValueError, match="context"):
        res.model.encode(tg, None)


def test_expression_task_trains(small_dataset):
    g = small_dataset.graph
    res = train_ranker(g, RankerConfig(EXPRESSION_REC, hidden=8, out=8, epochs=3, seed=1, metapaths=False))
    assert res.test is not None and 0.0 <= res.test.report.mrr <= 1.0
    assert all(NodeKind.EXPRESSION == g.node(c).kind for q in task_queries(g, EXPRESSION_TASK).values()
               for c in q.candidates[:3])
