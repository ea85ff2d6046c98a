"""Training and evaluation of the graph ranker on held-out links."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..autodiff import (DivergenceError, NonFiniteError, OptimizerState, Tensor, TrainControl, adam_step,
                        backward, control_step)
from ..autodiff import checkpoint
from ..evaluation import RankingReport, random_mrr, ranking_report
from ..graph import EdgeKind, EdgeSplit, EntityGraph, NodeKind, split_edges
from .losses import loss_rec
from .metapath import metapath_contexts
from .model import HeteroRanker, score_candidates
from .schema import DIMENSION_REC, RankedList, RankerConfig, TaskSchema
from .taskgraph import TaskGraph, node_features

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Query:
    """One recommendation request: the query tuple and its valid candidate set."""

    monitor: int
    ids: tuple[int, ...]
    keys: tuple[str, ...]
    candidates: tuple[int, ...]


def build_query(graph: EntityGraph, schema: TaskSchema, monitor: int) -> Query | None:
    """Query tuple for a monitor: (monitor, metric) or (monitor, metric, dimension).

    Dimension candidates are the metric's emitted dimensions; expression
    candidates are the metric's expression catalogue. The dimension of an
    expression query is the monitor's first associated dimension, else the
    metric's first emitted one.
    """
    mon = graph.node(monitor)
    metrics = graph.neighbors(mon, EdgeKind.MONITOR_HAS_METRIC)
    if not metrics:
        return None
    metric = metrics[0]
    if schema.name == DIMENSION_REC:
        cands = graph.candidate_dimensions(metric)
        ids = (mon.id, metric.id)
    else:
        dims = graph.neighbors(mon, EdgeKind.MONITOR_ASSOCIATED_DIMENSION) or graph.candidate_dimensions(metric)
        if not dims:
            return None
        cands = graph.neighbors(metric, EdgeKind.METRIC_USES_EXPRESSION)
        ids = (mon.id, metric.id, dims[0].id)
    return Query(mon.id, ids, tuple(graph.node(i).key for i in ids), tuple(c.id for c in cands))


def task_queries(graph: EntityGraph, schema: TaskSchema) -> dict[int, Query]:
    out = {}
    for mon in graph.nodes_of(NodeKind.MONITOR):
        q = build_query(graph, schema, mon.id)
        if q is not None:
            out[mon.id] = q
    return out


def _links(graph: EntityGraph, edge_ids: Sequence[int]) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for eid in edge_ids:
        e = graph.edges[eid]
        out.setdefault(e.src, set()).add(e.dst)
    return out


@dataclass
class EvalResult:
    report: RankingReport
    random_mrr: float
    ranked: list[RankedList]
    relevant: list[set[str]]


@dataclass
class RankerResult:
    model: HeteroRanker
    split: EdgeSplit
    history: list[dict] = field(default_factory=list)
    val: EvalResult | None = None
    test: EvalResult | None = None
    stopped_early: bool = False
    seconds: float = 0.0


def _contexts(model: HeteroRanker, tg: TaskGraph) -> np.ndarray | None:
    c = model.config
    if not c.metapaths:
        return None
    return metapath_contexts(tg, c.walk_length, c.walks_per_node, c.seed)


def rank_queries(model: HeteroRanker, graph: EntityGraph, tg: TaskGraph, queries: Sequence[Query],
                 exclude: Mapping[int, set[int]] | None = None, context: np.ndarray | None = None,
                 final: np.ndarray | None = None) -> list[RankedList]:
    """Rank each query's candidates, dropping the ones listed in ``exclude[monitor]``."""
    if not queries:
        return []
    if final is None:
        if context is None:
            context = _contexts(model, tg)
        final = model.encode(tg, context).data
    rows = np.array([[tg.index(i) for i in q.ids] for q in queries])
    qvecs = model.query_vectors(Tensor(final), rows).data
    out = []
    for q, qv in zip(queries, qvecs):
        skip = exclude.get(q.monitor, set()) if exclude else set()
        cands = [c for c in q.candidates if c not in skip]
        cvecs = final[[tg.index(c) for c in cands]] if cands else np.zeros((0, final.shape[1]))
        out.append(score_candidates(q.keys, qv, [(c, graph.node(c).key) for c in cands], cvecs))
    return out


def evaluate_links(model: HeteroRanker, graph: EntityGraph, tg: TaskGraph, queries: Mapping[int, Query],
                   held_out: Sequence[int], known: Mapping[int, set[int]], context: np.ndarray | None = None,
                   final: np.ndarray | None = None, ks: Sequence[int] = (1, 3, 5)) -> EvalResult:
    """Filtered ranking of held-out links: known training links are removed from candidates."""
    truth = _links(graph, held_out)
    qs = [queries[m] for m in sorted(truth) if m in queries]
    ranked = rank_queries(model, graph, tg, qs, known, context, final)
    relevant, rnd = [], []
    for q, rl in zip(qs, ranked):
        rel = {graph.node(c).key for c in truth[q.monitor] if c in set(q.candidates)}
        relevant.append(rel)
        rnd.append(random_mrr(len(rl.candidates), len(rel)))
    return EvalResult(ranking_report([r.keys for r in ranked], relevant, ks), float(np.mean(rnd)) if rnd else 0.0,
                      ranked, relevant)


def _supervision(graph: EntityGraph, queries: Mapping[int, Query], sup_edges: Sequence[int],
                 known: Mapping[int, set[int]]) -> list[tuple[int, int, list[int]]]:
    """(monitor, positive, negative pool) per supervision edge."""
    out = []
    for eid in sup_edges:
        e = graph.edges[eid]
        q = queries.get(e.src)
        if q is None or e.dst not in q.candidates:
            continue
        pool = [c for c in q.candidates if c not in known.get(e.src, set()) and c != e.dst]
        out.append((e.src, e.dst, pool))
    return out


def train_ranker(graph: EntityGraph, config: RankerConfig | None = None,
                 features: Mapping[int, np.ndarray] | None = None, split: EdgeSplit | None = None,
                 evaluate_test: bool = True) -> RankerResult:
    """Full-batch training with early stopping on validation MRR.

    Supervision links are hidden from message passing during training;
    validation and test use every training link for message passing.
    """
    config = config or RankerConfig()
    config.validate()
    started = time.perf_counter()
    schema = config.schema
    features = features if features is not None else node_features(graph)
    split = split or split_edges(graph, schema.target_edge, config.split, config.mp_fraction, config.seed)
    tg_train = TaskGraph(graph, schema, features, hidden=split.val + split.test + split.train_sup)
    tg_eval = TaskGraph(graph, schema, features, hidden=split.val + split.test)
    model = HeteroRanker.create(tg_train, config)
    ctx_train, ctx_eval = _contexts(model, tg_train), _contexts(model, tg_eval)
    queries = task_queries(graph, schema)
    known = _links(graph, split.train)
    sup = _supervision(graph, queries, split.train_sup, known)
    if not sup:
        raise ValueError("no supervision links available for training")
    rng = np.random.default_rng(config.seed)
    names = sorted(model.params)
    params = [model.params[n] for n in names]
    state = OptimizerState(lr=config.lr, weight_decay=config.weight_decay)
    control = TrainControl(lr=config.lr)
    best = {n: p.data.copy() for n, p in model.params.items()}
    mons = sorted({m for m, _, _ in sup})
    q_pos = {m: i for i, m in enumerate(mons)}
    q_rows = np.array([[tg_train.index(i) for i in queries[m].ids] for m in mons])
    history, stopped = [], False
    for epoch in range(config.epochs):
        pos_q, pos_c, neg_q, neg_c, owner = [], [], [], [], []
        for m, c, pool in sup:
            if not pool:
                continue
            k = min(config.negatives, len(pool))
            negs = rng.choice(pool, size=k, replace=False)
            idx = len(pos_q)
            pos_q.append(q_pos[m])
            pos_c.append(tg_train.index(c))
            neg_q.extend([q_pos[m]] * k)
            neg_c.extend(tg_train.index(n) for n in negs)
            owner.extend([idx] * k)
        try:
            final = model.encode(tg_train, ctx_train)
            qvec = model.query_vectors(final, q_rows)
            r_pos = model.pair_scores(final, qvec, np.array(pos_q), np.array(pos_c))
            r_neg = model.pair_scores(final, qvec, np.array(neg_q), np.array(neg_c))
            loss = loss_rec(r_pos, r_neg, np.array(owner), ranking=config.ranking_loss)
        except NonFiniteError as exc:
            raise DivergenceError(f"ranker diverged at epoch {epoch}: {exc}") from exc
        for p in params:
            p.grad = None
        backward(loss)
        adam_step(params, [p.grad for p in params], state)
        if not all(np.all(np.isfinite(p.data)) for p in params):
            raise DivergenceError(f"ranker parameters became non-finite at epoch {epoch}")
        val = evaluate_links(model, graph, tg_eval, queries, split.val, known, ctx_eval)
        improved = control.improved(val.report.mrr)
        lr, stop = control_step(control, val.report.mrr)
        state.lr = lr
        if improved:
            best = {n: p.data.copy() for n, p in model.params.items()}
        history.append({"epoch": epoch, "loss": loss.item(), "val_mrr": val.report.mrr, "lr": lr})
        log.debug("%s epoch %d loss %.4f val MRR %.4f", config.task, epoch, loss.item(), val.report.mrr)
        if stop:
            stopped = True
            break
    for n, v in best.items():
        model.params[n].data[...] = v
    result = RankerResult(model, split, history, stopped_early=stopped)
    result.val = evaluate_links(model, graph, tg_eval, queries, split.val, known, ctx_eval)
    if evaluate_test:
        result.test = evaluate_links(model, graph, tg_eval, queries, split.test, known, ctx_eval)
    result.seconds = time.perf_counter() - started
    return result


def save_ranker(model: HeteroRanker, path: str | Path, meta: dict | None = None) -> None:
    checkpoint.save(path, model.params, {"config": model.config.to_dict(), **(meta or {})})


def load_ranker(path: str | Path) -> tuple[HeteroRanker, dict]:
    params, meta = checkpoint.load(path)
    cfg = dict(meta["config"])
    cfg["split"] = tuple(cfg["split"])
    config = RankerConfig(**cfg)
    params = {k: Tensor(v.data, requires_grad=True, name=k) for k, v in params.items()}
    return HeteroRanker(config, params), meta
