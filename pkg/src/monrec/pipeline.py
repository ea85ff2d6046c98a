"""Sequential recommendation for one account.

Stages run in a fixed order: metric selection, dimension ranking, expression
ranking, similar-metric retrieval, alert synthesis and config formatting.
Every stage's inputs and outputs are recorded in the bundle for audit.
"""
from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alerts import (OPERATORS, AlertCondition, SimilarMetric, SynthesisContext, format_monitor_config,
                     synthesize_fallback, synthesize_llm)
from .autodiff import DivergenceError
from .config import RunConfig
from .datagen import Dataset, SelectRecord, select_records_from_dataset
from .embed import EmbeddingProvider, cosine
from .evaluation import (alert_eval_rules, classification_report, jaccard, stable_hash)
from .graph import EDGE_SCHEMA, EdgeKind, EntityGraph, NodeKind
from .llm import LlmClient
from .metric_select import KnnIndex, SelectConfig, SelectModel, SelectResult, feature_matrix, train_select
from .ranker import (DIMENSION_REC, DIMENSION_TASK, EXPRESSION_REC, EXPRESSION_TASK, HeteroRanker,
                     TaskGraph, build_query, load_ranker, metapath_contexts, node_features, rank_queries,
                     save_ranker, train_ranker)
from .similarity import MetricProfile, SimilarityIndex

log = logging.getLogger(__name__)

STAGES = ("select", "dimensions", "expressions", "similar", "alerts", "config")
BUNDLE_SCHEMA = "monrec.bundle"
NOTHING_TO_MONITOR = "nothing to monitor"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# account helpers

def account_metrics(graph: EntityGraph, account: str) -> list[str]:
    """Metrics emitted by ``account``: keys are ``<service>/<name>``."""
    prefix = account + "/"
    return [m.key for m in graph.nodes_of(NodeKind.METRIC) if m.key.startswith(prefix)]


def account_monitors(graph: EntityGraph, account: str) -> list[str]:
    svc = graph.get(NodeKind.SERVICE, account)
    return [m.key for m in graph.neighbors(svc, EdgeKind.SERVICE_HAS_MONITOR)]


def hide_accounts(graph: EntityGraph, accounts: Sequence[str]) -> EntityGraph:
    """Copy of ``graph`` without any edge touching the accounts' monitors."""
    mons = {graph.get(NodeKind.MONITOR, m).id for a in accounts for m in account_monitors(graph, a)}
    return graph.without_edges(e.id for e in graph.edges if e.src in mons or e.dst in mons)


def holdout_accounts(graph: EntityGraph, fraction: float, seed: int) -> list[str]:
    services = sorted(s.key for s in graph.nodes_of(NodeKind.SERVICE))
    n = int(round(fraction * len(services)))
    rng = np.random.default_rng([seed, 17])
    return sorted(rng.choice(services, size=n, replace=False).tolist()) if n else []


def expression_operator(node_text: str) -> str:
    """Operator named by an expression description (``"<Op> of ..."``)."""
    head = node_text.split(" ", 1)[0] if node_text else ""
    return head if head in OPERATORS else (head or "Custom")


def metric_unit(metric_text: str) -> str:
    m = re.search(r"\(([^)]*)\)", metric_text)
    return m.group(1) if m else ""


# models

@dataclass
class Models:
    select: SelectResult
    rankers: dict[str, HeteroRanker]
    holdout: list[str]
    meta: dict = field(default_factory=dict)


def _select_index(model: SelectModel, records: Sequence[SelectRecord], x: np.ndarray,
                  keys: Sequence[str]) -> KnnIndex:
    pos = {r.metric: i for i, r in enumerate(records)}
    rows = [pos[k] for k in keys if k in pos]
    return KnnIndex(model.latent(x[rows]), [records[i].label for i in rows],
                    [records[i].account for i in rows], [records[i].metric for i in rows])


def feedback_graph(graph: EntityGraph, edges: Sequence[tuple[str, str, str]]) -> EntityGraph:
    """Copy of ``graph`` plus monitors and links from feedback supervision edges.

    Edges are ``(kind, src key, dst key)``; unknown monitors are created.
    """
    g = graph.subgraph(range(len(graph.edges)))
    for kind, src, dst in sorted(edges):
        ek = EdgeKind(kind)
        sk, dk = EDGE_SCHEMA[ek]
        for k, key in ((sk, src), (dk, dst)):
            if not g.has(k, key):
                if k != NodeKind.MONITOR:
                    raise ValueError(f"feedback references unknown {k.value} {key!r}")
                g.add_node(k, key, f"{key} monitor from feedback")
        s, d = g.get(sk, src), g.get(dk, dst)
        if not g.has_edge(s, d, ek):
            g.add_edge(s, d, ek)
    return g


def train_all(ds: Dataset, config: RunConfig, out_dir: str | Path | None = None,
              feedback_edges: Sequence[tuple[str, str, str]] = (), holdout_fraction: float = 0.1,
              provider: EmbeddingProvider | None = None) -> tuple[Models, dict]:
    """Train metric selection and both rankers; write checkpoints and a report."""
    config.validate()
    provider = provider or EmbeddingProvider()
    started = time.perf_counter()
    report: dict = {"config_hash": stable_hash(config.to_dict()), "stages": {}}
    records = select_records_from_dataset(ds)
    x = feature_matrix(records, provider)
    scfg = select_config(config)
    try:
        sel = train_select(records, scfg, x=x)
    except DivergenceError as exc:
        raise StageError("select", f"diverged: {exc}") from exc
    report["stages"]["select"] = {"variant": scfg.variant, "epochs": len(sel.history),
                                  "stopped_early": sel.stopped_early, "history": sel.history}
    holdout = holdout_accounts(ds.graph, holdout_fraction, config.seed)
    graph = hide_accounts(ds.graph, holdout)
    if feedback_edges:
        graph = feedback_graph(graph, feedback_edges)
    feats = node_features(graph, provider)
    rankers = {}
    for task in (DIMENSION_REC, EXPRESSION_REC):
        rcfg = config.ranker(task)
        try:
            res = train_ranker(graph, rcfg, features=feats)
        except DivergenceError as exc:
            raise StageError(task, f"diverged: {exc}") from exc
        rankers[task] = res.model
        report["stages"][task] = {
            "epochs": len(res.history), "stopped_early": res.stopped_early, "history": res.history,
            "val": res.val.report.to_dict(), "test": res.test.report.to_dict(),
            "random_mrr_test": res.test.random_mrr, "seconds": res.seconds}
        log.info("%s: val MRR %.4f test MRR %.4f (%d epochs)", task, res.val.report.mrr,
                 res.test.report.mrr, len(res.history))
    report["holdout_accounts"] = holdout
    report["feedback_edges"] = len(feedback_edges)
    report["seconds"] = time.perf_counter() - started
    models = Models(sel, rankers, holdout, {"config_hash": report["config_hash"]})
    if out_dir is not None:
        save_models(models, out_dir, config)
        (Path(out_dir) / "train_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return models, report


def select_config(config: RunConfig) -> SelectConfig:
    return SelectConfig(**{**asdict(config.select), "variant": config.pipeline.select_variant,
                           "seed": config.seed})


def save_models(models: Models, out_dir: str | Path, config: RunConfig) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    s = models.select
    s.model.save(d / "select.json", {"config": asdict(s.config), "train_keys": s.train_keys,
                                     "val_keys": s.val_keys, "test_keys": s.test_keys})
    for task, model in models.rankers.items():
        save_ranker(model, d / f"{task}.json")
    manifest = {"schema": "monrec.models", "version": 1, "holdout": models.holdout,
                "config": config.to_dict(), **models.meta}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d


def load_models(model_dir: str | Path, ds: Dataset, provider: EmbeddingProvider | None = None) -> Models:
    d = Path(model_dir)
    if not (d / "manifest.json").exists():
        raise FileNotFoundError(f"no trained models in {d}; run the train command first")
    manifest = json.loads((d / "manifest.json").read_text())
    model, meta = SelectModel.load(d / "select.json")
    scfg = SelectConfig(**meta["config"])
    records = select_records_from_dataset(ds)
    x = feature_matrix(records, provider or EmbeddingProvider())
    index = _select_index(model, records, x, meta["train_keys"])
    sel = SelectResult(model, scfg, index, meta["train_keys"], meta["val_keys"], meta["test_keys"])
    rankers = {t: load_ranker(d / f"{t}.json")[0] for t in (DIMENSION_REC, EXPRESSION_REC)}
    return Models(sel, rankers, manifest["holdout"], {"config_hash": manifest.get("config_hash", "")})


# bundle

@dataclass
class RecommendationBundle:
    account: str
    status: str
    decisions: list[dict]
    dimensions: dict[str, list[tuple[str, float]]]
    expressions: dict[str, list[tuple[str, float]]]
    similar: dict[str, list[tuple[str, float]]]
    alerts: dict[str, list[AlertCondition]]
    config: dict | None
    rationale: str
    audit: list[dict] = field(default_factory=list)

    def to_document(self) -> dict:
        doc = {
            "schema": BUNDLE_SCHEMA, "version": 1, "account": self.account, "status": self.status,
            "decisions": self.decisions,
            "dimensions": {k: [[d, s] for d, s in v] for k, v in self.dimensions.items()},
            "expressions": {k: [[e, s] for e, s in v] for k, v in self.expressions.items()},
            "similar": {k: [[m, s] for m, s in v] for k, v in self.similar.items()},
            "alerts": {k: [c.to_record() for c in v] for k, v in self.alerts.items()},
            "config": self.config, "rationale": self.rationale, "audit": self.audit,
        }
        # round-trip through JSON so equal bundles compare equal regardless of tuple/list types
        doc = json.loads(json.dumps(doc, sort_keys=True))
        doc["bundle_id"] = stable_hash(doc)
        return doc

    @property
    def bundle_id(self) -> str:
        return self.to_document()["bundle_id"]

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"


@dataclass
class PipelineOptions:
    no_llm: bool = True
    hide_existing: bool = True
    select_variant: str | None = None
    dimension_source: str = "ranker"    # ranker | text
    expression_source: str = "ranker"   # ranker | text
    metrics: list[str] | None = None     # restrict to these metrics (skips selection)


class Recommender:
    """Loaded models plus per-dataset caches; ``run`` is safe to call concurrently."""

    def __init__(self, ds: Dataset, models: Models, config: RunConfig, llm: LlmClient | None = None,
                 provider: EmbeddingProvider | None = None):
        self.ds = ds
        self.models = models
        self.config = config
        self.llm = llm or LlmClient(mode="disabled")
        self.provider = provider or EmbeddingProvider()
        self.records = {r.metric: r for r in select_records_from_dataset(ds)}
        self.sim = SimilarityIndex(self.provider, config.similarity.weight, config.similarity.shapelets,
                                   config.similarity.shortlist)
        self.profiles = self._profiles()

    def _profiles(self) -> list[MetricProfile]:
        g, truth = self.ds.graph, self.ds.truth
        by_metric: dict[str, list[AlertCondition]] = {}
        for mon in g.nodes_of(NodeKind.MONITOR):
            metrics = g.neighbors(mon, EdgeKind.MONITOR_HAS_METRIC)
            if metrics:
                by_metric.setdefault(metrics[0].key, []).extend(truth.conditions.get(mon.key, []))
        out = []
        for m in g.nodes_of(NodeKind.METRIC):
            if m.key in by_metric:
                acct = m.key.split("/", 1)[0]
                out.append(MetricProfile(m.key, m.ontology, self.ds.series.get(m.key), by_metric[m.key], acct))
        return out

    def run(self, account: str, options: PipelineOptions | None = None) -> RecommendationBundle:
        options = options or PipelineOptions()
        g = self.ds.graph
        if not g.has(NodeKind.SERVICE, account):
            raise StageError("input", f"unknown account {account!r}")
        audit = []
        cfg_hash = stable_hash(self.config.to_dict())

        # metric selection
        metrics = account_metrics(g, account)
        if options.metrics is not None:
            unknown = sorted(set(options.metrics) - set(metrics))
            if unknown:
                raise StageError("select", f"metrics not owned by {account}: {unknown}")
            metrics = [m for m in metrics if m in set(options.metrics)]
        variant = options.select_variant or self.models.select.config.variant
        recs = [self.records[m] for m in metrics]
        try:
            decs = self.models.select.decisions(recs, variant=variant, provider=self.provider) if recs else []
        except Exception as exc:
            raise StageError("select", str(exc)) from exc
        decisions = [d.to_record() for d in decs]
        chosen = [d.metric for d in decs if d.decision or options.metrics is not None]
        audit.append(_audit("select", {"metrics": metrics, "variant": variant}, {"selected": chosen}, cfg_hash))
        if not chosen:
            return RecommendationBundle(account, NOTHING_TO_MONITOR, decisions, {}, {}, {}, {}, None,
                                        f"{account}: {NOTHING_TO_MONITOR}.", audit)

        work, monitors = self._work_graph(account, chosen, options.hide_existing)
        dims = self._rank_dimensions(work, monitors, options)
        top_d = self.config.pipeline.top_dimensions
        for mon, metric in monitors.items():
            for d, _ in dims[metric][:top_d]:
                work.add_edge(work.get(NodeKind.MONITOR, mon), work.get(NodeKind.DIMENSION, d),
                              EdgeKind.MONITOR_ASSOCIATED_DIMENSION)
        audit.append(_audit("dimensions", {"source": options.dimension_source, "top": top_d},
                            {m: [d for d, _ in v[:top_d]] for m, v in dims.items()}, cfg_hash))
        exprs = self._rank_expressions(work, monitors, options)
        top_e = self.config.pipeline.top_expressions
        audit.append(_audit("expressions", {"source": options.expression_source, "top": top_e},
                            {m: [e for e, _ in v[:top_e]] for m, v in exprs.items()}, cfg_hash))

        similar = {}
        for metric in chosen:
            node = g.get(NodeKind.METRIC, metric)
            query = MetricProfile(metric, node.ontology, self.ds.series.get(metric), [], account)
            corpus = [p for p in self.profiles if p.account != account]
            top = self.sim.top_k(query, corpus, self.config.similarity.top_k) if corpus else []
            similar[metric] = [(p, float(s)) for p, s in top]
        audit.append(_audit("similar", {"k": self.config.similarity.top_k},
                            {m: [p.key for p, _ in v] for m, v in similar.items()}, cfg_hash))

        alerts, selections, condition_lists = {}, [], []
        for metric in chosen:
            node = g.get(NodeKind.METRIC, metric)
            series = self.ds.series.get(metric)
            dsel = [d for d, _ in dims[metric][:top_d]]
            for e, _ in exprs[metric][:top_e]:
                enode = g.get(NodeKind.EXPRESSION, e)
                ctx = SynthesisContext(
                    account=account, account_text=g.get(NodeKind.SERVICE, account).ontology,
                    metric=metric, metric_text=node.ontology, expression=e, expression_text=enode.ontology,
                    operator=expression_operator(enode.ontology),
                    dimensions=[(d, g.get(NodeKind.DIMENSION, d).ontology) for d in dsel],
                    sampling=series.sampling if series is not None else "Average",
                    unit=metric_unit(node.ontology),
                    series=series.values if series is not None else None,
                    similar=[SimilarMetric(p.key, p.text, s, list(p.conditions)) for p, s in similar[metric]],
                    max_similar=self.config.alerts.max_similar)
                try:
                    if options.no_llm:
                        conds = synthesize_fallback(ctx)
                    else:
                        conds = synthesize_llm(ctx, self.llm, self.config.alerts.retries,
                                               self.config.alerts.output_format).conditions
                except Exception as exc:
                    raise StageError("alerts", f"{metric}: {exc}") from exc
                alerts.setdefault(metric, []).extend(conds)
                selections.append({"metric": metric, "dimensions": dsel, "expression": e})
                condition_lists.append(conds)
        audit.append(_audit("alerts", {"no_llm": options.no_llm},
                            {m: [c.provenance for c in v] for m, v in alerts.items()}, cfg_hash))
        try:
            mc = format_monitor_config(f"{account}-recommended", account, selections, condition_lists, graph=g)
        except Exception as exc:
            raise StageError("config", str(exc)) from exc
        doc = mc.to_document()
        audit.append(_audit("config", {"tuples": len(selections)}, {"hash": stable_hash(doc)}, cfg_hash))
        return RecommendationBundle(
            account, "ok", decisions,
            {m: dims[m] for m in chosen}, {m: exprs[m] for m in chosen},
            {m: [(p.key, s) for p, s in v] for m, v in similar.items()},
            alerts, doc, rationale(account, selections, alerts, similar), audit)

    # stages

    def _work_graph(self, account: str, metrics: Sequence[str],
                    hide_existing: bool) -> tuple[EntityGraph, dict[str, str]]:
        g = self.ds.graph
        work = hide_accounts(g, [account]) if hide_existing else g.subgraph(range(len(g.edges)))
        svc = work.get(NodeKind.SERVICE, account)
        monitors = {}
        for metric in metrics:
            node = work.get(NodeKind.METRIC, metric)
            key = f"{metric}#recommended"
            mon = work.add_node(NodeKind.MONITOR, key, f"{account} {node.ontology} monitor")
            work.add_edge(svc, mon, EdgeKind.SERVICE_HAS_MONITOR)
            work.add_edge(mon, node, EdgeKind.MONITOR_HAS_METRIC)
            monitors[key] = metric
        return work, monitors

    def _rank(self, task: str, work: EntityGraph, monitors: dict[str, str]) -> dict[str, list[tuple[str, float]]]:
        model = self.models.rankers[task]
        schema = DIMENSION_TASK if task == DIMENSION_REC else EXPRESSION_TASK
        feats = node_features(work, self.provider)
        tg = TaskGraph(work, schema, feats)
        c = model.config
        ctx = metapath_contexts(tg, c.walk_length, c.walks_per_node, c.seed) if c.metapaths else None
        queries = [build_query(work, schema, work.get(NodeKind.MONITOR, mon).id) for mon in monitors]
        ranked = rank_queries(model, work, tg, queries, context=ctx)
        return {monitors[work.node(q.monitor).key]: list(r.candidates) for q, r in zip(queries, ranked)}

    def _text_rank(self, texts: dict[str, str], candidates: dict[str, list]) -> dict[str, list[tuple[str, float]]]:
        out = {}
        for metric, cands in candidates.items():
            q = self.provider.embed_text(texts[metric])
            scored = [(n.key, float(cosine(q, self.provider.embed_text(n.ontology)))) for n in cands]
            out[metric] = sorted(scored, key=lambda t: (-t[1], t[0]))
        return out

    def _rank_dimensions(self, work, monitors, options):
        try:
            if options.dimension_source == "ranker":
                return self._rank(DIMENSION_REC, work, monitors)
            if options.dimension_source == "text":
                return self._text_rank({m: work.node(work.get(NodeKind.METRIC, m).id).ontology
                                        for m in monitors.values()},
                                       {m: work.candidate_dimensions(work.get(NodeKind.METRIC, m))
                                        for m in monitors.values()})
        except Exception as exc:
            raise StageError("dimensions", str(exc)) from exc
        raise StageError("dimensions", f"unknown source {options.dimension_source!r}")

    def _rank_expressions(self, work, monitors, options):
        try:
            if options.expression_source == "ranker":
                return self._rank(EXPRESSION_REC, work, monitors)
            if options.expression_source == "text":
                return self._text_rank(
                    {m: work.get(NodeKind.METRIC, m).ontology for m in monitors.values()},
                    {m: work.neighbors(work.get(NodeKind.METRIC, m), EdgeKind.METRIC_USES_EXPRESSION)
                     for m in monitors.values()})
        except Exception as exc:
            raise StageError("expressions", str(exc)) from exc
        raise StageError("expressions", f"unknown source {options.expression_source!r}")


def _audit(stage: str, inputs: dict, outputs: dict, cfg_hash: str) -> dict:
    return {"stage": stage, "inputs": inputs, "outputs": outputs, "config_hash": cfg_hash}


def rationale(account: str, selections: Sequence[dict], alerts: dict[str, list[AlertCondition]],
              similar: dict[str, list[tuple[MetricProfile, float]]]) -> str:
    lines = [f"Recommended monitors for {account}:"]
    for sel in selections:
        m = sel["metric"]
        sims = similar.get(m, [])
        lines.append(f"- {m}: {sel['expression']} by {', '.join(sel['dimensions']) or 'no dimension'}.")
        for c in alerts.get(m, []):
            if c.expression != sel["expression"]:
                continue
            src = c.source or c.provenance
            lines.append(f"  Alert: {c.describe()} (threshold from {src}).")
        if sims:
            cited = ", ".join(f"{p.key} ({s:.2f})" for p, s in sims)
            lines.append(f"  Similar metrics: {cited}.")
        else:
            lines.append("  No similar monitored metrics were found.")
    return "\n".join(lines)


def run_pipeline(account: str, ds: Dataset, models: Models, config: RunConfig,
                 options: PipelineOptions | None = None, llm: LlmClient | None = None) -> RecommendationBundle:
    return Recommender(ds, models, config, llm).run(account, options)


# evaluation grid

@dataclass
class MonitorScore:
    monitor: str
    metric: str
    dims_jaccard: float
    expression_hit: float
    operator_hit: float
    alert: float


def score_bundle(bundle: RecommendationBundle, ds: Dataset) -> list[MonitorScore]:
    """Compare a bundle with the planted monitors of its account.

    Only monitors whose metric was recommended are scored; selection quality
    is reported separately.
    """
    truth, g = ds.truth, ds.graph
    out = []
    for mon in sorted(m for m, s in truth.monitor_service.items() if s == bundle.account):
        metric = truth.monitor_metric[mon]
        if metric not in bundle.alerts:
            continue
        top = list(bundle.alerts[metric])
        rec_dims = set(top[0].dimensions) if top else set()
        rec_expr = top[0].expression if top else ""
        planted = truth.conditions[mon]
        series = ds.series.get(metric)
        p1 = series.percentile(1) if series is not None else None
        p99 = series.percentile(99) if series is not None else None
        out.append(MonitorScore(
            mon, metric, jaccard(rec_dims, set(truth.monitor_dimensions[mon])),
            float(rec_expr == truth.monitor_expression[mon]),
            float(bool(top) and top[0].aggregation == planted[0].aggregation),
            alert_eval_rules(top, planted, p1, p99).aggregate))
    return out


def evaluate_grid(ds: Dataset, models: Models, config: RunConfig,
                  variants: Sequence[str] = ("BCE", "KNN", "Ens")) -> dict:
    """Selection variants crossed with ranker-vs-text dimension and expression sources."""
    if not ds.truth.monitor_metric:
        raise ValueError("dataset has no ground-truth monitors to evaluate against")
    records = select_records_from_dataset(ds)
    by_key = {r.metric: r for r in records}
    test = [by_key[k] for k in models.select.test_keys if k in by_key]
    if not models.holdout:
        raise ValueError("models were trained without held-out accounts")
    rec = Recommender(ds, models, config)
    grid = []
    for variant in variants:
        decs = models.select.decisions(test, variant=variant, provider=rec.provider)
        cls = classification_report([d.decision for d in decs], [bool(r.label) for r in test])
        for dsrc in ("text", "ranker"):
            for esrc in ("text", "ranker"):
                opts = PipelineOptions(select_variant=variant, dimension_source=dsrc, expression_source=esrc)
                scores = []
                for account in models.holdout:
                    scores += score_bundle(rec.run(account, opts), ds)
                planted = sum(1 for s in ds.truth.monitor_service.values() if s in set(models.holdout))
                grid.append({
                    "variant": variant, "dimensions": dsrc, "expressions": esrc,
                    "select": cls.to_dict(),
                    "monitors_scored": len(scores), "monitors_planted": planted,
                    "dims_jaccard": _mean([s.dims_jaccard for s in scores]),
                    "expression_accuracy": _mean([s.expression_hit for s in scores]),
                    "operator_accuracy": _mean([s.operator_hit for s in scores]),
                    "alert_aggregate": _mean([s.alert for s in scores]),
                })
                log.info("grid %s dims=%s exprs=%s: %s", variant, dsrc, esrc,
                         {k: grid[-1][k] for k in ("dims_jaccard", "expression_accuracy", "alert_aggregate")})
    return {"grid": grid, "holdout": list(models.holdout)}


def _mean(xs: Sequence[float]) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0
