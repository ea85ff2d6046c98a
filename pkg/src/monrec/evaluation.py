"""Classification, ranking and alert-quality metrics."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .alerts import LOWER_BOUND_OPERATORS, AlertCondition
from .llm import LlmClient

log = logging.getLogger(__name__)


# classification

@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    macro_f1: float
    hamming: float
    support: int

    def to_dict(self) -> dict:
        return asdict(self)


def _f1(tp: int, fp: int, fn: int) -> float:
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def classification_report(preds: Sequence, labels: Sequence) -> ClassificationReport:
    """Binary metrics; ``f1`` is for the positive class, ``macro_f1`` averages both classes."""
    p = np.asarray(preds).astype(bool)
    y = np.asarray(labels).astype(bool)
    if p.size == 0:
        raise ValueError("classification_report needs at least one prediction")
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions but {y.size} labels")
    tp = int(np.sum(p & y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    tn = int(np.sum(~p & ~y))
    acc = (tp + tn) / p.size
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    macro = (_f1(tp, fp, fn) + _f1(tn, fn, fp)) / 2
    return ClassificationReport(acc, prec, rec, _f1(tp, fp, fn), macro, 1.0 - acc, int(p.size))


# ranking

@dataclass(frozen=True)
class RankingReport:
    hr: dict[int, float]
    mrr: float
    ndcg: dict[int, float]
    recall: dict[int, float]
    queries: int

    def to_dict(self) -> dict:
        return {"hr": {str(k): v for k, v in self.hr.items()}, "mrr": self.mrr,
                "ndcg": {str(k): v for k, v in self.ndcg.items()},
                "recall": {str(k): v for k, v in self.recall.items()}, "queries": self.queries}


def ranking_report(ranked: Sequence[Sequence[Hashable]], relevant: Sequence[set],
                   ks: Sequence[int] = (1, 3, 5), ndcg_k: int = 5) -> RankingReport:
    """Standard top-k metrics with binary relevance.

    A query without relevant items still counts and contributes 0 to every metric.
    """
    if len(ranked) != len(relevant):
        raise ValueError(f"{len(ranked)} ranked lists but {len(relevant)} relevance sets")
    ks = sorted(set(ks))
    nks = sorted(set(ks) | {ndcg_k})
    n = len(ranked)
    hr = {k: 0.0 for k in ks}
    rec = {k: 0.0 for k in ks}
    ndcg = {k: 0.0 for k in nks}
    mrr = 0.0
    for items, rel in zip(ranked, relevant):
        rel = set(rel)
        if not rel:
            continue
        hits = np.array([it in rel for it in items], dtype=bool)
        pos = np.flatnonzero(hits)
        if pos.size:
            mrr += 1.0 / (pos[0] + 1)
        for k in ks:
            top = hits[:k].sum()
            hr[k] += float(top > 0)
            rec[k] += top / len(rel)
        disc = 1.0 / np.log2(np.arange(2, len(items) + 2))
        for k in nks:
            dcg = float((hits[:k] * disc[:k]).sum()) if len(items) else 0.0
            idcg = float((1.0 / np.log2(np.arange(2, min(len(rel), k) + 2))).sum())
            ndcg[k] += dcg / idcg
    if n == 0:
        return RankingReport(hr, 0.0, ndcg, rec, 0)
    return RankingReport({k: v / n for k, v in hr.items()}, mrr / n,
                         {k: v / n for k, v in ndcg.items()}, {k: v / n for k, v in rec.items()}, n)


def random_mrr(n_candidates: int, n_relevant: int) -> float:
    """Expected reciprocal rank of the first relevant item under a uniform shuffle."""
    if n_relevant <= 0 or n_candidates <= 0:
        return 0.0
    total = math.comb(n_candidates, n_relevant)
    return sum(math.comb(n_candidates - i, n_relevant - 1) / total / i
               for i in range(1, n_candidates - n_relevant + 2))


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def set_precision_recall(pred, truth) -> tuple[float, float]:
    pred, truth = set(pred), set(truth)
    inter = len(pred & truth)
    prec = inter / len(pred) if pred else float(not truth)
    rec = inter / len(truth) if truth else 1.0
    return prec, rec


# alert quality

CRITERIA = ("threshold_appropriateness", "condition_validity", "incident_detection", "noise_reduction",
            "specificity", "completeness", "required_fields")
MATCH_WEIGHTS = {"operator": 0.4, "dimensions": 0.3, "threshold": 0.3}
REQUIRED_FIELDS = ("expression", "aggregation", "comparator", "threshold", "window", "min_violations", "severity")


@dataclass
class AlertEvalScore:
    criteria: dict[str, float]
    flags: list[str] = field(default_factory=list)
    provenance: str = "rules"
    matches: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self):
        missing = [c for c in CRITERIA if c not in self.criteria]
        if missing:
            raise ValueError(f"missing criteria: {missing}")

    @property
    def aggregate(self) -> float:
        return float(np.mean([self.criteria[c] for c in CRITERIA]))

    def to_dict(self) -> dict:
        return {"criteria": dict(self.criteria), "aggregate": self.aggregate, "flags": list(self.flags),
                "provenance": self.provenance}


def _rel_err(a: float | None, b: float | None) -> float:
    if a is None or b is None:
        return math.inf
    return abs(a - b) / max(abs(b), 1e-9)


def condition_match_score(pred: AlertCondition, exp: AlertCondition, weights: dict | None = None) -> float:
    w = weights or MATCH_WEIGHTS
    op = float(pred.aggregation == exp.aggregation)
    dims = jaccard(pred.dimensions, exp.dimensions)
    thr = max(0.0, 1.0 - _rel_err(pred.threshold, exp.threshold)) if pred.threshold is not None else 0.0
    return w["operator"] * op + w["dimensions"] * dims + w["threshold"] * thr


def _key(c: AlertCondition) -> str:
    return json.dumps(c.to_record(), sort_keys=True)


def match_conditions(predicted: Sequence[AlertCondition], expected: Sequence[AlertCondition],
                     min_score: float = 0.5, weights: dict | None = None) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by descending fuzzy score; ties broken by content."""
    pairs = []
    for i, p in enumerate(predicted):
        for j, e in enumerate(expected):
            s = condition_match_score(p, e, weights)
            if s >= min_score:
                pairs.append((-s, _key(p), _key(e), i, j))
    pairs.sort()
    used_p, used_e, out = set(), set(), []
    for neg, _, _, i, j in pairs:
        if i in used_p or j in used_e:
            continue
        used_p.add(i)
        used_e.add(j)
        out.append((i, j, -neg))
    return out


def _direction_ok(c: AlertCondition) -> bool:
    if c.aggregation in LOWER_BOUND_OPERATORS:
        return c.comparator in ("<", "<=")
    return c.comparator in (">", ">=", "=")


def _threshold_score(c: AlertCondition, expected: Sequence[AlertCondition], p1, p99) -> float:
    if c.threshold is None:
        return 0.0
    errs = [_rel_err(c.threshold, e.threshold) for e in expected if e.threshold is not None]
    best = min(errs) if errs else math.inf
    if best <= 0.1:
        return 1.0
    if p1 is not None and p99 is not None:
        lo, hi = min(p1, p99), max(p1, p99)
        margin = max(hi - lo, 0.1 * max(abs(lo), abs(hi)), 1e-9)
        if lo - margin <= c.threshold <= hi + margin:
            return 1.0
        outside = (lo - margin - c.threshold) if c.threshold < lo - margin else (c.threshold - hi - margin)
        band = max(0.0, 1.0 - outside / margin)
    else:
        band = 0.0
    near = max(0.0, 1.0 - (best - 0.1)) if errs else 0.0
    return max(band, near)


def alert_eval_rules(predicted: Sequence[AlertCondition], expected: Sequence[AlertCondition],
                     p1: float | None = None, p99: float | None = None,
                     weights: dict | None = None) -> AlertEvalScore:
    """Deterministic stand-in for an LLM judge over seven criteria."""
    predicted, expected = list(predicted), list(expected)
    if not predicted:
        ok = float(not expected)
        crit = {c: ok for c in CRITERIA}
        crit["noise_reduction"] = 1.0
        return AlertEvalScore(crit)
    matches = match_conditions(predicted, expected, weights=weights)
    n_p, n_e = len(predicted), len(expected)
    matched_p = {i for i, _, _ in matches}
    valid = [not c.problems() and _direction_ok(c) for c in predicted]
    required = []
    for c in predicted:
        rec = c.to_record()
        required.append(all(rec.get(f) not in (None, "") for f in REQUIRED_FIELDS))
    persistence = []
    for i, j, _ in matches:
        p, e = predicted[i], expected[j]
        persistence.append(1.0 - abs(p.min_violations / p.window - e.min_violations / e.window))
    unmatched_rate = 1.0 - len(matched_p) / n_p
    crit = {
        "threshold_appropriateness": float(np.mean([_threshold_score(c, expected, p1, p99) for c in predicted])),
        "condition_validity": float(np.mean(valid)),
        "incident_detection": (sum(s for _, _, s in matches) / n_e) if n_e else 1.0,
        "noise_reduction": float(np.mean([1.0 - unmatched_rate] + ([np.mean(persistence)] if persistence else []))),
        "specificity": len(matched_p) / n_p if n_e else 0.0,
        "completeness": len(matches) / n_e if n_e else 1.0,
        "required_fields": float(np.mean(required)),
    }
    return AlertEvalScore(crit, matches=matches)


EVAL_PROMPT = """You are evaluating alert recommendations for a cloud service monitor.
Compare the predicted alert conditions against the expected ones and the service context.
Rate each criterion from 0 to 1:
- threshold_appropriateness: thresholds are sensible for the observed values
- condition_validity: operators, comparators and windows are valid
- incident_detection: the predicted alerts would catch the incidents the expected alerts catch
- noise_reduction: the predicted alerts avoid noisy firing
- specificity: predicted alerts target the right expression and dimensions
- completeness: every expected alert has a predicted counterpart
- required_fields: all required fields are present

Context:
{context}

Expected conditions:
{expected}

Predicted conditions:
{predicted}

Respond with a JSON object mapping each criterion name to a number in [0, 1]."""


def _render_conditions(conds: Sequence[AlertCondition]) -> str:
    return "\n".join(f"- {c.describe()}" for c in conds) or "- none"


def alert_eval_llm(context: str, predicted: Sequence[AlertCondition], expected: Sequence[AlertCondition],
                   client: LlmClient, p1: float | None = None, p99: float | None = None) -> AlertEvalScore:
    """LLM judge with clamping; any failure degrades to the rule-based score."""
    prompt = EVAL_PROMPT.format(context=context.strip() or "none available",
                                expected=_render_conditions(expected), predicted=_render_conditions(predicted))
    try:
        raw = json.loads(client.complete(prompt, response_format="json"))
        if not isinstance(raw, dict):
            raise ValueError("judge response is not an object")
        crit, flags = {}, []
        for c in CRITERIA:
            v = float(raw[c])
            if not math.isfinite(v):
                raise ValueError(f"{c} is not finite")
            if v < 0.0 or v > 1.0:
                flags.append(f"clamped:{c}")
                v = min(1.0, max(0.0, v))
            crit[c] = v
        return AlertEvalScore(crit, flags, provenance="llm")
    except Exception as exc:  # transport, JSON and schema failures alike
        log.warning("LLM judge failed (%s); using rule-based scores", exc)
        score = alert_eval_rules(predicted, expected, p1, p99)
        score.provenance = "rules-fallback"
        score.flags.append(f"llm-error:{type(exc).__name__}")
        return score


# run reports

def stable_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:16]


def run_report(results: dict, config: dict, dataset_id: str, clock=time.time) -> dict:
    return {"schema": "monrec.eval_report", "version": 1, "config_hash": stable_hash(config),
            "dataset_hash": dataset_id, "generated_at": clock(), "results": results}
