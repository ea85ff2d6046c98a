"""Alert conditions, prompt construction, LLM/rule synthesis and monitor configs."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Sequence

import jsonschema
import numpy as np

from .llm import LlmClient, LlmTransportError, LlmUnavailable

log = logging.getLogger(__name__)

OPERATORS = ("Count", "Sum", "Average", "Percentile", "Rate", "QoS", "Max", "Min")
COMPARATORS = (">", ">=", "<", "<=", "=")
LOWER_BOUND_OPERATORS = ("QoS", "Min")
DEFAULT_WINDOW = 20
CONFIG_SCHEMA = "monrec.monitor_config"
CONFIG_VERSION = 1

OPERATOR_GLOSSARY = {
    "Count": "number of events in the window, e.g. Count(failed requests) > 50",
    "Sum": "total of the values in the window, e.g. Sum(bytes out) > 8e9",
    "Average": "arithmetic mean over the window, e.g. Average(CPU %) > 85",
    "Percentile": "a percentile of the values, e.g. P99(latency ms) > 500",
    "Rate": "change per unit time, e.g. Rate(errors/s) > 5",
    "QoS": "fraction of successful operations, e.g. QoS(availability %) < 99.9",
    "Max": "largest value in the window, e.g. Max(queue length) > 1000",
    "Min": "smallest value in the window, e.g. Min(free disk GB) < 10",
}


class AlertValidationError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class DanglingReferenceError(ValueError):
    def __init__(self, missing: list[str]):
        super().__init__("dangling references: " + ", ".join(missing))
        self.missing = missing


@dataclass(frozen=True)
class AlertCondition:
    expression: str
    aggregation: str
    dimensions: tuple[str, ...]
    comparator: str
    threshold: float | None
    unit: str = ""
    window: int = DEFAULT_WINDOW
    min_violations: int = DEFAULT_WINDOW
    severity: int = 3
    provenance: str = "fallback"
    source: str = ""
    flags: tuple[str, ...] = ()

    def problems(self) -> list[str]:
        out = []
        if self.aggregation not in OPERATORS:
            out.append(f"aggregation {self.aggregation!r} not in {OPERATORS}")
        if self.comparator not in COMPARATORS:
            out.append(f"comparator {self.comparator!r} not in {COMPARATORS}")
        if not isinstance(self.window, int) or self.window < 1:
            out.append(f"window must be a positive integer, got {self.window!r}")
        elif not isinstance(self.min_violations, int) or not 1 <= self.min_violations <= self.window:
            out.append(f"min_violations must lie in [1, {self.window}], got {self.min_violations!r}")
        if self.threshold is None:
            if self.provenance != "needs-review":
                out.append("threshold missing")
        elif not np.isfinite(self.threshold):
            out.append(f"threshold must be finite, got {self.threshold!r}")
        if not isinstance(self.severity, int) or not 0 <= self.severity <= 4:
            out.append(f"severity must be an integer in [0, 4], got {self.severity!r}")
        if not self.expression:
            out.append("expression reference missing")
        return out

    def validate(self) -> "AlertCondition":
        p = self.problems()
        if p:
            raise AlertValidationError(p)
        return self

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["dimensions"] = list(self.dimensions)
        rec["flags"] = list(self.flags)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "AlertCondition":
        rec = dict(rec)
        rec["dimensions"] = tuple(rec.get("dimensions", ()))
        rec["flags"] = tuple(rec.get("flags", ()))
        thr = rec.get("threshold")
        rec["threshold"] = None if thr is None else float(thr)
        return cls(**rec)

    def describe(self) -> str:
        dims = ", ".join(self.dimensions) or "all"
        thr = "unset" if self.threshold is None else f"{self.threshold:g}{self.unit and ' ' + self.unit}"
        return (f"{self.aggregation}({self.expression}) by [{dims}] {self.comparator} {thr} "
                f"for {self.min_violations}/{self.window} steps, sev {self.severity}")


def comparator_for(operator: str) -> str:
    return "<" if operator in LOWER_BOUND_OPERATORS else ">"


def closed_operator(op: str) -> str:
    return op if op in OPERATORS else "Average"


# synthesis context and prompt

@dataclass
class SimilarMetric:
    key: str
    text: str
    score: float
    conditions: list[AlertCondition] = field(default_factory=list)
    timestamp: float = 0.0


@dataclass
class SynthesisContext:
    account: str
    account_text: str
    metric: str
    metric_text: str
    expression: str
    expression_text: str
    operator: str
    dimensions: list[tuple[str, str]] = field(default_factory=list)
    sampling: str = "Average"
    unit: str = ""
    series: np.ndarray | None = None
    p1: float | None = None
    p99: float | None = None
    similar: list[SimilarMetric] = field(default_factory=list)
    best_practices: list[str] = field(default_factory=list)
    max_similar: int = 5

    def __post_init__(self):
        if self.series is not None:
            self.series = np.asarray(self.series, dtype=np.float64)
            if self.series.size and self.p1 is None:
                self.p1 = float(np.percentile(self.series, 1))
                self.p99 = float(np.percentile(self.series, 99))
        self.similar = list(self.similar)[: self.max_similar]

    @property
    def dimension_keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.dimensions)


@dataclass(frozen=True)
class Prompt:
    text: str
    truncated: bool = False
    dropped: tuple[str, ...] = ()

    def __str__(self) -> str:
        return self.text


OUTPUT_FORMATS = {
    "monrec-json-v1": (
        'Respond with JSON only: {"conditions": [{"expression": str, "aggregation": one of '
        + ", ".join(OPERATORS) + ', "dimensions": [str], "comparator": one of '
        + " ".join(COMPARATORS) + ', "threshold": number, "unit": str, "window": int >= 1, '
        '"min_violations": int in [1, window], "severity": int in [0, 4]}]}'),
}


def estimate_tokens(text: str) -> int:
    return (len(text) + 3) // 4


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def build_prompt(context: SynthesisContext, output_format: str = "monrec-json-v1",
                 token_budget: int = 3000, series_points: int = 48) -> Prompt:
    """Render the synthesis prompt; drops oldest similar metrics to fit the budget."""
    similar = sorted(context.similar, key=lambda s: (-s.timestamp, s.key))
    # newest first, so truncation pops from the tail
    dropped: list[str] = []
    while True:
        text = _render(context, similar, output_format, series_points)
        if estimate_tokens(text) <= token_budget or not similar:
            break
        dropped.append(similar.pop().key)
    return Prompt(text, bool(dropped), tuple(dropped))


def _render(ctx: SynthesisContext, similar: list[SimilarMetric], output_format: str,
            series_points: int) -> str:
    parts = [
        "You are an expert service engineer. Your task is to design the configuration of the "
        "alert expressions and thresholds for the given service.",
        "You will be given the service details such as the name of the service, the metric "
        "(time-series) name, the time series values (if available), the recommended dimensions "
        "and expression, and the alert conditions of similar metrics with best practices.",
        "Glossary of the operators:",
    ]
    parts += [f"- {op}: {OPERATOR_GLOSSARY[op]}" for op in OPERATORS]
    if ctx.series is not None and ctx.series.size:
        step = max(1, ctx.series.size // series_points)
        raw = ", ".join(_fmt(v) for v in ctx.series[::step][:series_points])
    else:
        raw = "none available"
    dims = "; ".join(f"{k} ({t})" for k, t in ctx.dimensions) or "none"
    practices = "; ".join(ctx.best_practices) or "none available"
    parts += [
        "Given service information:",
        f"Account: {ctx.account} - {ctx.account_text}",
        f"Metrics: {ctx.metric} - {ctx.metric_text}",
        f"Dimensions: {dims}",
        f"Expression: {ctx.expression} - {ctx.expression_text} (operator {ctx.operator})",
        f"Sampling Types: {ctx.sampling}",
        f"Raw Timeseries: {raw}",
        f"Percentile data: p1={_fmt(ctx.p1)}, p99={_fmt(ctx.p99)}",
        f"Best practices: {practices}",
        "Below are the alert conditions of similar metrics:",
    ]
    if not similar:
        parts.append("none available")
    for s in similar:
        conds = " | ".join(c.describe() for c in s.conditions) or "no conditions"
        parts.append(f"- {s.key} (similarity {s.score:.3f}): {s.text}; {conds}")
    parts.append("Please generate the alert conditions in the following format:")
    parts.append(OUTPUT_FORMATS[output_format])
    return "\n".join(parts) + "\n"


# synthesis

@dataclass
class SynthesisResult:
    conditions: list[AlertCondition]
    provenance: str
    attempts: int = 0
    errors: list[str] = field(default_factory=list)
    prompt: Prompt | None = None


def parse_llm_conditions(text: str, context: SynthesisContext) -> list[AlertCondition]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlertValidationError([f"response is not JSON: {exc.msg}"]) from exc
    items = doc.get("conditions") if isinstance(doc, dict) else None
    if not isinstance(items, list) or not items:
        raise AlertValidationError(["response needs a non-empty 'conditions' list"])
    out, problems = [], []
    for i, item in enumerate(items):
        try:
            thr = item["threshold"]
            cond = AlertCondition(
                expression=str(item.get("expression") or context.expression),
                aggregation=str(item["aggregation"]),
                dimensions=tuple(str(d) for d in item.get("dimensions", context.dimension_keys)),
                comparator=str(item["comparator"]),
                threshold=float(thr) if isinstance(thr, (int, float)) and not isinstance(thr, bool) else thr,
                unit=str(item.get("unit", context.unit)),
                window=item.get("window", DEFAULT_WINDOW),
                min_violations=item.get("min_violations", item.get("window", DEFAULT_WINDOW)),
                severity=item.get("severity", 3),
                provenance="llm",
                source="llm",
            )
        except (KeyError, TypeError, AttributeError) as exc:
            problems.append(f"condition {i}: missing or malformed field {exc}")
            continue
        if not isinstance(cond.threshold, float):
            problems.append(f"condition {i}: threshold must be a number")
            continue
        p = cond.problems()
        if p:
            problems += [f"condition {i}: {x}" for x in p]
        else:
            out.append(cond)
    if problems:
        raise AlertValidationError(problems)
    return out


def synthesize_llm(context: SynthesisContext, client: LlmClient, retries: int | None = None,
                   output_format: str = "monrec-json-v1") -> SynthesisResult:
    """Ask the LLM, validate, retry with a repair note, else fall back to rules."""
    prompt = build_prompt(context, output_format)
    budget = client.retries if retries is None else retries
    errors: list[str] = []
    text = prompt.text
    attempts = 0
    if client.enabled:
        for attempts in range(1, budget + 2):
            try:
                reply = client.complete(text, output_format)
                conds = parse_llm_conditions(reply, context)
                return SynthesisResult(conds, "llm", attempts, errors, prompt)
            except AlertValidationError as exc:
                errors.append("; ".join(exc.problems))
                text = (prompt.text + "\nYour previous answer was rejected: " + "; ".join(exc.problems)
                        + "\nReturn corrected JSON that satisfies every field constraint.\n")
            except (LlmTransportError, LlmUnavailable) as exc:
                errors.append(str(exc))
                break
    else:
        errors.append("LLM client disabled")
    log.info("alert synthesis for %s fell back to rules: %s", context.metric, errors[-1:])
    conds = synthesize_fallback(context)
    return SynthesisResult(conds, "fallback", attempts, errors, prompt)


def weighted_median(values: Sequence[float], weights: Sequence[float]) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=np.float64)[order]
    w = np.asarray(weights, dtype=np.float64)[order]
    if np.all(w <= 0):
        w = np.ones_like(w)
    cum = np.cumsum(w)
    return float(v[int(np.searchsorted(cum, cum[-1] / 2.0 - 1e-12))])


def synthesize_fallback(context: SynthesisContext) -> list[AlertCondition]:
    """Deterministic rule-based conditions for one (expression, dimensions) pair."""
    flags: list[str] = []
    op = context.operator
    if op not in OPERATORS:
        flags.append(f"operator-mapped:{op}")
        op = closed_operator(op)
    comparator = comparator_for(op)
    threshold = None
    source = ""
    unit = context.unit
    matches = [(c, s.score, s.key) for s in context.similar for c in s.conditions
               if c.aggregation == op and c.threshold is not None]
    if matches:
        thresholds = [c.threshold for c, _, _ in matches]
        threshold = weighted_median(thresholds, [max(w, 0.0) for _, w, _ in matches])
        cond, _, key = next(m for m in matches if m[0].threshold == threshold)
        comparator = cond.comparator
        unit = cond.unit or unit
        source = f"similar:{key}"
    elif context.series is not None and context.series.size:
        upper = comparator in (">", ">=")
        threshold = context.p99 if upper else context.p1
        source = "p99" if upper else "p1"
    if threshold is None:
        return [AlertCondition(context.expression, op, context.dimension_keys, comparator, None, unit,
                               DEFAULT_WINDOW, DEFAULT_WINDOW, 3, "needs-review", "",
                               tuple(flags + ["needs-review"]))]
    severity = 3
    if context.series is not None and context.series.size:
        s = context.series
        exceed = np.mean(s > threshold) if comparator in (">", ">=") else np.mean(s < threshold)
        severity = 2 if exceed < 0.001 else 3
    flags.append("severity-heuristic")
    return [AlertCondition(context.expression, op, context.dimension_keys, comparator, float(threshold),
                           unit, DEFAULT_WINDOW, DEFAULT_WINDOW, severity, "fallback", source,
                           tuple(flags))]


# monitor configuration documents

@dataclass
class MonitorTuple:
    metric: str
    dimensions: tuple[str, ...]
    expression: str
    conditions: list[AlertCondition]


@dataclass
class MonitorConfig:
    monitor: str
    account: str
    tuples: list[MonitorTuple]

    def to_document(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "version": CONFIG_VERSION,
            "monitor": self.monitor,
            "account": self.account,
            "tuples": [{"metric": t.metric, "dimensions": list(t.dimensions), "expression": t.expression,
                        "conditions": [c.to_record() for c in t.conditions]} for t in self.tuples],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"


def config_schema() -> dict:
    return json.loads(resources.files("monrec").joinpath("schemas/monitor_config.schema.json").read_text())


def validate_config_document(doc: dict) -> None:
    jsonschema.validate(doc, config_schema())
    for t in doc["tuples"]:
        for c in t["conditions"]:
            AlertCondition.from_record(c).validate()


def parse_monitor_config(doc: dict | str) -> MonitorConfig:
    if isinstance(doc, str):
        doc = json.loads(doc)
    validate_config_document(doc)
    return MonitorConfig(doc["monitor"], doc["account"], [
        MonitorTuple(t["metric"], tuple(t["dimensions"]), t["expression"],
                     [AlertCondition.from_record(c) for c in t["conditions"]]) for t in doc["tuples"]])


def format_monitor_config(monitor: str, account: str, selections: Sequence[dict],
                          conditions: Sequence[Sequence[AlertCondition]], graph=None) -> MonitorConfig:
    """Assemble a config from ``selections`` ({metric, dimensions, expression})
    and one condition list per selection; references are checked against ``graph``."""
    if len(selections) != len(conditions):
        raise ValueError("one condition list is needed per selection")
    if not selections:
        raise ValueError("a monitor config needs at least one tuple")
    if graph is not None:
        from .graph import NodeKind

        missing = []
        if not graph.has(NodeKind.SERVICE, account):
            missing.append(f"Service:{account}")
        for sel in selections:
            if not graph.has(NodeKind.METRIC, sel["metric"]):
                missing.append(f"Metric:{sel['metric']}")
            for d in sel["dimensions"]:
                if not graph.has(NodeKind.DIMENSION, d):
                    missing.append(f"Dimension:{d}")
            if not graph.has(NodeKind.EXPRESSION, sel["expression"]):
                missing.append(f"Expression:{sel['expression']}")
        if missing:
            raise DanglingReferenceError(missing)
    cfg = MonitorConfig(monitor, account, [
        MonitorTuple(sel["metric"], tuple(sel["dimensions"]), sel["expression"],
                     [replace(c) for c in conds]) for sel, conds in zip(selections, conditions)])
    validate_config_document(cfg.to_document())
    return cfg
