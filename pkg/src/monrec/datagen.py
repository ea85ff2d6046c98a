"""Synthetic monitor-entity corpora with planted structure.

The generator plants the statistics the recommendation modules rely on:

* monitors use a strict subset of a metric's dimensions for a fixed share of
  monitors, with a co-used core pair per metric family (the correlated
  cluster) and independently drawn extras (the uncorrelated one);
* expression operators follow a fixed mix dominated by Count/Sum/Average;
* monitored metrics carry varying, anomaly-bearing series while unmonitored
  ones are nearly flat;
* alert thresholds of metrics in one family share a centre, so metric
  similarity tracks threshold similarity.

Everything is a pure function of the config and its seed.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .alerts import AlertCondition, comparator_for
from .graph import EdgeKind, EntityGraph, NodeKind, deserialize, serialize
from .similarity import MetricTimeseries

DEFAULT_OPERATOR_MIX = {
    "Count": 0.35, "Sum": 0.28, "Average": 0.20, "Percentile": 0.05, "Rate": 0.04,
    "QoS": 0.03, "Max": 0.02, "Min": 0.02, "Custom": 0.01,
}


@dataclass(frozen=True)
class Family:
    name: str
    phrase: str
    unit: str
    center: float
    shape: str
    core: tuple[str, str]
    operators: tuple[str, ...]
    monitor_rate: float


FAMILIES = (
    Family("cpu", "cpu utilization percent processor load", "%", 80.0, "daily",
           ("region", "vm"), ("Average", "Max", "Percentile"), 0.7),
    Family("memory", "raw ram memory utilization in mbs", "MB", 16000.0, "ramp",
           ("cluster", "node"), ("Average", "Max"), 0.6),
    Family("latency", "request latency milliseconds response time", "ms", 700.0, "spiky",
           ("api", "region"), ("Percentile", "Average"), 0.75),
    Family("requests", "incoming request count throughput calls", "count", 50000.0, "daily",
           ("api", "tenant"), ("Count", "Sum", "Rate"), 0.5),
    Family("errors", "failed requests error count exceptions", "count", 10.0, "bursts",
           ("statuscode", "api"), ("Count", "Rate", "Sum"), 0.7),
    Family("disk", "disk space usage free storage gigabytes", "GB", 2000.0, "ramp",
           ("node", "volume"), ("Max", "Average", "Min"), 0.4),
    Family("network", "network bytes transferred egress bandwidth", "MB/s", 250.0, "square",
           ("datacenter", "nic"), ("Sum", "Average", "Rate"), 0.35),
    Family("queue", "message queue depth backlog length", "items", 30.0, "sawtooth",
           ("partition", "queuename"), ("Max", "Count", "Sum"), 0.45),
    Family("availability", "availability success rate qos heartbeat", "%", 99.9, "dips",
           ("region", "endpoint"), ("QoS", "Min", "Average"), 0.65),
    Family("jobs", "batch job duration runs completed", "s", 7200.0, "square",
           ("jobtype", "cluster"), ("Count", "Sum", "Max"), 0.3),
)

DIM_TYPES = {
    "region": "geographic region location geo",
    "datacenter": "datacenter facility site",
    "cluster": "compute cluster ring",
    "node": "host node machine",
    "vm": "virtual machine instance vm",
    "tenant": "customer tenant subscription",
    "api": "api operation name route",
    "endpoint": "service endpoint url",
    "statuscode": "http status result code",
    "volume": "storage volume disk mount",
    "nic": "network interface nic",
    "partition": "queue partition shard",
    "queuename": "queue topic name",
    "jobtype": "batch job type pipeline",
    "sku": "hardware sku tier",
    "version": "build release version",
    "os": "operating system image",
    "replica": "replica role primary secondary",
    "rack": "server rack enclosure",
    "protocol": "network protocol transport",
    "tier": "customer pricing tier plan",
    "feature": "feature flag experiment",
}
DIM_VARIANTS = ("", "Name", "Id", "Code", "Group", "Label", "Key", "Tag", "Zone", "Scope",
                "Primary", "Logical", "Physical", "Display", "Internal", "Canonical")

SERVICE_TYPES = {
    "web": ("web frontend serving customer traffic", "tenant"),
    "storage": ("distributed blob storage service", "volume"),
    "batch": ("batch processing and scheduled pipelines", "jobtype"),
    "database": ("managed relational database", "node"),
    "messaging": ("message broker and event bus", "partition"),
    "auth": ("identity and authentication provider", "endpoint"),
    "analytics": ("analytics query engine", "cluster"),
    "inference": ("machine learning inference serving", "sku"),
    "network": ("software defined networking gateway", "datacenter"),
    "billing": ("billing and metering service", "version"),
}
SERVICE_WORDS = ("contoso", "fabrikam", "northwind", "adatum", "tailspin", "litware",
                 "proseware", "wingtip", "woodgrove", "alpine", "lucerne", "margie")
METRIC_QUALIFIERS = ("total", "avg", "raw", "p95", "sampled", "per second", "aggregate",
                     "instance", "backend", "frontend", "primary", "secondary")


class InfeasibleConfigError(ValueError):
    pass


@dataclass
class GenConfig:
    services: int = 100
    monitors: int = 1000
    metrics: int = 700
    dimensions: int = 350
    expressions: int = 500
    degree_exponent: float = 1.5
    subset_rate: float = 0.94
    operator_mix: dict = field(default_factory=lambda: dict(DEFAULT_OPERATOR_MIX))
    correlation_clusters: int = 2
    similarity_threshold_corr: float = 0.4
    series_length: int = 128
    anomaly_rate: float = 0.02
    label_noise: float = 0.05
    candidate_range: tuple[int, int] = (12, 20)
    convention_rate: float = 0.85
    extra_rate: float = 0.12
    seed: int = 7

    def validate(self) -> None:
        for name in ("services", "monitors", "metrics", "dimensions", "expressions", "series_length"):
            if getattr(self, name) <= 0:
                raise InfeasibleConfigError(f"{name} must be positive")
        for name in ("subset_rate", "similarity_threshold_corr", "anomaly_rate", "convention_rate", "extra_rate"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise InfeasibleConfigError(f"{name} must lie in (0, 1)")
        if not 0.0 <= self.label_noise < 0.5:
            raise InfeasibleConfigError("label_noise must lie in [0, 0.5)")
        if abs(sum(self.operator_mix.values()) - 1.0) > 1e-9:
            raise InfeasibleConfigError("operator_mix must sum to 1")
        lo, hi = self.candidate_range
        if not 3 <= lo <= hi:
            raise InfeasibleConfigError(f"candidate_range {self.candidate_range} is invalid")
        if hi > len(DIM_TYPES):
            raise InfeasibleConfigError(f"candidate_range upper bound {hi} exceeds {len(DIM_TYPES)} dimension types")
        if self.dimensions < len(DIM_TYPES):
            raise InfeasibleConfigError(f"need at least {len(DIM_TYPES)} dimensions, one per type")
        if self.metrics < self.services:
            raise InfeasibleConfigError("need at least one metric per service")
        if self.expressions < len(FAMILIES):
            raise InfeasibleConfigError(f"need at least {len(FAMILIES)} expressions, one per family")
        if self.series_length < 16:
            raise InfeasibleConfigError("series_length must be at least 16")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["candidate_range"] = list(self.candidate_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        if "candidate_range" in d:
            d["candidate_range"] = tuple(d["candidate_range"])
        return cls(**d)


@dataclass
class GroundTruth:
    monitor_dimensions: dict[str, list[str]]
    monitor_expression: dict[str, str]
    monitor_metric: dict[str, str]
    monitor_service: dict[str, str]
    conditions: dict[str, list[AlertCondition]]
    metric_label: dict[str, int]
    metric_family: dict[str, str]
    metric_service: dict[str, str]
    metric_threshold: dict[str, float]
    metric_timestamp: dict[str, float]
    expression_operator: dict[str, str]
    dimension_type: dict[str, str]
    service_type: dict[str, str]
    service_dependencies: dict[str, list[str]]
    candidate_edges: list[tuple[str, str]]

    def to_document(self) -> dict:
        d = asdict(self)
        d["conditions"] = {k: [c.to_record() for c in v] for k, v in self.conditions.items()}
        d["candidate_edges"] = [list(e) for e in self.candidate_edges]
        return {"schema": "monrec.truth", "version": 1, **d}

    @classmethod
    def from_document(cls, doc: dict) -> "GroundTruth":
        doc = {k: v for k, v in doc.items() if k not in ("schema", "version")}
        doc["conditions"] = {k: [AlertCondition.from_record(c) for c in v] for k, v in doc["conditions"].items()}
        doc["candidate_edges"] = [tuple(e) for e in doc["candidate_edges"]]
        return cls(**doc)


@dataclass
class Dataset:
    graph: EntityGraph
    series: dict[str, MetricTimeseries]
    truth: GroundTruth
    config: GenConfig

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "graph.jsonl").write_text(serialize(self.graph))
        with open(d / "timeseries.jsonl", "w") as fh:
            fh.write(json.dumps({"schema": "monrec.timeseries", "version": 1}) + "\n")
            for key in sorted(self.series):
                fh.write(json.dumps(self.series[key].to_record()) + "\n")
        (d / "truth.json").write_text(json.dumps(self.truth.to_document(), sort_keys=True))
        (d / "config.json").write_text(json.dumps(self.config.to_dict(), sort_keys=True, indent=2))
        return d

    @classmethod
    def load(cls, directory: str | Path) -> "Dataset":
        d = Path(directory)
        graph = deserialize((d / "graph.jsonl").read_text())
        series = {}
        lines = (d / "timeseries.jsonl").read_text().splitlines()
        for line in lines[1:]:
            if line.strip():
                ts = MetricTimeseries.from_record(json.loads(line))
                series[ts.metric] = ts
        truth = GroundTruth.from_document(json.loads((d / "truth.json").read_text()))
        config = GenConfig.from_dict(json.loads((d / "config.json").read_text()))
        return cls(graph, series, truth, config)


def stratified_counts(mix: dict[str, float], n: int) -> dict[str, int]:
    """Largest-remainder allocation of ``n`` items to the mix proportions."""
    raw = {k: v * n for k, v in mix.items()}
    counts = {k: int(np.floor(v)) for k, v in raw.items()}
    rest = n - sum(counts.values())
    for k in sorted(raw, key=lambda k: (-(raw[k] - counts[k]), k))[:rest]:
        counts[k] += 1
    return counts


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def generate(config: GenConfig | None = None) -> Dataset:
    config = config or GenConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    g = EntityGraph()
    fam_by_name = {f.name: f for f in FAMILIES}
    type_names = list(DIM_TYPES)

    # services
    stypes = list(SERVICE_TYPES)
    services, service_type, deps = [], {}, {}
    for i in range(config.services):
        st = stypes[i % len(stypes)]
        word = SERVICE_WORDS[int(rng.integers(len(SERVICE_WORDS)))]
        key = f"{st}-{word}-{i:03d}"
        desc, _ = SERVICE_TYPES[st]
        g.add_node(NodeKind.SERVICE, key, f"{word} {st} service: {desc}")
        services.append(key)
        service_type[key] = st
    for s in services:
        k = int(rng.integers(0, 3))
        others = [o for o in services if o != s]
        deps[s] = sorted(rng.choice(others, size=min(k, len(others)), replace=False).tolist()) if k else []

    # dimensions, spread evenly over types, Zipf popularity within a type
    per_type = {t: [] for t in type_names}
    dim_type = {}
    for i in range(config.dimensions):
        t = type_names[i % len(type_names)]
        j = len(per_type[t])
        variant = DIM_VARIANTS[j % len(DIM_VARIANTS)]
        key = f"{t}{variant}{'' if j < len(DIM_VARIANTS) else j // len(DIM_VARIANTS)}".lower()
        g.add_node(NodeKind.DIMENSION, key, f"{t} {variant.lower()} dimension: {DIM_TYPES[t]}".replace("  ", " "))
        per_type[t].append(key)
        dim_type[key] = t
    type_weights = {t: _zipf(len(v), config.degree_exponent) for t, v in per_type.items()}

    # metrics
    metric_service, metric_family, metric_ts, metric_label = {}, {}, {}, {}
    metric_keys = []
    owner = [services[i % len(services)] for i in range(config.metrics)]
    owner = [owner[i] for i in rng.permutation(len(owner))]
    fam_weights = np.array([1.0] * len(FAMILIES))
    for i in range(config.metrics):
        svc = owner[i]
        fam = FAMILIES[int(rng.choice(len(FAMILIES), p=fam_weights / fam_weights.sum()))]
        qual = METRIC_QUALIFIERS[int(rng.integers(len(METRIC_QUALIFIERS)))]
        key = f"{svc}/{fam.name}_{qual.replace(' ', '_')}_{i:04d}"
        g.add_node(NodeKind.METRIC, key, f"{qual} {fam.phrase} ({fam.unit}) emitted by {svc}")
        metric_keys.append(key)
        metric_service[key] = svc
        metric_family[key] = fam.name
        metric_ts[key] = float(rng.uniform(0, 1000))
    # monitoring status: a per (service type, family) policy plus label noise,
    # so both global (family) and local (account type) signals matter;
    # every service still monitors at least one metric
    policy = {(st, f.name): bool(rng.random() < f.monitor_rate) for st in stypes for f in FAMILIES}
    monitored = set()
    by_service: dict[str, list[str]] = {}
    for m in metric_keys:
        by_service.setdefault(metric_service[m], []).append(m)
    for svc, ms in by_service.items():
        for m in ms:
            on = policy[(service_type[svc], metric_family[m])]
            if rng.random() < config.label_noise:
                on = not on
            if on:
                monitored.add(m)
        if not any(m in monitored for m in ms):
            monitored.add(ms[int(rng.integers(len(ms)))])
    for m in metric_keys:
        metric_label[m] = int(m in monitored)

    # candidate dimensions: family core, service convention, random extras
    metric_dims: dict[str, dict[str, str]] = {}
    candidate_edges = []
    lo, hi = config.candidate_range
    for m in metric_keys:
        fam = fam_by_name[metric_family[m]]
        conv = SERVICE_TYPES[service_type[metric_service[m]]][1]
        want = list(dict.fromkeys(list(fam.core) + [conv]))
        size = int(rng.integers(lo, hi + 1))
        rest = [t for t in type_names if t not in want]
        want += rng.choice(rest, size=max(0, size - len(want)), replace=False).tolist()
        chosen = {}
        for t in want:
            chosen[t] = per_type[t][int(rng.choice(len(per_type[t]), p=type_weights[t]))]
        metric_dims[m] = chosen
        for t in sorted(chosen, key=lambda t: g.get(NodeKind.DIMENSION, chosen[t]).id):
            g.add_edge(g.get(NodeKind.METRIC, m), g.get(NodeKind.DIMENSION, chosen[t]), EdgeKind.METRIC_HAS_DIMENSION)
            candidate_edges.append((m, chosen[t]))

    # expressions: per-family catalogue, operators allocated exactly to the mix
    op_counts = stratified_counts(config.operator_mix, config.expressions)
    ops = [op for op in sorted(op_counts) for _ in range(op_counts[op])]
    ops = [ops[i] for i in rng.permutation(len(ops))]
    expr_family, expr_op, catalogue = {}, {}, {f.name: [] for f in FAMILIES}
    for i, op in enumerate(ops):
        fam = FAMILIES[i % len(FAMILIES)]
        t = fam.core[i // len(FAMILIES) % 2]
        key = f"expr-{fam.name}-{op.lower()}-{i:04d}"
        g.add_node(NodeKind.EXPRESSION, key, f"{op} of {fam.phrase} by {t}")
        expr_family[key] = fam.name
        expr_op[key] = op
        catalogue[fam.name].append(key)
        d = per_type[t][int(rng.choice(len(per_type[t]), p=type_weights[t]))]
        g.add_edge(g.get(NodeKind.DIMENSION, d), g.get(NodeKind.EXPRESSION, key), EdgeKind.DIMENSION_USES_EXPRESSION)
    metric_exprs: dict[str, list[str]] = {}
    for m in metric_keys:
        cat = catalogue[metric_family[m]]
        k = min(len(cat), int(rng.integers(6, 11)))
        fam = fam_by_name[metric_family[m]]
        preferred = [e for e in cat if expr_op[e] in fam.operators]
        picks = list(rng.choice(preferred, size=min(len(preferred), 3), replace=False)) if preferred else []
        others = [e for e in cat if e not in picks]
        picks += list(rng.choice(others, size=max(0, min(len(others), k - len(picks))), replace=False))
        metric_exprs[m] = sorted(picks, key=lambda e: g.get(NodeKind.EXPRESSION, e).id)
        for e in metric_exprs[m]:
            g.add_edge(g.get(NodeKind.METRIC, m), g.get(NodeKind.EXPRESSION, e), EdgeKind.METRIC_USES_EXPRESSION)

    # thresholds: family centre times a family-shared spread
    sigma = _threshold_spread(config.similarity_threshold_corr)
    metric_threshold = {}
    for m in metric_keys:
        fam = fam_by_name[metric_family[m]]
        if fam.operators[0] in ("QoS", "Min") and fam.center < 100:
            metric_threshold[m] = float(round(fam.center - abs(rng.normal(0, sigma)) * 2, 3))
        else:
            metric_threshold[m] = float(round(fam.center * np.exp(rng.normal(0, sigma)), 3))

    # monitors
    mon_list = sorted(monitored, key=lambda m: g.get(NodeKind.METRIC, m).id)
    if config.monitors < len(mon_list):
        raise InfeasibleConfigError(f"{config.monitors} monitors cannot cover {len(mon_list)} monitored metrics")
    assign = list(mon_list) + list(rng.choice(mon_list, size=config.monitors - len(mon_list)))
    assign = [assign[i] for i in rng.permutation(len(assign))]
    n_full = config.monitors - int(round(config.subset_rate * config.monitors))
    full_set = set(rng.choice(config.monitors, size=n_full, replace=False).tolist())
    mon_dims, mon_expr, mon_metric, mon_service, conditions = {}, {}, {}, {}, {}
    for i, m in enumerate(assign):
        svc = metric_service[m]
        fam = fam_by_name[metric_family[m]]
        st = service_type[svc]
        key = f"mon-{i:04d}"
        intent = ("high", "low", "spike", "sustained", "degraded")[int(rng.integers(5))]
        g.add_node(NodeKind.MONITOR, key, f"{svc} {st} {intent} {fam.phrase} monitor")
        mon_metric[key] = m
        mon_service[key] = svc
        cand = metric_dims[m]
        if i in full_set:
            dims_t = list(cand)
        else:
            conv = SERVICE_TYPES[st][1]
            dims_t = list(fam.core)
            if conv in cand and conv not in dims_t and rng.random() < config.convention_rate:
                dims_t.append(conv)
            for t in cand:
                if t not in dims_t and rng.random() < config.extra_rate:
                    dims_t.append(t)
            if len(dims_t) >= len(cand):
                extra = [t for t in dims_t if t not in fam.core]
                dims_t.remove(extra[-1])
        mon_dims[key] = sorted((cand[t] for t in dims_t), key=lambda d: g.get(NodeKind.DIMENSION, d).id)
        # expression: family operator preference first, Zipf-popular catalogue entry within it
        exprs = metric_exprs[m]
        scores = []
        for e in exprs:
            op = expr_op[e]
            rank = fam.operators.index(op) if op in fam.operators else len(fam.operators) + 1
            scores.append(rank + 0.15 * catalogue[fam.name].index(e) / len(catalogue[fam.name]))
        noise = rng.random() < 0.1
        e = exprs[int(rng.integers(len(exprs)))] if noise else exprs[int(np.argmin(scores))]
        mon_expr[key] = e
        op = expr_op[e] if expr_op[e] in fam.operators else fam.operators[0]
        thr = metric_threshold[m] * (1.0 + rng.normal(0, 0.02))
        window = int(rng.choice([5, 10, 15, 20]))
        conditions[key] = [AlertCondition(
            expression=e, aggregation=op, dimensions=tuple(mon_dims[key]), comparator=comparator_for(op),
            threshold=float(round(thr, 3)), unit=fam.unit, window=window,
            min_violations=int(rng.integers(max(1, window // 2), window + 1)),
            severity=int(rng.choice([2, 3, 4])), provenance="planted", source="generator")]
        node = g.get(NodeKind.MONITOR, key)
        g.add_edge(g.get(NodeKind.SERVICE, svc), node, EdgeKind.SERVICE_HAS_MONITOR)
        g.add_edge(node, g.get(NodeKind.METRIC, m), EdgeKind.MONITOR_HAS_METRIC)
        for d in mon_dims[key]:
            g.add_edge(node, g.get(NodeKind.DIMENSION, d), EdgeKind.MONITOR_ASSOCIATED_DIMENSION)
        g.add_edge(node, g.get(NodeKind.EXPRESSION, e), EdgeKind.MONITOR_USES_EXPRESSION)

    series = {m: _series(rng, m, fam_by_name[metric_family[m]], metric_label[m], metric_threshold[m], config)
              for m in metric_keys}
    truth = GroundTruth(
        monitor_dimensions=mon_dims, monitor_expression=mon_expr, monitor_metric=mon_metric,
        monitor_service=mon_service, conditions=conditions, metric_label=metric_label,
        metric_family=metric_family, metric_service=metric_service, metric_threshold=metric_threshold,
        metric_timestamp=metric_ts, expression_operator=expr_op, dimension_type=dim_type,
        service_type=service_type, service_dependencies=deps, candidate_edges=candidate_edges)
    g.validate()
    return Dataset(g, series, truth, config)


def _threshold_spread(target_corr: float) -> float:
    # lognormal spread around the family centre; a tighter spread yields a
    # stronger similarity/threshold link. Linear fit of measured correlation
    # against spread on the default vocabulary: corr ~= 0.50 - 0.38 * spread.
    return float(np.clip((0.50 - target_corr) / 0.38, 0.02, 2.0))


def _shape(rng: np.random.Generator, shape: str, n: int) -> np.ndarray:
    t = np.arange(n)
    period = float(rng.uniform(20, 40))
    phase = float(rng.uniform(0, 2 * np.pi))
    if shape == "daily":
        return np.sin(2 * np.pi * t / period + phase)
    if shape == "ramp":
        return np.linspace(-1, 1, n) + 0.2 * np.sin(2 * np.pi * t / period + phase)
    if shape == "sawtooth":
        return 2 * ((t / period + phase) % 1.0) - 1
    if shape == "square":
        return np.sign(np.sin(2 * np.pi * t / period + phase))
    if shape == "spiky":
        out = np.zeros(n)
        out[rng.choice(n, size=max(2, n // 25), replace=False)] = 3.0
        return out
    if shape == "bursts":
        out = np.zeros(n)
        for s in rng.choice(n - 6, size=max(1, n // 40), replace=False):
            out[s:s + 5] = 2.0
        return out
    if shape == "dips":
        out = np.zeros(n)
        out[rng.choice(n, size=max(2, n // 30), replace=False)] = -3.0
        return out
    raise ValueError(f"unknown shape {shape!r}")


def _series(rng: np.random.Generator, metric: str, fam: Family, label: int, threshold: float,
            config: GenConfig) -> MetricTimeseries:
    n = config.series_length
    ts = np.arange(n, dtype=np.float64) * 60.0
    level = threshold * (0.6 if fam.operators[0] not in ("QoS", "Min") else 1.0)
    if fam.name == "availability":
        level = threshold + 0.05
    if label:
        amp = abs(level) * 0.15 if fam.name != "availability" else 0.03
        values = level + amp * _shape(rng, fam.shape, n) + rng.normal(0, amp * 0.1, n)
        k = rng.binomial(n, config.anomaly_rate)
        if k:
            idx = rng.choice(n, size=k, replace=False)
            values[idx] += amp * rng.uniform(2, 4, size=k) * (-1 if fam.name == "availability" else 1)
    else:
        values = level + rng.normal(0, abs(level) * 1e-4 + 1e-6, n)
    return MetricTimeseries(metric, ts, values, resource=f"res-{metric.split('/')[0]}", sampling=fam.operators[0])


# metric-selection datasets

@dataclass
class SelectRecord:
    account: str
    metric: str
    service_text: str
    dependency_text: str
    metric_text: str
    dimension_texts: list[str]
    label: int
    timestamp: float
    cluster: int = 0

    def to_record(self) -> dict:
        return asdict(self)


def select_records_from_dataset(ds: Dataset) -> list[SelectRecord]:
    """Training records for metric selection derived from a generated corpus."""
    g, tr = ds.graph, ds.truth
    out = []
    for m in g.nodes_of(NodeKind.METRIC):
        svc = tr.metric_service[m.key]
        out.append(SelectRecord(
            account=svc, metric=m.key, service_text=g.get(NodeKind.SERVICE, svc).ontology,
            dependency_text="; ".join(g.get(NodeKind.SERVICE, d).ontology for d in tr.service_dependencies[svc]),
            metric_text=m.ontology, dimension_texts=[d.ontology for d in g.candidate_dimensions(m)],
            label=tr.metric_label[m.key], timestamp=tr.metric_timestamp[m.key]))
    return out


def generate_select_dataset(kind: str = "separable", n_metrics: int = 700, n_accounts: int = 20,
                            seed: int = 0) -> list[SelectRecord]:
    """Metric-selection records with a planted labelling rule.

    ``separable``: the label is a function of the metric family alone.
    ``local``: accounts come in types and each type flips the label of a
    couple of families, so the right answer depends on the account context.
    ``null``: labels are fair coin flips independent of every feature.
    """
    if kind not in ("separable", "local", "null"):
        raise ValueError(f"unknown select dataset kind {kind!r}")
    rng = np.random.default_rng(seed)
    stypes = list(SERVICE_TYPES)
    fam_names = [f.name for f in FAMILIES]
    base = {f: int(i % 2 == 0) for i, f in enumerate(fam_names)}
    flips = {st: set(rng.choice(fam_names, size=3, replace=False).tolist()) for st in stypes}
    accounts = []
    for a in range(n_accounts):
        st = stypes[a % len(stypes)]
        word = SERVICE_WORDS[int(rng.integers(len(SERVICE_WORDS)))]
        accounts.append((f"{st}-{word}-{a:03d}", st, f"{word} {st} service: {SERVICE_TYPES[st][0]}"))
    records = []
    for i in range(n_metrics):
        acc, st, stext = accounts[i % n_accounts]
        fam = FAMILIES[int(rng.integers(len(FAMILIES)))]
        qual = METRIC_QUALIFIERS[int(rng.integers(len(METRIC_QUALIFIERS)))]
        label = base[fam.name]
        if kind == "local" and fam.name in flips[st]:
            label = 1 - label
        if kind == "null":
            label = int(rng.random() < 0.5)
        dims = [f"{t} dimension: {DIM_TYPES[t]}" for t in fam.core]
        records.append(SelectRecord(
            account=acc, metric=f"{acc}/{fam.name}_{i:04d}", service_text=stext,
            dependency_text="", metric_text=f"{qual} {fam.phrase} ({fam.unit})",
            dimension_texts=dims, label=label, timestamp=float(rng.uniform(0, 1000)),
            cluster=fam_names.index(fam.name)))
    return records


# statistical validation

@dataclass
class StatsReport:
    subset_fraction: float
    top3_operator_share: float
    listed_operator_share: float
    correlation_silhouette: float
    correlation_centers: tuple[float, float]
    similarity_threshold_corr: float
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def subset_fraction(graph: EntityGraph) -> float:
    strict, total = 0, 0
    for mon in graph.nodes_of(NodeKind.MONITOR):
        used = {d.id for d in graph.neighbors(mon, EdgeKind.MONITOR_ASSOCIATED_DIMENSION)}
        emitted = set()
        for m in graph.neighbors(mon, EdgeKind.MONITOR_HAS_METRIC):
            emitted |= {d.id for d in graph.candidate_dimensions(m)}
        if not emitted:
            continue
        total += 1
        strict += int(used < emitted)
    return strict / total if total else 0.0


def operator_shares(graph: EntityGraph, operator_of: dict[str, str] | None = None) -> tuple[float, float]:
    ops = []
    for e in graph.nodes_of(NodeKind.EXPRESSION):
        ops.append(operator_of[e.key] if operator_of else e.ontology.split(" ", 1)[0])
    if not ops:
        return 0.0, 0.0
    ops = np.array(ops)
    top3 = np.isin(ops, ["Count", "Sum", "Average"]).mean()
    listed = np.isin(ops, ["Count", "Sum", "Average", "Percentile", "Rate", "QoS", "Max", "Min"]).mean()
    return float(top3), float(listed)


def dimension_correlations(graph: EntityGraph, min_support: int = 8) -> np.ndarray:
    """Phi correlation of co-usage for dimension pairs used together by some monitor.

    For each pair, the sample is the monitors whose metric emits both
    dimensions; the indicator is whether the monitor aggregates along each.
    """
    usage: dict[int, tuple[set, set]] = {}
    for mon in graph.nodes_of(NodeKind.MONITOR):
        used = {d.id for d in graph.neighbors(mon, EdgeKind.MONITOR_ASSOCIATED_DIMENSION)}
        emitted = set()
        for m in graph.neighbors(mon, EdgeKind.MONITOR_HAS_METRIC):
            emitted |= {d.id for d in graph.candidate_dimensions(m)}
        usage[mon.id] = (used, emitted)
    pairs = set()
    for used, _ in usage.values():
        u = sorted(used)
        pairs.update((a, b) for i, a in enumerate(u) for b in u[i + 1:])
    out = []
    for a, b in sorted(pairs):
        xa, xb = [], []
        for used, emitted in usage.values():
            if a in emitted and b in emitted:
                xa.append(a in used)
                xb.append(b in used)
        if len(xa) < min_support:
            continue
        xa, xb = np.array(xa, float), np.array(xb, float)
        if xa.std() == 0 or xb.std() == 0:
            continue
        out.append(float(np.corrcoef(xa, xb)[0, 1]))
    return np.array(out)


def two_cluster_silhouette(values: np.ndarray) -> tuple[float, tuple[float, float]]:
    """1-D two-means clustering; returns mean silhouette and sorted centres."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size < 4 or v[0] == v[-1]:
        return 0.0, (float(v.mean()) if v.size else 0.0,) * 2
    best = None
    for cut in range(1, v.size):
        a, b = v[:cut], v[cut:]
        sse = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if best is None or sse < best[0]:
            best = (sse, cut)
    cut = best[1]
    labels = np.r_[np.zeros(cut, int), np.ones(v.size - cut, int)]
    sil = []
    for i, x in enumerate(v):
        same = v[labels == labels[i]]
        other = v[labels != labels[i]]
        a = np.abs(same - x).sum() / max(1, same.size - 1)
        b = np.abs(other - x).mean()
        sil.append(0.0 if same.size == 1 else (b - a) / max(a, b))
    return float(np.mean(sil)), (float(v[:cut].mean()), float(v[cut:].mean()))


def similarity_threshold_correlation(ds: Dataset, pairs: int = 1500, seed: int = 0,
                                     thresholds: dict[str, float] | None = None, index=None) -> float:
    """Pearson correlation between metric similarity and threshold similarity
    over random metric pairs with the same comparator direction."""
    from .similarity import MetricProfile, SimilarityIndex, threshold_similarity

    thresholds = thresholds or ds.truth.metric_threshold
    index = index or SimilarityIndex()
    rng = np.random.default_rng(seed)
    keys = sorted(k for k, lab in ds.truth.metric_label.items() if lab)
    fam = ds.truth.metric_family
    prof = {k: MetricProfile(k, ds.graph.get(NodeKind.METRIC, k).ontology, ds.series.get(k)) for k in keys}
    xs, ys = [], []
    while len(xs) < pairs:
        a, b = rng.choice(len(keys), size=2, replace=False)
        ka, kb = keys[a], keys[b]
        da = "lower" if fam[ka] == "availability" else "upper"
        db = "lower" if fam[kb] == "availability" else "upper"
        if da != db:
            continue
        xs.append(index.similarity(prof[ka], prof[kb]).combined)
        ys.append(threshold_similarity(thresholds[ka], thresholds[kb]))
    return float(np.corrcoef(xs, ys)[0, 1])


def validate_stats(ds: Dataset, corr_pairs: int = 1500, corr_tolerance: float = 0.1) -> StatsReport:
    cfg = ds.config
    sub = subset_fraction(ds.graph)
    top3, listed = operator_shares(ds.graph)
    mix = cfg.operator_mix
    target_top3 = mix.get("Count", 0) + mix.get("Sum", 0) + mix.get("Average", 0)
    corrs = dimension_correlations(ds.graph)
    sil, centers = two_cluster_silhouette(corrs) if corrs.size else (0.0, (0.0, 0.0))
    st_corr = similarity_threshold_correlation(ds, pairs=corr_pairs)
    checks = {
        "subset_fraction": abs(sub - cfg.subset_rate) <= 0.03,
        "top3_operator_share": abs(top3 - target_top3) <= 0.03,
        "listed_operator_share": listed >= 0.95,
        "dimension_correlation_bimodal": sil >= 0.5 and centers[1] - centers[0] >= 0.4,
        "similarity_threshold_corr": abs(st_corr - cfg.similarity_threshold_corr) <= corr_tolerance,
    }
    return StatsReport(sub, top3, listed, sil, centers, st_corr, checks)
