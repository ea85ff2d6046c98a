import json
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monrec.alerts import (COMPARATORS, OPERATORS, AlertCondition, AlertValidationError, DanglingReferenceError,
                           SimilarMetric, SynthesisContext, build_prompt, estimate_tokens, format_monitor_config,
                           parse_monitor_config, synthesize_fallback, synthesize_llm, validate_config_document,
                           weighted_median)
from monrec.graph import EdgeKind, NodeKind
from monrec.llm import LlmClient, LlmTransportError, ReplayClient, StubClient, prompt_key

GOLDEN = Path(__file__).parent / "golden"


def _cond(thr, agg="Average", comp=">"):
    return AlertCondition("avg_latency", agg, ("region",), comp, thr, unit="ms", window=20, min_violations=15)


def golden_context() -> SynthesisContext:
    series = 50 + 10 * np.sin(np.arange(96) / 6.0)
    return SynthesisContext(
        account="payments-api-007", account_text="payments api service: card authorisation",
        metric="payments-api-007/request_latency", metric_text="Request latency (ms)",
        expression="avg_latency", expression_text="Average of latency over the window", operator="Average",
        dimensions=[("region", "Cloud region"), ("endpoint", "API endpoint")], unit="ms", series=series,
        similar=[SimilarMetric("checkout-api-003/request_latency", "Request latency (ms)", 0.91,
                               [_cond(80.0)], timestamp=2.0),
                 SimilarMetric("search-api-010/request_latency", "Request latency (ms)", 0.77,
                               [_cond(90.0)], timestamp=1.0)],
        best_practices=["alert on sustained breaches rather than single spikes"])


def test_prompt_matches_golden():
    prompt = build_prompt(golden_context())
    assert prompt.text == (GOLDEN / "synthesis_prompt.txt").read_text()
    assert not prompt.truncated


def test_prompt_deterministic_and_marks_missing_sections():
    ctx = replace(golden_context(), similar=[], series=None, p1=None, p99=None, best_practices=[])
    a, b = build_prompt(ctx), build_prompt(ctx)
    assert a.text == b.text
    section = a.text.split("Below are the alert conditions of similar metrics:\n")[1]
    assert section.startswith("none available")
    assert "Raw Timeseries: none available" in a.text


def test_prompt_budget_drops_oldest_first():
    ctx = golden_context()
    full = estimate_tokens(build_prompt(ctx).text)
    small = build_prompt(ctx, token_budget=full - 5)
    assert small.truncated and small.dropped == ("search-api-010/request_latency",)
    assert estimate_tokens(small.text) <= full - 5


def test_llm_happy_path_and_replay_fixture():
    ctx = golden_context()
    fixtures = json.loads((GOLDEN / "llm_replay.json").read_text())
    res = synthesize_llm(ctx, ReplayClient(fixtures), retries=0)
    assert res.provenance == "llm" and res.attempts == 1
    expected = [AlertCondition("avg_latency", "Average", ("region", "endpoint"), ">", 85.0, "ms", 20, 15, 2,
                               "llm", "llm")]
    assert res.conditions == expected


def test_llm_repair_then_fallback():
    bad = json.dumps({"conditions": [{"aggregation": "Average", "comparator": ">", "threshold": 80, "window": -1}]})
    client = StubClient(bad)
    res = synthesize_llm(golden_context(), client, retries=1)
    assert res.provenance == "fallback" and res.attempts == 2
    assert "previous answer was rejected" in client.prompts[1]
    assert res.conditions == synthesize_fallback(golden_context())


def test_llm_transport_error_and_disabled_fall_back():
    def down(_p):
        raise LlmTransportError("503")

    assert synthesize_llm(golden_context(), StubClient(down)).provenance == "fallback"
    res = synthesize_llm(golden_context(), LlmClient(mode="disabled"))
    assert res.provenance == "fallback" and res.attempts == 0


def test_fallback_weighted_median_of_similar():
    ctx = golden_context()
    ctx.similar = [SimilarMetric(f"m{i}", "t", 1.0, [_cond(t)]) for i, t in enumerate((80.0, 85.0, 90.0))]
    (c,) = synthesize_fallback(ctx)
    assert c.threshold == 85.0 and c.source == "similar:m1"
    assert synthesize_fallback(ctx) == [c]


def test_fallback_uses_p99_without_similar():
    series = np.linspace(0, 100, 1001)
    ctx = replace(golden_context(), similar=[], series=series, p1=None, p99=None)
    (c,) = synthesize_fallback(ctx)
    ranks = sorted(series)
    # 1001 points: the 99th percentile sits exactly on rank (n - 1) * 0.99 = 990
    assert c.threshold == pytest.approx(ranks[990]) and c.comparator == ">" and c.source == "p99"
    lower = replace(ctx, operator="Min", similar=[])
    (m,) = synthesize_fallback(lower)
    assert m.comparator == "<" and m.threshold == pytest.approx(ranks[10])


def test_fallback_needs_review_and_operator_mapping():
    ctx = replace(golden_context(), similar=[], series=None, p1=None, p99=None, operator="Median")
    (c,) = synthesize_fallback(ctx)
    assert c.threshold is None and c.provenance == "needs-review" and c.aggregation == "Average"
    assert "operator-mapped:Median" in c.flags
    assert c.problems() == []


def test_weighted_median():
    assert weighted_median([3.0, 1.0, 2.0], [1, 1, 1]) == 2.0
    assert weighted_median([1.0, 2.0, 3.0], [0, 0, 5]) == 3.0
    assert weighted_median([1.0, 2.0], [0, 0]) == 1.0


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(OPERATORS), st.sampled_from(COMPARATORS), st.integers(-3, 30), st.integers(-3, 30),
       st.integers(-2, 6))
def test_condition_invariants(op, comp, window, mv, sev):
    c = AlertCondition("e", op, (), comp, 1.0, window=window, min_violations=mv, severity=sev)
    ok = window >= 1 and 1 <= mv <= window and 0 <= sev <= 4
    assert (c.problems() == []) == ok
    if not ok:
        with pytest.raises(AlertValidationError):
            c.validate()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=8, max_size=80))
def test_fallback_threshold_within_percentiles(values):
    ctx = replace(golden_context(), similar=[], series=np.array(values), p1=None, p99=None)
    (c,) = synthesize_fallback(ctx)
    assert np.percentile(values, 1) - 1e-9 <= c.threshold <= np.percentile(values, 99) + 1e-9


def test_config_round_trip_and_schema(small_dataset):
    g = small_dataset.graph
    mon = g.nodes_of(NodeKind.MONITOR)[0]
    metric = g.neighbors(mon, EdgeKind.MONITOR_HAS_METRIC)[0]
    svc = g.reverse_neighbors(mon, EdgeKind.SERVICE_HAS_MONITOR)[0]
    dims = [d.key for d in g.neighbors(mon, EdgeKind.MONITOR_ASSOCIATED_DIMENSION)]
    expr = g.neighbors(mon, EdgeKind.MONITOR_USES_EXPRESSION)[0].key
    sel = [{"metric": metric.key, "dimensions": dims, "expression": expr}]
    cfg = format_monitor_config("m1", svc.key, sel, [[_cond(10.0)]], g)
    assert len(cfg.tuples) == 1
    assert parse_monitor_config(cfg.dumps()) == cfg
    with pytest.raises(DanglingReferenceError, match="Metric:nope"):
        format_monitor_config("m1", svc.key, [{**sel[0], "metric": "nope"}], [[_cond(10.0)]], g)
    with pytest.raises(ValueError):
        format_monitor_config("m1", svc.key, [], [], g)


def test_schema_rejects_bad_documents():
    doc = format_monitor_config("m", "a", [{"metric": "x", "dimensions": [], "expression": "e"}],
                                [[_cond(1.0)]]).to_document()
    validate_config_document(doc)
    broken = json.loads(json.dumps(doc))
    broken["tuples"][0]["conditions"][0]["window"] = 0
    with pytest.raises((jsonschema.ValidationError, AlertValidationError)):
        validate_config_document(broken)
    del broken["tuples"]
    with pytest.raises(jsonschema.ValidationError):
        validate_config_document(broken)


def test_replay_miss_is_transport_error():
    with pytest.raises(LlmTransportError):
        ReplayClient({prompt_key("a"): "b"}).complete("other")
