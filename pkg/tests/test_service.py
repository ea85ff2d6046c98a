import io
import json
import socket
import threading

import pytest

from monrec.graph import EDGE_SCHEMA, EdgeKind, NodeKind
from monrec.pipeline import PipelineOptions, Recommender, account_metrics, feedback_graph
from monrec.service import (BundleStore, FeedbackError, FeedbackLog, FeedbackRecord, RecommendationService,
                            config_edges, replay)
from conftest import small_run_config


@pytest.fixture
def service(small_dataset, small_models, tmp_path):
    _, models, _ = small_models
    store = BundleStore(tmp_path / "bundles")
    log = FeedbackLog(tmp_path / "feedback.jsonl", store)
    return RecommendationService(Recommender(small_dataset, models, small_run_config()), store, log)


def _ok_request(small_dataset):
    acct = sorted(s.key for s in small_dataset.graph.nodes_of(NodeKind.SERVICE))[0]
    return {"op": "recommend", "account": acct,
            "options": {"metrics": account_metrics(small_dataset.graph, acct)[:2]}}


def test_recommend_matches_direct_pipeline(service, small_dataset):
    req = _ok_request(small_dataset)
    resp = service.handle(req)
    assert resp["ok"]
    direct = service.recommender.run(req["account"], PipelineOptions(**req["options"]))
    assert resp["bundle"] == direct.to_document()
    assert service.store.get(resp["bundle"]["bundle_id"]) == resp["bundle"]


@pytest.mark.parametrize("request_, kind", [
    ({"op": "dance"}, "request"), ([1, 2], "request"), ({"op": "recommend"}, "request"),
    ({"op": "recommend", "account": "nope"}, "stage"),
    ({"op": "recommend", "account": "x", "options": {"bogus": 1}}, "request"),
    ({"op": "feedback", "record": {"bundle_id": "missing", "verdict": "accepted"}}, "feedback"),
])
def test_structured_errors(service, request_, kind):
    resp = service.handle(request_)
    assert resp["ok"] is False and resp["error"]["type"] == kind


def test_stream_and_malformed_lines(service, small_dataset):
    lines = "not json\n\n" + json.dumps(_ok_request(small_dataset)) + "\n"
    out = io.StringIO()
    assert service.serve_stream(io.StringIO(lines), out) == 2
    first, second = [json.loads(x) for x in out.getvalue().splitlines()]
    assert first["error"]["type"] == "parse" and second["ok"]


def test_socket_round_trip(service, small_dataset):
    server = service.serve_socket("127.0.0.1", 0)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    try:
        with socket.create_connection(server.server_address, timeout=30) as sock:
            sock.sendall((json.dumps(_ok_request(small_dataset)) + "\n").encode())
            reply = json.loads(sock.makefile().readline())
        assert reply == json.loads(service.handle_line(json.dumps(_ok_request(small_dataset))))
    finally:
        server.shutdown()
        server.server_close()


def test_feedback_rejection_leaves_log_unchanged(service, small_dataset):
    bundle = service.handle(_ok_request(small_dataset))["bundle"]
    service.feedback.ingest({"bundle_id": bundle["bundle_id"], "verdict": "accepted"}, clock=lambda: 1.0)
    before = service.feedback.path.read_bytes()
    for bad in ({"bundle_id": bundle["bundle_id"], "verdict": "meh"},
                {"bundle_id": bundle["bundle_id"], "verdict": "modified"},
                {"bundle_id": bundle["bundle_id"], "verdict": "accepted", "incident": "maybe"},
                {"bundle_id": bundle["bundle_id"], "verdict": "modified", "corrected_config": {"tuples": []}},
                {"bundle_id": "zzz", "verdict": "accepted"},
                {"bundle_id": bundle["bundle_id"], "verdict": "accepted", "extra": 1}):
        with pytest.raises(FeedbackError):
            service.feedback.ingest(bad)
    assert service.feedback.path.read_bytes() == before


def test_replay_idempotent_and_latest_verdict_wins(service, small_dataset):
    bundle = service.handle(_ok_request(small_dataset))["bundle"]
    bid = bundle["bundle_id"]
    fb = service.feedback
    fb.ingest({"bundle_id": bid, "verdict": "accepted"}, clock=lambda: 1.0)
    first = fb.supervision_edges()
    assert first == fb.supervision_edges() == replay(fb.records(), service.store)
    assert set(first) == config_edges(bundle["config"])
    fb.ingest({"bundle_id": bid, "verdict": "rejected"}, clock=lambda: 2.0)
    assert fb.supervision_edges() == []
    corrected = json.loads(json.dumps(bundle["config"]))
    corrected["tuples"][0]["dimensions"] = []
    fb.ingest(FeedbackRecord(bid, "modified", corrected, "detected", 3.0))
    assert set(fb.supervision_edges()) == config_edges(corrected)


def test_feedback_edges_enter_training_graph(service, small_dataset):
    bundle = service.handle(_ok_request(small_dataset))["bundle"]
    service.feedback.ingest({"bundle_id": bundle["bundle_id"], "verdict": "accepted"}, clock=lambda: 1.0)
    edges = service.feedback.supervision_edges()
    g = feedback_graph(small_dataset.graph, edges)
    for kind, src, dst in edges:
        sk, dk = EDGE_SCHEMA[EdgeKind(kind)]
        assert g.has_edge(g.get(sk, src), g.get(dk, dst), EdgeKind(kind))
    assert feedback_graph(small_dataset.graph, edges) == g


def test_corrupt_log_line_reported(tmp_path):
    store = BundleStore(tmp_path / "b")
    path = tmp_path / "fb.jsonl"
    path.write_text('{"bundle_id": "a", "verdict": "accepted"}\n{broken\n')
    with pytest.raises(FeedbackError, match="fb.jsonl:2"):
        FeedbackLog(path, store).records()
    assert store.get("../etc") is None
