"""Line-delimited JSON recommendation service and the feedback log.

Requests are one JSON object per line:

    {"op": "recommend", "account": "<service>", "options": {...}}
    {"op": "feedback", "record": {...}}

and each gets one JSON response line with ``ok`` set. Feedback is appended
to a durable log; replaying the log yields the supervision edges that the
next ``train`` run adds to the graph.
"""
from __future__ import annotations

import json
import logging
import socketserver
import threading
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import IO, Iterable

from .alerts import validate_config_document
from .graph import EdgeKind
from .pipeline import PipelineOptions, RecommendationBundle, Recommender, StageError

log = logging.getLogger(__name__)

VERDICTS = ("accepted", "rejected", "modified")
INCIDENT_OUTCOMES = ("detected", "missed", "noisy")


class FeedbackError(ValueError):
    pass


@dataclass(frozen=True)
class FeedbackRecord:
    bundle_id: str
    verdict: str
    corrected_config: dict | None = None
    incident: str | None = None
    timestamp: float = 0.0

    def validate(self) -> "FeedbackRecord":
        if not self.bundle_id:
            raise FeedbackError("bundle_id is required")
        if self.verdict not in VERDICTS:
            raise FeedbackError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.incident is not None and self.incident not in INCIDENT_OUTCOMES:
            raise FeedbackError(f"incident must be one of {INCIDENT_OUTCOMES}, got {self.incident!r}")
        if self.verdict == "modified" and self.corrected_config is None:
            raise FeedbackError("a modified verdict needs a corrected config")
        if self.corrected_config is not None:
            try:
                validate_config_document(self.corrected_config)
            except Exception as exc:
                raise FeedbackError(f"corrected config is invalid: {exc}") from exc
        return self

    @classmethod
    def from_record(cls, rec: dict) -> "FeedbackRecord":
        if not isinstance(rec, dict):
            raise FeedbackError("feedback must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(rec) - names)
        if unknown:
            raise FeedbackError(f"unknown feedback fields: {unknown}")
        try:
            return cls(**rec)
        except TypeError as exc:
            raise FeedbackError(str(exc)) from exc


class BundleStore:
    """Directory of issued bundles, one ``<bundle_id>.json`` each."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def put(self, doc: dict) -> str:
        bid = doc["bundle_id"]
        path = self.dir / f"{bid}.json"
        if not path.exists():
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return bid

    def get(self, bundle_id: str) -> dict | None:
        path = self.dir / f"{bundle_id}.json"
        if "/" in bundle_id or not path.exists():
            return None
        return json.loads(path.read_text())


class FeedbackLog:
    """Append-only JSON-lines log; writes go through one lock."""

    def __init__(self, path: str | Path, store: BundleStore):
        self.path = Path(path)
        self.store = store
        self._lock = threading.Lock()

    def ingest(self, record: FeedbackRecord | dict, clock=time.time) -> dict:
        rec = record if isinstance(record, FeedbackRecord) else FeedbackRecord.from_record(record)
        rec.validate()
        if self.store.get(rec.bundle_id) is None:
            raise FeedbackError(f"unknown bundle {rec.bundle_id!r}")
        if not rec.timestamp:
            rec = FeedbackRecord(rec.bundle_id, rec.verdict, rec.corrected_config, rec.incident, float(clock()))
        line = json.dumps(asdict(rec), sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(line + "\n")
                fh.flush()
        return {"bundle_id": rec.bundle_id, "verdict": rec.verdict, "timestamp": rec.timestamp}

    def records(self) -> list[FeedbackRecord]:
        if not self.path.exists():
            return []
        out = []
        for n, line in enumerate(self.path.read_text().splitlines(), 1):
            if line.strip():
                try:
                    out.append(FeedbackRecord.from_record(json.loads(line)))
                except (json.JSONDecodeError, FeedbackError) as exc:
                    raise FeedbackError(f"{self.path}:{n}: {exc}") from exc
        return out

    def supervision_edges(self) -> list[tuple[str, str, str]]:
        return replay(self.records(), self.store)


def config_edges(doc: dict) -> set[tuple[str, str, str]]:
    """Graph edges implied by a monitor config: one monitor per tuple."""
    account = doc["account"]
    out = set()
    for t in doc["tuples"]:
        mon = f"{doc['monitor']}:{t['metric']}"
        out.add((EdgeKind.SERVICE_HAS_MONITOR.value, account, mon))
        out.add((EdgeKind.MONITOR_HAS_METRIC.value, mon, t["metric"]))
        out.add((EdgeKind.MONITOR_USES_EXPRESSION.value, mon, t["expression"]))
        for d in t["dimensions"]:
            out.add((EdgeKind.MONITOR_ASSOCIATED_DIMENSION.value, mon, d))
    return out


def replay(records: Iterable[FeedbackRecord], store: BundleStore) -> list[tuple[str, str, str]]:
    """Supervision edges from the latest verdict per bundle.

    Accepted bundles contribute their own config, modified ones the
    corrected config, rejected ones nothing.
    """
    latest: dict[str, FeedbackRecord] = {}
    for rec in records:
        latest[rec.bundle_id] = rec
    edges: set[tuple[str, str, str]] = set()
    for bid in sorted(latest):
        rec = latest[bid]
        if rec.verdict == "rejected":
            continue
        if rec.verdict == "modified":
            doc = rec.corrected_config
        else:
            bundle = store.get(bid)
            doc = bundle.get("config") if bundle else None
        if doc:
            edges |= config_edges(doc)
    return sorted(edges)


# request handling

class RecommendationService:
    """Stateless request handler over a loaded recommender."""

    def __init__(self, recommender: Recommender, store: BundleStore, feedback: FeedbackLog,
                 no_llm: bool = True):
        self.recommender = recommender
        self.store = store
        self.feedback = feedback
        self.no_llm = no_llm

    def recommend(self, account: str, options: dict | None = None) -> RecommendationBundle:
        opts = PipelineOptions(**{"no_llm": self.no_llm, **(options or {})})
        bundle = self.recommender.run(account, opts)
        self.store.put(bundle.to_document())
        return bundle

    def handle(self, request: dict) -> dict:
        try:
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            op = request.get("op")
            if op == "recommend":
                account = request.get("account")
                if not isinstance(account, str):
                    raise ValueError("recommend needs an 'account' string")
                options = request.get("options") or {}
                if not isinstance(options, dict):
                    raise ValueError("'options' must be an object")
                return {"ok": True, "bundle": self.recommend(account, options).to_document()}
            if op == "feedback":
                return {"ok": True, "ack": self.feedback.ingest(request.get("record"))}
            raise ValueError(f"unknown op {op!r}; expected 'recommend' or 'feedback'")
        except StageError as exc:
            return _error("stage", str(exc), stage=exc.stage)
        except FeedbackError as exc:
            return _error("feedback", str(exc))
        except (TypeError, ValueError) as exc:
            return _error("request", str(exc))

    def handle_line(self, line: str) -> str:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = _error("parse", f"malformed JSON: {exc.msg}")
        else:
            response = self.handle(request)
        return json.dumps(response, sort_keys=True)

    def serve_stream(self, reader: IO[str], writer: IO[str]) -> int:
        n = 0
        for line in reader:
            if not line.strip():
                continue
            writer.write(self.handle_line(line) + "\n")
            writer.flush()
            n += 1
        return n

    def serve_socket(self, host: str = "127.0.0.1", port: int = 0) -> socketserver.ThreadingTCPServer:
        """Start a threaded TCP server (not yet serving); call ``serve_forever`` on it."""
        service = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    line = raw.decode("utf-8")
                    if line.strip():
                        self.wfile.write((service.handle_line(line) + "\n").encode("utf-8"))
                        self.wfile.flush()

        socketserver.ThreadingTCPServer.allow_reuse_address = True
        server = socketserver.ThreadingTCPServer((host, port), Handler)
        server.daemon_threads = True
        return server


def _error(kind: str, message: str, **extra) -> dict:
    return {"ok": False, "error": {"type": kind, "message": message, **extra}}
