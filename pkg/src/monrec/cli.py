"""Command line entry point: ``monrec <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, load_config
from .datagen import Dataset, generate, validate_stats
from .evaluation import run_report, stable_hash
from .llm import LlmClient

log = logging.getLogger("monrec")

GRID_COLUMNS = ("variant", "dimensions", "expressions", "select_accuracy", "select_f1", "dims_jaccard",
                "expression_accuracy", "operator_accuracy", "alert_aggregate", "monitors_scored",
                "monitors_planted")


def _dataset(path: str) -> Dataset:
    d = Path(path)
    if not (d / "graph.jsonl").exists():
        raise SystemExit(f"error: no dataset in {d}; run generate-data first")
    return Dataset.load(d)


def _dataset_id(path: str) -> str:
    d = Path(path)
    return stable_hash([(d / f).read_text() for f in ("config.json", "truth.json")])


def _recommender(args, cfg):
    from .pipeline import Recommender, load_models

    ds = _dataset(args.data)
    models = load_models(args.models, ds)
    llm = LlmClient(mode="disabled") if args.no_llm else LlmClient.from_env()
    return Recommender(ds, models, cfg, llm)


def _service(args, cfg):
    from .service import BundleStore, FeedbackLog, RecommendationService

    store = BundleStore(Path(args.models) / "bundles")
    feedback = FeedbackLog(Path(args.models) / "feedback.jsonl", store)
    return RecommendationService(_recommender(args, cfg), store, feedback, no_llm=args.no_llm)


# commands

def cmd_generate(args, cfg) -> int:
    gen = cfg.datagen
    gen.seed = cfg.seed
    ds = generate(gen)
    out = ds.save(args.out)
    print(json.dumps({"out": str(out), "nodes": len(ds.graph), "edges": len(ds.graph.edges)}, sort_keys=True))
    return 0


def cmd_validate_stats(args, cfg) -> int:
    report = validate_stats(_dataset(args.data))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


def cmd_train(args, cfg) -> int:
    from .pipeline import train_all
    from .service import BundleStore, FeedbackLog

    ds = _dataset(args.data)
    log_path = Path(args.models) / "feedback.jsonl"
    edges = []
    if log_path.exists():
        edges = FeedbackLog(log_path, BundleStore(Path(args.models) / "bundles")).supervision_edges()
        log.info("adding %d supervision edges from feedback", len(edges))
    _, report = train_all(ds, cfg, args.models, feedback_edges=edges)
    summary = {k: {"epochs": v["epochs"], "stopped_early": v["stopped_early"],
                   **({"val_mrr": v["val"]["mrr"], "test_mrr": v["test"]["mrr"]} if "val" in v else {})}
               for k, v in report["stages"].items()}
    print(json.dumps({"models": args.models, "seconds": report["seconds"], "stages": summary},
                     indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args, cfg) -> int:
    from .pipeline import evaluate_grid, load_models
    from .plots import plot_grid, plot_selection, plot_training

    ds = _dataset(args.data)
    if not ds.truth.monitor_metric:
        raise SystemExit("error: dataset has no ground truth to evaluate against")
    models = load_models(args.models, ds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = evaluate_grid(ds, models, cfg)
    train_report = Path(args.models) / "train_report.json"
    if train_report.exists():
        tr = json.loads(train_report.read_text())
        results["rankers"] = {k: {"val": v["val"], "test": v["test"], "random_mrr_test": v["random_mrr_test"]}
                              for k, v in tr["stages"].items() if "val" in v}
        plot_training({k: v["history"] for k, v in tr["stages"].items() if "val" in v}, out / "training.png")
    report = run_report(results, cfg.to_dict(), _dataset_id(args.data))
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(out / "grid.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=GRID_COLUMNS)
        w.writeheader()
        for r in results["grid"]:
            w.writerow({**{k: r[k] for k in GRID_COLUMNS if k in r},
                        "select_accuracy": r["select"]["accuracy"], "select_f1": r["select"]["f1"]})
    plot_selection(results["grid"], out / "selection.png")
    plot_grid(results["grid"], out / "grid.png")
    print(json.dumps({"out": str(out), "rows": len(results["grid"])}, sort_keys=True))
    return 0


def cmd_recommend(args, cfg) -> int:
    from .pipeline import StageError

    svc = _service(args, cfg)
    metrics = args.metrics.split(",") if args.metrics else None
    try:
        bundle = svc.recommend(args.account, {"metrics": metrics})
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    doc = bundle.to_document()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bundle.json").write_text(text)
        if doc["config"] is not None:
            (out / "monitor_config.json").write_text(json.dumps(doc["config"], indent=2, sort_keys=True) + "\n")
        (out / "rationale.txt").write_text(doc["rationale"] + "\n")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args, cfg) -> int:
    svc = _service(args, cfg)
    if args.socket:
        host, _, port = args.socket.rpartition(":")
        server = svc.serve_socket(host or "127.0.0.1", int(port))
        log.info("serving on %s:%d", *server.server_address)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return 0
    svc.serve_stream(sys.stdin, sys.stdout)
    return 0


def cmd_ingest_feedback(args, cfg) -> int:
    from .service import BundleStore, FeedbackError, FeedbackLog

    text = sys.stdin.read() if args.record == "-" else Path(args.record).read_text()
    store = BundleStore(Path(args.models) / "bundles")
    fb = FeedbackLog(Path(args.models) / "feedback.jsonl", store)
    try:
        ack = fb.ingest(json.loads(text))
    except (FeedbackError, json.JSONDecodeError) as exc:
        print(json.dumps({"ok": False, "error": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({"ok": True, "ack": ack}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--no-llm", action="store_true", help="use the rule-based alert synthesizer only")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="monrec", description="Monitor recommendation toolkit", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate-data", parents=[common], help="write a synthetic corpus")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("validate-stats", parents=[common], help="check a corpus' planted statistics")
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_validate_stats)

    s = sub.add_parser("train", parents=[common], help="train metric selection and both rankers")
    s.add_argument("--data", required=True)
    s.add_argument("--models", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common], help="ablation grid report, CSV and figures")
    s.add_argument("--data", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("recommend", parents=[common], help="recommend monitors for one account")
    s.add_argument("--data", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--account", required=True)
    s.add_argument("--metrics", default=None, help="comma-separated metrics; skips selection")
    s.add_argument("--out", default=None, help="directory for bundle.json (default: stdout)")
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("serve", parents=[common], help="answer JSON-lines requests")
    s.add_argument("--data", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--socket", default=None, help="host:port to listen on (default: stdin/stdout)")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("ingest-feedback", parents=[common], help="append a feedback record")
    s.add_argument("--models", required=True)
    s.add_argument("--record", default="-", help="JSON file with the record, or - for stdin")
    s.set_defaults(func=cmd_ingest_feedback)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("no_llm", False), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    started = time.perf_counter()
    code = args.func(args, cfg)
    log.info("%s finished in %.1fs", args.command, time.perf_counter() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
