"""Command line: thin wrappers over the same operations the HTTP API exposes.

Exit codes: 0 success, 1 validation failure, 2 runtime/usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any

from . import bench as bench_mod
from . import state as state_mod
from .config import ConfigStoreError, parse_config
from .inverted import FilterError, parse_filter
from .router import PlanError, SearchRequest
from .state import ActivationError, CheckpointStore, SwapError


class ValidationFailure(Exception):
    def __init__(self, violations):
        super().__init__("validation failed")
        self.violations = violations


def _store(args) -> CheckpointStore:
    return CheckpointStore(state_mod.store_root_from_env(getattr(args, "store", None)))


def _load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _register(store: CheckpointStore, path: str) -> str:
    hash_hex, _kind, _typed, violations = store.configs.put(_load_json(path))
    if violations:
        raise ValidationFailure(violations)
    return hash_hex


def _resolve_app(store: CheckpointStore, ref: str) -> str:
    if ref.endswith(".json"):
        return _register(store, ref)
    return store.configs.resolve_name(ref)


def cmd_ingest(args) -> int:
    store = _store(args)
    dataset_hash = _resolve_app(store, args.config)
    snapshot, outcome, _wall = state_mod.ensure_dataset(store, dataset_hash, source=args.input)
    print(json.dumps({
        "dataset": dataset_hash,
        "outcome": outcome,
        "doc_count": snapshot.doc_count,
        "rejected": [r.to_json() for r in snapshot.rejects],
    }, indent=2))
    return 0


def cmd_config_hash(args) -> int:
    store = _store(args)
    print(_register(store, args.path))
    return 0


def cmd_config_validate(args) -> int:
    store = _store(args)
    obj = store.configs._resolve_inline_refs(_load_json(args.path))
    kind, typed, violations = parse_config(obj)
    if not violations and kind is not None and typed is not None:
        from .config import validate_refs

        violations = validate_refs(kind, typed, store.configs.get_typed)
    if violations:
        for v in violations:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def cmd_activate(args) -> int:
    store = _store(args)
    app_hash = _resolve_app(store, args.app)
    _app, report = state_mod.activate(app_hash, store, source=args.source)
    print(json.dumps({"app": app_hash, **report.to_json()}, indent=2))
    return 0


def cmd_search(args) -> int:
    store = _store(args)
    app_hash = _resolve_app(store, args.app)
    app, _report = state_mod.activate(app_hash, store)
    f = parse_filter(json.loads(args.filter)) if args.filter else None
    req = SearchRequest(query_text=args.query, k=args.k, filter=f, mode=args.mode)
    resp = app.search(req)
    for hit in resp.hits:
        print(json.dumps(hit.to_json()))
    print(json.dumps({"plan": resp.plan.to_json(resp.counters.widen_rounds),
                      "counters": resp.counters.to_json(),
                      "vectorset": resp.vectorset}), file=sys.stderr)
    return 0


def cmd_swap(args) -> int:
    store = _store(args)
    app_hash = _resolve_app(store, args.app)
    app, _report = state_mod.activate(app_hash, store)
    report = app.hot_swap(args.vectorset)
    print(json.dumps({"app": app_hash, "vectorset": args.vectorset, **report.to_json()}, indent=2))
    return 0


def cmd_bench(args) -> int:
    store = _store(args)
    app_hash = _resolve_app(store, args.app)
    app, _report = state_mod.activate(app_hash, store)
    with open(args.queries, "r", encoding="utf-8") as fh:
        query_lines = fh.readlines()
    if args.sweep:
        selectivities = [float(s) for s in args.selectivities.split(",")]
        texts = [bench_mod.parse_bench_query(l).text for l in query_lines if l.strip()]
        planted = sorted(s for s in selectivities if s < 1.0)
        tag_names = [f"t{i}" for i in range(len(planted))]
        result = bench_mod.cost_sweep(
            app, selectivities, k=args.k, repetitions=args.repetitions, query_texts=texts,
            filter_for=lambda s: bench_mod.sweep_filter(s, tag_names, planted),
        )
        if args.out:
            result.write_csv(args.out)
        print(json.dumps(result.to_json(), indent=2))
        return 0
    ks = [int(k) for k in args.ks.split(",")]
    report = bench_mod.run_bench(app, query_lines, ks)
    payload = json.dumps(report.to_json(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(bind=args.bind, store_root=getattr(args, "store", None))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="searchgym", description="hybrid search orchestration")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_store(p):
        p.add_argument("--store", default=None, help="store root (default $SEARCHGYM_STORE or ./searchgym-store)")

    p = sub.add_parser("ingest", help="validate and ingest a JSONL corpus into a dataset checkpoint")
    p.add_argument("--config", required=True, help="dataset config JSON path or name@latest")
    p.add_argument("--input", required=True, help="JSONL documents path")
    add_store(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("config", help="config utilities")
    csub = p.add_subparsers(dest="config_command", required=True)
    ph = csub.add_parser("hash", help="canonicalize, register, and print the config hash")
    ph.add_argument("path")
    add_store(ph)
    ph.set_defaults(func=cmd_config_hash)
    pv = csub.add_parser("validate", help="print violations; exit 1 when any")
    pv.add_argument("path")
    add_store(pv)
    pv.set_defaults(func=cmd_config_validate)

    p = sub.add_parser("activate", help="activate an app (reusing checkpoints)")
    p.add_argument("--app", required=True, help="app hash, name@latest, or config path")
    p.add_argument("--source", default=None, help="JSONL source if the dataset was never ingested")
    add_store(p)
    p.set_defaults(func=cmd_activate)

    p = sub.add_parser("search", help="search an app; hits as JSONL on stdout")
    p.add_argument("--app", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", default="auto", choices=["semantic", "keyword", "auto"])
    p.add_argument("--filter", default=None, help="filter in JSON wire form")
    add_store(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("swap", help="ensure a declared vectorset is built and swap to it")
    p.add_argument("--app", required=True)
    p.add_argument("--vectorset", required=True)
    add_store(p)
    p.set_defaults(func=cmd_swap)

    p = sub.add_parser("bench", help="run retrieval-rate benchmarks or the cost sweep")
    p.add_argument("--app", required=True)
    p.add_argument("--queries", required=True, help="BenchQuery JSONL path")
    p.add_argument("--ks", default="1,5,10,20,50,100")
    p.add_argument("--out", default=None)
    p.add_argument("--sweep", action="store_true", help="run the pre/post cost sweep instead")
    p.add_argument("--selectivities", default="0.001,0.01,0.05,0.1,0.25,0.5,1.0")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--repetitions", type=int, default=5)
    add_store(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--bind", default=os.environ.get("SEARCHGYM_BIND", "127.0.0.1:7700"))
    add_store(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        for v in exc.violations:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return 1
    except ActivationError as exc:
        if exc.violations:
            for v in exc.violations:
                print(f"{v.code}: {v.message}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FilterError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigStoreError, SwapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
