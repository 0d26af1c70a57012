"""Shared fixtures: synthetic corpora, app builders, and independent oracles.

The oracles here deliberately avoid the production code paths: filters are
checked by a linear scan over raw metadata, vector ranking by a dict-and-sort
pass over raw scores. Tests compare engines against these, never against
themselves.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from searchgym import bench as bench_mod
from searchgym import state as state_mod
from searchgym.inverted import And, Eq, Filter, In, Not, Or, Range
from searchgym.schema import DatasetConfig, Document
from searchgym.state import CheckpointStore


# --- app building ------------------------------------------------------------


def register_synthetic(store: CheckpointStore, synth: bench_mod.SyntheticCorpus,
                       corpus_path: str) -> str:
    ds_hash, _, _, violations = store.configs.put(synth.dataset_config)
    assert not violations, violations
    state_mod.ensure_dataset(store, ds_hash, source=corpus_path)
    return ds_hash


def vectorset_config(ds_hash: str, name: str = "body_hash", channel: str = "body",
                     dim: int = 256, seed: int = 7, chunking: dict | None = None) -> dict:
    return {
        "kind": "vectorset",
        "name": name,
        "dataset": ds_hash,
        "channel": channel,
        "chunking": chunking or {"kind": "whole_document"},
        "embedder": {"kind": "hashing", "dim": dim, "seed": seed},
        "metric": "cosine",
    }


def app_config(ds_hash: str, vs_hashes: list[str], active: str, index: dict | None = None,
               name: str = "app", lexical: str | None = "body", router: dict | None = None) -> dict:
    return {
        "kind": "app",
        "name": name,
        "dataset": ds_hash,
        "vectorsets": vs_hashes,
        "active_vectorset": active,
        "vector_index": index or {"kind": "flat"},
        "lexical_channel": lexical,
        "router": router or {},
        "fusion": {},
    }


def build_synthetic_app(store: CheckpointStore, synth: bench_mod.SyntheticCorpus,
                        corpus_path: str, index: dict | None = None,
                        router: dict | None = None):
    """Register configs, ingest, and activate one app over a generated corpus."""
    synth.write(corpus_path, corpus_path + ".queries")
    ds_hash = register_synthetic(store, synth, corpus_path)
    vs_hash, _, _, v = store.configs.put(
        vectorset_config(ds_hash, dim=synth.embed_dim, seed=synth.embed_seed)
    )
    assert not v, v
    app_hash, _, _, v = store.configs.put(
        app_config(ds_hash, [vs_hash], "body_hash", index=index, router=router)
    )
    assert not v, v
    app, report = state_mod.activate(app_hash, store)
    return app, report, {"dataset": ds_hash, "vectorset": vs_hash, "app": app_hash}


@pytest.fixture(scope="session")
def small_synth() -> bench_mod.SyntheticCorpus:
    return bench_mod.generate_synthetic(n_docs=800, tag_selectivities=[0.1, 0.05, 0.05], seed=101, n_queries=40)


@pytest.fixture()
def store(tmp_path) -> CheckpointStore:
    return CheckpointStore(tmp_path / "store")


@pytest.fixture(scope="session")
def small_app(tmp_path_factory, small_synth):
    root = tmp_path_factory.mktemp("small-app")
    store = CheckpointStore(root / "store")
    app, report, hashes = build_synthetic_app(store, small_synth, str(root / "corpus.jsonl"))
    return app


# --- independent filter oracle -------------------------------------------------


def doc_matches(f: Filter, doc: Document) -> bool:
    """Linear-scan filter semantics over raw metadata, independent of any index."""
    meta = doc.metadata
    if isinstance(f, Eq):
        value = meta.get(f.field)
        if isinstance(value, list):
            return f.value in value
        return value is not None and value == f.value
    if isinstance(f, In):
        return any(doc_matches(Eq(f.field, v), doc) for v in f.values)
    if isinstance(f, Range):
        value = meta.get(f.field)
        if value is None:
            return False
        if f.min is not None and value < f.min:
            return False
        if f.max is not None and value > f.max:
            return False
        return True
    if isinstance(f, And):
        return all(doc_matches(c, doc) for c in f.children)
    if isinstance(f, Or):
        return any(doc_matches(c, doc) for c in f.children)
    if isinstance(f, Not):
        return not doc_matches(f.child, doc)
    raise TypeError(f)


def oracle_filter_eval(f: Filter, docs: list[Document]) -> list[str]:
    return sorted(d.doc_id for d in docs if doc_matches(f, d))


def random_filter(rng: np.random.Generator, docs: list[Document], depth: int = 0) -> Filter:
    """Random filter tree over the synthetic schema, values drawn from the corpus."""

    def pool(field: str) -> list:
        values = []
        for d in docs:
            v = d.metadata.get(field)
            if isinstance(v, list):
                values.extend(v)
            elif v is not None:
                values.append(v)
        return values or [0]

    def pick(field: str):
        values = pool(field)
        return values[int(rng.integers(len(values)))]

    roll = rng.random()
    max_depth = 3
    if depth >= max_depth or roll < 0.55:
        leaf_kind = rng.integers(4)
        if leaf_kind == 0:
            field = ["tag", "labels", "year"][int(rng.integers(3))]
            return Eq(field, pick(field))
        if leaf_kind == 1:
            field = ["tag", "labels"][int(rng.integers(2))]
            values = tuple({pick(field) for _ in range(int(rng.integers(1, 4)))})
            return In(field, values)
        field = ["year", "rating", "published"][int(rng.integers(3))]
        a, b = pick(field), pick(field)
        lo, hi = (a, b) if a <= b else (b, a)
        if leaf_kind == 2:
            return Range(field, lo, hi)
        open_side = rng.integers(2)
        return Range(field, None, hi) if open_side else Range(field, lo, None)
    if roll < 0.75:
        n = int(rng.integers(1, 4))
        return And(tuple(random_filter(rng, docs, depth + 1) for _ in range(n)))
    if roll < 0.95:
        n = int(rng.integers(1, 4))
        return Or(tuple(random_filter(rng, docs, depth + 1) for _ in range(n)))
    return Not(random_filter(rng, docs, depth + 1))


# --- independent vector oracle ---------------------------------------------------


def oracle_topk(artifact, query: np.ndarray, k: int, allowed: set[str] | None = None):
    """Score-all -> filter -> sort, built from raw rows and plain Python."""
    scores = artifact.vectors @ np.asarray(query, dtype=np.float32)
    best: dict[str, float] = {}
    chunk: dict[str, int] = {}
    for (doc_id, chunk_index), s in zip(artifact.rows, scores.tolist()):
        if allowed is not None and doc_id not in allowed:
            continue
        if doc_id not in best or s > best[doc_id]:
            best[doc_id] = s
            chunk[doc_id] = chunk_index
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return [(doc_id, score, chunk[doc_id]) for doc_id, score in ranked]


# --- acceptance reporting ---------------------------------------------------------

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS.append((name, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{outcome}  {name}")
