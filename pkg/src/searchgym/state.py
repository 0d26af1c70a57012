"""Checkpoint store and runtime activation.

Three checkpoint layers (dataset, vectorset, app) are content-addressed by
config hash. Activation walks the hash DAG and reuses any layer whose
checkpoint is already complete, so repeated activations never repeat work.
Checkpoints become visible only through an atomic directory rename; a build
killed halfway leaves nothing behind. A live app serves searches from an
immutable snapshot reference that hot-swap replaces atomically.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import shutil
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from filelock import FileLock

from . import inverted, router as router_mod, vindex as vindex_mod
from .config import AppConfig, ConfigStore, validate_composition
from .embed import (
    VectorSetArtifact,
    VectorSetConfig,
    build_vectorset,
    make_embedder,
    read_artifact,
    write_artifact,
)
from .inverted import Filter, LexicalIndex, StructuredIndex, validate_filter
from .router import QueryPlan, SearchRequest
from .schema import DatasetConfig, DatasetSnapshot, Document, RejectedRecord, ingest_path
from .types import CostCounters, ScoredHit

DEFAULT_STORE = "./searchgym-store"
STORE_ENV = "SEARCHGYM_STORE"


class ActivationError(Exception):
    def __init__(self, message: str, violations: list | None = None):
        super().__init__(message)
        self.violations = violations or []


class SwapError(Exception):
    pass


def store_root_from_env(explicit: str | None = None) -> str:
    return explicit or os.environ.get(STORE_ENV) or DEFAULT_STORE


class CheckpointStore:
    """On-disk layout: {datasets,vectorsets,apps}/<config-hash>/ + configs/."""

    LAYER_DIRS = {"dataset": "datasets", "vectorset": "vectorsets", "app": "apps"}

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in (*self.LAYER_DIRS.values(), "tmp", "locks"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.configs = ConfigStore(self.root)

    def layer_dir(self, kind: str, hash_hex: str) -> Path:
        return self.root / self.LAYER_DIRS[kind] / hash_hex

    def manifest(self, kind: str, hash_hex: str) -> dict[str, Any] | None:
        path = self.layer_dir(kind, hash_hex) / "MANIFEST.json"
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if obj.get("config_hash") != hash_hex:
            return None  # corrupt manifest: treat the checkpoint as absent
        return obj

    def is_complete(self, kind: str, hash_hex: str) -> bool:
        return self.manifest(kind, hash_hex) is not None

    def lock(self, kind: str, hash_hex: str) -> FileLock:
        return FileLock(str(self.root / "locks" / f"{kind}-{hash_hex}.lock"))

    def scratch_dir(self) -> Path:
        path = self.root / "tmp" / uuid.uuid4().hex
        path.mkdir(parents=True)
        return path

    def commit(self, scratch: Path, kind: str, hash_hex: str) -> None:
        """Atomically publish a finished build; caller holds the layer lock."""
        final = self.layer_dir(kind, hash_hex)
        if final.exists():
            shutil.rmtree(final)  # stale/corrupt remains; lock makes this safe
        os.rename(scratch, final)

    def write_manifest(self, directory: Path, kind: str, hash_hex: str,
                       children: dict[str, Any], stats: dict[str, Any]) -> None:
        manifest = {
            "kind": kind,
            "config_hash": hash_hex,
            "children": children,
            "stats": stats,
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        (directory / "MANIFEST.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


# --- layer builders ----------------------------------------------------------


def ensure_dataset(store: CheckpointStore, dataset_hash: str,
                   source: str | None = None) -> tuple[DatasetSnapshot, str, float]:
    """Reuse the dataset checkpoint or build it by ingesting `source`."""
    started = time.monotonic()
    if store.is_complete("dataset", dataset_hash):
        return load_dataset_snapshot(store, dataset_hash), "reused", time.monotonic() - started
    with store.lock("dataset", dataset_hash):
        if store.is_complete("dataset", dataset_hash):
            return load_dataset_snapshot(store, dataset_hash), "reused", time.monotonic() - started
        resolved = store.configs.get_typed(dataset_hash)
        if resolved is None or resolved[0] != "dataset":
            raise ActivationError(f"no dataset config {dataset_hash} in the store")
        if source is None:
            raise ActivationError(
                f"dataset {dataset_hash[:12]} has no checkpoint and no source was given; ingest it first"
            )
        cfg: DatasetConfig = resolved[1]
        snapshot = ingest_path(cfg, source)
        scratch = store.scratch_dir()
        with open(scratch / "documents.jsonl", "w", encoding="utf-8") as fh:
            for doc in snapshot.documents:
                fh.write(json.dumps(doc.to_json()) + "\n")
        with open(scratch / "rejects.jsonl", "w", encoding="utf-8") as fh:
            for rej in snapshot.rejects:
                fh.write(json.dumps(rej.to_json()) + "\n")
        store.write_manifest(scratch, "dataset", dataset_hash, children={},
                             stats={"doc_count": snapshot.doc_count, "rejected": len(snapshot.rejects)})
        store.commit(scratch, "dataset", dataset_hash)
    return snapshot, "built", time.monotonic() - started


def load_dataset_snapshot(store: CheckpointStore, dataset_hash: str) -> DatasetSnapshot:
    directory = store.layer_dir("dataset", dataset_hash)
    docs: list[Document] = []
    with open(directory / "documents.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                docs.append(Document(obj["doc_id"], obj.get("channels", {}), obj.get("metadata", {})))
    rejects: list[RejectedRecord] = []
    rejects_path = directory / "rejects.jsonl"
    if rejects_path.is_file():
        with open(rejects_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    rejects.append(RejectedRecord(obj["line_no"], obj["code"], obj["message"]))
    manifest = store.manifest("dataset", dataset_hash) or {}
    return DatasetSnapshot(documents=docs, rejects=rejects, stats=manifest.get("stats", {}))


def ensure_vectorset(store: CheckpointStore, vs_hash: str, snapshot_loader: Callable[[], DatasetSnapshot],
                     transport=None) -> tuple[VectorSetArtifact, str, int, float]:
    """Reuse or build one vectorset artifact; returns (artifact, outcome, embed_calls, wall)."""
    started = time.monotonic()
    directory = store.layer_dir("vectorset", vs_hash)
    if store.is_complete("vectorset", vs_hash):
        artifact = read_artifact(str(directory / "vectors.bin"), str(directory / "rows.jsonl"))
        return artifact, "reused", 0, time.monotonic() - started
    with store.lock("vectorset", vs_hash):
        if store.is_complete("vectorset", vs_hash):
            artifact = read_artifact(str(directory / "vectors.bin"), str(directory / "rows.jsonl"))
            return artifact, "reused", 0, time.monotonic() - started
        resolved = store.configs.get_typed(vs_hash)
        if resolved is None or resolved[0] != "vectorset":
            raise ActivationError(f"no vectorset config {vs_hash} in the store")
        cfg: VectorSetConfig = resolved[1]
        embedder = make_embedder(cfg.embedder, transport=transport)
        artifact = build_vectorset(cfg, snapshot_loader(), embedder=embedder)
        scratch = store.scratch_dir()
        write_artifact(artifact, str(scratch / "vectors.bin"), str(scratch / "rows.jsonl"))
        store.write_manifest(scratch, "vectorset", vs_hash, children={"dataset": cfg.dataset},
                             stats={"vector_count": artifact.count, "dim": artifact.dim,
                                    "embed_calls": embedder.calls})
        store.commit(scratch, "vectorset", vs_hash)
        return artifact, "built", embedder.calls, time.monotonic() - started


def _vindex_path(app_dir: Path, vs_hash: str) -> Path:
    return app_dir / f"vindex-{vs_hash[:16]}.npz"


def _save_vindex(path: Path, index) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:  # file object: savez won't append .npz
        if isinstance(index, vindex_mod.IvfIndex):
            np.savez(fh, kind=np.array("ivf"), centroids=index.centroids,
                     assignments=index.assignments, n_probe=np.array(index.n_probe))
        else:
            np.savez(fh, kind=np.array("flat"))
    os.replace(tmp, path)


def _load_vindex(path: Path, artifact: VectorSetArtifact):
    with np.load(path, allow_pickle=False) as data:
        kind = str(data["kind"])
        store = vindex_mod._RowStore(artifact)
        if kind == "flat":
            return vindex_mod.FlatIndex(store)
        return vindex_mod.IvfIndex(store, data["centroids"], data["assignments"], int(data["n_probe"]))


def build_vector_index(app_cfg: AppConfig, artifact: VectorSetArtifact):
    return vindex_mod.build_index(app_cfg.vector_index, artifact)


# --- activation --------------------------------------------------------------


@dataclass
class LayerOutcome:
    outcome: str  # reused | built
    wall_time_s: float


@dataclass
class ActivationReport:
    layers: dict[str, LayerOutcome] = field(default_factory=dict)
    embed_calls: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "layers": {k: {"outcome": v.outcome, "wall_time_s": v.wall_time_s} for k, v in self.layers.items()},
            "embed_calls": self.embed_calls,
        }


@dataclass
class SearchResponse:
    hits: list[ScoredHit]
    plan: QueryPlan
    counters: CostCounters
    vectorset: str

    def to_json(self) -> dict[str, Any]:
        return {
            "hits": [h.to_json() for h in self.hits],
            "plan": self.plan.to_json(widen_rounds=self.counters.widen_rounds),
            "counters": self.counters.to_json(),
            "vectorset": self.vectorset,
        }


@dataclass
class _VsSnapshot:
    """One immutable serving state: a vectorset artifact plus its vector index."""

    name: str
    vs_hash: str
    cfg: VectorSetConfig
    artifact: VectorSetArtifact
    index: Any
    embedder: Any


class _SnapshotEngines:
    """Adapter binding one snapshot + shared indices to the router's engine surface."""

    def __init__(self, snap: _VsSnapshot, structured: StructuredIndex, lexical: LexicalIndex | None):
        self._snap = snap
        self._structured = structured
        self._lexical = lexical
        self.n_docs = snap.index.n_docs
        self.has_lexical = lexical is not None

    def embed_query(self, text: str) -> np.ndarray:
        return self._snap.embedder.embed(text)

    def knn(self, query: np.ndarray, k: int):
        return self._snap.index.knn(query, k)

    def knn_restricted(self, query: np.ndarray, k: int, allowed: set[str]):
        return vindex_mod.exact_restricted(self._snap.index, query, k, allowed)

    def eval_filter(self, f: Filter):
        return inverted.eval_filter(self._structured, f)

    def bm25(self, query: str, k: int, allowed: set[str] | None):
        if self._lexical is None:
            raise router_mod.PlanError("app has no lexical channel")
        return inverted.bm25_search(self._lexical, query, k, allowed)


class ActiveApp:
    """A live, searchable app. Searches read one snapshot reference; hot-swap
    builds the replacement off to the side and flips the reference atomically,
    so in-flight queries finish on the snapshot they started with."""

    def __init__(self, store: CheckpointStore, app_hash: str, app_cfg: AppConfig,
                 dataset_cfg: DatasetConfig, structured: StructuredIndex,
                 lexical: LexicalIndex | None, active: _VsSnapshot,
                 vs_names: dict[str, str], transport=None):
        self.store = store
        self.app_hash = app_hash
        self.config = app_cfg
        self.dataset_cfg = dataset_cfg
        self._structured = structured
        self._lexical = lexical
        self._snapshot = active
        self._vs_names = vs_names  # declared vectorset name -> config hash
        self._transport = transport
        self._swap_lock = threading.Lock()

    @property
    def active_vectorset(self) -> str:
        return self._snapshot.name

    @property
    def vectorset_names(self) -> list[str]:
        return list(self._vs_names)

    def search(self, req: SearchRequest, force_plan: QueryPlan | None = None) -> SearchResponse:
        snap = self._snapshot  # read once; the whole query runs on this state
        if req.filter is not None:
            violations = validate_filter(self.dataset_cfg, req.filter)
            if violations:
                raise inverted.FilterError("; ".join(v.message for v in violations))
        engines = _SnapshotEngines(snap, self._structured, self._lexical)
        p = force_plan or router_mod.plan(self.config.router, req, self._structured, engines.has_lexical)
        hits, counters = router_mod.execute(p, req, engines, widen_factor=self.config.router.widen_factor)
        return SearchResponse(hits=hits, plan=p, counters=counters, vectorset=snap.name)

    def hot_swap(self, vectorset_name: str) -> ActivationReport:
        if vectorset_name not in self._vs_names:
            raise SwapError(f"vectorset {vectorset_name!r} is not declared in this app")
        with self._swap_lock:
            report = ActivationReport()
            if vectorset_name == self._snapshot.name:
                report.layers["vectorset"] = LayerOutcome("reused", 0.0)
                return report
            snap, outcome, calls, wall = _materialize_snapshot(
                self.store, self.app_hash, self.config, vectorset_name,
                self._vs_names[vectorset_name], self._dataset_loader, self._transport,
            )
            report.layers["vectorset"] = LayerOutcome(outcome, wall)
            report.embed_calls = calls
            self._snapshot = snap  # atomic reference flip
            return report

    def _dataset_loader(self) -> DatasetSnapshot:
        return load_dataset_snapshot(self.store, self.config.dataset)


def _materialize_snapshot(store: CheckpointStore, app_hash: str, app_cfg: AppConfig,
                          vs_name: str, vs_hash: str, snapshot_loader, transport):
    """Ensure artifact + vector index for one declared vectorset; load into memory."""
    artifact, outcome, calls, wall = ensure_vectorset(store, vs_hash, snapshot_loader, transport)
    app_dir = store.layer_dir("app", app_hash)
    idx_path = _vindex_path(app_dir, vs_hash)
    started = time.monotonic()
    if idx_path.is_file():
        index = _load_vindex(idx_path, artifact)
    else:
        index = build_vector_index(app_cfg, artifact)
        if app_dir.is_dir():
            _save_vindex(idx_path, index)
        outcome = "built"
    wall += time.monotonic() - started
    resolved = store.configs.get_typed(vs_hash)
    assert resolved is not None
    cfg: VectorSetConfig = resolved[1]
    embedder = make_embedder(cfg.embedder, transport=transport)
    snap = _VsSnapshot(name=vs_name, vs_hash=vs_hash, cfg=cfg, artifact=artifact,
                       index=index, embedder=embedder)
    return snap, outcome, calls, wall


def activate(app_hash: str, store: CheckpointStore, source: str | None = None,
             transport=None) -> tuple[ActiveApp, ActivationReport]:
    """Resolve the app's DAG, reuse complete layers, build the rest, go live."""
    resolved = store.configs.get_typed(app_hash)
    if resolved is None or resolved[0] != "app":
        raise ActivationError(f"no app config {app_hash} in the store")
    app_cfg: AppConfig = resolved[1]
    violations = validate_composition(app_cfg, store.configs.get_typed)
    if violations:
        raise ActivationError("app config does not validate", violations)

    ds_resolved = store.configs.get_typed(app_cfg.dataset)
    assert ds_resolved is not None
    dataset_cfg: DatasetConfig = ds_resolved[1]

    vs_names: dict[str, str] = {}
    for vs_hash in app_cfg.vectorsets:
        vs = store.configs.get_typed(vs_hash)
        assert vs is not None
        vs_names[vs[1].name] = vs_hash
    active_hash = vs_names[app_cfg.active_vectorset]

    report = ActivationReport()

    snapshot_cache: dict[str, DatasetSnapshot] = {}

    def snapshot_loader() -> DatasetSnapshot:
        if "snap" not in snapshot_cache:
            snapshot_cache["snap"] = load_dataset_snapshot(store, app_cfg.dataset)
        return snapshot_cache["snap"]

    snapshot, ds_outcome, ds_wall = ensure_dataset(store, app_cfg.dataset, source)
    snapshot_cache["snap"] = snapshot
    report.layers["dataset"] = LayerOutcome(ds_outcome, ds_wall)

    artifact, vs_outcome, embed_calls, vs_wall = ensure_vectorset(store, active_hash, snapshot_loader, transport)
    report.layers["vectorset"] = LayerOutcome(vs_outcome, vs_wall)
    report.embed_calls = embed_calls

    app_started = time.monotonic()
    app_dir = store.layer_dir("app", app_hash)
    if store.is_complete("app", app_hash):
        structured_state = json.loads((app_dir / "structured.json").read_text(encoding="utf-8"))
        structured = StructuredIndex.from_state(dataset_cfg, structured_state)
        lexical = None
        lex_path = app_dir / "lexical.json"
        if lex_path.is_file():
            lexical = LexicalIndex.from_state(json.loads(lex_path.read_text(encoding="utf-8")))
        idx_path = _vindex_path(app_dir, active_hash)
        if idx_path.is_file():
            index = _load_vindex(idx_path, artifact)
        else:
            index = build_vector_index(app_cfg, artifact)
            _save_vindex(idx_path, index)
        app_outcome = "reused"
    else:
        with store.lock("app", app_hash):
            structured = inverted.build_structured(dataset_cfg, snapshot_loader().documents)
            lexical = None
            if app_cfg.lexical_channel is not None:
                lexical = LexicalIndex(snapshot_loader().documents, app_cfg.lexical_channel)
            index = build_vector_index(app_cfg, artifact)
            if not store.is_complete("app", app_hash):
                scratch = store.scratch_dir()
                (scratch / "structured.json").write_text(json.dumps(structured.to_state()), encoding="utf-8")
                if lexical is not None:
                    (scratch / "lexical.json").write_text(json.dumps(lexical.to_state()), encoding="utf-8")
                _save_vindex(_vindex_path(scratch, active_hash), index)
                store.write_manifest(
                    scratch, "app", app_hash,
                    children={"dataset": app_cfg.dataset, "vectorsets": list(app_cfg.vectorsets)},
                    stats={"doc_count": len(structured.universe), "vector_count": artifact.count},
                )
                store.commit(scratch, "app", app_hash)
        app_outcome = "built"
    report.layers["app"] = LayerOutcome(app_outcome, time.monotonic() - app_started)

    vs_resolved = store.configs.get_typed(active_hash)
    assert vs_resolved is not None
    embedder = make_embedder(vs_resolved[1].embedder, transport=transport)
    snap = _VsSnapshot(name=app_cfg.active_vectorset, vs_hash=active_hash, cfg=vs_resolved[1],
                       artifact=artifact, index=index, embedder=embedder)
    app = ActiveApp(store, app_hash, app_cfg, dataset_cfg, structured, lexical, snap,
                    vs_names, transport=transport)
    return app, report


# --- garbage collection --------------------------------------------------------


def gc(store: CheckpointStore, keep: set[str]) -> list[str]:
    """Remove checkpoints unreachable from `keep` via MANIFEST child edges."""
    children_of: dict[str, list[str]] = {}
    kind_of: dict[str, str] = {}
    for kind in CheckpointStore.LAYER_DIRS:
        base = store.root / CheckpointStore.LAYER_DIRS[kind]
        for entry in base.iterdir() if base.is_dir() else []:
            if not entry.is_dir():
                continue
            manifest = store.manifest(kind, entry.name)
            kind_of[entry.name] = kind
            edges: list[str] = []
            if manifest:
                raw = manifest.get("children", {})
                for value in raw.values():
                    edges.extend(value if isinstance(value, list) else [value])
            children_of[entry.name] = edges
    reachable: set[str] = set()
    frontier = [h for h in keep]
    while frontier:
        h = frontier.pop()
        if h in reachable:
            continue
        reachable.add(h)
        frontier.extend(children_of.get(h, []))
    removed: list[str] = []
    for hash_hex, kind in kind_of.items():
        if hash_hex not in reachable:
            shutil.rmtree(store.layer_dir(kind, hash_hex))
            removed.append(hash_hex)
    return sorted(removed)
