"""Vector indexes: exact flat scan and IVF with a k-means coarse quantizer.

The flat index scores every candidate row and is the correctness oracle. IVF
buys sublinear query cost by probing only the clusters nearest the query; the
`scored_vectors` counter makes that early stopping observable. Both report
results per document (max over chunk scores) ordered by score desc, doc_id asc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embed import VectorSetArtifact
from .types import CostCounters, ScoredHit


class MoreClustersThanPointsError(ValueError):
    """IVF was asked for more clusters than there are vectors."""


@dataclass(frozen=True)
class VectorIndexConfig:
    kind: str  # flat | ivf
    n_clusters: int | None = None  # ivf; defaults to ceil(sqrt(n)) at build
    n_probe: int = 8
    kmeans_iters: int = 10
    seed: int = 0


class _RowStore:
    """Row-level view of an artifact with contiguous per-doc ranges.

    Rows arrive grouped by document in ingestion order; doc codes are assigned
    in doc_id-ascending order so ties can be broken by comparing codes.
    """

    def __init__(self, artifact: VectorSetArtifact):
        self.vectors = np.ascontiguousarray(artifact.vectors, dtype=np.float32)
        self.dim = artifact.dim
        order: list[str] = []
        starts: list[int] = []
        prev: str | None = None
        for i, (doc_id, _) in enumerate(artifact.rows):
            if doc_id != prev:
                order.append(doc_id)
                starts.append(i)
                prev = doc_id
        if len(set(order)) != len(order):
            raise ValueError("artifact rows are not grouped by document")
        self.doc_ids_sorted = sorted(order)
        self.code_of = {d: c for c, d in enumerate(self.doc_ids_sorted)}
        self.n_docs = len(order)
        starts.append(len(artifact.rows))
        self.doc_range = {d: (starts[i], starts[i + 1]) for i, d in enumerate(order)}
        self.row_code = np.empty(len(artifact.rows), dtype=np.int64)
        self.row_chunk = np.empty(len(artifact.rows), dtype=np.int64)
        for i, (doc_id, chunk_index) in enumerate(artifact.rows):
            self.row_code[i] = self.code_of[doc_id]
            self.row_chunk[i] = chunk_index

    def code_mask(self, allowed: set[str]) -> np.ndarray:
        mask = np.zeros(self.n_docs, dtype=bool)
        for doc_id in allowed:
            code = self.code_of.get(doc_id)
            if code is not None:
                mask[code] = True
        return mask

    def allowed_rows(self, allowed: set[str]) -> np.ndarray:
        if not allowed:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.code_mask(allowed)[self.row_code])

    def covers_all(self, allowed: set[str]) -> bool:
        if len(allowed) < self.n_docs:
            return False
        return int(self.code_mask(allowed).sum()) == self.n_docs


def _top_k_from_rows(store: _RowStore, rows: np.ndarray, scores: np.ndarray, k: int) -> list[ScoredHit]:
    """Aggregate row scores to per-doc max and return the global top-k."""
    if rows.size == 0 or k <= 0:
        return []
    codes = store.row_code[rows]
    doc_max = np.full(store.n_docs, -np.inf, dtype=np.float64)
    np.maximum.at(doc_max, codes, scores.astype(np.float64))
    cand = np.flatnonzero(doc_max > -np.inf)
    # score desc, doc code (== doc_id order) asc
    order = np.lexsort((cand, -doc_max[cand]))[:k]
    hits: list[ScoredHit] = []
    for code in cand[order]:
        mask = codes == code
        seg_scores = scores[mask]
        seg_chunks = store.row_chunk[rows[mask]]
        best = seg_scores.max()
        chunk_index = int(seg_chunks[seg_scores == best].min())
        hits.append(ScoredHit(store.doc_ids_sorted[int(code)], float(best), chunk_index))
    return hits


class FlatIndex:
    """Exact scan: scores every candidate row."""

    kind = "flat"

    def __init__(self, store: _RowStore):
        self._store = store

    @property
    def dim(self) -> int:
        return self._store.dim

    @property
    def n_docs(self) -> int:
        return self._store.n_docs

    def knn(self, query: np.ndarray, k: int, allowed: set[str] | None = None) -> tuple[list[ScoredHit], CostCounters]:
        counters = CostCounters()
        store = self._store
        q = _check_query(query, store.dim)
        if k <= 0:
            return [], counters
        if allowed is not None and store.covers_all(allowed):
            allowed = None
        if allowed is None:
            rows = np.arange(store.vectors.shape[0], dtype=np.int64)
            scores = store.vectors @ q
        else:
            rows = store.allowed_rows(allowed)
            scores = store.vectors[rows] @ q
        counters.scored_vectors += int(rows.size)
        return _top_k_from_rows(store, rows, scores, k), counters


class IvfIndex:
    """Inverted-file index: k-means++ coarse quantizer, probe-limited search.

    With an allowed-doc restriction, rows outside the restriction are skipped;
    if the probed clusters yield fewer than k docs the search widens to every
    cluster so restricted queries never lose matches.
    """

    kind = "ivf"

    def __init__(self, store: _RowStore, centroids: np.ndarray, assignments: np.ndarray, n_probe: int):
        self._store = store
        self.centroids = centroids
        self.assignments = assignments
        self.n_probe = n_probe
        n_clusters = centroids.shape[0]
        self._cluster_rows = [np.flatnonzero(assignments == c).astype(np.int64) for c in range(n_clusters)]

    @property
    def dim(self) -> int:
        return self._store.dim

    @property
    def n_docs(self) -> int:
        return self._store.n_docs

    @property
    def n_clusters(self) -> int:
        return int(self.centroids.shape[0])

    def cluster_sizes(self) -> list[int]:
        return [int(rows.size) for rows in self._cluster_rows]

    def _probe_order(self, q: np.ndarray) -> np.ndarray:
        d2 = np.sum((self.centroids - q) ** 2, axis=1)
        return np.argsort(d2, kind="stable")

    def knn(self, query: np.ndarray, k: int, allowed: set[str] | None = None) -> tuple[list[ScoredHit], CostCounters]:
        counters = CostCounters()
        store = self._store
        q = _check_query(query, store.dim)
        if k <= 0:
            return [], counters
        if allowed is not None and store.covers_all(allowed):
            allowed = None
        order = self._probe_order(q)
        probed, rest = order[: self.n_probe], order[self.n_probe :]

        allowed_mask = store.code_mask(allowed) if allowed is not None else None

        def gather(cluster_ids: np.ndarray) -> np.ndarray:
            parts = [self._cluster_rows[int(c)] for c in cluster_ids]
            rows = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
            if allowed_mask is not None and rows.size:
                rows = rows[allowed_mask[store.row_code[rows]]]
            return rows

        rows = gather(probed)
        scores = store.vectors[rows] @ q if rows.size else np.empty(0, dtype=np.float32)
        counters.scored_vectors += int(rows.size)
        if allowed_mask is not None:
            found = np.unique(store.row_code[rows]).size
            if found < k and rest.size:
                # restriction starved the probes: widen to every cluster
                extra = gather(rest)
                extra_scores = store.vectors[extra] @ q if extra.size else np.empty(0, dtype=np.float32)
                counters.scored_vectors += int(extra.size)
                counters.widen_rounds += 1
                rows = np.concatenate([rows, extra])
                scores = np.concatenate([scores, extra_scores])
        return _top_k_from_rows(store, rows, scores, k), counters


def _check_query(query: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float32).reshape(-1)
    if q.shape[0] != dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {dim}")
    return q


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a center
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _assign(X: np.ndarray, centers: np.ndarray, block: int = 8192) -> np.ndarray:
    """Nearest-center assignment, blocked to bound the distance-matrix size."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    c_sq = np.sum(centers**2, axis=1)
    for start in range(0, n, block):
        chunk = X[start : start + block]
        d = c_sq[None, :] - 2.0 * (chunk @ centers.T)  # ||x||^2 constant per row
        out[start : start + block] = np.argmin(d, axis=1)
    return out


def kmeans(X: np.ndarray, k: int, iters: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Lloyd's iterations over a k-means++ seeding."""
    rng = np.random.default_rng(seed)
    Xf = X.astype(np.float64)
    centers = _kmeans_pp_init(Xf, k, rng)
    assign = _assign(Xf, centers)
    for _ in range(iters):
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = Xf[members].mean(axis=0)
            else:
                # deterministic empty-cluster fix: steal the farthest point
                d2 = np.sum((Xf - centers[assign]) ** 2, axis=1)
                idx = int(np.argmax(d2))
                centers[c] = Xf[idx]
                assign[idx] = c
        assign = _assign(Xf, centers)
    return centers.astype(np.float32), assign


def build_index(cfg: VectorIndexConfig, artifact: VectorSetArtifact):
    """Build a FlatIndex or IvfIndex over an artifact; deterministic given cfg.seed."""
    store = _RowStore(artifact)
    if cfg.kind == "flat":
        return FlatIndex(store)
    if cfg.kind != "ivf":
        raise ValueError(f"unknown index kind {cfg.kind!r}")
    n = artifact.count
    if n == 0:
        raise MoreClustersThanPointsError("cannot build an ivf index over an empty vector set")
    n_clusters = cfg.n_clusters if cfg.n_clusters is not None else math.isqrt(n - 1) + 1
    if n_clusters > n:
        raise MoreClustersThanPointsError(f"{n_clusters} clusters requested for {n} vectors")
    if cfg.n_probe < 1:
        raise ValueError("n_probe must be >= 1")
    if cfg.kmeans_iters < 1:
        raise ValueError("kmeans_iters must be >= 1")
    centroids, assignments = kmeans(artifact.vectors, n_clusters, cfg.kmeans_iters, cfg.seed)
    return IvfIndex(store, centroids, assignments, n_probe=min(cfg.n_probe, n_clusters))


def exact_restricted(index, query: np.ndarray, k: int, allowed: set[str]) -> tuple[list[ScoredHit], CostCounters]:
    """Exact top-k over an allowed subset: score every allowed row.

    This is the structured-then-vector execution path: the filter already
    reduced the corpus, so the scan cost is the size of the reduction, not a
    property of the ANN index.
    """
    store = index._store
    counters = CostCounters()
    q = _check_query(query, store.dim)
    if k <= 0:
        return [], counters
    rows = store.allowed_rows(allowed)
    scores = store.vectors[rows] @ q if rows.size else np.empty(0, dtype=np.float32)
    counters.scored_vectors += int(rows.size)
    return _top_k_from_rows(store, rows, scores, k), counters
