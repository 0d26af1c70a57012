"""Vector sets: chunking strategies, embedders, and the materialized artifact.

A vector set maps one channel of a dataset into a vector space via a chunking
strategy and an embedder. The hashing embedder is fully deterministic (feature
hashing with a seeded FNV-1a-64), so identical configs produce bit-identical
artifacts on any platform; the external embedder talks to an HTTP service.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass
from typing import Any, Iterable

import httpx
import numpy as np

from .schema import DatasetSnapshot

VECTORS_MAGIC = b"SGYMVEC1"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace; a token is a maximal non-space run."""
    return text.lower().split()


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class ChunkingStrategy:
    kind: str  # whole_document | fixed_window
    window_tokens: int | None = None
    overlap_tokens: int = 0


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str  # hashing | external
    dim: int = 256
    seed: int = 0
    endpoint: str | None = None


@dataclass(frozen=True)
class VectorSetConfig:
    name: str
    dataset: str  # config hash of the dataset this set embeds
    channel: str
    chunking: ChunkingStrategy
    embedder: EmbedderConfig
    metric: str = "cosine"  # cosine | dot


def chunk(strategy: ChunkingStrategy, text: str) -> list[str]:
    if strategy.kind == "whole_document":
        return [text] if text else []
    if strategy.kind != "fixed_window":
        raise ValueError(f"unknown chunking kind {strategy.kind!r}")
    tokens = text.split()
    if not tokens:
        return []
    window = strategy.window_tokens or 0
    if window <= 0:
        raise ValueError("fixed_window needs window_tokens >= 1")
    if strategy.overlap_tokens >= window:
        raise ValueError("overlap_tokens must be smaller than window_tokens")
    stride = window - strategy.overlap_tokens
    return [" ".join(tokens[s : s + window]) for s in range(0, len(tokens), stride)]


class HashingEmbedder:
    """Feature-hashing embedder: token -> bucket via FNV-1a-64 xor seed.

    Bucket = hash mod dim; sign = +1 when bit 63 of the hash is clear, else -1.
    Signed token counts are accumulated and L2-normalized; empty text maps to
    the zero vector (similarity against it is defined as 0).
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 2:
            raise ValueError("hashing embedder needs dim >= 2")
        self.dim = dim
        self.seed = seed & _MASK64
        self.calls = 0
        self._token_cache: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        hit = self._token_cache.get(token)
        if hit is None:
            h = fnv1a64(token.encode("utf-8")) ^ self.seed
            hit = (h % self.dim, 1.0 if (h >> 63) & 1 == 0 else -1.0)
            self._token_cache[token] = hit
        return hit

    def embed(self, text: str) -> np.ndarray:
        self.calls += 1
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            bucket, sign = self._slot(token)
            acc[bucket] += sign
        norm = float(np.sqrt(np.dot(acc, acc)))
        if norm > 0.0:
            acc /= norm
        return acc.astype(np.float32)

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class DimensionMismatch(Exception):
    """An external embedder returned vectors of inconsistent dimension."""


class ExternalEmbedderError(Exception):
    """The external embedder endpoint failed after bounded retries."""


class ExternalEmbedder:
    """HTTP client for an embedding service.

    Wire format: POST {"texts": [...]} -> {"vectors": [[...], ...]}, batch
    order preserved. Dimension consistency is enforced across every batch this
    instance serves; a mismatch is fatal for the build.
    """

    def __init__(self, endpoint: str, retries: int = 3, timeout: float = 30.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.retries = retries
        self.calls = 0
        self.dim: int | None = None
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            return []
        payload = {"texts": list(texts)}
        last_err: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                body = resp.json()
                break
            except (httpx.HTTPError, ValueError) as exc:
                last_err = exc
                if attempt + 1 < self.retries:
                    time.sleep(0.05 * (attempt + 1))
        else:
            raise ExternalEmbedderError(f"embedding endpoint failed after {self.retries} attempts: {last_err}")
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ExternalEmbedderError("endpoint returned a malformed or misaligned vectors array")
        out: list[np.ndarray] = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float32)
            if arr.ndim != 1:
                raise ExternalEmbedderError("endpoint returned a non-flat vector")
            if self.dim is None:
                self.dim = int(arr.shape[0])
            elif arr.shape[0] != self.dim:
                raise DimensionMismatch(f"expected dim {self.dim}, got {arr.shape[0]}")
            out.append(arr)
        self.calls += len(texts)
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def close(self) -> None:
        self._client.close()


def make_embedder(cfg: EmbedderConfig, transport: httpx.BaseTransport | None = None):
    if cfg.kind == "hashing":
        return HashingEmbedder(dim=cfg.dim, seed=cfg.seed)
    if cfg.kind == "external":
        if not cfg.endpoint:
            raise ValueError("external embedder needs an endpoint")
        return ExternalEmbedder(cfg.endpoint, transport=transport)
    raise ValueError(f"unknown embedder kind {cfg.kind!r}")


@dataclass
class VectorSetArtifact:
    """All vectors of one vector set, row-aligned with (doc_id, chunk_index)."""

    dim: int
    vectors: np.ndarray  # (count, dim) float32
    rows: list[tuple[str, int]]

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    def doc_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for doc_id, _ in self.rows:
            seen.setdefault(doc_id)
        return list(seen)


def build_vectorset(cfg: VectorSetConfig, snapshot: DatasetSnapshot, embedder=None,
                    batch_size: int = 64) -> VectorSetArtifact:
    """Chunk and embed one channel of every document that carries it.

    Rows are ordered by (document ingestion order, chunk_index) regardless of
    how the embedding is executed, so the artifact is deterministic. The
    embedder's call counter advances once per chunk.
    """
    if embedder is None:
        embedder = make_embedder(cfg.embedder)
    rows: list[tuple[str, int]] = []
    texts: list[str] = []
    for doc in snapshot.documents:
        text = doc.channels.get(cfg.channel)
        if text is None:
            continue  # missing channel: zero chunks, not an error
        for i, piece in enumerate(chunk(cfg.chunking, text)):
            rows.append((doc.doc_id, i))
            texts.append(piece)
    vectors: list[np.ndarray] = []
    for start in range(0, len(texts), batch_size):
        vectors.extend(embedder.embed_batch(texts[start : start + batch_size]))
    if vectors:
        matrix = np.stack(vectors).astype(np.float32)
    else:
        dim = getattr(embedder, "dim", None) or cfg.embedder.dim
        matrix = np.zeros((0, dim), dtype=np.float32)
    if cfg.metric == "cosine":
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        nonzero = norms[:, 0] > 0
        matrix[nonzero] = matrix[nonzero] / norms[nonzero]
    return VectorSetArtifact(dim=int(matrix.shape[1]), vectors=matrix, rows=rows)


def write_artifact(artifact: VectorSetArtifact, vectors_path: str, rows_path: str) -> None:
    """Persist as a binary matrix (magic, dim u32, count u64, f32 LE rows) + JSONL sidecar."""
    with open(vectors_path, "wb") as fh:
        fh.write(VECTORS_MAGIC)
        fh.write(struct.pack("<IQ", artifact.dim, artifact.count))
        fh.write(np.ascontiguousarray(artifact.vectors, dtype="<f4").tobytes())
    with open(rows_path, "w", encoding="utf-8") as fh:
        for doc_id, chunk_index in artifact.rows:
            fh.write(json.dumps({"doc_id": doc_id, "chunk_index": chunk_index}) + "\n")


def read_artifact(vectors_path: str, rows_path: str) -> VectorSetArtifact:
    with open(vectors_path, "rb") as fh:
        magic = fh.read(len(VECTORS_MAGIC))
        if magic != VECTORS_MAGIC:
            raise ValueError(f"bad vectors file magic {magic!r}")
        dim, count = struct.unpack("<IQ", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != dim * count:
        raise ValueError("vectors file truncated")
    vectors = data.reshape(count, dim).copy()
    rows: list[tuple[str, int]] = []
    with open(rows_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                rows.append((obj["doc_id"], int(obj["chunk_index"])))
    if len(rows) != count:
        raise ValueError("row sidecar does not match vector count")
    return VectorSetArtifact(dim=int(dim), vectors=vectors, rows=rows)
