"""Reranker: merge ranked lists from several engines into one ranking.

RRF is the default because vector and BM25 scores live on incommensurable
scales; rank-based fusion ignores the scales entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .types import ScoredHit


@dataclass(frozen=True)
class FusionConfig:
    method: str = "rrf"  # rrf | weighted_sum
    rrf_k: int = 60
    weights: dict[str, float] = field(default_factory=dict)


def _minmax(scores: list[float]) -> list[float]:
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)  # degenerate lists normalize to 1.0
    return [(s - lo) / (hi - lo) for s in scores]


def fuse(cfg: FusionConfig, lists: dict[str, list[ScoredHit]], k: int) -> list[ScoredHit]:
    """Combine per-engine rankings; dedupe by doc, order by fused score desc, doc_id asc."""
    if not lists or k <= 0:
        return []
    fused: dict[str, float] = {}
    chunk_of: dict[str, int] = {}
    for engine in sorted(lists):
        hits = lists[engine]
        if not hits:
            continue
        if cfg.method == "rrf":
            contribs = [1.0 / (cfg.rrf_k + rank) for rank in range(1, len(hits) + 1)]
        elif cfg.method == "weighted_sum":
            weight = cfg.weights.get(engine, 0.0)
            contribs = [weight * s for s in _minmax([h.score for h in hits])]
        else:
            raise ValueError(f"unknown fusion method {cfg.method!r}")
        for hit, c in zip(hits, contribs):
            fused[hit.doc_id] = fused.get(hit.doc_id, 0.0) + c
            chunk_of.setdefault(hit.doc_id, hit.chunk_index)
    merged = [ScoredHit(doc_id, score, chunk_of[doc_id]) for doc_id, score in fused.items()]
    merged.sort(key=lambda h: (-h.score, h.doc_id))
    return merged[:k]
