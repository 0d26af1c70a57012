"""Result types shared by every search engine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class ScoredHit:
    doc_id: str
    score: float
    chunk_index: int = 0

    def to_json(self) -> dict[str, Any]:
        return {"doc_id": self.doc_id, "score": self.score, "chunk_index": self.chunk_index}


@dataclass
class CostCounters:
    """Per-query work observables; returned with results, never shared."""

    scored_vectors: int = 0
    postings_scanned: int = 0
    widen_rounds: int = 0

    def merge(self, other: "CostCounters") -> None:
        self.scored_vectors += other.scored_vectors
        self.postings_scanned += other.postings_scanned
        self.widen_rounds += other.widen_rounds

    def to_json(self) -> dict[str, int]:
        return {
            "scored_vectors": self.scored_vectors,
            "postings_scanned": self.postings_scanned,
            "widen_rounds": self.widen_rounds,
        }


def sort_hits(hits: list[ScoredHit]) -> list[ScoredHit]:
    """Canonical result order: score descending, doc_id ascending on ties."""
    return sorted(hits, key=lambda h: (-h.score, h.doc_id))
