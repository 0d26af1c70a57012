"""Query planning and execution: picking the reduction pathway.

A filtered query can reduce the corpus two ways. Structured-first (PreFilter)
evaluates the metadata filter and runs an exact scan over the survivors: cheap
when the filter is strong, linear in the match set when it is weak. Vector-
first (PostFilter) asks the top-k-cognizant vector index for an oversampled
top-m and drops non-matching hits, doubling m until k matches survive or the
whole corpus has been ranked. The router picks by estimated selectivity; short
keyword queries go to the lexical engine instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .embed import tokenize
from .inverted import Filter, StructuredIndex, selectivity
from .types import CostCounters, ScoredHit

MAX_K = 1000


class PlanError(ValueError):
    pass


class EngineError(RuntimeError):
    """An engine failed mid-execution; carries the plan for diagnosis."""

    def __init__(self, plan: "QueryPlan", cause: Exception):
        super().__init__(f"{plan.kind} execution failed: {cause}")
        self.plan = plan
        self.cause = cause


@dataclass(frozen=True)
class RouterConfig:
    selectivity_threshold: float = 0.1
    oversample_factor: float = 2.0
    widen_factor: float = 2.0
    keyword_max_tokens: int = 3


@dataclass(frozen=True)
class SearchRequest:
    query_text: str
    k: int
    filter: Filter | None = None
    mode: str = "auto"  # semantic | keyword | auto


@dataclass(frozen=True)
class QueryPlan:
    kind: str  # Unfiltered | PreFilter | PostFilter | Lexical
    selectivity_estimate: float | None = None
    oversample_m0: int | None = None

    def to_json(self, widen_rounds: int = 0) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "selectivity": self.selectivity_estimate,
            "m0": self.oversample_m0,
            "widen_rounds": widen_rounds,
        }


class Engines(Protocol):
    """What execute() needs from an activated app snapshot."""

    n_docs: int
    has_lexical: bool

    def embed_query(self, text: str) -> np.ndarray: ...

    def knn(self, query: np.ndarray, k: int) -> tuple[list[ScoredHit], CostCounters]: ...

    def knn_restricted(self, query: np.ndarray, k: int, allowed: set[str]) -> tuple[list[ScoredHit], CostCounters]: ...

    def eval_filter(self, f: Filter) -> tuple[list[str], int]: ...

    def bm25(self, query: str, k: int, allowed: set[str] | None) -> list[ScoredHit]: ...


def plan(cfg: RouterConfig, req: SearchRequest, structured: StructuredIndex,
         has_lexical: bool = True) -> QueryPlan:
    if req.k < 1 or req.k > MAX_K:
        raise PlanError(f"k must be in [1, {MAX_K}], got {req.k}")
    if req.mode not in ("semantic", "keyword", "auto"):
        raise PlanError(f"unknown mode {req.mode!r}")

    sel = selectivity(structured, req.filter) if req.filter is not None else None

    wants_keyword = req.mode == "keyword" or (
        req.mode == "auto" and len(tokenize(req.query_text)) <= cfg.keyword_max_tokens
    )
    if wants_keyword:
        if has_lexical:
            return QueryPlan(kind="Lexical", selectivity_estimate=sel)
        if req.mode == "keyword":
            raise PlanError("keyword mode requested but the app has no lexical channel")
        # auto falls through to the semantic pathways

    if req.filter is None:
        return QueryPlan(kind="Unfiltered")
    assert sel is not None
    if sel <= cfg.selectivity_threshold:
        return QueryPlan(kind="PreFilter", selectivity_estimate=sel)
    m0 = max(req.k, math.ceil(cfg.oversample_factor * req.k))
    return QueryPlan(kind="PostFilter", selectivity_estimate=sel, oversample_m0=m0)


def execute(p: QueryPlan, req: SearchRequest, engines: Engines,
            widen_factor: float = 2.0) -> tuple[list[ScoredHit], CostCounters]:
    try:
        return _execute(p, req, engines, widen_factor)
    except (PlanError, EngineError):
        raise
    except Exception as exc:
        raise EngineError(p, exc) from exc


def _execute(p: QueryPlan, req: SearchRequest, engines: Engines,
             widen_factor: float) -> tuple[list[ScoredHit], CostCounters]:
    counters = CostCounters()
    if p.kind == "Lexical":
        allowed: set[str] | None = None
        if req.filter is not None:
            matched, scanned = engines.eval_filter(req.filter)
            counters.postings_scanned += scanned
            allowed = set(matched)
        return engines.bm25(req.query_text, req.k, allowed), counters

    query_vec = engines.embed_query(req.query_text)

    if p.kind == "Unfiltered":
        hits, c = engines.knn(query_vec, req.k)
        counters.merge(c)
        return hits, counters

    if req.filter is None:
        raise PlanError(f"{p.kind} plan requires a filter")

    if p.kind == "PreFilter":
        matched, scanned = engines.eval_filter(req.filter)
        counters.postings_scanned += scanned
        if not matched:
            return [], counters
        hits, c = engines.knn_restricted(query_vec, req.k, set(matched))
        counters.merge(c)
        return hits, counters

    if p.kind == "PostFilter":
        matched, scanned = engines.eval_filter(req.filter)  # once per query
        counters.postings_scanned += scanned
        match_set = set(matched)
        if widen_factor <= 1.0:
            raise PlanError("widen_factor must be > 1")
        m = p.oversample_m0 or max(req.k, 2 * req.k)
        n = engines.n_docs
        while True:
            ranked, c = engines.knn(query_vec, m)
            counters.merge(c)
            kept = [h for h in ranked if h.doc_id in match_set]
            if len(kept) >= req.k or m >= n:
                return kept[: req.k], counters
            m = math.ceil(widen_factor * m)
            counters.widen_rounds += 1

    raise PlanError(f"unknown plan kind {p.kind!r}")
