"""Benchmark harness: top-k retrieval rates, synthetic corpora, cost sweeps.

The synthetic generator plants two guarantees that the test suite and the
sweep lean on: (1) tag `t{i}` matches exactly round(s_i * n) documents, the
planted tags being disjoint on one keyword field, and (2) each query's gold
document is its strict nearest neighbor under the hashing embedder, verified
by a flat scan before the corpus is emitted.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from . import router as router_mod
from .embed import HashingEmbedder
from .inverted import Eq, Filter, Range, parse_filter
from .router import QueryPlan, SearchRequest
from .state import ActiveApp
from .types import CostCounters


class GenerationError(ValueError):
    """The requested synthetic corpus is infeasible or a planting failed."""


@dataclass
class SyntheticCorpus:
    dataset_config: dict[str, Any]
    corpus_lines: list[str]
    query_lines: list[str]
    tag_names: list[str]  # tag_names[i] matches exactly round(s_i * n) docs
    embed_dim: int
    embed_seed: int

    def write(self, corpus_path: str, queries_path: str) -> None:
        with open(corpus_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.corpus_lines) + "\n")
        with open(queries_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.query_lines) + "\n")


SYNTHETIC_DATASET = {
    "kind": "dataset",
    "name": "synthetic",
    "channels": [{"name": "title"}, {"name": "body"}],
    "metadata_fields": [
        {"name": "tag", "kind": "keyword", "filterable": True},
        {"name": "year", "kind": "integer", "filterable": True},
        {"name": "rating", "kind": "float", "filterable": True},
        {"name": "published", "kind": "date", "filterable": True},
        {"name": "labels", "kind": "keyword_list", "filterable": True},
    ],
}

_POOL_SIZE = 200
_UNIQ_REPEATS = 6
_FILLERS_PER_DOC = 12
_LABEL_POOL = [f"l{c}" for c in "abcdefgh"]


def generate_synthetic(n_docs: int, tag_selectivities: list[float], seed: int,
                       n_queries: int = 100, n_tags: int | None = None,
                       embed_dim: int = 256, embed_seed: int = 7) -> SyntheticCorpus:
    """Deterministic corpus + queries; byte-identical for identical arguments."""
    for s in tag_selectivities:
        if not (0.0 < s <= 1.0):
            raise GenerationError(f"selectivity {s} outside (0, 1]")
    counts = [round(s * n_docs) for s in tag_selectivities]
    if sum(counts) > n_docs:
        raise GenerationError(
            f"disjoint tags need {sum(counts)} docs but the corpus has {n_docs}"
        )
    if n_queries > n_docs:
        raise GenerationError("more queries than documents to plant them on")

    rng = np.random.default_rng(seed)
    pool = [f"w{i:03d}" for i in range(_POOL_SIZE)]

    # disjoint tag planting with exact counts
    shuffled = rng.permutation(n_docs)
    tag_of = ["rest"] * n_docs
    tag_names = [f"t{i}" for i in range(len(counts))]
    cursor = 0
    for tag, count in zip(tag_names, counts):
        for idx in shuffled[cursor : cursor + count]:
            tag_of[int(idx)] = tag
        cursor += count
    extra_tags = max(0, (n_tags or len(counts)) - len(counts))
    if extra_tags:
        fillers = [f"misc{i}" for i in range(extra_tags)]
        for j, idx in enumerate(shuffled[cursor:]):
            tag_of[int(idx)] = fillers[j % extra_tags]

    docs: list[dict[str, Any]] = []
    filler_tokens: list[list[str]] = []
    for i in range(n_docs):
        fillers = [pool[int(j)] for j in rng.integers(0, _POOL_SIZE, _FILLERS_PER_DOC)]
        filler_tokens.append(fillers)
        body = " ".join(
            [f"ua{i:06d}"] * _UNIQ_REPEATS + [f"ub{i:06d}"] * _UNIQ_REPEATS + fillers
        )
        title = " ".join(pool[int(j)] for j in rng.integers(0, _POOL_SIZE, 3))
        year = int(rng.integers(1990, 2026))
        docs.append(
            {
                "doc_id": f"D{i:06d}",
                "channels": {"title": title, "body": body},
                "metadata": {
                    "tag": tag_of[i],
                    "year": year,
                    "rating": round(float(rng.uniform(0, 5)), 3),
                    "published": f"{year}-{int(rng.integers(1, 13)):02d}-{int(rng.integers(1, 29)):02d}",
                    "labels": sorted(
                        {_LABEL_POOL[int(j)] for j in rng.integers(0, len(_LABEL_POOL), int(rng.integers(0, 4)))}
                    ),
                },
            }
        )

    gold_indices = [int(i) for i in rng.choice(n_docs, size=n_queries, replace=False)]
    queries: list[dict[str, Any]] = []
    query_texts: list[str] = []
    for qn, gi in enumerate(gold_indices):
        text = " ".join(
            [f"ua{gi:06d}"] * _UNIQ_REPEATS + [f"ub{gi:06d}"] * _UNIQ_REPEATS + filler_tokens[gi][:4]
        )
        query_texts.append(text)
        queries.append(
            {
                "query_id": f"Q{qn:04d}",
                "text": text,
                "filter": None,
                "gold_doc_ids": [f"D{gi:06d}"],
            }
        )

    _verify_planted(docs, query_texts, gold_indices, embed_dim, embed_seed)
    return SyntheticCorpus(
        dataset_config=json.loads(json.dumps(SYNTHETIC_DATASET)),
        corpus_lines=[json.dumps(d) for d in docs],
        query_lines=[json.dumps(q) for q in queries],
        tag_names=tag_names,
        embed_dim=embed_dim,
        embed_seed=embed_seed,
    )


def _verify_planted(docs, query_texts, gold_indices, dim: int, seed: int) -> None:
    """Flat-scan check that each gold doc is the strict nearest neighbor."""
    embedder = HashingEmbedder(dim=dim, seed=seed)
    matrix = np.stack([embedder.embed(d["channels"]["body"]) for d in docs])
    for text, gi in zip(query_texts, gold_indices):
        scores = matrix @ embedder.embed(text)
        top = int(np.argmax(scores))
        if top != gi:
            raise GenerationError(f"planting failed: doc {top} outranks gold {gi}")
        runner_up = np.partition(scores, -2)[-2]
        if not scores[gi] > runner_up:
            raise GenerationError(f"planting failed: gold {gi} is tied with another doc")


# --- retrieval-rate harness ----------------------------------------------------


@dataclass
class BenchQuery:
    query_id: str
    text: str
    gold_doc_ids: list[str]
    filter: Filter | None = None


@dataclass
class BenchReport:
    app_hash: str
    ks: list[int]
    rates: dict[int, float]
    per_query: list[dict[str, Any]]
    counters_by_plan: dict[str, dict[str, float]]
    n_queries: int
    skipped: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "app_hash": self.app_hash,
            "ks": self.ks,
            "rates": {str(k): v for k, v in self.rates.items()},
            "per_query": self.per_query,
            "counters_by_plan": self.counters_by_plan,
            "n_queries": self.n_queries,
            "skipped": self.skipped,
        }


def parse_bench_query(line: str) -> BenchQuery:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("query line is not a JSON object")
    query_id = obj.get("query_id")
    text = obj.get("text")
    gold = obj.get("gold_doc_ids")
    if not isinstance(query_id, str) or not isinstance(text, str):
        raise ValueError("query needs string query_id and text")
    if not isinstance(gold, list) or not gold or not all(isinstance(g, str) for g in gold):
        raise ValueError("gold_doc_ids must be a nonempty list of doc ids")
    wire = obj.get("filter")
    return BenchQuery(
        query_id=query_id, text=text, gold_doc_ids=gold,
        filter=parse_filter(wire) if wire is not None else None,
    )


def run_bench(app: ActiveApp, query_lines: Iterable[str], ks: list[int]) -> BenchReport:
    """A query is a hit at k when any gold id appears in its top k results."""
    if not ks or any(k < 1 for k in ks):
        raise ValueError("ks must be positive integers")
    ks = sorted(set(ks))
    max_k = max(ks)
    per_query: list[dict[str, Any]] = []
    skipped: list[str] = []
    plan_totals: dict[str, dict[str, float]] = {}
    for line_no, line in enumerate((l for l in query_lines if l.strip()), start=1):
        try:
            q = parse_bench_query(line)
        except (ValueError, KeyError) as exc:
            skipped.append(f"line {line_no}: {exc}")
            continue
        resp = app.search(SearchRequest(query_text=q.text, k=max_k, filter=q.filter, mode="semantic"))
        gold = set(q.gold_doc_ids)
        rank = next((i + 1 for i, h in enumerate(resp.hits) if h.doc_id in gold), None)
        per_query.append({"query_id": q.query_id, "gold_rank": rank, "plan": resp.plan.kind})
        totals = plan_totals.setdefault(
            resp.plan.kind, {"queries": 0, "scored_vectors": 0, "postings_scanned": 0, "widen_rounds": 0}
        )
        totals["queries"] += 1
        totals["scored_vectors"] += resp.counters.scored_vectors
        totals["postings_scanned"] += resp.counters.postings_scanned
        totals["widen_rounds"] += resp.counters.widen_rounds
    n = len(per_query)
    rates = {
        k: (sum(1 for p in per_query if p["gold_rank"] is not None and p["gold_rank"] <= k) / n if n else 0.0)
        for k in ks
    }
    return BenchReport(
        app_hash=app.app_hash, ks=ks, rates=rates, per_query=per_query,
        counters_by_plan=plan_totals, n_queries=n, skipped=skipped,
    )


# --- cost sweep ------------------------------------------------------------------


def sweep_filter(selectivity: float, tag_names: list[str], ordered: list[float]) -> Filter:
    """Filter realizing one sweep point on a generated corpus.

    Planted selectivities map to their disjoint tag; the vacuous s=1.0 point is
    an unbounded range over `year`, which every generated doc carries.
    """
    if selectivity >= 1.0:
        return Range("year", None, None)
    idx = ordered.index(selectivity)
    return Eq("tag", tag_names[idx])


@dataclass
class SweepRow:
    selectivity: float
    plan: str
    scored_vectors: float
    postings_scanned: float
    widen_rounds: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    chosen_plans: dict[float, str]
    crossover: float | None  # first s where PostFilter beats PreFilter on scored_vectors

    def to_json(self) -> dict[str, Any]:
        return {
            "rows": [vars(r) for r in self.rows],
            "chosen_plans": {str(s): p for s, p in self.chosen_plans.items()},
            "crossover": self.crossover,
        }

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["selectivity", "plan", "scored_vectors", "postings_scanned", "widen_rounds"])
            for r in self.rows:
                writer.writerow([r.selectivity, r.plan, r.scored_vectors, r.postings_scanned, r.widen_rounds])


def cost_sweep(app_builder: Callable[[], ActiveApp] | ActiveApp, selectivities: list[float],
               k: int, repetitions: int, query_texts: list[str],
               filter_for: Callable[[float], Filter]) -> SweepResult:
    """Force both reduction pathways per selectivity and record their costs.

    Hit sets are a router concern (plan equivalence holds on the flat index);
    the sweep measures work only: scored vectors, postings scanned, widenings.
    """
    app = app_builder() if callable(app_builder) else app_builder
    rows: list[SweepRow] = []
    chosen: dict[float, str] = {}
    means: dict[tuple[float, str], float] = {}
    for s in selectivities:
        f = filter_for(s)
        req0 = SearchRequest(query_text=query_texts[0], k=k, filter=f, mode="semantic")
        chosen[s] = router_mod.plan(app.config.router, req0, app._structured,
                                    app._lexical is not None).kind
        m0 = max(k, int(np.ceil(app.config.router.oversample_factor * k)))
        for plan_kind in ("PreFilter", "PostFilter"):
            total = CostCounters()
            for rep in range(repetitions):
                text = query_texts[rep % len(query_texts)]
                req = SearchRequest(query_text=text, k=k, filter=f, mode="semantic")
                forced = QueryPlan(kind=plan_kind, selectivity_estimate=s,
                                   oversample_m0=m0 if plan_kind == "PostFilter" else None)
                resp = app.search(req, force_plan=forced)
                total.merge(resp.counters)
            rows.append(SweepRow(
                selectivity=s, plan=plan_kind,
                scored_vectors=total.scored_vectors / repetitions,
                postings_scanned=total.postings_scanned / repetitions,
                widen_rounds=total.widen_rounds / repetitions,
            ))
            means[(s, plan_kind)] = total.scored_vectors / repetitions
    crossover = next(
        (s for s in selectivities if means[(s, "PostFilter")] < means[(s, "PreFilter")]), None
    )
    return SweepResult(rows=rows, chosen_plans=chosen, crossover=crossover)
