"""Structured engine: metadata filtering over an inverted index, plus BM25.

Filtering is rank-blind: eval_filter returns the exact match *set* and cannot
stop early, so a leaf's cost is its full posting length. Selectivity estimates
are O(#leaves) and never touch postings; composites use min / capped-sum
bounds that deliberately over-estimate. BM25 over one channel serves keyword
queries.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass
from typing import Any, Union

from .embed import tokenize
from .schema import DatasetConfig, Document, Violation
from .types import CostCounters, ScoredHit, sort_hits


class FilterError(ValueError):
    """A filter references an unknown/unfilterable field or has a bad shape."""


@dataclass(frozen=True)
class Eq:
    field: str
    value: Any


@dataclass(frozen=True)
class In:
    field: str
    values: tuple


@dataclass(frozen=True)
class Range:
    field: str
    min: Any = None
    max: Any = None  # bounds inclusive


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    child: "Filter"


Filter = Union[Eq, In, Range, And, Or, Not]


def parse_filter(obj: Any) -> Filter:
    """Parse the wire form {"op": ..., "field": ..., ...} into a filter tree."""
    if not isinstance(obj, dict):
        raise FilterError("filter must be a JSON object")
    op = obj.get("op")
    if op == "eq":
        return Eq(_wire_field(obj), obj.get("value"))
    if op == "in":
        values = obj.get("value")
        if not isinstance(values, list):
            raise FilterError("'in' filter needs a list under 'value'")
        return In(_wire_field(obj), tuple(values))
    if op == "range":
        return Range(_wire_field(obj), obj.get("min"), obj.get("max"))
    if op in ("and", "or"):
        children = obj.get("children")
        if not isinstance(children, list) or not children:
            raise FilterError(f"'{op}' filter needs a nonempty 'children' list")
        parsed = tuple(parse_filter(c) for c in children)
        return And(parsed) if op == "and" else Or(parsed)
    if op == "not":
        children = obj.get("children")
        if not isinstance(children, list) or len(children) != 1:
            raise FilterError("'not' filter needs exactly one child")
        return Not(parse_filter(children[0]))
    raise FilterError(f"unknown filter op {op!r}")


def _wire_field(obj: dict) -> str:
    name = obj.get("field")
    if not isinstance(name, str) or not name:
        raise FilterError("filter leaf needs a 'field' name")
    return name


def filter_to_wire(f: Filter) -> dict[str, Any]:
    if isinstance(f, Eq):
        return {"op": "eq", "field": f.field, "value": f.value}
    if isinstance(f, In):
        return {"op": "in", "field": f.field, "value": list(f.values)}
    if isinstance(f, Range):
        out: dict[str, Any] = {"op": "range", "field": f.field}
        if f.min is not None:
            out["min"] = f.min
        if f.max is not None:
            out["max"] = f.max
        return out
    if isinstance(f, And):
        return {"op": "and", "children": [filter_to_wire(c) for c in f.children]}
    if isinstance(f, Or):
        return {"op": "or", "children": [filter_to_wire(c) for c in f.children]}
    if isinstance(f, Not):
        return {"op": "not", "children": [filter_to_wire(f.child)]}
    raise FilterError(f"not a filter node: {f!r}")


def validate_filter(cfg: DatasetConfig, f: Filter) -> list[Violation]:
    out: list[Violation] = []
    fields = cfg.field_map()

    def leaf(field_name: str, needs_order: bool = False) -> None:
        spec = fields.get(field_name)
        if spec is None:
            out.append(Violation("unknown_field", f"filter references unknown field {field_name!r}", field_name))
            return
        if not spec.filterable:
            out.append(Violation("not_filterable", f"field {field_name!r} is not filterable", field_name))
        if needs_order and spec.kind not in ("integer", "float", "date"):
            out.append(Violation("range_on_unordered", f"range filter needs an ordered field, {field_name!r} is {spec.kind}", field_name))

    def walk(node: Filter) -> None:
        if isinstance(node, Eq):
            leaf(node.field)
        elif isinstance(node, In):
            leaf(node.field)
        elif isinstance(node, Range):
            leaf(node.field, needs_order=True)
        elif isinstance(node, (And, Or)):
            if not node.children:
                out.append(Violation("empty_children", "and/or needs at least one child"))
            for c in node.children:
                walk(c)
        elif isinstance(node, Not):
            walk(node.child)
        else:
            out.append(Violation("bad_filter_node", f"unknown node {node!r}"))

    walk(f)
    return out


class StructuredIndex:
    """Posting lists per keyword value, sorted (value, doc_id) arrays per ordered field."""

    def __init__(self, cfg: DatasetConfig, docs: list[Document]):
        self.cfg = cfg
        self.universe: list[str] = sorted({d.doc_id for d in docs})
        self._universe_set = set(self.universe)
        self.postings: dict[str, dict[Any, list[str]]] = {}
        self.ordered: dict[str, tuple[list[Any], list[str]]] = {}
        for spec in cfg.metadata_fields:
            if not spec.filterable:
                continue
            if spec.kind in ("keyword", "keyword_list"):
                per_value: dict[Any, set[str]] = {}
                for d in docs:
                    value = d.metadata.get(spec.name)
                    if value is None:
                        continue
                    values = value if spec.kind == "keyword_list" else [value]
                    for v in set(values):
                        per_value.setdefault(v, set()).add(d.doc_id)
                self.postings[spec.name] = {v: sorted(ids) for v, ids in per_value.items()}
            else:
                pairs = sorted(
                    (d.metadata[spec.name], d.doc_id) for d in docs if spec.name in d.metadata
                )
                self.ordered[spec.name] = ([p[0] for p in pairs], [p[1] for p in pairs])

    def _field_kind(self, name: str) -> str:
        spec = self.cfg.field_map().get(name)
        if spec is None:
            raise FilterError(f"unknown field {name!r}")
        if not spec.filterable:
            raise FilterError(f"field {name!r} is not filterable")
        return spec.kind

    def to_state(self) -> dict[str, Any]:
        return {
            "universe": self.universe,
            "postings": {f: {str(v): ids for v, ids in per.items()} for f, per in self.postings.items()},
            "ordered": {f: {"values": vals, "doc_ids": ids} for f, (vals, ids) in self.ordered.items()},
        }

    @classmethod
    def from_state(cls, cfg: DatasetConfig, state: dict[str, Any]) -> "StructuredIndex":
        idx = cls.__new__(cls)
        idx.cfg = cfg
        idx.universe = list(state["universe"])
        idx._universe_set = set(idx.universe)
        idx.postings = {f: dict(per) for f, per in state["postings"].items()}
        idx.ordered = {f: (list(o["values"]), list(o["doc_ids"])) for f, o in state["ordered"].items()}
        return idx

    # -- leaf accessors -----------------------------------------------------

    def _eq_leaf(self, field_name: str, value: Any) -> tuple[list[str], int]:
        kind = self._field_kind(field_name)
        if kind in ("keyword", "keyword_list"):
            posting = self.postings.get(field_name, {}).get(value, [])
            return posting, len(posting)
        return self._range_leaf(field_name, value, value)

    def _range_leaf(self, field_name: str, lo: Any, hi: Any) -> tuple[list[str], int]:
        kind = self._field_kind(field_name)
        if kind not in ("integer", "float", "date"):
            raise FilterError(f"range needs an ordered field, {field_name!r} is {kind}")
        values, doc_ids = self.ordered.get(field_name, ([], []))
        start = 0 if lo is None else bisect_left(values, lo)
        end = len(values) if hi is None else bisect_right(values, hi)
        matched = doc_ids[start:end]
        return matched, len(matched)

    def _leaf_count(self, node: Filter) -> int:
        """Match-count estimate for a leaf from posting/array lengths only."""
        if isinstance(node, Eq):
            return self._eq_leaf(node.field, node.value)[1]
        if isinstance(node, In):
            kind = self._field_kind(node.field)
            total = 0
            for v in node.values:
                if kind in ("keyword", "keyword_list"):
                    total += len(self.postings.get(node.field, {}).get(v, []))
                else:
                    total += self._range_leaf(node.field, v, v)[1]
            return total
        if isinstance(node, Range):
            values, _ = self.ordered.get(node.field, ([], []))
            kind = self._field_kind(node.field)
            if kind not in ("integer", "float", "date"):
                raise FilterError(f"range needs an ordered field, {node.field!r} is {kind}")
            start = 0 if node.min is None else bisect_left(values, node.min)
            end = len(values) if node.max is None else bisect_right(values, node.max)
            return max(0, end - start)
        raise FilterError(f"not a leaf: {node!r}")


def eval_filter(index: StructuredIndex, f: Filter) -> tuple[list[str], int]:
    """Exact match set (doc ids ascending) plus posting entries touched."""
    scanned = 0

    def walk(node: Filter) -> set[str]:
        nonlocal scanned
        if isinstance(node, Eq):
            docs, cost = index._eq_leaf(node.field, node.value)
            scanned += cost
            return set(docs)
        if isinstance(node, In):
            acc: set[str] = set()
            for v in node.values:
                docs, cost = index._eq_leaf(node.field, v)
                scanned += cost
                acc.update(docs)
            return acc
        if isinstance(node, Range):
            docs, cost = index._range_leaf(node.field, node.min, node.max)
            scanned += cost
            return set(docs)
        if isinstance(node, And):
            if not node.children:
                raise FilterError("'and' needs at least one child")
            sets = [walk(c) for c in node.children]
            return set.intersection(*sets)
        if isinstance(node, Or):
            if not node.children:
                raise FilterError("'or' needs at least one child")
            sets = [walk(c) for c in node.children]
            return set.union(*sets)
        if isinstance(node, Not):
            child = walk(node.child)
            scanned += len(index.universe)  # complement walks the universe
            return index._universe_set - child
        raise FilterError(f"unknown filter node {node!r}")

    return sorted(walk(f)), scanned


def selectivity(index: StructuredIndex, f: Filter) -> float:
    """Estimated match fraction in [0, 1]; leaves exact, composites bounded above."""
    universe = len(index.universe)
    if universe == 0:
        return 0.0

    def walk(node: Filter) -> float:
        if isinstance(node, (Eq, In, Range)):
            return min(1.0, index._leaf_count(node) / universe)
        if isinstance(node, And):
            return min(walk(c) for c in node.children)
        if isinstance(node, Or):
            return min(1.0, sum(walk(c) for c in node.children))
        if isinstance(node, Not):
            return 1.0 - walk(node.child)
        raise FilterError(f"unknown filter node {node!r}")

    return walk(f)


class LexicalIndex:
    """BM25 statistics over one channel.

    idf uses the +1-smoothed form ln(1 + (N - df + 0.5) / (df + 0.5)), which is
    non-negative for every df <= N. Documents without the channel (or with an
    empty one) are not indexed.
    """

    def __init__(self, docs: list[Document], channel: str, k1: float = 1.2, b: float = 0.75):
        self.channel = channel
        self.k1 = k1
        self.b = b
        self.doc_len: dict[str, int] = {}
        self.postings: dict[str, dict[str, int]] = {}
        for d in docs:
            text = d.channels.get(channel)
            if not text:
                continue
            tokens = tokenize(text)
            if not tokens:
                continue
            self.doc_len[d.doc_id] = len(tokens)
            for term, tf in Counter(tokens).items():
                self.postings.setdefault(term, {})[d.doc_id] = tf
        self.n_docs = len(self.doc_len)
        self.avgdl = sum(self.doc_len.values()) / self.n_docs if self.n_docs else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "LexicalIndex":
        idx = cls.__new__(cls)
        idx.channel = state["channel"]
        idx.k1 = state["k1"]
        idx.b = state["b"]
        idx.doc_len = {k: int(v) for k, v in state["doc_len"].items()}
        idx.postings = {t: {d: int(tf) for d, tf in p.items()} for t, p in state["postings"].items()}
        idx.n_docs = len(idx.doc_len)
        idx.avgdl = sum(idx.doc_len.values()) / idx.n_docs if idx.n_docs else 0.0
        return idx

    def to_state(self) -> dict[str, Any]:
        return {
            "channel": self.channel,
            "k1": self.k1,
            "b": self.b,
            "doc_len": self.doc_len,
            "postings": self.postings,
        }


def bm25_search(index: LexicalIndex, query: str, k: int, allowed: set[str] | None = None) -> list[ScoredHit]:
    if k <= 0 or index.n_docs == 0:
        return []
    scores: dict[str, float] = {}
    for term in tokenize(query):
        posting = index.postings.get(term)
        if not posting:
            continue  # absent terms contribute 0
        idf = index.idf(term)
        for doc_id, tf in posting.items():
            if allowed is not None and doc_id not in allowed:
                continue
            dl = index.doc_len[doc_id]
            norm = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (index.k1 + 1.0) / norm
    hits = [ScoredHit(doc_id, score, 0) for doc_id, score in scores.items()]
    return sort_hits(hits)[:k]


def build_structured(cfg: DatasetConfig, docs: list[Document]) -> StructuredIndex:
    return StructuredIndex(cfg, docs)
