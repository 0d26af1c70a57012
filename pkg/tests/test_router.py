import json
import math

import numpy as np
import pytest

from conftest import oracle_filter_eval, oracle_topk, random_filter

from searchgym.bench import generate_synthetic
from searchgym.config import parse_config
from searchgym.embed import ChunkingStrategy, EmbedderConfig, VectorSetConfig, build_vectorset, make_embedder
from searchgym.inverted import And, Eq, LexicalIndex, Or, Range, build_structured
from searchgym.router import (
    MAX_K,
    PlanError,
    QueryPlan,
    RouterConfig,
    SearchRequest,
    execute,
    plan,
)
from searchgym.schema import DatasetSnapshot, Document
from searchgym.state import _SnapshotEngines, _VsSnapshot
from searchgym.vindex import VectorIndexConfig, build_index


def make_engines(synth, index_kind="flat", with_lexical=True, n_probe=8):
    docs = [Document(**json.loads(l)) for l in synth.corpus_lines]
    dataset_cfg = parse_config(synth.dataset_config)[1]
    snapshot = DatasetSnapshot(documents=docs, rejects=[], stats={})
    vs_cfg = VectorSetConfig(
        name="v", dataset="0" * 64, channel="body",
        chunking=ChunkingStrategy("whole_document"),
        embedder=EmbedderConfig(kind="hashing", dim=synth.embed_dim, seed=synth.embed_seed),
        metric="cosine",
    )
    artifact = build_vectorset(vs_cfg, snapshot)
    if index_kind == "flat":
        index = build_index(VectorIndexConfig("flat"), artifact)
    else:
        index = build_index(VectorIndexConfig("ivf", n_probe=n_probe, seed=1), artifact)
    structured = build_structured(dataset_cfg, docs)
    lexical = LexicalIndex(docs, "body") if with_lexical else None
    snap = _VsSnapshot(name="v", vs_hash="0" * 64, cfg=vs_cfg, artifact=artifact,
                       index=index, embedder=make_embedder(vs_cfg.embedder))
    return _SnapshotEngines(snap, structured, lexical), docs, artifact, structured


@pytest.fixture(scope="module")
def flat_setup(small_synth):
    return make_engines(small_synth, "flat")


CFG = RouterConfig()


class TestPlan:
    def test_no_filter_semantic_unfiltered(self, flat_setup):
        _, _, _, structured = flat_setup
        p = plan(CFG, SearchRequest("some long semantic query text", k=5, mode="semantic"), structured)
        assert p.kind == "Unfiltered"

    def test_strong_filter_prefilter(self, flat_setup):
        # planted tag t1 matches 5% of 800 docs; threshold is 0.1
        _, _, _, structured = flat_setup
        req = SearchRequest("one two three four five", k=5, filter=Eq("tag", "t1"), mode="semantic")
        p = plan(CFG, req, structured)
        assert p.kind == "PreFilter"
        assert p.selectivity_estimate == pytest.approx(0.05)

    def test_weak_filter_postfilter_with_2k_oversample(self, flat_setup):
        _, _, _, structured = flat_setup
        req = SearchRequest("one two three four five", k=10, filter=Range("year", None, None), mode="semantic")
        p = plan(CFG, req, structured)
        assert p.kind == "PostFilter"
        assert p.oversample_m0 == 20  # oversample factor 2 over k=10

    def test_threshold_boundary_goes_prefilter(self, flat_setup):
        # s == theta counts as strong
        _, _, _, structured = flat_setup
        req = SearchRequest("one two three four five", k=5, filter=Eq("tag", "t0"), mode="semantic")
        p = plan(CFG, req, structured)
        assert p.selectivity_estimate == pytest.approx(0.1)
        assert p.kind == "PreFilter"

    def test_keyword_mode_lexical(self, flat_setup):
        _, _, _, structured = flat_setup
        p = plan(CFG, SearchRequest("anything at all whatsoever here", k=5, mode="keyword"), structured)
        assert p.kind == "Lexical"

    def test_auto_short_query_lexical(self, flat_setup):
        _, _, _, structured = flat_setup
        assert plan(CFG, SearchRequest("w001 w002 w003", k=5, mode="auto"), structured).kind == "Lexical"
        assert plan(CFG, SearchRequest("w001 w002 w003 w004", k=5, mode="auto"), structured).kind == "Unfiltered"

    def test_keyword_without_lexical_errors_auto_falls_back(self, flat_setup):
        _, _, _, structured = flat_setup
        with pytest.raises(PlanError):
            plan(CFG, SearchRequest("hi", k=5, mode="keyword"), structured, has_lexical=False)
        p = plan(CFG, SearchRequest("hi", k=5, mode="auto"), structured, has_lexical=False)
        assert p.kind == "Unfiltered"

    def test_k_bounds(self, flat_setup):
        _, _, _, structured = flat_setup
        with pytest.raises(PlanError):
            plan(CFG, SearchRequest("x", k=0), structured)
        with pytest.raises(PlanError):
            plan(CFG, SearchRequest("x", k=MAX_K + 1), structured)

    def test_plan_determinism(self, flat_setup):
        _, _, _, structured = flat_setup
        req = SearchRequest("one two three four five", k=7, filter=Eq("tag", "t2"), mode="semantic")
        assert plan(CFG, req, structured) == plan(CFG, req, structured)


class TestExecute:
    def test_prefilter_single_match_returned_regardless_of_rank(self, flat_setup):
        engines, docs, _, structured = flat_setup
        # single-doc restriction: Eq on a unique doc via year+tag is fiddly; use doc's own id
        target = docs[17]
        f = And((Eq("year", target.metadata["year"]), Eq("tag", target.metadata["tag"]),
                 Range("rating", target.metadata["rating"], target.metadata["rating"])))
        matched = oracle_filter_eval(f, docs)
        assert target.doc_id in matched
        req = SearchRequest("w000 w001 w002 w003 w004", k=len(matched), filter=f, mode="semantic")
        hits, counters = execute(QueryPlan("PreFilter", 0.001), req, engines)
        assert target.doc_id in [h.doc_id for h in hits]

    def test_postfilter_zero_match_terminates_in_log_rounds(self):
        synth1024 = generate_synthetic(1024, [0.1], seed=21, n_queries=4)
        engines, docs, _, structured = make_engines(synth1024, "flat")
        req = SearchRequest("w000 w001 w002 w003 w004", k=10, filter=Eq("tag", "no_such_tag"), mode="semantic")
        p = QueryPlan("PostFilter", 0.0, oversample_m0=20)
        hits, counters = execute(p, req, engines)
        assert hits == []
        assert counters.widen_rounds == math.ceil(math.log2(1024 / 20))  # = 6

    def test_postfilter_matches_in_top_2k_no_widening(self, flat_setup):
        engines, docs, artifact, structured = flat_setup
        # vacuous filter: everything matches, so the first fetch suffices
        req = SearchRequest("w000 w001 w002 w003 w004", k=10, filter=Range("year", None, None), mode="semantic")
        hits, counters = execute(QueryPlan("PostFilter", 1.0, oversample_m0=20), req, engines)
        assert counters.widen_rounds == 0
        q = engines.embed_query(req.query_text)
        expected = oracle_topk(artifact, q, 10)
        assert [h.doc_id for h in hits] == [d for d, _, _ in expected]

    def test_postfilter_adversarial_widen_then_oracle(self, flat_setup):
        engines, docs, artifact, structured = flat_setup
        # query for one planted doc; filter to a tag it does not carry, so every
        # match sits far from the query and outside the first fetch
        gold = docs[3]
        tag = "t0" if gold.metadata["tag"] != "t0" else "t1"
        f = Eq("tag", tag)
        req = SearchRequest(gold.channels["body"], k=10, filter=f, mode="semantic")
        hits, counters = execute(QueryPlan("PostFilter", 0.1, oversample_m0=20), req, engines)
        assert counters.widen_rounds >= 1
        q = engines.embed_query(req.query_text)
        allowed = set(oracle_filter_eval(f, docs))
        expected = oracle_topk(artifact, q, 10, allowed)
        assert [h.doc_id for h in hits] == [d for d, _, _ in expected]

    def test_lexical_with_filter_restricts(self, flat_setup):
        engines, docs, _, structured = flat_setup
        target = docs[5]
        term = target.channels["body"].split()[0]  # its unique ua token
        req = SearchRequest(term, k=5, filter=Eq("tag", target.metadata["tag"]), mode="keyword")
        hits, _ = execute(QueryPlan("Lexical"), req, engines)
        assert [h.doc_id for h in hits] == [target.doc_id]
        other_tag = "t0" if target.metadata["tag"] != "t0" else "t1"
        req2 = SearchRequest(term, k=5, filter=Eq("tag", other_tag), mode="keyword")
        hits2, _ = execute(QueryPlan("Lexical"), req2, engines)
        assert hits2 == []

    def test_prefilter_empty_match_set(self, flat_setup):
        engines, _, _, _ = flat_setup
        req = SearchRequest("w000 w001 w002 w003", k=5, filter=Eq("tag", "absent"), mode="semantic")
        hits, _ = execute(QueryPlan("PreFilter", 0.0), req, engines)
        assert hits == []

    def test_plan_without_filter_rejected(self, flat_setup):
        engines, _, _, _ = flat_setup
        req = SearchRequest("w000 w001 w002 w003", k=5, mode="semantic")
        with pytest.raises(PlanError):
            execute(QueryPlan("PreFilter", 0.5), req, engines)


class TestPlanEquivalence:
    def test_forced_plans_agree_with_oracle(self, flat_setup):
        engines, docs, artifact, structured = flat_setup
        rng = np.random.default_rng(31)
        pool = [f"w{i:03d}" for i in range(200)]
        checked = 0
        for _ in range(120):
            f = random_filter(rng, docs)
            allowed = set(oracle_filter_eval(f, docs))
            k = int(rng.integers(1, 12))
            text = " ".join(pool[int(j)] for j in rng.integers(0, 200, 6))
            req = SearchRequest(text, k=k, filter=f, mode="semantic")
            pre, _ = execute(QueryPlan("PreFilter", 0.0), req, engines)
            post, _ = execute(QueryPlan("PostFilter", 1.0, oversample_m0=2 * k), req, engines)
            q = engines.embed_query(text)
            expected = oracle_topk(artifact, q, k, allowed)
            assert [h.doc_id for h in pre] == [d for d, _, _ in expected]
            assert [h.doc_id for h in post] == [d for d, _, _ in expected]
            for h, (_, s, _) in zip(pre, expected):
                assert h.score == pytest.approx(s, abs=1e-6)
            for h, (_, s, _) in zip(post, expected):
                assert h.score == pytest.approx(s, abs=1e-6)
            checked += 1
        assert checked == 120
