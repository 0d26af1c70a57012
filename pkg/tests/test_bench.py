import json

import numpy as np
import pytest

from conftest import build_synthetic_app

from searchgym import bench as bench_mod
from searchgym.bench import (
    GenerationError,
    cost_sweep,
    generate_synthetic,
    parse_bench_query,
    run_bench,
    sweep_filter,
)
from searchgym.inverted import Eq, Range
from searchgym.state import CheckpointStore


class TestGenerator:
    def test_planted_tag_counts_exact(self):
        synth = generate_synthetic(1000, [0.1, 0.05], seed=9, n_queries=2)
        docs = [json.loads(l) for l in synth.corpus_lines]
        assert sum(d["metadata"]["tag"] == "t0" for d in docs) == 100
        assert sum(d["metadata"]["tag"] == "t1" for d in docs) == 50

    def test_deterministic_bytes(self):
        a = generate_synthetic(200, [0.1], seed=4, n_queries=5)
        b = generate_synthetic(200, [0.1], seed=4, n_queries=5)
        assert a.corpus_lines == b.corpus_lines
        assert a.query_lines == b.query_lines

    def test_infeasible_disjoint_sum(self):
        with pytest.raises(GenerationError):
            generate_synthetic(100, [0.5, 0.6], seed=1)

    def test_selectivity_out_of_range(self):
        with pytest.raises(GenerationError):
            generate_synthetic(100, [0.0], seed=1)
        with pytest.raises(GenerationError):
            generate_synthetic(100, [1.5], seed=1)

    def test_gold_is_strict_nearest_neighbor(self):
        synth = generate_synthetic(500, [0.1], seed=13, n_queries=30)
        # re-check the planted property with an independent flat scan
        from searchgym.embed import HashingEmbedder

        emb = HashingEmbedder(dim=synth.embed_dim, seed=synth.embed_seed)
        docs = [json.loads(l) for l in synth.corpus_lines]
        matrix = np.stack([emb.embed(d["channels"]["body"]) for d in docs])
        ids = [d["doc_id"] for d in docs]
        for line in synth.query_lines:
            q = json.loads(line)
            scores = matrix @ emb.embed(q["text"])
            assert ids[int(np.argmax(scores))] == q["gold_doc_ids"][0]


class TestRunBench:
    def test_rate_arithmetic_four_of_ten(self, tmp_path, small_synth):
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(store, small_synth, str(tmp_path / "c.jsonl"))
        # 4 planted queries that hit at rank 1, 6 with unreachable gold ids
        lines = list(small_synth.query_lines[:4])
        for i in range(6):
            lines.append(json.dumps({
                "query_id": f"MISS{i}", "text": "w000 w001 w002 w003 w004",
                "filter": None, "gold_doc_ids": [f"NOPE{i}"],
            }))
        report = run_bench(app, lines, ks=[1, 10])
        assert report.n_queries == 10
        assert report.rates[10] == pytest.approx(0.4)
        assert report.rates[1] == pytest.approx(0.4)  # planted golds hit at rank 1

    def test_rates_monotone_in_k(self, tmp_path, small_synth):
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(store, small_synth, str(tmp_path / "c.jsonl"))
        report = run_bench(app, small_synth.query_lines, ks=[1, 5, 10, 20])
        values = [report.rates[k] for k in sorted(report.rates)]
        assert values == sorted(values)
        assert report.app_hash == app.app_hash

    def test_malformed_lines_skipped_and_counted(self, tmp_path, small_synth):
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(store, small_synth, str(tmp_path / "c.jsonl"))
        lines = [small_synth.query_lines[0], "{broken", json.dumps({"query_id": "x", "text": "y", "gold_doc_ids": []})]
        report = run_bench(app, lines, ks=[1])
        assert report.n_queries == 1
        assert len(report.skipped) == 2

    def test_filtered_queries_route_and_count(self, tmp_path, small_synth):
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(store, small_synth, str(tmp_path / "c.jsonl"))
        q = json.loads(small_synth.query_lines[0])
        q["filter"] = {"op": "range", "field": "year", "min": 1800}
        report = run_bench(app, [json.dumps(q)], ks=[5])
        assert "PostFilter" in report.counters_by_plan

    def test_parse_bench_query_validation(self):
        with pytest.raises(ValueError):
            parse_bench_query(json.dumps({"query_id": "a", "text": "b", "gold_doc_ids": []}))
        with pytest.raises(ValueError):
            parse_bench_query(json.dumps({"query_id": "a", "gold_doc_ids": ["x"]}))
        q = parse_bench_query(json.dumps({
            "query_id": "a", "text": "b", "gold_doc_ids": ["x"],
            "filter": {"op": "eq", "field": "tag", "value": "t0"},
        }))
        assert q.filter == Eq("tag", "t0")


class TestSweep:
    def test_sweep_filter_mapping(self):
        planted = [0.01, 0.5]
        assert sweep_filter(0.01, ["t0", "t1"], planted) == Eq("tag", "t0")
        assert sweep_filter(0.5, ["t0", "t1"], planted) == Eq("tag", "t1")
        assert sweep_filter(1.0, ["t0", "t1"], planted) == Range("year", None, None)

    def test_small_sweep_shapes_and_vacuous_point(self, tmp_path):
        synth = generate_synthetic(600, [0.01, 0.5], seed=23, n_queries=10)
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(
            store, synth, str(tmp_path / "c.jsonl"),
            index={"kind": "ivf", "n_probe": 4, "seed": 0},
        )
        texts = [json.loads(l)["text"] for l in synth.query_lines]
        selectivities = [0.01, 0.5, 1.0]
        result = cost_sweep(
            app, selectivities, k=5, repetitions=3, query_texts=texts,
            filter_for=lambda s: sweep_filter(s, synth.tag_names, [0.01, 0.5]),
        )
        assert len(result.rows) == 6  # two forced plans per selectivity
        by_key = {(r.selectivity, r.plan): r for r in result.rows}
        # vacuous filter: every hit passes, no widening
        assert by_key[(1.0, "PostFilter")].widen_rounds == 0
        # strong filter: structured-first scores only the match set
        assert by_key[(0.01, "PreFilter")].scored_vectors == pytest.approx(6.0)
        assert result.chosen_plans[0.01] == "PreFilter"
        assert result.chosen_plans[0.5] == "PostFilter"
        assert result.chosen_plans[1.0] == "PostFilter"

    def test_csv_columns(self, tmp_path):
        synth = generate_synthetic(300, [0.1], seed=29, n_queries=5)
        store = CheckpointStore(tmp_path / "store")
        app, _, _ = build_synthetic_app(store, synth, str(tmp_path / "c.jsonl"))
        texts = [json.loads(l)["text"] for l in synth.query_lines]
        result = cost_sweep(app, [0.1], k=3, repetitions=2, query_texts=texts,
                            filter_for=lambda s: sweep_filter(s, synth.tag_names, [0.1]))
        out = tmp_path / "sweep.csv"
        result.write_csv(str(out))
        header = out.read_text().splitlines()[0]
        assert header == "selectivity,plan,scored_vectors,postings_scanned,widen_rounds"
        assert len(out.read_text().splitlines()) == 1 + len(result.rows)
