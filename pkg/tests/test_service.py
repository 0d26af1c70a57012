import json

import pytest
from fastapi.testclient import TestClient

from conftest import app_config, register_synthetic, vectorset_config
from test_config import GOLDEN_DATASET, GOLDEN_HASH

from searchgym import bench as bench_mod
from searchgym.service import create_app
from searchgym.state import CheckpointStore


@pytest.fixture(scope="module")
def synth():
    return bench_mod.generate_synthetic(n_docs=300, tag_selectivities=[0.1], seed=66, n_queries=8)


@pytest.fixture()
def client(tmp_path, synth):
    api = create_app(str(tmp_path / "store"))
    store: CheckpointStore = api.state.registry.store
    corpus = tmp_path / "corpus.jsonl"
    synth.write(str(corpus), str(tmp_path / "queries.jsonl"))
    ds_hash = register_synthetic(store, synth, str(corpus))
    vs_a, _, _, _ = store.configs.put(vectorset_config(ds_hash, name="set_a", dim=synth.embed_dim, seed=synth.embed_seed))
    vs_b, _, _, _ = store.configs.put(vectorset_config(ds_hash, name="set_b", channel="title", dim=synth.embed_dim, seed=synth.embed_seed))
    app_hash, _, _, _ = store.configs.put(app_config(ds_hash, [vs_a, vs_b], "set_a"))
    with TestClient(api, raise_server_exceptions=False) as c:
        c.app_hash = app_hash
        c.ds_hash = ds_hash
        yield c


def query_text(synth, i=0):
    return json.loads(synth.query_lines[i])["text"]


class TestConfigs:
    def test_post_golden_config_returns_frozen_hash(self, client):
        resp = client.post("/configs", json=GOLDEN_DATASET)
        assert resp.status_code == 200
        assert resp.json() == {"hash": GOLDEN_HASH, "kind": "dataset"}

    def test_get_config_roundtrip_and_404(self, client):
        client.post("/configs", json=GOLDEN_DATASET)
        assert client.get(f"/configs/{GOLDEN_HASH}").json()["name"] == "papers"
        assert client.get("/configs/" + "0" * 64).status_code == 404

    def test_invalid_config_is_422_with_violations(self, client):
        bad = dict(GOLDEN_DATASET, channels=[{"name": "t"}, {"name": "t"}])
        resp = client.post("/configs", json=bad)
        assert resp.status_code == 422
        codes = [v["code"] for v in resp.json()["detail"]["violations"]]
        assert "duplicate_channel" in codes


class TestActivateAndSearch:
    def test_activate_then_search(self, client, synth):
        resp = client.post(f"/apps/{client.app_hash}/activate")
        assert resp.status_code == 200
        layers = resp.json()["layers"]
        assert set(layers) == {"dataset", "vectorset", "app"}

        r = client.post(f"/apps/{client.app_hash}/search",
                        json={"query_text": query_text(synth), "k": 3, "mode": "semantic"})
        assert r.status_code == 200
        body = r.json()
        assert len(body["hits"]) == 3
        assert body["plan"]["kind"] == "Unfiltered"
        assert "scored_vectors" in body["counters"]
        assert body["vectorset"] == "set_a"

    def test_search_unactivated_app_404(self, client):
        resp = client.post("/apps/" + "9" * 64 + "/search", json={"query_text": "x", "k": 1})
        assert resp.status_code == 404

    def test_search_k_zero_422(self, client, synth):
        client.post(f"/apps/{client.app_hash}/activate")
        resp = client.post(f"/apps/{client.app_hash}/search", json={"query_text": "x", "k": 0})
        assert resp.status_code == 422

    def test_search_filter_violation_422(self, client, synth):
        client.post(f"/apps/{client.app_hash}/activate")
        resp = client.post(
            f"/apps/{client.app_hash}/search",
            json={"query_text": query_text(synth), "k": 3,
                  "filter": {"op": "eq", "field": "no_such_field", "value": 1}},
        )
        assert resp.status_code == 422

    def test_filtered_search_reports_plan(self, client, synth):
        client.post(f"/apps/{client.app_hash}/activate")
        resp = client.post(
            f"/apps/{client.app_hash}/search",
            json={"query_text": query_text(synth), "k": 3, "mode": "semantic",
                  "filter": {"op": "eq", "field": "tag", "value": "t0"}},
        )
        body = resp.json()
        assert body["plan"]["kind"] == "PreFilter"
        assert body["plan"]["selectivity"] == pytest.approx(0.1)
        assert all(h["doc_id"] for h in body["hits"])


class TestSwapAndListing:
    def test_swap_changes_served_vectorset(self, client, synth):
        client.post(f"/apps/{client.app_hash}/activate")
        resp = client.post(f"/apps/{client.app_hash}/swap", json={"vectorset": "set_b"})
        assert resp.status_code == 200
        r = client.post(f"/apps/{client.app_hash}/search", json={"query_text": query_text(synth), "k": 2, "mode": "semantic"})
        assert r.json()["vectorset"] == "set_b"

    def test_swap_unknown_vectorset_422(self, client):
        client.post(f"/apps/{client.app_hash}/activate")
        resp = client.post(f"/apps/{client.app_hash}/swap", json={"vectorset": "nope"})
        assert resp.status_code == 422

    def test_apps_listing(self, client):
        client.post(f"/apps/{client.app_hash}/activate")
        listing = client.get("/apps").json()
        assert len(listing) == 1
        entry = listing[0]
        assert entry["hash"] == client.app_hash
        assert entry["active_vectorset"] == "set_a"
        assert set(entry["vectorsets"]) == {"set_a", "set_b"}

    def test_metrics_accumulate(self, client, synth):
        client.post(f"/apps/{client.app_hash}/activate")
        before = client.get("/metrics").json()
        client.post(f"/apps/{client.app_hash}/search", json={"query_text": query_text(synth), "k": 2, "mode": "semantic"})
        after = client.get("/metrics").json()
        assert after["searches"] == before["searches"] + 1
        assert after["scored_vectors"] > before["scored_vectors"]
        assert after["plans"].get("Unfiltered", 0) >= 1
