"""HTTP JSON API: config registration, activation, search, swap, metrics.

This is the surface the management UI and the bench harness consume. Vectors
never cross the wire; responses carry hits plus the plan and cost counters so
callers can see which reduction pathway fired and what it cost.
"""

from __future__ import annotations

import threading
from typing import Any

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import state as state_mod
from .inverted import FilterError, parse_filter
from .router import MAX_K, PlanError, EngineError, SearchRequest
from .state import ActivationError, ActiveApp, CheckpointStore, SwapError


def _error(status: int, code: str, message: str, violations: list | None = None):
    detail: dict[str, Any] = {"code": code, "message": message}
    if violations:
        detail["violations"] = [v.to_json() for v in violations]
    raise HTTPException(status_code=status, detail=detail)


class AppRegistry:
    """Live apps plus cumulative service metrics."""

    def __init__(self, store: CheckpointStore):
        self.store = store
        self._lock = threading.Lock()
        self.apps: dict[str, ActiveApp] = {}
        self.reports: dict[str, dict[str, Any]] = {}
        self.metrics: dict[str, Any] = {
            "searches": 0,
            "activations": 0,
            "swaps": 0,
            "plans": {},
            "scored_vectors": 0,
            "postings_scanned": 0,
            "widen_rounds": 0,
        }

    def record_search(self, plan_kind: str, counters) -> None:
        with self._lock:
            m = self.metrics
            m["searches"] += 1
            m["plans"][plan_kind] = m["plans"].get(plan_kind, 0) + 1
            m["scored_vectors"] += counters.scored_vectors
            m["postings_scanned"] += counters.postings_scanned
            m["widen_rounds"] += counters.widen_rounds


def create_app(store_root: str | None = None) -> FastAPI:
    store = CheckpointStore(state_mod.store_root_from_env(store_root))
    registry = AppRegistry(store)
    api = FastAPI(title="searchgym", version="0.1.0")
    api.state.registry = registry

    @api.post("/configs")
    def post_config(body: dict = Body(...)) -> dict[str, str]:
        hash_hex, kind, _typed, violations = store.configs.put(body)
        if violations:
            _error(422, "invalid_config", "config does not validate", violations)
        return {"hash": hash_hex, "kind": kind}

    @api.get("/configs/{hash_hex}")
    def get_config(hash_hex: str) -> dict[str, Any]:
        obj = store.configs.get(hash_hex)
        if obj is None:
            _error(404, "unknown_config", f"no config {hash_hex}")
        return obj

    @api.get("/configs")
    def list_configs() -> list[dict[str, Any]]:
        return store.configs.entries()

    @api.post("/apps/{hash_hex}/activate")
    def activate_app(hash_hex: str, body: dict | None = Body(None)) -> dict[str, Any]:
        source = (body or {}).get("source")
        try:
            app, report = state_mod.activate(hash_hex, store, source=source)
        except ActivationError as exc:
            status = 422 if exc.violations else 404
            _error(status, "activation_failed", str(exc), exc.violations)
        with registry._lock:
            registry.apps[hash_hex] = app
            registry.reports[hash_hex] = report.to_json()
            registry.metrics["activations"] += 1
        return report.to_json()

    @api.post("/apps/{hash_hex}/search")
    def search_app(hash_hex: str, body: dict = Body(...)) -> dict[str, Any]:
        app = registry.apps.get(hash_hex)
        if app is None:
            _error(404, "app_not_active", f"app {hash_hex} is not activated")
        query_text = body.get("query_text")
        if not isinstance(query_text, str):
            _error(422, "bad_request", "query_text must be a string")
        k = body.get("k", 10)
        if isinstance(k, bool) or not isinstance(k, int) or k < 1 or k > MAX_K:
            _error(422, "bad_request", f"k must be an integer in [1, {MAX_K}]")
        mode = body.get("mode", "auto")
        wire = body.get("filter")
        try:
            f = parse_filter(wire) if wire is not None else None
            req = SearchRequest(query_text=query_text, k=k, filter=f, mode=mode)
            resp = app.search(req)
        except (FilterError, PlanError) as exc:
            _error(422, "bad_request", str(exc))
        except EngineError as exc:
            _error(500, "engine_fault", str(exc))
        registry.record_search(resp.plan.kind, resp.counters)
        return resp.to_json()

    @api.post("/apps/{hash_hex}/swap")
    def swap_app(hash_hex: str, body: dict = Body(...)) -> dict[str, Any]:
        app = registry.apps.get(hash_hex)
        if app is None:
            _error(404, "app_not_active", f"app {hash_hex} is not activated")
        name = body.get("vectorset")
        if not isinstance(name, str) or not name:
            _error(422, "bad_request", "body needs a 'vectorset' name")
        try:
            report = app.hot_swap(name)
        except SwapError as exc:
            _error(422, "swap_failed", str(exc))
        with registry._lock:
            registry.metrics["swaps"] += 1
        return report.to_json()

    @api.get("/apps")
    def list_apps() -> list[dict[str, Any]]:
        out = []
        for hash_hex, app in registry.apps.items():
            out.append(
                {
                    "hash": hash_hex,
                    "name": app.config.name,
                    "active_vectorset": app.active_vectorset,
                    "vectorsets": app.vectorset_names,
                    "report": registry.reports.get(hash_hex),
                }
            )
        return out

    @api.get("/metrics")
    def metrics() -> dict[str, Any]:
        with registry._lock:
            return {k: (dict(v) if isinstance(v, dict) else v) for k, v in registry.metrics.items()}

    @api.exception_handler(Exception)
    def unhandled(request, exc):  # engine faults and the unexpected
        return JSONResponse(status_code=500, content={"detail": {"code": "internal", "message": str(exc)}})

    return api


def serve(bind: str = "127.0.0.1:7700", store_root: str | None = None) -> None:
    import uvicorn

    host, _, port = bind.partition(":")
    uvicorn.run(create_app(store_root), host=host or "127.0.0.1", port=int(port or 7700), log_level="warning")
