"""Typed hierarchical configs, canonical serialization, and content hashing.

Three config kinds form a hash DAG: a dataset declares schema only, a
vectorset references one dataset by hash, an app references one dataset and
one or more vectorsets by hash (router/fusion/index settings are inline).
Hashes are SHA-256 over a canonical serialization of the *typed* record with
defaults materialized, so two files that mean the same thing hash the same;
a parent's hash covers its children's hashes, so any leaf edit re-keys every
ancestor and nothing else.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable
from urllib.parse import urlparse

from .embed import ChunkingStrategy, EmbedderConfig, VectorSetConfig
from .fusion import FusionConfig
from .router import RouterConfig
from .schema import ChannelSpec, DatasetConfig, MetadataFieldSpec, Violation, validate_dataset_config
from .vindex import VectorIndexConfig

HASH_HEX_LEN = 64
KINDS = ("dataset", "vectorset", "app")


@dataclass(frozen=True)
class AppConfig:
    name: str
    dataset: str
    vectorsets: tuple[str, ...]
    active_vectorset: str
    vector_index: VectorIndexConfig
    router: RouterConfig
    fusion: FusionConfig
    lexical_channel: str | None = None


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonicalize(obj: Any) -> bytes:
    """Deterministic bytes: keys sorted by UTF-8 order, no whitespace, shortest floats.

    Python sorts str by code point, which matches UTF-8 byte order; float repr
    is the shortest round-trip decimal. Non-finite floats are rejected.
    """
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def looks_like_hash(value: Any) -> bool:
    return (
        isinstance(value, str)
        and len(value) == HASH_HEX_LEN
        and all(c in "0123456789abcdef" for c in value)
    )


# --- typed record <-> canonical dict ----------------------------------------


def dataset_to_dict(cfg: DatasetConfig) -> dict[str, Any]:
    return {
        "kind": "dataset",
        "name": cfg.name,
        "channels": [{"name": c.name} for c in cfg.channels],
        "metadata_fields": [
            {"name": f.name, "kind": f.kind, "filterable": f.filterable} for f in cfg.metadata_fields
        ],
    }


def vectorset_to_dict(cfg: VectorSetConfig) -> dict[str, Any]:
    chunking: dict[str, Any] = {"kind": cfg.chunking.kind}
    if cfg.chunking.kind == "fixed_window":
        chunking["window_tokens"] = cfg.chunking.window_tokens
        chunking["overlap_tokens"] = cfg.chunking.overlap_tokens
    embedder: dict[str, Any] = {"kind": cfg.embedder.kind}
    if cfg.embedder.kind == "hashing":
        embedder["dim"] = cfg.embedder.dim
        embedder["seed"] = cfg.embedder.seed
    else:
        embedder["endpoint"] = cfg.embedder.endpoint
    return {
        "kind": "vectorset",
        "name": cfg.name,
        "dataset": cfg.dataset,
        "channel": cfg.channel,
        "chunking": chunking,
        "embedder": embedder,
        "metric": cfg.metric,
    }


def app_to_dict(cfg: AppConfig) -> dict[str, Any]:
    index: dict[str, Any] = {"kind": cfg.vector_index.kind}
    if cfg.vector_index.kind == "ivf":
        index["n_clusters"] = cfg.vector_index.n_clusters
        index["n_probe"] = cfg.vector_index.n_probe
        index["kmeans_iters"] = cfg.vector_index.kmeans_iters
        index["seed"] = cfg.vector_index.seed
    return {
        "kind": "app",
        "name": cfg.name,
        "dataset": cfg.dataset,
        "vectorsets": list(cfg.vectorsets),
        "active_vectorset": cfg.active_vectorset,
        "vector_index": index,
        "lexical_channel": cfg.lexical_channel,
        "router": {
            "selectivity_threshold": float(cfg.router.selectivity_threshold),
            "oversample_factor": float(cfg.router.oversample_factor),
            "widen_factor": float(cfg.router.widen_factor),
            "keyword_max_tokens": cfg.router.keyword_max_tokens,
        },
        "fusion": {
            "method": cfg.fusion.method,
            "rrf_k": cfg.fusion.rrf_k,
            "weights": {k: float(v) for k, v in cfg.fusion.weights.items()},
        },
    }


def to_canonical_dict(kind: str, typed: Any) -> dict[str, Any]:
    if kind == "dataset":
        return dataset_to_dict(typed)
    if kind == "vectorset":
        return vectorset_to_dict(typed)
    if kind == "app":
        return app_to_dict(typed)
    raise ValueError(f"unknown config kind {kind!r}")


def config_hash(kind: str, typed: Any) -> str:
    return sha256_hex(canonicalize(to_canonical_dict(kind, typed)))


# --- JSON -> typed parsing ---------------------------------------------------


class _Parse:
    """Collects violations while pulling typed fields out of a JSON object."""

    def __init__(self, obj: dict[str, Any]):
        self.obj = obj
        self.violations: list[Violation] = []

    def bad(self, code: str, message: str, where: str | None = None) -> None:
        self.violations.append(Violation(code, message, where))

    def str_field(self, name: str, default: Any = ...) -> Any:
        value = self.obj.get(name, default)
        if value is ...:
            self.bad("missing_field", f"required field {name!r} is missing", name)
            return None
        if value is not None and not isinstance(value, str):
            self.bad("type_mismatch", f"field {name!r} must be a string", name)
            return None
        return value

    def int_field(self, name: str, default: Any = ..., minimum: int | None = None) -> Any:
        value = self.obj.get(name, default)
        if value is ...:
            self.bad("missing_field", f"required field {name!r} is missing", name)
            return None
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.bad("type_mismatch", f"field {name!r} must be an integer", name)
            return None
        if minimum is not None and value < minimum:
            self.bad("out_of_range", f"field {name!r} must be >= {minimum}", name)
        return value

    def float_field(self, name: str, default: Any = ...) -> Any:
        value = self.obj.get(name, default)
        if value is ...:
            self.bad("missing_field", f"required field {name!r} is missing", name)
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.bad("type_mismatch", f"field {name!r} must be a number", name)
            return None
        return float(value)


def parse_dataset(obj: dict[str, Any]) -> tuple[DatasetConfig | None, list[Violation]]:
    p = _Parse(obj)
    name = p.str_field("name")
    channels_raw = obj.get("channels")
    fields_raw = obj.get("metadata_fields", [])
    channels: list[ChannelSpec] = []
    fields: list[MetadataFieldSpec] = []
    if not isinstance(channels_raw, list):
        p.bad("type_mismatch", "channels must be a list", "channels")
    else:
        for c in channels_raw:
            if isinstance(c, dict) and isinstance(c.get("name"), str):
                channels.append(ChannelSpec(name=c["name"]))
            elif isinstance(c, str):
                channels.append(ChannelSpec(name=c))
            else:
                p.bad("type_mismatch", f"bad channel entry {c!r}", "channels")
    if not isinstance(fields_raw, list):
        p.bad("type_mismatch", "metadata_fields must be a list", "metadata_fields")
    else:
        for f in fields_raw:
            if not isinstance(f, dict) or not isinstance(f.get("name"), str) or not isinstance(f.get("kind"), str):
                p.bad("type_mismatch", f"bad metadata field entry {f!r}", "metadata_fields")
                continue
            filterable = f.get("filterable", True)
            if not isinstance(filterable, bool):
                p.bad("type_mismatch", f"filterable must be a boolean on {f.get('name')!r}", f.get("name"))
                filterable = True
            fields.append(MetadataFieldSpec(name=f["name"], kind=f["kind"], filterable=filterable))
    if p.violations:
        return None, p.violations
    cfg = DatasetConfig(name=name or "", channels=tuple(channels), metadata_fields=tuple(fields))
    return cfg, validate_dataset_config(cfg)


def parse_vectorset(obj: dict[str, Any]) -> tuple[VectorSetConfig | None, list[Violation]]:
    p = _Parse(obj)
    name = p.str_field("name")
    dataset = p.str_field("dataset")
    channel = p.str_field("channel")

    chunking_obj = obj.get("chunking", {"kind": "whole_document"})
    chunking = None
    if not isinstance(chunking_obj, dict):
        p.bad("type_mismatch", "chunking must be an object", "chunking")
    else:
        ck = chunking_obj.get("kind")
        if ck == "whole_document":
            chunking = ChunkingStrategy(kind="whole_document")
        elif ck == "fixed_window":
            cp = _Parse(chunking_obj)
            window = cp.int_field("window_tokens", minimum=1)
            overlap = cp.int_field("overlap_tokens", default=0, minimum=0)
            p.violations.extend(cp.violations)
            if window is not None and overlap is not None and overlap >= window:
                p.bad("out_of_range", "overlap_tokens must be smaller than window_tokens", "chunking")
            elif window is not None:
                chunking = ChunkingStrategy(kind="fixed_window", window_tokens=window, overlap_tokens=overlap or 0)
        else:
            p.bad("bad_kind", f"unknown chunking kind {ck!r}", "chunking")

    emb_obj = obj.get("embedder")
    embedder = None
    if not isinstance(emb_obj, dict):
        p.bad("missing_field", "embedder object is required", "embedder")
    else:
        ek = emb_obj.get("kind")
        if ek == "hashing":
            ep = _Parse(emb_obj)
            dim = ep.int_field("dim", default=256, minimum=2)
            seed = ep.int_field("seed", default=0)
            p.violations.extend(ep.violations)
            if dim is not None and seed is not None:
                embedder = EmbedderConfig(kind="hashing", dim=dim, seed=seed)
        elif ek == "external":
            endpoint = emb_obj.get("endpoint")
            parsed = urlparse(endpoint) if isinstance(endpoint, str) else None
            if parsed is None or parsed.scheme not in ("http", "https") or not parsed.netloc:
                p.bad("bad_endpoint", f"external embedder needs a well-formed http(s) endpoint, got {endpoint!r}", "embedder")
            else:
                embedder = EmbedderConfig(kind="external", endpoint=endpoint)
        else:
            p.bad("bad_kind", f"unknown embedder kind {ek!r}", "embedder")

    metric = obj.get("metric", "cosine")
    if metric not in ("cosine", "dot"):
        p.bad("bad_kind", f"unknown metric {metric!r}", "metric")
    if dataset is not None and not looks_like_hash(dataset) and "@" not in (dataset or ""):
        p.bad("bad_ref", "dataset must be a 64-hex config hash (or name@latest at the CLI)", "dataset")

    if p.violations or chunking is None or embedder is None:
        return None, p.violations
    cfg = VectorSetConfig(
        name=name or "", dataset=dataset, channel=channel or "",
        chunking=chunking, embedder=embedder, metric=metric,
    )
    return cfg, []


def parse_app(obj: dict[str, Any]) -> tuple[AppConfig | None, list[Violation]]:
    p = _Parse(obj)
    name = p.str_field("name")
    dataset = p.str_field("dataset")
    active = p.str_field("active_vectorset")
    lexical = p.str_field("lexical_channel", default=None)

    vs_raw = obj.get("vectorsets")
    vectorsets: list[str] = []
    if not isinstance(vs_raw, list) or not vs_raw:
        p.bad("missing_field", "an app needs a nonempty vectorsets list", "vectorsets")
    else:
        for v in vs_raw:
            if isinstance(v, str):
                vectorsets.append(v)
            else:
                p.bad("type_mismatch", f"bad vectorset ref {v!r}", "vectorsets")

    vi_obj = obj.get("vector_index", {"kind": "flat"})
    vector_index = None
    if not isinstance(vi_obj, dict):
        p.bad("type_mismatch", "vector_index must be an object", "vector_index")
    else:
        vk = vi_obj.get("kind")
        if vk == "flat":
            vector_index = VectorIndexConfig(kind="flat")
        elif vk == "ivf":
            vp = _Parse(vi_obj)
            n_clusters = vp.int_field("n_clusters", default=None, minimum=1)
            n_probe = vp.int_field("n_probe", default=8, minimum=1)
            iters = vp.int_field("kmeans_iters", default=10, minimum=1)
            seed = vp.int_field("seed", default=0)
            p.violations.extend(vp.violations)
            if n_clusters is not None and n_probe is not None and n_probe > n_clusters:
                p.bad("out_of_range", "n_probe must be <= n_clusters", "vector_index")
            else:
                vector_index = VectorIndexConfig(
                    kind="ivf", n_clusters=n_clusters, n_probe=n_probe or 8,
                    kmeans_iters=iters or 10, seed=seed or 0,
                )
        else:
            p.bad("bad_kind", f"unknown vector index kind {vk!r}", "vector_index")

    r_obj = obj.get("router", {})
    router = None
    if not isinstance(r_obj, dict):
        p.bad("type_mismatch", "router must be an object", "router")
    else:
        rp = _Parse(r_obj)
        threshold = rp.float_field("selectivity_threshold", default=0.1)
        oversample = rp.float_field("oversample_factor", default=2.0)
        widen = rp.float_field("widen_factor", default=2.0)
        kw_max = rp.int_field("keyword_max_tokens", default=3, minimum=0)
        p.violations.extend(rp.violations)
        bounds_ok = True
        if threshold is not None and not (0.0 < threshold <= 1.0):
            p.bad("out_of_range", "selectivity_threshold must be in (0, 1]", "router")
            bounds_ok = False
        if oversample is not None and oversample < 1.0:
            p.bad("out_of_range", "oversample_factor must be >= 1", "router")
            bounds_ok = False
        if widen is not None and widen <= 1.0:
            p.bad("out_of_range", "widen_factor must be > 1", "router")
            bounds_ok = False
        if bounds_ok and None not in (threshold, oversample, widen, kw_max):
            router = RouterConfig(
                selectivity_threshold=threshold, oversample_factor=oversample,
                widen_factor=widen, keyword_max_tokens=kw_max,
            )

    f_obj = obj.get("fusion", {})
    fusion = None
    if not isinstance(f_obj, dict):
        p.bad("type_mismatch", "fusion must be an object", "fusion")
    else:
        method = f_obj.get("method", "rrf")
        rrf_k = f_obj.get("rrf_k", 60)
        weights = f_obj.get("weights", {})
        if method not in ("rrf", "weighted_sum"):
            p.bad("bad_kind", f"unknown fusion method {method!r}", "fusion")
        elif isinstance(rrf_k, bool) or not isinstance(rrf_k, int) or rrf_k < 1:
            p.bad("out_of_range", "rrf_k must be a positive integer", "fusion")
        elif not isinstance(weights, dict) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in weights.values()
        ):
            p.bad("type_mismatch", "weights must map engine names to numbers", "fusion")
        elif any(v < 0 for v in weights.values()):
            p.bad("out_of_range", "fusion weights must be non-negative", "fusion")
        elif method == "weighted_sum" and weights and not any(v > 0 for v in weights.values()):
            p.bad("out_of_range", "weighted_sum needs at least one positive weight", "fusion")
        else:
            fusion = FusionConfig(method=method, rrf_k=rrf_k, weights={k: float(v) for k, v in weights.items()})

    if p.violations or vector_index is None or router is None or fusion is None:
        return None, p.violations
    return (
        AppConfig(
            name=name or "", dataset=dataset or "", vectorsets=tuple(vectorsets),
            active_vectorset=active or "", vector_index=vector_index,
            router=router, fusion=fusion, lexical_channel=lexical,
        ),
        [],
    )


def parse_config(obj: Any) -> tuple[str | None, Any, list[Violation]]:
    """Dispatch on the 'kind' discriminator; returns (kind, typed, violations)."""
    if not isinstance(obj, dict):
        return None, None, [Violation("bad_config", "config must be a JSON object")]
    kind = obj.get("kind")
    if kind == "dataset":
        typed, violations = parse_dataset(obj)
    elif kind == "vectorset":
        typed, violations = parse_vectorset(obj)
    elif kind == "app":
        typed, violations = parse_app(obj)
    else:
        return None, None, [Violation("bad_kind", f"unknown config kind {kind!r}", "kind")]
    return kind, typed, violations


# --- cross-reference validation ----------------------------------------------

Resolver = Callable[[str], tuple[str, Any] | None]


def validate_refs(kind: str, typed: Any, resolve: Resolver) -> list[Violation]:
    """Cross-reference checks that need the store: dangling refs, channel/dataset agreement."""
    out: list[Violation] = []
    if kind == "vectorset":
        target = resolve(typed.dataset)
        if target is None:
            out.append(Violation("dangling_ref", f"dataset {typed.dataset} is not in the store", "dataset"))
        elif target[0] != "dataset":
            out.append(Violation("bad_ref", f"{typed.dataset} is a {target[0]}, not a dataset", "dataset"))
        elif typed.channel not in target[1].channel_names():
            out.append(Violation("unknown_channel", f"channel {typed.channel!r} not in dataset schema", "channel"))
    elif kind == "app":
        dataset_cfg = None
        target = resolve(typed.dataset)
        if target is None:
            out.append(Violation("dangling_ref", f"dataset {typed.dataset} is not in the store", "dataset"))
        elif target[0] != "dataset":
            out.append(Violation("bad_ref", f"{typed.dataset} is a {target[0]}, not a dataset", "dataset"))
        else:
            dataset_cfg = target[1]
        names: list[str] = []
        for vs_hash in typed.vectorsets:
            vs = resolve(vs_hash)
            if vs is None:
                out.append(Violation("dangling_ref", f"vectorset {vs_hash} is not in the store", "vectorsets"))
                continue
            if vs[0] != "vectorset":
                out.append(Violation("bad_ref", f"{vs_hash} is a {vs[0]}, not a vectorset", "vectorsets"))
                continue
            names.append(vs[1].name)
            if vs[1].dataset != typed.dataset:
                out.append(Violation("cross_dataset_ref",
                                     f"vectorset {vs[1].name!r} embeds a different dataset", "vectorsets"))
            if dataset_cfg is not None and vs[1].channel not in dataset_cfg.channel_names():
                out.append(Violation("unknown_channel",
                                     f"vectorset {vs[1].name!r} uses channel {vs[1].channel!r} not in the dataset",
                                     "vectorsets"))
        if len(set(names)) != len(names):
            out.append(Violation("duplicate_vectorset_name", "vectorset names within an app must be unique", "vectorsets"))
        if typed.active_vectorset not in names:
            out.append(Violation("unknown_active_vectorset",
                                 f"active_vectorset {typed.active_vectorset!r} is not among the declared sets",
                                 "active_vectorset"))
        if typed.lexical_channel is not None and dataset_cfg is not None:
            if typed.lexical_channel not in dataset_cfg.channel_names():
                out.append(Violation("unknown_channel",
                                     f"lexical_channel {typed.lexical_channel!r} not in dataset schema",
                                     "lexical_channel"))
    return out


def validate_composition(app: AppConfig, resolve: Resolver) -> list[Violation]:
    return validate_refs("app", app, resolve)


# --- store -------------------------------------------------------------------


class ConfigStoreError(Exception):
    pass


class ConfigStore:
    """Content-addressed config files plus a name registry for @latest refs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.dir = self.root / "configs"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.registry = self.dir / "registry.jsonl"

    def path_of(self, hash_hex: str) -> Path:
        return self.dir / f"{hash_hex}.json"

    def has(self, hash_hex: str) -> bool:
        return self.path_of(hash_hex).is_file()

    def get(self, hash_hex: str) -> dict[str, Any] | None:
        path = self.path_of(hash_hex)
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def get_typed(self, hash_hex: str) -> tuple[str, Any] | None:
        obj = self.get(hash_hex)
        if obj is None:
            return None
        kind, typed, violations = parse_config(obj)
        if kind is None or typed is None or violations:
            raise ConfigStoreError(f"stored config {hash_hex} no longer parses cleanly")
        return kind, typed

    def put(self, obj: dict[str, Any]) -> tuple[str, str, Any, list[Violation]]:
        """Validate, canonicalize, and persist; returns (hash, kind, typed, violations).

        Nothing is written when violations are found. Idempotent: re-putting a
        stored config rewrites identical bytes under the same name.
        """
        kind, typed, violations = parse_config(self._resolve_inline_refs(obj))
        if kind is None or typed is None:
            return "", kind or "", None, violations
        if not violations:
            violations = validate_refs(kind, typed, self.get_typed)
        if violations:
            return "", kind, typed, violations
        data = canonicalize(to_canonical_dict(kind, typed))
        hash_hex = sha256_hex(data)
        path = self.path_of(hash_hex)
        if not path.is_file():
            path.write_text(data.decode("utf-8"), encoding="utf-8")
        with open(self.registry, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"name": getattr(typed, "name", ""), "kind": kind,
                                 "hash": hash_hex, "at": time.time()}) + "\n")
        return hash_hex, kind, typed, []

    def _resolve_inline_refs(self, obj: Any) -> Any:
        """Rewrite name@latest references to concrete hashes (CLI-layer sugar).

        Parents must be closed terms before hashing, so the rewrite happens
        before parse/canonicalize ever see the object.
        """
        if isinstance(obj, dict):
            out = {}
            for key, value in obj.items():
                if key in ("dataset",) and isinstance(value, str) and "@" in value:
                    out[key] = self.resolve_name(value)
                elif key == "vectorsets" and isinstance(value, list):
                    out[key] = [self.resolve_name(v) if isinstance(v, str) and "@" in v else v for v in value]
                else:
                    out[key] = self._resolve_inline_refs(value)
            return out
        if isinstance(obj, list):
            return [self._resolve_inline_refs(v) for v in obj]
        return obj

    def resolve_name(self, ref: str) -> str:
        """Resolve 'name@latest' to the most recently registered hash."""
        if looks_like_hash(ref):
            return ref
        if "@" not in ref:
            raise ConfigStoreError(f"{ref!r} is neither a hash nor a name@latest reference")
        name, _, tag = ref.partition("@")
        if tag != "latest":
            raise ConfigStoreError(f"unsupported reference tag {tag!r} (only @latest)")
        best: str | None = None
        if self.registry.is_file():
            with open(self.registry, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    if entry.get("name") == name:
                        best = entry.get("hash")
        if best is None:
            raise ConfigStoreError(f"no config named {name!r} registered")
        return best

    def entries(self) -> list[dict[str, Any]]:
        out = []
        for path in sorted(self.dir.glob("*.json")):
            obj = json.loads(path.read_text(encoding="utf-8"))
            out.append({"hash": path.stem, "kind": obj.get("kind"), "name": obj.get("name")})
        return out
