"""Dataset schemata and document validation.

A dataset is declared before any data arrives: named text *channels*
(unstructured views of a document) plus typed, filterable *metadata fields*.
Documents are validated against the declaration at ingest time; invalid
records are reported with line numbers, never silently dropped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Iterable, Iterator

IDENT_RE = re.compile(r"^[a-z][a-z0-9_]*$")
DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

FIELD_KINDS = ("keyword", "keyword_list", "integer", "float", "date")
ORDERED_KINDS = ("integer", "float", "date")


@dataclass(frozen=True)
class Violation:
    """One machine-readable rule violation. Violations are data, not errors."""

    code: str
    message: str
    where: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "where": self.where}


@dataclass(frozen=True)
class ChannelSpec:
    name: str


@dataclass(frozen=True)
class MetadataFieldSpec:
    name: str
    kind: str
    filterable: bool = True


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    channels: tuple[ChannelSpec, ...]
    metadata_fields: tuple[MetadataFieldSpec, ...]

    def channel_names(self) -> set[str]:
        return {c.name for c in self.channels}

    def field_map(self) -> dict[str, MetadataFieldSpec]:
        return {f.name: f for f in self.metadata_fields}


@dataclass(frozen=True)
class Document:
    doc_id: str
    channels: dict[str, str] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"doc_id": self.doc_id, "channels": self.channels, "metadata": self.metadata}


def _sorted_violations(violations: list[Violation]) -> list[Violation]:
    # Deterministic and order-insensitive: permuting the input lists must not
    # change the reported set, so normalize the output order.
    return sorted(set(violations), key=lambda v: (v.code, v.where or "", v.message))


def validate_dataset_config(cfg: DatasetConfig) -> list[Violation]:
    """Check every schema invariant; empty list means the config is valid."""
    out: list[Violation] = []
    if not cfg.channels:
        out.append(Violation("no_channels", "a dataset needs at least one channel"))
    seen_channels: set[str] = set()
    for ch in cfg.channels:
        if not IDENT_RE.match(ch.name or ""):
            out.append(Violation("bad_identifier", f"channel name {ch.name!r} is not a valid identifier", ch.name))
        if ch.name in seen_channels:
            out.append(Violation("duplicate_channel", f"channel {ch.name!r} declared twice", ch.name))
        seen_channels.add(ch.name)
    seen_fields: set[str] = set()
    for f in cfg.metadata_fields:
        if not IDENT_RE.match(f.name or ""):
            out.append(Violation("bad_identifier", f"field name {f.name!r} is not a valid identifier", f.name))
        if f.kind not in FIELD_KINDS:
            out.append(Violation("bad_field_kind", f"field {f.name!r} has unknown kind {f.kind!r}", f.name))
        if f.name in seen_fields:
            out.append(Violation("duplicate_field", f"metadata field {f.name!r} declared twice", f.name))
        seen_fields.add(f.name)
        if f.name in seen_channels:
            out.append(Violation("name_collision", f"{f.name!r} is both a channel and a metadata field", f.name))
    return _sorted_violations(out)


def _check_value(spec: MetadataFieldSpec, value: Any) -> str | None:
    """Return an error message when `value` does not match the field kind."""
    kind = spec.kind
    if kind == "keyword":
        if not isinstance(value, str):
            return f"expected a string for keyword field {spec.name!r}"
    elif kind == "keyword_list":
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            return f"expected a list of strings for field {spec.name!r}"
    elif kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            return f"expected an integer for field {spec.name!r}"
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return f"expected a number for field {spec.name!r}"
    elif kind == "date":
        if not isinstance(value, str) or not DATE_RE.match(value):
            return f"expected an ISO-8601 YYYY-MM-DD string for field {spec.name!r}"
        try:
            date.fromisoformat(value)
        except ValueError:
            return f"{value!r} is not a real calendar date"
    return None


def validate_document(cfg: DatasetConfig, doc: Document) -> list[Violation]:
    out: list[Violation] = []
    if not doc.doc_id or not isinstance(doc.doc_id, str):
        out.append(Violation("bad_doc_id", "doc_id must be a nonempty string"))
    known_channels = cfg.channel_names()
    for name, text in doc.channels.items():
        if name not in known_channels:
            out.append(Violation("unknown_channel", f"channel {name!r} is not declared", name))
        elif not isinstance(text, str):
            out.append(Violation("type_mismatch", f"channel {name!r} must hold text", name))
    fields = cfg.field_map()
    for name, value in doc.metadata.items():
        spec = fields.get(name)
        if spec is None:
            out.append(Violation("unknown_metadata_field", f"metadata field {name!r} is not declared", name))
            continue
        msg = _check_value(spec, value)
        if msg is not None:
            out.append(Violation("type_mismatch", msg, name))
    return _sorted_violations(out)


def normalize_document(cfg: DatasetConfig, doc: Document) -> Document:
    """Canonicalize field values: keyword lists become sorted unique, floats become float."""
    fields = cfg.field_map()
    meta: dict[str, Any] = {}
    for name, value in doc.metadata.items():
        kind = fields[name].kind
        if kind == "keyword_list":
            meta[name] = sorted(set(value))
        elif kind == "float":
            meta[name] = float(value)
        else:
            meta[name] = value
    return Document(doc_id=doc.doc_id, channels=dict(doc.channels), metadata=meta)


@dataclass(frozen=True)
class RejectedRecord:
    line_no: int
    code: str
    message: str

    def to_json(self) -> dict[str, Any]:
        return {"line_no": self.line_no, "code": self.code, "message": self.message}


@dataclass
class DatasetSnapshot:
    """Immutable result of one ingestion run: accepted docs in arrival order."""

    documents: list[Document]
    rejects: list[RejectedRecord]
    stats: dict[str, Any]

    @property
    def doc_count(self) -> int:
        return len(self.documents)


def parse_document_line(line: str) -> tuple[Document | None, str | None]:
    """Parse one JSONL record; returns (doc, None) or (None, error message)."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        return None, f"malformed JSON: {exc.msg}"
    if not isinstance(obj, dict):
        return None, "record is not a JSON object"
    doc_id = obj.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        return None, "doc_id missing or not a nonempty string"
    channels = obj.get("channels", {})
    metadata = obj.get("metadata", {})
    if not isinstance(channels, dict):
        return None, "channels must be an object"
    if not isinstance(metadata, dict):
        return None, "metadata must be an object"
    return Document(doc_id=doc_id, channels=channels, metadata=metadata), None


def _field_stats(cfg: DatasetConfig, docs: list[Document]) -> dict[str, Any]:
    channels = {c.name: 0 for c in cfg.channels}
    fields: dict[str, dict[str, Any]] = {}
    for spec in cfg.metadata_fields:
        entry: dict[str, Any] = {"count": 0}
        if spec.kind in ("keyword", "keyword_list"):
            entry["distinct"] = set()
        fields[spec.name] = entry
    for doc in docs:
        for name in doc.channels:
            if name in channels:
                channels[name] += 1
        for name, value in doc.metadata.items():
            entry = fields[name]
            entry["count"] += 1
            if "distinct" in entry:
                entry["distinct"].update(value if isinstance(value, list) else [value])
            else:
                entry["min"] = value if "min" not in entry else min(entry["min"], value)
                entry["max"] = value if "max" not in entry else max(entry["max"], value)
    for entry in fields.values():
        if "distinct" in entry:
            entry["distinct"] = len(entry["distinct"])
    return {"doc_count": len(docs), "channels": channels, "fields": fields}


def ingest(cfg: DatasetConfig, lines: Iterable[str]) -> DatasetSnapshot:
    """Validate a JSONL document stream against `cfg`.

    Every input line is either accepted or reported in `rejects` with its
    1-based line number; accepted + rejected always equals the stream length
    (blank lines are skipped and counted as neither).
    """
    accepted: list[Document] = []
    rejects: list[RejectedRecord] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        doc, err = parse_document_line(line)
        if doc is None:
            rejects.append(RejectedRecord(line_no, "malformed_record", err or "unparseable"))
            continue
        if doc.doc_id in seen_ids:
            rejects.append(RejectedRecord(line_no, "duplicate_doc_id", f"doc_id {doc.doc_id!r} already ingested"))
            continue
        violations = validate_document(cfg, doc)
        if violations:
            summary = "; ".join(f"{v.code}: {v.message}" for v in violations)
            rejects.append(RejectedRecord(line_no, violations[0].code, summary))
            continue
        seen_ids.add(doc.doc_id)
        accepted.append(normalize_document(cfg, doc))
    return DatasetSnapshot(documents=accepted, rejects=rejects, stats=_field_stats(cfg, accepted))


def ingest_path(cfg: DatasetConfig, path: str) -> DatasetSnapshot:
    def _lines() -> Iterator[str]:
        with open(path, "r", encoding="utf-8") as fh:
            yield from fh

    return ingest(cfg, _lines())
