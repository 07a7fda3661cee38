"""Publication metadata stores and joint-index construction.

Records from several bibliometric database snapshots are ingested into
per-source stores, keyed by normalized DOI. The joint index is the set of
DOIs present in *every* source, unique within each source, and passing the
record filters (year window, article/review in journal, non-empty abstract).
Everything downstream (classification, training corpora) draws from the
joint index so that coverage differences between sources cannot leak into
the comparison.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, SchemaError, SdgdivError

DOC_TYPES = ("article", "review", "other")
VENUE_TYPES = ("journal", "other")
ACCEPTED_DOC_TYPES = ("article", "review")

DEFAULT_YEAR_WINDOW = (2015, 2023)

# Canonical record fields an ingest schema may map, with defaults for the
# optional ones. doi and year have no sensible default and must be mapped.
REQUIRED_FIELDS = ("doi", "year")
OPTIONAL_FIELD_DEFAULTS = {
    "title": "",
    "abstract": "",
    "doc_type": "article",
    "venue_type": "journal",
    "keywords": (),
    "venue_title": "",
}
CANONICAL_FIELDS = REQUIRED_FIELDS + tuple(OPTIONAL_FIELD_DEFAULTS)

#: Identity mapping for files already in the canonical export layout.
CANONICAL_SCHEMA = {name: name for name in CANONICAL_FIELDS}


class InvalidDoiError(SdgdivError):
    """Raised when a DOI is empty after normalization."""


_DOI_PREFIX_RE = re.compile(r"^(https?://doi\.org/|doi:)", re.IGNORECASE)


def normalize_doi(raw: str) -> str:
    """Normalize a DOI: trim, strip URL/"doi:" prefixes, lowercase.

    DOIs are case-insensitive by design, and upstream exports disagree on
    whether they carry a resolver prefix, so both variants of the same DOI
    must normalize to one key before exact matching.
    """
    s = raw.strip()
    while True:
        stripped = _DOI_PREFIX_RE.sub("", s, count=1)
        if stripped == s:
            break
        s = stripped
    s = s.strip().lower()
    if not s:
        raise InvalidDoiError(f"DOI is empty after normalization: {raw!r}")
    return s


@dataclass(frozen=True, slots=True)
class PublicationRecord:
    """One publication's metadata as delivered by one source."""

    doi: str
    title: str
    abstract: str
    year: int
    doc_type: str
    venue_type: str
    source_id: str
    keywords: tuple[str, ...] = ()
    venue_title: str = ""

    def __post_init__(self):
        if not self.doi:
            raise InvalidDoiError("record DOI must be non-empty")
        if self.doi != self.doi.lower() or _DOI_PREFIX_RE.match(self.doi):
            raise InvalidDoiError(f"record DOI is not normalized: {self.doi!r}")
        if not isinstance(self.year, int) or not 1000 <= self.year <= 9999:
            raise ValueError(f"year must be a 4-digit integer, got {self.year!r}")
        if self.doc_type not in DOC_TYPES:
            raise ValueError(f"unknown doc_type {self.doc_type!r}")
        if self.venue_type not in VENUE_TYPES:
            raise ValueError(f"unknown venue_type {self.venue_type!r}")

    def to_dict(self) -> dict:
        return {
            "doi": self.doi,
            "title": self.title,
            "abstract": self.abstract,
            "year": self.year,
            "doc_type": self.doc_type,
            "venue_type": self.venue_type,
            "source_id": self.source_id,
            "keywords": list(self.keywords),
            "venue_title": self.venue_title,
        }


@dataclass
class SourceStore:
    """All records ingested from one source snapshot, plus ingest counters."""

    source_id: str
    records: list[PublicationRecord] = field(default_factory=list)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ingested(self) -> int:
        return len(self.records)

    def doi_counts(self) -> Counter:
        return Counter(r.doi for r in self.records)

    def duplicate_dois(self) -> dict[str, int]:
        """DOIs appearing more than once within this source."""
        return {d: n for d, n in self.doi_counts().items() if n > 1}

    def export_jsonl(self, path: str | Path) -> None:
        """Write the canonical line-delimited JSON export, sorted by DOI.

        The output is byte-stable: re-ingesting it with CANONICAL_SCHEMA and
        exporting again reproduces the same bytes.
        """
        lines = sorted(
            json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":"))
            for r in self.records
        )
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _coerce_keywords(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(k.strip() for k in value.split(";") if k.strip())
    if isinstance(value, (list, tuple)):
        return tuple(str(k) for k in value)
    raise ValueError(f"cannot interpret keywords value {value!r}")


def _record_from_mapping(raw: Mapping, schema: Mapping[str, str], source_id: str) -> PublicationRecord:
    """Build a record from one upstream mapping. Raises on any defect."""
    values = {}
    for canonical, source_field in schema.items():
        if source_field not in raw:
            raise ValueError(f"mapped field {source_field!r} missing from record")
        values[canonical] = raw[source_field]
    for canonical, default in OPTIONAL_FIELD_DEFAULTS.items():
        values.setdefault(canonical, default)

    doc_type = str(values["doc_type"]).strip().lower()
    venue_type = str(values["venue_type"]).strip().lower()
    return PublicationRecord(
        doi=normalize_doi(str(values["doi"])),
        title=str(values["title"] or ""),
        abstract=str(values["abstract"] or ""),
        year=int(values["year"]),
        doc_type=doc_type if doc_type in ACCEPTED_DOC_TYPES else "other",
        venue_type=venue_type if venue_type == "journal" else "other",
        source_id=source_id,
        keywords=_coerce_keywords(values["keywords"]),
        venue_title=str(values["venue_title"] or ""),
    )


def _validate_schema(schema: Mapping[str, str]) -> None:
    unknown = set(schema) - set(CANONICAL_FIELDS)
    if unknown:
        raise SchemaError(f"schema maps unknown record fields: {sorted(unknown)}")
    missing = set(REQUIRED_FIELDS) - set(schema)
    if missing:
        raise SchemaError(f"schema must map required fields: {sorted(missing)}")


def ingest_records(
    path: str | Path,
    source_id: str,
    schema: Mapping[str, str],
    fmt: str | None = None,
) -> SourceStore:
    """Ingest a line-delimited JSON or CSV file into a per-source store.

    ``schema`` maps canonical field names (see CANONICAL_FIELDS) to the
    upstream file's field names. Malformed lines are skipped and counted on
    the returned store, never fatal; an unreadable file raises OSError and a
    bad mapping raises SchemaError.
    """
    path = Path(path)
    _validate_schema(schema)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown ingest format {fmt!r}")

    store = SourceStore(source_id=source_id)
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            absent = [col for col in schema.values() if col not in header]
            if absent:
                raise SchemaError(f"CSV header lacks mapped columns: {absent}")
            rows: Iterable = reader
        else:
            rows = (line for line in fh if line.strip())
        for row in rows:
            try:
                if fmt == "jsonl":
                    row = json.loads(row)
                    if not isinstance(row, dict):
                        raise ValueError("line is not a JSON object")
                store.records.append(_record_from_mapping(row, schema, source_id))
            except (ValueError, InvalidDoiError):
                store.skipped += 1
    return store


def ingest_canonical(path: str | Path, source_id: str) -> SourceStore:
    """Re-ingest a canonical export produced by SourceStore.export_jsonl."""
    return ingest_records(path, source_id, CANONICAL_SCHEMA, fmt="jsonl")


# Filter rules in the order they are charged against a dropped DOI.
FILTER_RULES = ("duplicate", "year", "doc_type", "venue_type", "abstract")


@dataclass
class SourceFilterReport:
    """Per-source DOI-level drop counts, one bucket per filter rule."""

    distinct_dois: int = 0
    surviving: int = 0
    duplicate: int = 0
    year: int = 0
    doc_type: int = 0
    venue_type: int = 0
    abstract: int = 0

    def dropped_total(self) -> int:
        return sum(getattr(self, rule) for rule in FILTER_RULES)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class JointIndex:
    """Records present in all sources under the uniqueness and record filters."""

    sources: tuple[str, ...]
    records: dict[str, dict[str, PublicationRecord]]
    filter_report: dict[str, SourceFilterReport]
    year_window: tuple[int, int]

    @property
    def dois(self) -> tuple[str, ...]:
        return tuple(sorted(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, doi: str) -> bool:
        return doi in self.records

    def record(self, doi: str, source_id: str) -> PublicationRecord:
        return self.records[doi][source_id]

    def abstracts(self, dois: Iterable[str], source_id: str) -> list[str]:
        """Abstracts of the given DOIs as delivered by one source."""
        return [self.records[d][source_id].abstract for d in dois]


def _failing_rule(record: PublicationRecord, year_window: tuple[int, int]) -> str | None:
    if not year_window[0] <= record.year <= year_window[1]:
        return "year"
    if record.doc_type not in ACCEPTED_DOC_TYPES:
        return "doc_type"
    if record.venue_type != "journal":
        return "venue_type"
    if not record.abstract.strip():
        return "abstract"
    return None


def build_joint_index(
    sources: Sequence[SourceStore],
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW,
    require_unique: bool = True,
) -> JointIndex:
    """Intersect per-source stores into the joint index.

    A DOI enters the index iff, in every source, it appears exactly once
    (``require_unique``; with the flag off the first record wins instead)
    and its record passes all filters. Drops are counted per source at DOI
    granularity under the first failing rule, so for each source
    ``distinct_dois - surviving`` equals the sum of its drop counts.
    """
    if len(sources) < 2:
        raise ConfigError(f"joint index needs at least 2 sources, got {len(sources)}")
    ids = [s.source_id for s in sources]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate source ids: {ids}")
    for store in sources:
        if not store.records:
            raise ConfigError(f"source {store.source_id!r} has no records")

    surviving: list[dict[str, PublicationRecord]] = []
    report: dict[str, SourceFilterReport] = {}
    for store in sources:
        counts = store.doi_counts()
        first_seen: dict[str, PublicationRecord] = {}
        for rec in store.records:
            first_seen.setdefault(rec.doi, rec)
        rep = SourceFilterReport(distinct_dois=len(counts))
        keep: dict[str, PublicationRecord] = {}
        for doi, rec in first_seen.items():
            if require_unique and counts[doi] > 1:
                rep.duplicate += 1
                continue
            rule = _failing_rule(rec, year_window)
            if rule is not None:
                setattr(rep, rule, getattr(rep, rule) + 1)
                continue
            keep[doi] = rec
        rep.surviving = len(keep)
        surviving.append(keep)
        report[store.source_id] = rep

    common = set(surviving[0])
    for keep in surviving[1:]:
        common &= keep.keys()

    records = {
        doi: {store.source_id: keep[doi] for store, keep in zip(sources, surviving)}
        for doi in sorted(common)
    }
    return JointIndex(
        sources=tuple(ids),
        records=records,
        filter_report=report,
        year_window=tuple(year_window),
    )


def export_joint_index(index: JointIndex, path: str | Path) -> None:
    """Write the joint index as sorted line-delimited JSON (byte-stable)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doi in index.dois:
            row = {
                "doi": doi,
                "records": {s: index.records[doi][s].to_dict() for s in index.sources},
            }
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def load_joint_index(
    path: str | Path,
    sources: Sequence[str],
    filter_report: Mapping[str, SourceFilterReport] | None = None,
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW,
) -> JointIndex:
    records: dict[str, dict[str, PublicationRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            per_source = {}
            for sid, data in row["records"].items():
                data = dict(data)
                data["keywords"] = tuple(data.get("keywords", ()))
                per_source[sid] = PublicationRecord(**data)
            records[row["doi"]] = per_source
    return JointIndex(
        sources=tuple(sources),
        records=records,
        filter_report=dict(filter_report or {}),
        year_window=tuple(year_window),
    )
