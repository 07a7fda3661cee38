"""Per-(SDG, source) classification of joint-index publications.

Three mechanisms, one per kind of upstream classification: delivered label
lists, per-publication scores with a threshold, and boolean field queries.
All three produce the same SdgSubset type so downstream stages never care
which mechanism a source uses.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus_store import JointIndex, normalize_doi, InvalidDoiError
from .errors import SdgdivError
from .query_lang import Node, eval_query

log = logging.getLogger(__name__)

SDG_RANGE = (1, 17)
STUDIED_SDGS = (4, 5, 8, 9, 10)
DEFAULT_SCORE_THRESHOLD = 0.4

MECHANISMS = ("label", "score", "query")


@dataclass(frozen=True)
class ClassificationRule:
    """Which mechanism classifies one source, plus its mechanism parameters.

    Exactly the fields of the active mechanism may be set: a label or score
    rule points at its input file, a query rule at a directory of per-SDG
    query files. The score threshold applies to the score mechanism only.
    """

    mechanism: str
    path: Path | None = None
    threshold: float = DEFAULT_SCORE_THRESHOLD

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.mechanism != "score" and self.threshold != DEFAULT_SCORE_THRESHOLD:
            raise ValueError(f"threshold is a score-mechanism field, not {self.mechanism}")
        if self.path is None:
            raise ValueError(f"{self.mechanism} rule needs an input path")


@dataclass(frozen=True)
class SdgSubset:
    """Sorted, duplicate-free DOIs one source classifies under one SDG."""

    sdg: int
    source_id: str
    dois: tuple[str, ...]

    def __post_init__(self):
        if not SDG_RANGE[0] <= self.sdg <= SDG_RANGE[1]:
            raise ValueError(f"SDG id out of range: {self.sdg}")
        if list(self.dois) != sorted(set(self.dois)):
            raise ValueError("dois must be sorted and duplicate-free")

    def __len__(self) -> int:
        return len(self.dois)

    @classmethod
    def build(cls, sdg: int, source_id: str, dois: Iterable[str], index: JointIndex) -> "SdgSubset":
        dois = tuple(sorted(set(dois)))
        outside = [d for d in dois if d not in index]
        if outside:
            raise SdgdivError(
                f"subset sdg{sdg}/{source_id} contains DOIs outside the joint index, "
                f"e.g. {outside[:3]}"
            )
        return cls(sdg=sdg, source_id=source_id, dois=dois)

    def write(self, path: str | Path) -> None:
        Path(path).write_text("".join(d + "\n" for d in self.dois), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path, sdg: int, source_id: str) -> "SdgSubset":
        dois = tuple(
            line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()
        )
        return cls(sdg=sdg, source_id=source_id, dois=dois)


@dataclass
class ClassificationReport:
    """Bookkeeping for one classification pass over one input file."""

    rows_read: int = 0
    rows_used: int = 0
    skipped_malformed: int = 0
    rejected_score: int = 0
    outside_index: int = 0


def _iter_rows(path: str | Path) -> Iterable[dict]:
    """Rows of a label/score file: CSV (with header) or line-delimited JSON."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        if path.suffix.lower() == ".csv":
            yield from csv.DictReader(fh)
        else:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except ValueError:
                    yield {"__malformed__": line}
                    continue
                yield row if isinstance(row, dict) else {"__malformed__": line}


def _get(row: dict, key: str):
    value = row.get(key)
    if value is None or value == "":
        raise ValueError(f"row lacks {key!r}")
    return value


def _parse_sdg(value) -> int:
    sdg = int(value)
    if not SDG_RANGE[0] <= sdg <= SDG_RANGE[1]:
        raise ValueError(f"SDG out of range: {sdg}")
    return sdg


def classify_by_labels(
    index: JointIndex,
    labels: str | Path,
    source_id: str,
) -> tuple[dict[int, SdgSubset], ClassificationReport]:
    """Intersect a delivered (doi, sdg) label list with the joint index."""
    report = ClassificationReport()
    per_sdg: dict[int, set[str]] = {}
    for row in _iter_rows(labels):
        report.rows_read += 1
        try:
            if "__malformed__" in row:
                raise ValueError("unparseable line")
            doi = normalize_doi(str(_get(row, "doi")))
            sdg = _parse_sdg(_get(row, "sdg"))
        except (KeyError, ValueError, InvalidDoiError):
            report.skipped_malformed += 1
            continue
        if doi not in index:
            report.outside_index += 1
            continue
        per_sdg.setdefault(sdg, set()).add(doi)
        report.rows_used += 1
    if report.rows_read == 0:
        log.warning("label file %s is empty; all subsets empty", labels)
    subsets = {
        sdg: SdgSubset.build(sdg, source_id, dois, index) for sdg, dois in per_sdg.items()
    }
    return subsets, report


def classify_by_score(
    index: JointIndex,
    scores: str | Path,
    source_id: str,
    threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> tuple[dict[int, SdgSubset], ClassificationReport]:
    """Keep (doi, sdg, score) rows with score strictly above the threshold.

    "Above" is strict: a score exactly equal to the threshold does not
    classify. Scores outside [0, 1] reject the row.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    report = ClassificationReport()
    per_sdg: dict[int, set[str]] = {}
    for row in _iter_rows(scores):
        report.rows_read += 1
        try:
            if "__malformed__" in row:
                raise ValueError("unparseable line")
            doi = normalize_doi(str(_get(row, "doi")))
            sdg = _parse_sdg(_get(row, "sdg"))
            score = float(_get(row, "score"))
        except (KeyError, ValueError, InvalidDoiError):
            report.skipped_malformed += 1
            continue
        if not 0.0 <= score <= 1.0:
            report.rejected_score += 1
            continue
        if doi not in index:
            report.outside_index += 1
            continue
        if score > threshold:
            per_sdg.setdefault(sdg, set()).add(doi)
            report.rows_used += 1
    subsets = {
        sdg: SdgSubset.build(sdg, source_id, dois, index) for sdg, dois in per_sdg.items()
    }
    return subsets, report


def classify_by_query(
    index: JointIndex,
    ast: Node,
    sdg: int,
    source_id: str,
) -> SdgSubset:
    """Evaluate a parsed query against this source's records in the index."""
    dois = [
        doi for doi in index.dois if eval_query(ast, index.record(doi, source_id))
    ]
    return SdgSubset.build(sdg, source_id, dois, index)
