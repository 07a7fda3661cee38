"""Shared test fixtures and independent oracles.

Every oracle here is implemented from scratch against the documented
behavior, deliberately not reusing the package's own code paths, so that
agreement between the two is evidence rather than tautology.
"""

from __future__ import annotations

import random
from collections import Counter

from sdgdiv.corpus_store import PublicationRecord, SourceStore
from sdgdiv import query_lang as ql

WORD_POOL = (
    "gender equality education growth economic sustainable development policy "
    "inequality wage gap employment labor market innovation industry "
    "infrastructure energy climate poverty health school teacher student "
    "inclusion access quality global regional outgrowth policies économie "
    "niño research data analysis"
).split()


# ---------------------------------------------------------------------------
# corpus fixtures

def random_record(rng: random.Random, doi: str, source_id: str) -> PublicationRecord:
    words = lambda n: " ".join(rng.choice(WORD_POOL) for _ in range(n))
    abstract = "" if rng.random() < 0.08 else words(rng.randint(5, 25))
    return PublicationRecord(
        doi=doi,
        title=words(rng.randint(2, 7)),
        abstract=abstract,
        year=rng.randint(2012, 2026),
        doc_type=rng.choice(["article", "review", "other"]),
        venue_type=rng.choice(["journal", "journal", "journal", "other"]),
        source_id=source_id,
        keywords=tuple(rng.choice(WORD_POOL) for _ in range(rng.randint(0, 4))),
        venue_title=words(rng.randint(1, 3)),
    )


def random_stores(
    rng: random.Random, n_records: int, n_sources: int = 3, doi_space: int | None = None
) -> list[SourceStore]:
    """Stores with planted overlaps, duplicates, and filter violations."""
    doi_space = doi_space or max(2, int(n_records * 0.7))
    dois = [f"10.1000/d{i}" for i in range(doi_space)]
    stores = []
    for s in range(n_sources):
        source_id = f"src{s}"
        store = SourceStore(source_id=source_id)
        chosen = rng.sample(dois, k=min(n_records, len(dois)))
        for doi in chosen:
            store.records.append(random_record(rng, doi, source_id))
            if rng.random() < 0.05:  # planted within-source duplicate
                store.records.append(random_record(rng, doi, source_id))
        stores.append(store)
    return stores


def oracle_joint_index(
    stores, year_window=(2015, 2023), require_unique=True
) -> dict[str, dict[str, PublicationRecord]]:
    """Brute-force intersection-with-filters, built from plain list scans."""

    def passes(rec: PublicationRecord) -> bool:
        if rec.year < year_window[0] or rec.year > year_window[1]:
            return False
        if rec.doc_type not in ("article", "review"):
            return False
        if rec.venue_type != "journal":
            return False
        if rec.abstract.strip() == "":
            return False
        return True

    survivors = []
    for store in stores:
        multiplicity = Counter(r.doi for r in store.records)
        keep = {}
        for rec in store.records:
            if rec.doi in keep:
                continue
            if require_unique and multiplicity[rec.doi] > 1:
                continue
            if passes(rec):
                keep[rec.doi] = rec
        survivors.append(keep)

    out = {}
    for doi in survivors[0]:
        if all(doi in keep for keep in survivors[1:]):
            out[doi] = {
                store.source_id: keep[doi] for store, keep in zip(stores, survivors)
            }
    return out


# ---------------------------------------------------------------------------
# query oracle: character-level matcher, no regex, separate case folding

def _fold_char(ch: str) -> str:
    return chr(ord(ch) + 32) if "A" <= ch <= "Z" else ch


def _char_words(text: str) -> list[str]:
    words = []
    current = []
    for ch in text:
        if ch != "_" and ch.isalnum():
            current.append(_fold_char(ch))
        elif current:
            words.append("".join(current))
            current = []
    if current:
        words.append("".join(current))
    return words


def naive_phrase_match(pattern: str, text: str) -> bool:
    needles = []
    for word in pattern.split():
        if word.endswith("*") and len(word) > 1:
            needles.append(("prefix", "".join(_fold_char(c) for c in word[:-1])))
        else:
            needles.extend(("exact", w) for w in _char_words(word))
    haystack = _char_words(text)
    if not needles:
        return False
    for start in range(len(haystack) - len(needles) + 1):
        hit = True
        for offset, (kind, needle) in enumerate(needles):
            word = haystack[start + offset]
            if kind == "exact":
                if word != needle:
                    hit = False
                    break
            elif word[: len(needle)] != needle:
                hit = False
                break
        if hit:
            return True
    return False


def naive_eval(ast, record: PublicationRecord) -> bool:
    if isinstance(ast, ql.FieldMatch):
        if ast.field == "TITLE":
            units = [record.title]
        elif ast.field == "ABS":
            units = [record.abstract]
        elif ast.field == "AUTHKEY":
            units = list(record.keywords)
        elif ast.field == "SRCTITLE":
            units = [record.venue_title]
        else:
            units = [record.title, record.abstract, *record.keywords]
        return any(naive_phrase_match(ast.pattern, u) for u in units)
    if isinstance(ast, ql.And):
        return all(naive_eval(c, record) for c in ast.children)
    if isinstance(ast, ql.Or):
        return any(naive_eval(c, record) for c in ast.children)
    if isinstance(ast, ql.AndNot):
        return naive_eval(ast.children[0], record) and not naive_eval(ast.children[1], record)
    raise TypeError(ast)


# ---------------------------------------------------------------------------
# random query ASTs

def random_pattern(rng: random.Random, sql_safe: bool) -> str:
    n = rng.randint(1, 3)
    words = [rng.choice(WORD_POOL) for _ in range(n)]
    if rng.random() < 0.3:
        idx = len(words) - 1 if sql_safe else rng.randrange(len(words))
        word = words[idx]
        cut = rng.randint(max(1, len(word) - 4), len(word) - 1)
        if word[:cut].isalnum():
            words[idx] = word[:cut] + "*"
    return " ".join(words)


def random_ast(rng: random.Random, depth: int = 3, sql_safe: bool = True):
    if depth <= 0 or rng.random() < 0.35:
        field = rng.choice(ql.FIELDS)
        return ql.FieldMatch(field, random_pattern(rng, sql_safe))
    kind = rng.choice(["and", "or", "andnot"])
    if kind == "andnot":
        return ql.AndNot(
            (random_ast(rng, depth - 1, sql_safe), random_ast(rng, depth - 1, sql_safe))
        )
    n = rng.randint(2, 3)
    children = tuple(random_ast(rng, depth - 1, sql_safe) for _ in range(n))
    return ql.And(children) if kind == "and" else ql.Or(children)


# ---------------------------------------------------------------------------
# venn oracle: per-element 3-bit membership histogram

def oracle_venn_counts(a: set, b: set, c: set) -> dict[tuple[int, ...], int]:
    histogram: dict[tuple[int, ...], int] = {}
    for element in a | b | c:
        bits = (int(element in a), int(element in b), int(element in c))
        histogram[bits] = histogram.get(bits, 0) + 1
    return histogram
