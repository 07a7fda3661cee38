"""Noun-phrase extraction, frequency thresholding, and cross-source set algebra.

Responses are distilled per (SDG, source) in two steps. First, within each
decoding strategy's response set, noun phrases occurring in more than 10%
of responses survive, and the three strategies' survivors are aggregated
into one table. Second, phrases present in every source's table form the
common set; each source's remaining phrases are its unique set (phrases
shared by exactly two sources stay in both, only the all-source common set
is removed).

A phrase is a maximal DET? ADJ* NOUN+ token run with the determiner
stripped. Counting is response-level presence by default: a phrase counts
once per response containing it, however often it repeats inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ._lexicon import LEXICON
from .errors import SdgdivError

TAGS = ("NOUN", "ADJ", "DET", "VERB", "OTHER")

# Suffix fallbacks for words outside the lexicon, checked in order.
_SUFFIX_RULES = (
    ("NOUN", ("tion", "tions", "sion", "sions", "ment", "ments", "ness",
              "ity", "ities", "ship", "ships", "ism", "isms", "ance",
              "ances", "ence", "ences", "ology", "ologies", "graphy",
              "ist", "ists", "hood")),
    ("ADJ", ("ous", "ive", "al", "ical", "able", "ible", "ful", "less",
             "ish", "ian")),
    ("VERB", ("ize", "izes", "ized", "izing", "ise", "ises", "ised",
              "ising")),
    ("OTHER", ("ly",)),
)


def tag_word(word: str) -> str:
    word = word.lower()
    tag = LEXICON.get(word)
    if tag is not None:
        return tag
    if any(ch.isdigit() for ch in word):
        return "OTHER"
    for tag, suffixes in _SUFFIX_RULES:
        for suffix in suffixes:
            if len(word) > len(suffix) + 1 and word.endswith(suffix):
                return tag
    return "OTHER"


def pos_tag(tokens: Sequence[str]) -> list[str]:
    """Deterministic tags over {NOUN, ADJ, DET, VERB, OTHER}."""
    return [tag_word(t) for t in tokens]


def extract_noun_phrases(tokens: Sequence[str], tags: Sequence[str]) -> list[str]:
    """Maximal DET? ADJ* NOUN+ matches, determiner stripped, lowercased."""
    if len(tokens) != len(tags):
        raise ValueError("tokens and tags must have equal length")
    phrases = []
    i = 0
    n = len(tags)
    while i < n:
        j = i
        if tags[j] == "DET":
            j += 1
        start = j
        while j < n and tags[j] == "ADJ":
            j += 1
        first_noun = j
        while j < n and tags[j] == "NOUN":
            j += 1
        if j > first_noun:  # at least one noun
            phrases.append(" ".join(t.lower() for t in tokens[start:j]))
            i = j
        else:
            i += 1
    return phrases


def phrases_of_response(tokens: Sequence[str]) -> list[str]:
    return extract_noun_phrases(tokens, pos_tag(tokens))


def threshold_cutoff(fraction: float, n_responses: int) -> int:
    """floor(fraction * N) in exact decimal arithmetic.

    The fraction goes through its shortest decimal representation so that
    e.g. 0.3 * 10 floors to 3, not 2 as raw binary floats would give.
    """
    frac = Fraction(str(fraction))
    return (frac.numerator * n_responses) // frac.denominator


def threshold_filter(
    response_phrases: Sequence[Sequence[str]],
    fraction: float = 0.10,
    count_mode: str = "responses",
) -> dict[str, int]:
    """Phrases exceeding the frequency threshold within one strategy's responses.

    A phrase's count is the number of responses containing it at least once
    (count_mode="responses", the default) or its total number of
    occurrences (count_mode="occurrences"). Retained iff count >
    floor(fraction * N) where N is the response count.
    """
    if count_mode not in ("responses", "occurrences"):
        raise ValueError(f"unknown count_mode {count_mode!r}")
    n = len(response_phrases)
    if n < 1:
        raise SdgdivError("threshold_filter needs at least one response")
    counts: dict[str, int] = {}
    for phrases in response_phrases:
        seen = set(phrases) if count_mode == "responses" else phrases
        for phrase in seen:
            counts[phrase] = counts.get(phrase, 0) + 1
    cutoff = threshold_cutoff(fraction, n)
    return {p: c for p, c in counts.items() if c > cutoff}


@dataclass
class PhraseTable:
    """Thresholded, strategy-aggregated phrases for one (SDG, source)."""

    sdg: int
    source_id: str
    entries: dict[str, int] = field(default_factory=dict)
    per_strategy_counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def phrases(self) -> set[str]:
        return set(self.entries)

    def sorted_entries(self) -> list[tuple[str, int]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))


def aggregate_strategies(
    sdg: int,
    source_id: str,
    per_strategy: Mapping[str, Mapping[str, int]],
) -> PhraseTable:
    """Union the per-strategy surviving sets; counts sum over the strategies
    where the phrase survived thresholding."""
    table = PhraseTable(sdg=sdg, source_id=source_id)
    for strategy in sorted(per_strategy):
        for phrase, count in per_strategy[strategy].items():
            table.entries[phrase] = table.entries.get(phrase, 0) + count
            table.per_strategy_counts.setdefault(phrase, {})[strategy] = count
    return table


@dataclass(frozen=True)
class CommonUniqueSets:
    sdg: int
    common: tuple[str, ...]
    unique_per_source: Mapping[str, tuple[str, ...]]


def common_unique_sets(tables: Sequence[PhraseTable]) -> CommonUniqueSets:
    """Common = intersection across all sources; unique = table minus common.

    Phrases shared by some but not all sources remain in every owning
    source's unique set.
    """
    if len(tables) < 2:
        raise SdgdivError("need at least two sources to compare phrase sets")
    sdgs = {t.sdg for t in tables}
    if len(sdgs) != 1:
        raise SdgdivError(f"tables must share one SDG, got {sorted(sdgs)}")
    sources = [t.source_id for t in tables]
    if len(set(sources)) != len(sources):
        raise SdgdivError(f"tables must come from distinct sources: {sources}")

    common = set(tables[0].phrases())
    for table in tables[1:]:
        common &= table.phrases()
    unique = {
        t.source_id: tuple(sorted(t.phrases() - common)) for t in tables
    }
    return CommonUniqueSets(
        sdg=tables[0].sdg, common=tuple(sorted(common)), unique_per_source=unique
    )


def analyze_batches(
    sdg: int,
    source_id: str,
    batches: Iterable,  # GenerationBatch
    fraction: float = 0.10,
    count_mode: str = "responses",
) -> PhraseTable:
    """Full step 1 for one (SDG, source): extract, threshold per strategy,
    aggregate. Strategy response sets are never pooled before thresholding."""
    per_strategy: dict[str, dict[str, int]] = {}
    for batch in batches:
        if batch.sdg != sdg or batch.source_id != source_id:
            raise SdgdivError(
                f"batch {batch.sdg}/{batch.source_id} does not belong to {sdg}/{source_id}"
            )
        response_phrases = [phrases_of_response(r.tokens) for r in batch.responses]
        per_strategy[batch.strategy_tag] = threshold_filter(
            response_phrases, fraction, count_mode
        )
    return aggregate_strategies(sdg, source_id, per_strategy)
