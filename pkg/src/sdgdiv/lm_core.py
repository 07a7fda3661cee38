"""Trainable smoothed n-gram language model with token representations.

This is the built-in model that stands in for a small transformer at desk
scale: it exposes exactly what the decoders need, a full next-token
probability vector for any context and a unit representation vector per
token for similarity scoring. Anything implementing the LmAdapter protocol
(an external transformer backend, for instance) can be dropped in instead.

Counting convention: every training sequence is padded with n-1 <bos>
tokens and one final <eos>, and for every position holding a real token or
<eos> the k-grams ending there are counted for k = 1..n. <bos> therefore
never occurs as a predicted token, and the continuation set over which
distributions normalize is the whole vocabulary minus <bos>.

Add-k estimate for a context seen in training (C = V - 1):

    P(v | ctx) = (count(ctx, v) + k) / (count(ctx) + k * C)

Unseen contexts back off to the longest seen suffix, down to the unigram.
Interpolated Kneser-Ney uses raw counts at the top order and continuation
counts (distinct left-extension types) below, with absolute discount D and
the uniform distribution over the continuation set as the base case.
"""

from __future__ import annotations

import json
import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import SdgdivError

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)

DEFAULT_ORDER = 3
DEFAULT_ADD_K = 0.01
DEFAULT_KN_DISCOUNT = 0.75
DEFAULT_REPR_DIM = 64
REPR_WINDOW = 2

# Fixed seed for the representation projection: representations must depend
# only on corpus and config, never on the run seed.
_REPR_SEED = 0x5D61F0

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class TrainingError(SdgdivError):
    """Raised when a model cannot be trained (e.g. empty corpus)."""


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens with punctuation split off as single tokens."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Dense token-id mapping with the reserved <bos>/<eos>/<unk> tokens."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        for reserved in RESERVED:
            if reserved not in self.index:
                raise ValueError(f"vocabulary lacks reserved token {reserved}")
        self.bos_id = self.index[BOS]
        self.eos_id = self.index[EOS]
        self.unk_id = self.index[UNK]

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    @classmethod
    def from_corpus(cls, sequences: Iterable[Sequence[str]]) -> "Vocabulary":
        seen = set()
        for seq in sequences:
            seen.update(seq)
        seen -= set(RESERVED)
        return cls(RESERVED + tuple(sorted(seen)))


class LmAdapter(Protocol):
    """What a language-model backend must provide to the decoders."""

    vocab: Vocabulary

    def next_token_dist(self, context: Sequence[int | str]) -> np.ndarray:
        """Probability vector over the full vocabulary; sums to 1 (±1e-6)."""
        ...

    def representation(self, token_id: int) -> np.ndarray:
        """Unit-norm representation vector for similarity scoring."""
        ...


@dataclass(frozen=True)
class SmoothingConfig:
    kind: str = "add_k"  # "add_k" | "kneser_ney"
    k: float = DEFAULT_ADD_K
    discount: float = DEFAULT_KN_DISCOUNT

    def __post_init__(self):
        if self.kind not in ("add_k", "kneser_ney"):
            raise ValueError(f"unknown smoothing {self.kind!r}")
        if self.k < 0:
            raise ValueError("add-k constant must be >= 0")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("Kneser-Ney discount must be in (0, 1)")


Context = tuple  # of token ids


class NgramModel:
    """Immutable once trained; see train()."""

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        smoothing: SmoothingConfig,
        counts: list[dict],
        representations: np.ndarray,
        repr_dim: int,
    ):
        self.vocab = vocab
        self.order = order
        self.smoothing = smoothing
        # counts[m] holds (m+1)-gram tables: context tuple of length m -> {token: count}
        self._counts = counts
        self._continuation = _continuation_tables(counts)
        self.representations = representations
        self.repr_dim = repr_dim
        self._dist_cache: dict[Context, np.ndarray] = {}
        representations.setflags(write=False)

    # -- distributions ------------------------------------------------------

    def _context_ids(self, context: Sequence[int | str]) -> Context:
        ids = [
            self.vocab.id_of(t) if isinstance(t, str) else int(t) for t in context
        ]
        for i in ids:
            if not 0 <= i < len(self.vocab):
                raise ValueError(f"token id {i} out of range")
        return tuple(ids[max(0, len(ids) - (self.order - 1)) :])

    def next_token_dist(self, context: Sequence[int | str]) -> np.ndarray:
        """Backed-off distribution over the full vocabulary (read-only array)."""
        ctx = self._context_ids(context)
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        if self.smoothing.kind == "add_k":
            dist = self._add_k_dist(ctx)
        else:
            dist = self._kn_dist(len(ctx), ctx)
        dist.setflags(write=False)
        self._dist_cache[ctx] = dist
        return dist

    def _add_k_dist(self, ctx: Context) -> np.ndarray:
        V = len(self.vocab)
        k = self.smoothing.k
        # longest seen suffix wins; the unigram context () is always seen
        row: dict[int, int] = {}
        for start in range(len(ctx) + 1):
            sub = ctx[start:]
            candidate = self._counts[len(sub)].get(sub)
            if candidate:
                row = candidate
                break
        dist = np.full(V, k, dtype=np.float64)
        dist[self.vocab.bos_id] = 0.0
        for token, count in row.items():
            dist[token] += count
        total = dist.sum()
        if total <= 0.0:
            raise SdgdivError("degenerate distribution: no counts and k = 0")
        dist /= total
        return dist

    def _kn_dist(self, m: int, ctx: Context) -> np.ndarray:
        D = self.smoothing.discount
        table = self._counts[m] if m == self.order - 1 else self._continuation[m]
        row = table.get(ctx)
        if not row:
            if m == 0:
                return self._kn_uniform()
            return self._kn_dist(m - 1, ctx[1:])
        total = sum(row.values())
        lower = self._kn_uniform() if m == 0 else self._kn_dist(m - 1, ctx[1:])
        dist = lower * (D * len(row) / total)
        for token, count in row.items():
            dist[token] += max(count - D, 0.0) / total
        return dist

    def _kn_uniform(self) -> np.ndarray:
        V = len(self.vocab)
        dist = np.full(V, 1.0 / (V - 1), dtype=np.float64)
        dist[self.vocab.bos_id] = 0.0
        return dist

    # -- representations ----------------------------------------------------

    def representation(self, token_id: int) -> np.ndarray:
        if not 0 <= token_id < len(self.vocab):
            token_id = self.vocab.unk_id
        return self.representations[token_id]

    def representation_of(self, token: str) -> np.ndarray:
        return self.representations[self.vocab.id_of(token)]

    # -- serialization ------------------------------------------------------

    MAGIC = b"SDGDIVLM"
    VERSION = 1

    def save(self, path: str | Path) -> None:
        """Write the documented binary container (byte-stable layout)."""
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<I", self.VERSION))
            meta = json.dumps(
                {
                    "order": self.order,
                    "smoothing": self.smoothing.kind,
                    "k": self.smoothing.k,
                    "discount": self.smoothing.discount,
                    "repr_dim": self.repr_dim,
                },
                sort_keys=True,
            ).encode("utf-8")
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            fh.write(struct.pack("<I", len(self.vocab)))
            for token in self.vocab.tokens:
                raw = token.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
            fh.write(struct.pack("<B", self.order))
            for m in range(self.order):
                table = self._counts[m]
                fh.write(struct.pack("<Q", len(table)))
                for ctx in sorted(table):
                    row = table[ctx]
                    fh.write(struct.pack(f"<B{m}I", m, *ctx))
                    fh.write(struct.pack("<I", len(row)))
                    for token in sorted(row):
                        fh.write(struct.pack("<IQ", token, row[token]))
            reps = np.ascontiguousarray(self.representations, dtype="<f8")
            fh.write(reps.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        with open(path, "rb") as fh:
            if fh.read(8) != cls.MAGIC:
                raise SdgdivError(f"{path} is not a model file")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != cls.VERSION:
                raise SdgdivError(f"unsupported model version {version}")
            (meta_len,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(meta_len).decode("utf-8"))
            (vocab_size,) = struct.unpack("<I", fh.read(4))
            tokens = []
            for _ in range(vocab_size):
                (token_len,) = struct.unpack("<H", fh.read(2))
                tokens.append(fh.read(token_len).decode("utf-8"))
            vocab = Vocabulary(tokens)
            (order,) = struct.unpack("<B", fh.read(1))
            counts: list[dict] = []
            for m in range(order):
                (n_rows,) = struct.unpack("<Q", fh.read(8))
                table: dict = {}
                for _ in range(n_rows):
                    (ctx_len,) = struct.unpack("<B", fh.read(1))
                    ctx = struct.unpack(f"<{ctx_len}I", fh.read(4 * ctx_len))
                    (n_entries,) = struct.unpack("<I", fh.read(4))
                    row = {}
                    for _ in range(n_entries):
                        token, count = struct.unpack("<IQ", fh.read(12))
                        row[token] = count
                    table[ctx] = row
                counts.append(table)
            dim = meta["repr_dim"]
            reps = np.frombuffer(
                fh.read(8 * vocab_size * dim), dtype="<f8"
            ).reshape(vocab_size, dim).copy()
        smoothing = SmoothingConfig(
            kind=meta["smoothing"], k=meta["k"], discount=meta["discount"]
        )
        return cls(vocab, meta["order"], smoothing, counts, reps, dim)

    def to_debug_json(self) -> str:
        """Human-readable dump of the count tables (debugging aid)."""
        payload = {
            "order": self.order,
            "smoothing": self.smoothing.kind,
            "vocab_size": len(self.vocab),
            "counts": [
                {
                    " ".join(self.vocab.tokens[i] for i in ctx) or "()": {
                        self.vocab.tokens[t]: c for t, c in sorted(row.items())
                    }
                    for ctx, row in sorted(table.items())
                }
                for table in self._counts
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def _continuation_tables(counts: list[dict]) -> list[dict]:
    """Continuation (distinct left-extension) counts for orders below the top.

    continuation[m][ctx][t] = number of distinct tokens w such that the
    (m+2)-gram (w, *ctx, t) was observed. Entry m of the returned list is
    only meaningful for m < order-1.
    """
    order = len(counts)
    continuation: list[dict] = [dict() for _ in range(order)]
    for m in range(1, order):
        target = continuation[m - 1]
        for ctx, row in counts[m].items():
            suffix = ctx[1:]
            dest = target.setdefault(suffix, {})
            for token in row:
                dest[token] = dest.get(token, 0) + 1
    return continuation


def _pad(ids: Sequence[int], order: int, bos_id: int, eos_id: int) -> list[int]:
    return [bos_id] * (order - 1) + list(ids) + [eos_id]


def _count_ngrams(sequences: Iterable[Sequence[int]], order: int, bos_id: int, eos_id: int) -> list[dict]:
    counts: list[dict] = [dict() for _ in range(order)]
    for ids in sequences:
        padded = _pad(ids, order, bos_id, eos_id)
        for pos in range(order - 1, len(padded)):
            token = padded[pos]
            for m in range(order):
                ctx = tuple(padded[pos - m : pos])
                row = counts[m].setdefault(ctx, {})
                row[token] = row.get(token, 0) + 1
    return counts


def _build_representations(
    sequences: Sequence[Sequence[int]], vocab_size: int, dim: int, window: int = REPR_WINDOW
) -> np.ndarray:
    """PPMI-weighted co-occurrence rows projected to dim via a fixed random map.

    Co-occurrence is counted over raw (unpadded) sequences in a +/-window
    band. Tokens with no co-occurrences (reserved tokens, hapax artifacts)
    fall back to their own normalized projection row so every row is a unit
    vector.
    """
    cooc: dict[tuple[int, int], int] = {}
    token_totals = np.zeros(vocab_size, dtype=np.float64)
    for ids in sequences:
        n = len(ids)
        for i, t in enumerate(ids):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j == i:
                    continue
                key = (t, ids[j])
                cooc[key] = cooc.get(key, 0) + 1
                token_totals[t] += 1
    grand_total = token_totals.sum()

    rng = np.random.default_rng(_REPR_SEED)
    projection = rng.standard_normal((vocab_size, dim))
    vectors = np.zeros((vocab_size, dim), dtype=np.float64)
    # sorted iteration pins float accumulation order
    for (t, c), n in sorted(cooc.items()):
        ppmi = math.log((n * grand_total) / (token_totals[t] * token_totals[c]))
        if ppmi > 0.0:
            vectors[t] += ppmi * projection[c]

    norms = np.linalg.norm(vectors, axis=1)
    for t in range(vocab_size):
        if norms[t] > 0.0:
            vectors[t] /= norms[t]
        else:
            vectors[t] = projection[t] / np.linalg.norm(projection[t])
    return vectors


def train(
    corpus: Iterable[str],
    order: int = DEFAULT_ORDER,
    smoothing: SmoothingConfig | None = None,
    repr_dim: int = DEFAULT_REPR_DIM,
    vocab: Vocabulary | None = None,
) -> NgramModel:
    """Train an n-gram model on a corpus of texts (one text per document).

    Passing an explicit vocabulary maps out-of-vocabulary tokens to <unk>;
    otherwise the vocabulary is built from the corpus. Training is
    deterministic: the same corpus and config produce a bit-identical
    serialized model.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    smoothing = smoothing or SmoothingConfig()
    token_seqs = [tokenize(text) for text in corpus]
    token_seqs = [seq for seq in token_seqs if seq]
    if not token_seqs:
        raise TrainingError("training corpus is empty")
    if vocab is None:
        vocab = Vocabulary.from_corpus(token_seqs)
    id_seqs = [vocab.ids(seq) for seq in token_seqs]
    counts = _count_ngrams(id_seqs, order, vocab.bos_id, vocab.eos_id)
    reps = _build_representations(id_seqs, len(vocab), repr_dim)
    return NgramModel(vocab, order, smoothing, counts, reps, repr_dim)


def next_token_dist(model: LmAdapter, context: Sequence[int | str]) -> np.ndarray:
    return model.next_token_dist(context)


def context_representation(model: LmAdapter, token_id: int) -> np.ndarray:
    return model.representation(token_id)


def perplexity(model: NgramModel, corpus: Iterable[str]) -> float:
    """exp(mean negative log-probability) over the corpus, <eos> included.

    A zero-probability token (possible under unsmoothed models) yields
    math.inf rather than an error.
    """
    total = 0.0
    n_tokens = 0
    for text in corpus:
        ids = model.vocab.ids(tokenize(text))
        if not ids:
            continue
        padded = _pad(ids, model.order, model.vocab.bos_id, model.vocab.eos_id)
        for pos in range(model.order - 1, len(padded)):
            ctx = padded[max(0, pos - (model.order - 1)) : pos]
            p = model.next_token_dist(ctx)[padded[pos]]
            n_tokens += 1
            if p <= 0.0:
                return math.inf
            total += math.log(p)
    if n_tokens == 0:
        raise TrainingError("corpus has no tokens to score")
    return math.exp(-total / n_tokens)


class MixtureModel:
    """Interpolates a subset-tuned model with a base model (shared vocab).

    dist = (1 - mix) * tuned + mix * base. mix = 0 reproduces the tuned
    model exactly (the "blank copy" training regime); representations come
    from the tuned model.
    """

    def __init__(self, tuned: NgramModel, base: NgramModel, mix: float):
        if not 0.0 <= mix <= 1.0:
            raise ValueError("mix must be in [0, 1]")
        if tuned.vocab != base.vocab:
            raise SdgdivError("mixture components must share a vocabulary")
        self.tuned = tuned
        self.base = base
        self.mix = mix
        self.vocab = tuned.vocab

    def next_token_dist(self, context: Sequence[int | str]) -> np.ndarray:
        if self.mix == 0.0:
            return self.tuned.next_token_dist(context)
        dist = (1.0 - self.mix) * self.tuned.next_token_dist(context) + (
            self.mix * self.base.next_token_dist(context)
        )
        dist.setflags(write=False)
        return dist

    def representation(self, token_id: int) -> np.ndarray:
        return self.tuned.representation(token_id)
