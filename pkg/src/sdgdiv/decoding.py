"""Decoding strategies and the reproducible generation harness.

Three strategies: top-k sampling, nucleus (top-p) sampling, and contrastive
search. The first two are stochastic; every response draws its randomness
from an RNG seeded by a stable hash of (run seed, SDG, source, strategy,
prompt id), so output is identical no matter how generation jobs are
scheduled. Contrastive search is deterministic: among the top-k candidates
it maximizes

    (1 - alpha) * P(v | context) - alpha * max_t cos(rep(v), rep(t))

over tokens t already in the context (the degeneration penalty). All ties,
including the k-th candidate cut, break toward the lower token id.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import SdgdivError
from .lm_core import EOS, LmAdapter, tokenize


@dataclass(frozen=True)
class TopK:
    k: int = 50
    tag = "top_k"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("top-k needs k >= 1")


@dataclass(frozen=True)
class Nucleus:
    p: float = 0.95
    tag = "nucleus"

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("nucleus needs p in (0, 1]")


@dataclass(frozen=True)
class Contrastive:
    k: int = 8
    alpha: float = 0.6
    tag = "contrastive"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("contrastive needs k >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("contrastive needs alpha in [0, 1]")


Strategy = Union[TopK, Nucleus, Contrastive]
STRATEGY_TAGS = ("top_k", "nucleus", "contrastive")


@dataclass(frozen=True)
class DecodingConfig:
    strategy: Strategy
    max_tokens: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def parse_strategy_spec(spec: str) -> Strategy:
    """Parse "top_k:k=50" / "nucleus:p=0.95" / "contrastive:k=8,alpha=0.6"."""
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            key, _, value = part.partition("=")
            if not value:
                raise ValueError(f"bad strategy parameter {part!r} in {spec!r}")
            params[key.strip()] = value.strip()
    try:
        if name == "top_k":
            return TopK(k=int(params.pop("k", 50)), **_no_extras(params, spec))
        if name == "nucleus":
            return Nucleus(p=float(params.pop("p", 0.95)), **_no_extras(params, spec))
        if name == "contrastive":
            return Contrastive(
                k=int(params.pop("k", 8)),
                alpha=float(params.pop("alpha", 0.6)),
                **_no_extras(params, spec),
            )
    except ValueError as exc:
        raise ValueError(f"bad strategy spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown strategy {name!r} (expected one of {STRATEGY_TAGS})")


def _no_extras(params: dict, spec: str) -> dict:
    if params:
        raise ValueError(f"unknown parameters {sorted(params)} in strategy spec {spec!r}")
    return {}


# ---------------------------------------------------------------------------
# Single decoding steps

def _descending_order(dist: np.ndarray) -> np.ndarray:
    # stable ordering: probability descending, token id ascending on ties
    return np.lexsort((np.arange(len(dist)), -dist))


def top_k_candidates(dist: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k most probable tokens (ties at the cut -> lower id)."""
    return _descending_order(dist)[: min(k, len(dist))]


def nucleus_candidates(dist: np.ndarray, p: float) -> np.ndarray:
    """Smallest descending-probability prefix with cumulative mass >= p."""
    order = _descending_order(dist)
    cum = np.cumsum(dist[order])
    cut = int(np.searchsorted(cum, p, side="left"))
    cut = min(cut, len(order) - 1)
    return order[: cut + 1]


def _sample(dist: np.ndarray, ids: np.ndarray, rng: random.Random) -> int:
    probs = dist[ids]
    total = probs.sum()
    if total <= 0.0:
        # all candidates have zero mass; the deterministic tie-break applies
        return int(ids[0])
    r = rng.random() * total
    acc = 0.0
    for token, prob in zip(ids, probs):
        acc += prob
        if r < acc:
            return int(token)
    return int(ids[-1])  # guard against float round-off at the top end


def top_k_step(dist: np.ndarray, k: int, rng: random.Random) -> int:
    return _sample(dist, top_k_candidates(dist, k), rng)


def nucleus_step(dist: np.ndarray, p: float, rng: random.Random) -> int:
    return _sample(dist, nucleus_candidates(dist, p), rng)


def contrastive_step(
    model: LmAdapter, context: Sequence[int], k: int, alpha: float
) -> int:
    dist = model.next_token_dist(context)
    candidates = top_k_candidates(dist, k)
    reps = np.stack([model.representation(t) for t in candidates])
    ctx_reps = np.stack([model.representation(t) for t in context])
    # unit vectors by construction, so the dot product is the cosine
    max_sim = (reps @ ctx_reps.T).max(axis=1)
    scores = (1.0 - alpha) * dist[candidates] - alpha * max_sim
    best = np.lexsort((candidates, -scores))[0]
    return int(candidates[best])


# ---------------------------------------------------------------------------
# Generation harness

_SEED_DOMAIN = b"sdgdiv.response.v1"


def derive_response_seed(
    run_seed: int, sdg: int, source_id: str, strategy_tag: str, prompt_id: int, repeat: int = 0
) -> int:
    """Stable 64-bit per-response seed; pins parallel == serial output."""
    payload = "\x1f".join(
        [str(run_seed), str(sdg), source_id, strategy_tag, str(prompt_id), str(repeat)]
    ).encode("utf-8")
    digest = hashlib.sha256(_SEED_DOMAIN + b"\x00" + payload).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class Response:
    prompt_id: int
    tokens: tuple[str, ...]
    text: str


@dataclass
class GenerationBatch:
    sdg: int
    source_id: str
    strategy_tag: str
    responses: list[Response] = field(default_factory=list)


def generate_response(
    model: LmAdapter,
    prompt: str,
    config: DecodingConfig,
    sdg: int,
    source_id: str,
    prompt_id: int,
    repeat: int = 0,
) -> Response:
    """Generate one response; ends at <eos> or after max_tokens tokens.

    The returned token list keeps the terminal <eos> (when generation
    stopped there); the text joins the tokens without it.
    """
    prompt_tokens = tokenize(prompt)
    if not prompt_tokens:
        raise SdgdivError(f"prompt {prompt_id} is empty")
    vocab = model.vocab
    context = [vocab.bos_id] + vocab.ids(prompt_tokens)

    strategy = config.strategy
    rng = random.Random(
        derive_response_seed(config.seed, sdg, source_id, strategy.tag, prompt_id, repeat)
    )
    generated: list[int] = []
    for _ in range(config.max_tokens):
        if isinstance(strategy, Contrastive):
            token = contrastive_step(model, context, strategy.k, strategy.alpha)
        else:
            dist = model.next_token_dist(context)
            if isinstance(strategy, TopK):
                token = top_k_step(dist, strategy.k, rng)
            else:
                token = nucleus_step(dist, strategy.p, rng)
        generated.append(token)
        context.append(token)
        if token == vocab.eos_id:
            break

    tokens = tuple(vocab.tokens[t] for t in generated)
    text_tokens = tokens[:-1] if tokens and tokens[-1] == EOS else tokens
    return Response(prompt_id=prompt_id, tokens=tokens, text=" ".join(text_tokens))


def generate_batch(
    model: LmAdapter,
    prompts: Sequence[str],
    config: DecodingConfig,
    sdg: int,
    source_id: str,
    repeat: int = 1,
) -> GenerationBatch:
    """Run one model over a prompt set with one strategy (order-independent)."""
    batch = GenerationBatch(sdg=sdg, source_id=source_id, strategy_tag=config.strategy.tag)
    for prompt_id, prompt in enumerate(prompts):
        for rep in range(repeat):
            batch.responses.append(
                generate_response(model, prompt, config, sdg, source_id, prompt_id, rep)
            )
    return batch


def load_prompts(path: str | Path) -> list[str]:
    """Prompts file: one prompt per line; the 0-based line number is the
    prompt id. Interior blank lines would silently shift every id after
    them, so they are rejected."""
    lines = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise SdgdivError(f"prompt file {path} has no prompts")
    for i, prompt in enumerate(lines):
        if not prompt:
            raise SdgdivError(f"prompt file {path}: line {i + 1} is blank")
    return lines


def write_responses(batch: GenerationBatch, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for resp in batch.responses:
            fh.write(
                json.dumps(
                    {
                        "prompt_id": resp.prompt_id,
                        "strategy": batch.strategy_tag,
                        "tokens": list(resp.tokens),
                        "text": resp.text,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_responses(path: str | Path, sdg: int, source_id: str) -> GenerationBatch:
    responses = []
    strategy_tag = ""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            strategy_tag = row["strategy"]
            responses.append(
                Response(
                    prompt_id=row["prompt_id"],
                    tokens=tuple(row["tokens"]),
                    text=row["text"],
                )
            )
    return GenerationBatch(
        sdg=sdg, source_id=source_id, strategy_tag=strategy_tag, responses=responses
    )
