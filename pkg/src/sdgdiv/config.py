"""Run configuration: one declarative TOML file drives the whole pipeline.

Every knob that can move a result lives here and is echoed into the run
manifest, because silent defaults are exactly how pipeline results become
irreproducible. Relative paths are resolved against the config file's
directory.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus_store import DEFAULT_YEAR_WINDOW
from .decoding import Strategy, parse_strategy_spec
from .errors import ConfigError
from .lm_core import (
    DEFAULT_ADD_K,
    DEFAULT_KN_DISCOUNT,
    DEFAULT_ORDER,
    DEFAULT_REPR_DIM,
    SmoothingConfig,
)
from .sdg_classify import DEFAULT_SCORE_THRESHOLD, MECHANISMS

WORKERS_ENV = "SDGDIV_WORKERS"


@dataclass(frozen=True)
class ClassificationConfig:
    mechanism: str
    path: Path

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"unknown classification mechanism {self.mechanism!r}")


@dataclass(frozen=True)
class SourceConfig:
    id: str
    path: Path
    schema: Mapping[str, str]
    classification: ClassificationConfig
    format: str = "jsonl"
    score_threshold: float = DEFAULT_SCORE_THRESHOLD


@dataclass(frozen=True)
class LmConfig:
    order: int = DEFAULT_ORDER
    smoothing: str = "add_k"
    k: float = DEFAULT_ADD_K
    discount: float = DEFAULT_KN_DISCOUNT
    repr_dim: int = DEFAULT_REPR_DIM
    base_mix: float = 0.0

    def smoothing_config(self) -> SmoothingConfig:
        return SmoothingConfig(kind=self.smoothing, k=self.k, discount=self.discount)

    def __post_init__(self):
        if not 0.0 <= self.base_mix <= 1.0:
            raise ConfigError("lm.base_mix must be in [0, 1]")


@dataclass(frozen=True)
class GenerationConfig:
    max_tokens: int = 128
    repeat: int = 1

    def __post_init__(self):
        if self.max_tokens < 1 or self.repeat < 1:
            raise ConfigError("generation.max_tokens and repeat must be >= 1")


@dataclass
class RunConfig:
    sources: list[SourceConfig]
    sdgs: list[int]
    prompts: dict[int, Path]
    strategies: list[Strategy]
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW
    lm: LmConfig = field(default_factory=LmConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    threshold_fraction: float = 0.10
    count_mode: str = "responses"
    run_seed: int = 0
    output_dir: Path = Path("out")
    workers: int = 1
    config_path: Path | None = None

    def __post_init__(self):
        if len(self.sources) < 2:
            raise ConfigError(f"need at least 2 sources, got {len(self.sources)}")
        ids = [s.id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate source ids: {ids}")
        if not self.sdgs:
            raise ConfigError("need at least one SDG")
        if len(set(self.sdgs)) != len(self.sdgs):
            raise ConfigError(f"duplicate SDG ids: {self.sdgs}")
        if not self.strategies:
            raise ConfigError("need at least one decoding strategy")
        tags = [s.tag for s in self.strategies]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"duplicate decoding strategies: {tags}")
        if not 0.0 <= self.threshold_fraction < 1.0:
            raise ConfigError("threshold_fraction must be in [0, 1)")
        if self.count_mode not in ("responses", "occurrences"):
            raise ConfigError(f"unknown count_mode {self.count_mode!r}")
        missing = [k for k in self.sdgs if k not in self.prompts]
        if missing:
            raise ConfigError(f"no prompt file for SDGs {missing}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}")
            if value < 1:
                raise ConfigError(f"{WORKERS_ENV} must be >= 1")
            return value
        return self.workers

    def echo(self) -> dict:
        """JSON-safe view of every knob except the output directory.

        The output directory is deliberately excluded so two runs of the
        same config into different directories produce identical manifests.
        """
        return {
            "sources": [
                {
                    "id": s.id,
                    "path": str(s.path),
                    "format": s.format,
                    "schema": dict(s.schema),
                    "classification": {
                        "mechanism": s.classification.mechanism,
                        "path": str(s.classification.path),
                    },
                    "score_threshold": s.score_threshold,
                }
                for s in self.sources
            ],
            "sdgs": list(self.sdgs),
            "prompts": {str(k): str(p) for k, p in self.prompts.items()},
            "strategies": [_strategy_echo(s) for s in self.strategies],
            "year_window": list(self.year_window),
            "lm": {
                "order": self.lm.order,
                "smoothing": self.lm.smoothing,
                "k": self.lm.k,
                "discount": self.lm.discount,
                "repr_dim": self.lm.repr_dim,
                "base_mix": self.lm.base_mix,
            },
            "generation": {
                "max_tokens": self.generation.max_tokens,
                "repeat": self.generation.repeat,
            },
            "threshold_fraction": self.threshold_fraction,
            "count_mode": self.count_mode,
            "run_seed": self.run_seed,
        }


def _strategy_echo(strategy: Strategy) -> dict:
    out = {"strategy": strategy.tag}
    for name in ("k", "p", "alpha"):
        if hasattr(strategy, name):
            out[name] = getattr(strategy, name)
    return out


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def _strategy_from_table(table: Mapping) -> Strategy:
    table = dict(table)
    name = table.pop("strategy", None)
    if not name:
        raise ConfigError("each [[decoding]] table needs a 'strategy' key")
    spec = name
    if table:
        spec += ":" + ",".join(f"{k}={v}" for k, v in sorted(table.items()))
    try:
        return parse_strategy_spec(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, output_dir: str | Path | None = None) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    base = path.parent
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    run = raw.get("run", {})
    try:
        sources = []
        for entry in raw.get("sources", []):
            classification = entry["classification"]
            sources.append(
                SourceConfig(
                    id=entry["id"],
                    path=_resolve(base, entry["path"]),
                    format=entry.get("format", "jsonl"),
                    schema=dict(entry["schema"]),
                    classification=ClassificationConfig(
                        mechanism=classification["mechanism"],
                        path=_resolve(base, classification["path"]),
                    ),
                    score_threshold=float(
                        classification.get("threshold", DEFAULT_SCORE_THRESHOLD)
                    ),
                )
            )

        sdgs = [int(k) for k in run.get("sdgs", [])]
        prompts_raw = raw.get("prompts", {})
        prompts: dict[int, Path] = {}
        prompt_dir = prompts_raw.get("dir")
        for sdg in sdgs:
            key = f"sdg{sdg}"
            if key in prompts_raw:
                prompts[sdg] = _resolve(base, prompts_raw[key])
            elif prompt_dir is not None:
                prompts[sdg] = _resolve(base, prompt_dir) / f"sdg{sdg}.txt"

        lm_raw = raw.get("lm", {})
        lm = LmConfig(
            order=int(lm_raw.get("order", DEFAULT_ORDER)),
            smoothing=lm_raw.get("smoothing", "add_k"),
            k=float(lm_raw.get("k", DEFAULT_ADD_K)),
            discount=float(lm_raw.get("discount", DEFAULT_KN_DISCOUNT)),
            repr_dim=int(lm_raw.get("repr_dim", DEFAULT_REPR_DIM)),
            base_mix=float(lm_raw.get("base_mix", 0.0)),
        )
        gen_raw = raw.get("generation", {})
        generation = GenerationConfig(
            max_tokens=int(gen_raw.get("max_tokens", 128)),
            repeat=int(gen_raw.get("repeat", 1)),
        )
        strategies = [_strategy_from_table(t) for t in raw.get("decoding", [])]

        window = run.get("year_window", list(DEFAULT_YEAR_WINDOW))
        out_dir = output_dir if output_dir is not None else run.get("output_dir", "out")

        config = RunConfig(
            sources=sources,
            sdgs=sdgs,
            prompts=prompts,
            strategies=strategies,
            year_window=(int(window[0]), int(window[1])),
            lm=lm,
            generation=generation,
            threshold_fraction=float(run.get("threshold_fraction", 0.10)),
            count_mode=run.get("count_mode", "responses"),
            run_seed=int(run.get("seed", 0)),
            output_dir=_resolve(Path.cwd(), str(out_dir)) if output_dir is not None else _resolve(base, str(out_dir)),
            workers=int(run.get("workers", 1)),
            config_path=path,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration {path}: {exc!r}") from exc
    return config
