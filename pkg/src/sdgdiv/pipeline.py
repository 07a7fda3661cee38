"""Pipeline orchestration: ingest -> join -> classify -> overlap -> train ->
generate -> analyze -> report, plus the run manifest.

Every stage writes deterministic artifacts under the configured output
directory, and the manifest records a digest for each of them alongside the
config and input digests and the run seed. Two runs of the same config and
seed therefore produce byte-identical manifests; a digest mismatch between
runs is a reproducibility bug by definition.

A stage failure aborts the run with the stage name and cause; whatever was
already written stays on disk next to a ``failed`` marker file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from . import charts, corpus_store, decoding, lm_core, overlap, phrase_pipeline
from .config import RunConfig, SourceConfig
from .decoding import DecodingConfig, GenerationBatch
from .errors import SdgdivError
from .lm_core import MixtureModel, NgramModel
from .phrase_pipeline import CommonUniqueSets, PhraseTable
from .query_lang import parse_query
from .sdg_classify import SdgSubset, classify_by_labels, classify_by_query, classify_by_score

log = logging.getLogger(__name__)

STAGES = ("ingest", "join", "classify", "overlap", "train", "generate", "analyze", "report")

MANIFEST_NAME = "manifest.json"
FAILED_MARKER = "failed"


class StageError(SdgdivError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class JobFilter:
    """Restriction of (sdg, source) jobs, e.g. --only sdg=5,source=openalex."""

    def __init__(self, sdg: int | None = None, source: str | None = None):
        self.sdg = sdg
        self.source = source

    @classmethod
    def parse(cls, spec: str | None) -> "JobFilter":
        if not spec:
            return cls()
        sdg = None
        source = None
        for part in spec.split(","):
            key, _, value = part.partition("=")
            key = key.strip()
            if key == "sdg":
                sdg = int(value)
            elif key == "source":
                source = value.strip()
            else:
                raise SdgdivError(f"unknown --only key {key!r} (expected sdg=, source=)")
        return cls(sdg=sdg, source=source)

    def admits(self, sdg: int | None = None, source: str | None = None) -> bool:
        if self.sdg is not None and sdg is not None and sdg != self.sdg:
            return False
        if self.source is not None and source is not None and source != self.source:
            return False
        return True


class RunPaths:
    """Canonical artifact locations under one output directory."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def store(self, source_id: str) -> Path:
        return self.root / "stores" / f"{source_id}.jsonl"

    @property
    def joint_index(self) -> Path:
        return self.root / "joint" / "index.jsonl"

    @property
    def filter_report(self) -> Path:
        return self.root / "joint" / "filter_report.json"

    def subset(self, sdg: int, source_id: str) -> Path:
        return self.root / "subsets" / f"sdg{sdg}.{source_id}.dois"

    def model(self, sdg: int, source_id: str) -> Path:
        return self.root / "models" / f"sdg{sdg}.{source_id}.lm"

    def base_model(self, source_id: str) -> Path:
        return self.root / "models" / f"base.{source_id}.lm"

    def responses(self, sdg: int, source_id: str, strategy_tag: str) -> Path:
        return self.root / "responses" / f"sdg{sdg}.{source_id}.{strategy_tag}.jsonl"

    def phrase_table(self, sdg: int, source_id: str) -> Path:
        return self.root / "phrases" / f"sdg{sdg}.{source_id}.csv"

    def common_phrases(self, sdg: int) -> Path:
        return self.root / "phrases" / f"sdg{sdg}.common.csv"

    def unique_phrases(self, sdg: int, source_id: str) -> Path:
        return self.root / "phrases" / f"sdg{sdg}.{source_id}.unique.csv"

    @property
    def overlap_csv(self) -> Path:
        return self.root / "reports" / "overlap.csv"

    def venn_svg(self, sdg: int) -> Path:
        return self.root / "reports" / f"venn_sdg{sdg}.svg"

    def chart(self, name: str, suffix: str) -> Path:
        return self.root / "reports" / f"{name}.{suffix}"

    @property
    def manifest(self) -> Path:
        return self.root / MANIFEST_NAME

    def relative(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _map_jobs(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# Stages

def stage_ingest(config: RunConfig, paths: RunPaths) -> dict[str, corpus_store.SourceStore]:
    stores = {}
    for source in config.sources:
        store = corpus_store.ingest_records(
            source.path, source.id, source.schema, fmt=source.format
        )
        log.info(
            "ingest %s: %d records, %d skipped", source.id, store.ingested, store.skipped
        )
        paths.store(source.id).parent.mkdir(parents=True, exist_ok=True)
        store.export_jsonl(paths.store(source.id))
        stores[source.id] = store
    return stores


def stage_join(
    config: RunConfig, paths: RunPaths, stores: dict[str, corpus_store.SourceStore]
) -> corpus_store.JointIndex:
    index = corpus_store.build_joint_index(
        [stores[s.id] for s in config.sources], year_window=config.year_window
    )
    paths.joint_index.parent.mkdir(parents=True, exist_ok=True)
    corpus_store.export_joint_index(index, paths.joint_index)
    report = {
        source: rep.to_dict() for source, rep in sorted(index.filter_report.items())
    }
    _write_text(paths.filter_report, json.dumps(report, sort_keys=True, indent=2) + "\n")
    log.info("join: %d DOIs in the joint index", len(index))
    return index


def classify_source(
    config: RunConfig,
    index: corpus_store.JointIndex,
    source: SourceConfig,
    only: JobFilter,
) -> dict[int, SdgSubset]:
    """All configured SDG subsets for one source under its mechanism."""
    rule = source.classification
    subsets: dict[int, SdgSubset] = {}
    if rule.mechanism in ("label", "score"):
        if rule.mechanism == "label":
            found, _ = classify_by_labels(index, rule.path, source.id)
        else:
            found, _ = classify_by_score(
                index, rule.path, source.id, threshold=source.score_threshold
            )
        for sdg in config.sdgs:
            subsets[sdg] = found.get(
                sdg, SdgSubset(sdg=sdg, source_id=source.id, dois=())
            )
    else:  # query: one query file per SDG in the configured directory
        for sdg in config.sdgs:
            if not only.admits(sdg=sdg):
                continue
            query_file = Path(rule.path) / f"sdg{sdg}.query"
            ast = parse_query(query_file.read_text(encoding="utf-8"))
            subsets[sdg] = classify_by_query(index, ast, sdg, source.id)
    return {k: v for k, v in subsets.items() if only.admits(sdg=k)}


def stage_classify(
    config: RunConfig,
    paths: RunPaths,
    index: corpus_store.JointIndex,
    only: JobFilter | None = None,
) -> dict[tuple[int, str], SdgSubset]:
    only = only or JobFilter()
    all_subsets: dict[tuple[int, str], SdgSubset] = {}
    for source in config.sources:
        if not only.admits(source=source.id):
            continue
        for sdg, subset in classify_source(config, index, source, only).items():
            path = paths.subset(sdg, source.id)
            path.parent.mkdir(parents=True, exist_ok=True)
            subset.write(path)
            all_subsets[(sdg, source.id)] = subset
            log.info("classify sdg%d/%s: %d DOIs", sdg, source.id, len(subset))
    return all_subsets


def stage_overlap(
    config: RunConfig,
    paths: RunPaths,
    subsets: dict[tuple[int, str], SdgSubset],
) -> list[overlap.VennPartition]:
    if len(config.sources) != 3:
        log.warning(
            "overlap stage needs exactly 3 sources (got %d); skipping Venn reports",
            len(config.sources),
        )
        return []
    partitions = []
    for sdg in config.sdgs:
        triple = [subsets[(sdg, s.id)] for s in config.sources]
        part = overlap.venn_partition(triple)
        partitions.append(part)
        _write_text(paths.venn_svg(sdg), charts.venn_svg(part))
    _write_text(paths.overlap_csv, overlap.overlap_report_csv(partitions))
    return partitions


def train_model(
    config: RunConfig,
    index: corpus_store.JointIndex,
    subset: SdgSubset,
    vocab=None,
) -> NgramModel:
    corpus = index.abstracts(subset.dois, subset.source_id)
    return lm_core.train(
        corpus,
        order=config.lm.order,
        smoothing=config.lm.smoothing_config(),
        repr_dim=config.lm.repr_dim,
        vocab=vocab,
    )


def stage_train(
    config: RunConfig,
    paths: RunPaths,
    index: corpus_store.JointIndex,
    subsets: dict[tuple[int, str], SdgSubset],
    only: JobFilter | None = None,
) -> dict[tuple[int, str], NgramModel]:
    only = only or JobFilter()
    paths.model(0, "x").parent.mkdir(parents=True, exist_ok=True)

    base_models: dict[str, NgramModel] = {}
    vocabs: dict[str, lm_core.Vocabulary] = {}
    if config.lm.base_mix > 0.0:
        # the base model sees every joint-index abstract of its source, and
        # shares its vocabulary with the per-SDG models so they can mix
        for source in config.sources:
            full_corpus = index.abstracts(index.dois, source.id)
            token_seqs = [lm_core.tokenize(t) for t in full_corpus]
            vocabs[source.id] = lm_core.Vocabulary.from_corpus(
                seq for seq in token_seqs if seq
            )
            base = lm_core.train(
                full_corpus,
                order=config.lm.order,
                smoothing=config.lm.smoothing_config(),
                repr_dim=config.lm.repr_dim,
                vocab=vocabs[source.id],
            )
            base.save(paths.base_model(source.id))
            base_models[source.id] = base

    jobs = [
        (sdg, source.id)
        for sdg in config.sdgs
        for source in config.sources
        if only.admits(sdg=sdg, source=source.id)
    ]

    def run_job(job: tuple[int, str]) -> tuple[tuple[int, str], NgramModel]:
        sdg, source_id = job
        subset = subsets[(sdg, source_id)]
        model = train_model(config, index, subset, vocab=vocabs.get(source_id))
        model.save(paths.model(sdg, source_id))
        log.info("train sdg%d/%s: %d abstracts, vocab %d",
                 sdg, source_id, len(subset), len(model.vocab))
        return job, model

    return dict(_map_jobs(run_job, jobs, config.effective_workers()))


def _generation_model(config: RunConfig, model: NgramModel, base: NgramModel | None):
    if config.lm.base_mix > 0.0 and base is not None:
        return MixtureModel(model, base, config.lm.base_mix)
    return model


def load_base_models(config: RunConfig, paths: RunPaths) -> dict[str, NgramModel]:
    if config.lm.base_mix <= 0.0:
        return {}
    return {s.id: NgramModel.load(paths.base_model(s.id)) for s in config.sources}


def stage_generate(
    config: RunConfig,
    paths: RunPaths,
    models: dict[tuple[int, str], NgramModel],
    only: JobFilter | None = None,
    base_models: dict[str, NgramModel] | None = None,
) -> int:
    only = only or JobFilter()
    base_models = base_models or {}
    prompt_sets = {sdg: decoding.load_prompts(path) for sdg, path in config.prompts.items()}
    jobs = [
        (sdg, source.id, strategy)
        for sdg in config.sdgs
        for source in config.sources
        for strategy in config.strategies
        if only.admits(sdg=sdg, source=source.id)
    ]
    paths.responses(0, "x", "y").parent.mkdir(parents=True, exist_ok=True)

    def run_job(job) -> int:
        sdg, source_id, strategy = job
        model = _generation_model(
            config, models[(sdg, source_id)], base_models.get(source_id)
        )
        batch = decoding.generate_batch(
            model,
            prompt_sets[sdg],
            DecodingConfig(
                strategy=strategy,
                max_tokens=config.generation.max_tokens,
                seed=config.run_seed,
            ),
            sdg=sdg,
            source_id=source_id,
            repeat=config.generation.repeat,
        )
        decoding.write_responses(batch, paths.responses(sdg, source_id, strategy.tag))
        return len(batch.responses)

    counts = _map_jobs(run_job, jobs, config.effective_workers())
    total = sum(counts)
    log.info("generate: %d responses across %d jobs", total, len(jobs))
    return total


def phrase_table_csv(table: PhraseTable, strategy_tags: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    tags = sorted(strategy_tags)
    writer.writerow(["phrase", "count"] + [f"count_{t}" for t in tags])
    for phrase, count in table.sorted_entries():
        per = table.per_strategy_counts.get(phrase, {})
        writer.writerow([phrase, count] + [per.get(t, 0) for t in tags])
    return buf.getvalue()


def common_phrases_csv(
    sets: CommonUniqueSets, tables: dict[str, PhraseTable], sources: Sequence[str]
) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phrase", "count"] + [f"count_{s}" for s in sources])
    rows = []
    for phrase in sets.common:
        per_source = [tables[s].entries.get(phrase, 0) for s in sources]
        rows.append((phrase, sum(per_source), per_source))
    rows.sort(key=lambda r: (-r[1], r[0]))
    for phrase, total, per_source in rows:
        writer.writerow([phrase, total] + per_source)
    return buf.getvalue()


def stage_analyze(
    config: RunConfig,
    paths: RunPaths,
    only: JobFilter | None = None,
) -> dict[int, CommonUniqueSets]:
    only = only or JobFilter()
    strategy_tags = [s.tag for s in config.strategies]
    tables: dict[tuple[int, str], PhraseTable] = {}
    for sdg in config.sdgs:
        for source in config.sources:
            if not only.admits(sdg=sdg, source=source.id):
                continue
            batches = [
                decoding.read_responses(paths.responses(sdg, source.id, tag), sdg, source.id)
                for tag in strategy_tags
            ]
            table = phrase_pipeline.analyze_batches(
                sdg,
                source.id,
                batches,
                fraction=config.threshold_fraction,
                count_mode=config.count_mode,
            )
            tables[(sdg, source.id)] = table
            _write_text(
                paths.phrase_table(sdg, source.id), phrase_table_csv(table, strategy_tags)
            )

    results: dict[int, CommonUniqueSets] = {}
    source_ids = [s.id for s in config.sources]
    for sdg in config.sdgs:
        if not only.admits(sdg=sdg):
            continue
        if not all((sdg, s) in tables for s in source_ids):
            continue  # partial --only run: cross-source sets need all sources
        sets = phrase_pipeline.common_unique_sets([tables[(sdg, s)] for s in source_ids])
        results[sdg] = sets
        by_source = {s: tables[(sdg, s)] for s in source_ids}
        _write_text(
            paths.common_phrases(sdg), common_phrases_csv(sets, by_source, source_ids)
        )
        for s in source_ids:
            rows = [
                (phrase, by_source[s].entries[phrase])
                for phrase in sets.unique_per_source[s]
            ]
            _write_text(
                paths.unique_phrases(sdg, s), charts.frequency_chart_csv(rows)
            )
    return results


def emit_frequency_chart(
    rows: Sequence[tuple[str, int]], svg_path: Path, csv_path: Path | None, title: str
) -> None:
    """Write one frequency bar chart and its CSV mirror."""
    _write_text(svg_path, charts.frequency_chart_svg(rows, title))
    if csv_path is not None:
        _write_text(csv_path, charts.frequency_chart_csv(rows))


def stage_report(
    config: RunConfig,
    paths: RunPaths,
    common_sets: dict[int, CommonUniqueSets],
) -> None:
    for sdg, sets in sorted(common_sets.items()):
        common_rows = charts.parse_frequency_csv(
            _drop_extra_columns(paths.common_phrases(sdg))
        )
        emit_frequency_chart(
            common_rows,
            paths.chart(f"phrases_sdg{sdg}_common", "svg"),
            None,
            f"SDG {sdg}: noun phrases common to all sources",
        )
        for source in config.sources:
            csv_path = paths.unique_phrases(sdg, source.id)
            rows = charts.parse_frequency_csv(csv_path.read_text(encoding="utf-8"))
            emit_frequency_chart(
                rows,
                paths.chart(f"phrases_sdg{sdg}.{source.id}_unique", "svg"),
                None,
                f"SDG {sdg}: noun phrases unique to {source.id}",
            )


def _drop_extra_columns(path: Path) -> str:
    """First two columns (phrase, count) of a wider phrase CSV."""
    reader = csv.reader(io.StringIO(path.read_text(encoding="utf-8")))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in reader:
        writer.writerow(row[:2])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Whole-run orchestration

def run_pipeline(config: RunConfig, only: JobFilter | None = None) -> dict:
    """Execute every stage and write the run manifest; returns the manifest."""
    paths = RunPaths(config.output_dir)
    paths.root.mkdir(parents=True, exist_ok=True)
    marker = paths.root / FAILED_MARKER
    if marker.exists():
        marker.unlink()

    def run_stage(name: str, fn: Callable[[], object]) -> object:
        try:
            return fn()
        except Exception as exc:
            _write_text(marker, f"stage: {name}\nerror: {exc}\n")
            raise StageError(name, exc) from exc

    stores = run_stage("ingest", lambda: stage_ingest(config, paths))
    index = run_stage("join", lambda: stage_join(config, paths, stores))
    subsets = run_stage("classify", lambda: stage_classify(config, paths, index, only))
    run_stage("overlap", lambda: stage_overlap(config, paths, subsets))
    models = run_stage("train", lambda: stage_train(config, paths, index, subsets, only))
    n_responses = run_stage(
        "generate",
        lambda: stage_generate(
            config, paths, models, only, load_base_models(config, paths)
        ),
    )
    common_sets = run_stage("analyze", lambda: stage_analyze(config, paths, only))
    run_stage("report", lambda: stage_report(config, paths, common_sets))

    manifest = build_manifest(config, paths, n_responses=n_responses, n_models=len(models))
    _write_text(paths.manifest, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def build_manifest(
    config: RunConfig, paths: RunPaths, n_responses: int, n_models: int
) -> dict:
    inputs = {}
    input_paths = [s.path for s in config.sources]
    input_paths += [s.classification.path for s in config.sources]
    input_paths += list(config.prompts.values())
    for path in input_paths:
        path = Path(path)
        if path.is_file():
            inputs[str(path)] = sha256_file(path)
        elif path.is_dir():
            for child in sorted(path.rglob("*")):
                if child.is_file():
                    inputs[str(child)] = sha256_file(child)

    artifacts = {}
    for path in sorted(paths.root.rglob("*")):
        if path.is_file() and path.name not in (MANIFEST_NAME, FAILED_MARKER):
            artifacts[paths.relative(path)] = sha256_file(path)

    config_digest = ""
    if config.config_path and Path(config.config_path).is_file():
        config_digest = sha256_file(Path(config.config_path))

    prompt_counts = {
        str(sdg): len(decoding.load_prompts(path)) for sdg, path in config.prompts.items()
    }
    return {
        "version": 1,
        "run_seed": config.run_seed,
        "config_digest": config_digest,
        "config": config.echo(),
        "inputs": inputs,
        "artifacts": artifacts,
        "counts": {
            "sdgs": len(config.sdgs),
            "sources": len(config.sources),
            "strategies": len(config.strategies),
            "prompts": prompt_counts,
            "models": n_models,
            "responses": n_responses,
        },
    }
