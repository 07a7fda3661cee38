"""Command-line entry point.

    sdgdiv run --config run.toml [--out DIR] [--only sdg=5,source=openalex]

runs the whole pipeline; the individual stages (ingest, join, classify,
overlap, train, generate, analyze, report) are also invocable on their own
against an existing output directory, sharing the manifest conventions.
``generate`` can run standalone from a model file and a prompts file.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import corpus_store, decoding, pipeline
from .config import RunConfig, load_config
from .decoding import DecodingConfig, parse_strategy_spec
from .errors import SdgdivError
from .lm_core import NgramModel, SmoothingConfig
from .pipeline import JobFilter, RunPaths
from .sdg_classify import SdgSubset

log = logging.getLogger("sdgdiv")


def _add_config_arg(parser: argparse.ArgumentParser, with_out: bool = True) -> None:
    parser.add_argument("--config", required=True, help="run configuration (TOML)")
    if with_out:
        parser.add_argument(
            "--out", default=None, help="output directory (overrides config)"
        )


def _load(args) -> tuple[RunConfig, RunPaths]:
    config = load_config(args.config, output_dir=getattr(args, "out", None))
    return config, RunPaths(config.output_dir)


def _load_stores(config: RunConfig, paths: RunPaths) -> dict:
    return {
        s.id: corpus_store.ingest_canonical(paths.store(s.id), s.id)
        for s in config.sources
    }


def _load_index(config: RunConfig, paths: RunPaths):
    return corpus_store.load_joint_index(
        paths.joint_index,
        [s.id for s in config.sources],
        year_window=config.year_window,
    )


def _load_subsets(config: RunConfig, paths: RunPaths) -> dict:
    subsets = {}
    for sdg in config.sdgs:
        for source in config.sources:
            path = paths.subset(sdg, source.id)
            if path.exists():
                subsets[(sdg, source.id)] = SdgSubset.read(path, sdg, source.id)
    return subsets


def cmd_run(args) -> int:
    config, _ = _load(args)
    manifest = pipeline.run_pipeline(config, JobFilter.parse(args.only))
    print(json.dumps(manifest["counts"], sort_keys=True))
    return 0


def cmd_ingest(args) -> int:
    config, paths = _load(args)
    stores = pipeline.stage_ingest(config, paths)
    for source_id, store in stores.items():
        print(f"{source_id}: {store.ingested} records, {store.skipped} skipped")
    return 0


def cmd_join(args) -> int:
    config, paths = _load(args)
    index = pipeline.stage_join(config, paths, _load_stores(config, paths))
    print(f"joint index: {len(index)} DOIs")
    return 0


def cmd_classify(args) -> int:
    config, paths = _load(args)
    if args.mechanism or args.input:
        if not (args.mechanism and args.input and args.sdg and args.source):
            raise SdgdivError(
                "--mechanism/--input require --sdg and --source as well"
            )
    only = JobFilter(sdg=args.sdg, source=args.source)
    index = _load_index(config, paths)
    if args.mechanism:
        # ad-hoc rule overriding the configured one for a single pair
        from .query_lang import parse_query
        from .sdg_classify import classify_by_labels, classify_by_query, classify_by_score

        if args.mechanism == "label":
            found, _ = classify_by_labels(index, args.input, args.source)
            subset = found.get(args.sdg, SdgSubset(args.sdg, args.source, ()))
        elif args.mechanism == "score":
            found, _ = classify_by_score(index, args.input, args.source)
            subset = found.get(args.sdg, SdgSubset(args.sdg, args.source, ()))
        else:
            ast = parse_query(Path(args.input).read_text(encoding="utf-8"))
            subset = classify_by_query(index, ast, args.sdg, args.source)
        path = paths.subset(args.sdg, args.source)
        path.parent.mkdir(parents=True, exist_ok=True)
        subset.write(path)
        print(f"sdg{args.sdg}/{args.source}: {len(subset)} DOIs -> {path}")
        return 0
    subsets = pipeline.stage_classify(config, paths, index, only)
    for (sdg, source_id), subset in sorted(subsets.items()):
        print(f"sdg{sdg}/{source_id}: {len(subset)} DOIs")
    return 0


def cmd_overlap(args) -> int:
    config, paths = _load(args)
    partitions = pipeline.stage_overlap(config, paths, _load_subsets(config, paths))
    for part in partitions:
        print(
            f"sdg{part.sdg}: union {part.union_size}, "
            f"triple {part.triple_overlap_pct():.1f}%, "
            f"single-source {part.single_source_only_pct():.1f}%"
        )
    return 0


def cmd_train(args) -> int:
    config, paths = _load(args)
    if args.order is not None or args.smoothing is not None:
        from dataclasses import replace

        lm = config.lm
        if args.order is not None:
            lm = replace(lm, order=args.order)
        if args.smoothing is not None:
            lm = replace(lm, smoothing=args.smoothing)
        config.lm = lm
    only = JobFilter(sdg=args.sdg, source=args.source)
    index = _load_index(config, paths)
    subsets = _load_subsets(config, paths)
    models = pipeline.stage_train(config, paths, index, subsets, only)
    if args.out and len(models) != 1:
        raise SdgdivError("--out names one model file; restrict with --sdg and --source")
    for (sdg, source_id), model in sorted(models.items()):
        out = args.out or paths.model(sdg, source_id)
        if args.out:
            model.save(out)
        print(f"sdg{sdg}/{source_id}: vocab {len(model.vocab)} -> {out}")
    pipeline.refresh_manifest(config, paths)
    return 0


_MODEL_NAME_RE = re.compile(r"^sdg(\d+)\.(.+)\.lm$")


def cmd_generate(args) -> int:
    if args.model:
        # standalone mode: model file + prompts file, no config needed
        if not args.prompts:
            raise SdgdivError("--model also requires --prompts")
        sdg, source = args.sdg, args.source
        if sdg is None or source is None:
            m = _MODEL_NAME_RE.match(Path(args.model).name)
            if not m:
                raise SdgdivError(
                    "cannot infer --sdg/--source from model filename; pass them explicitly"
                )
            sdg = sdg if sdg is not None else int(m.group(1))
            source = source if source is not None else m.group(2)
        model = NgramModel.load(args.model)
        prompts = decoding.load_prompts(args.prompts)
        strategy = parse_strategy_spec(args.strategy)
        batch = decoding.generate_batch(
            model,
            prompts,
            DecodingConfig(strategy=strategy, max_tokens=args.max_tokens, seed=args.seed),
            sdg=sdg,
            source_id=source,
        )
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        out = out_dir / f"sdg{sdg}.{source}.{strategy.tag}.jsonl"
        decoding.write_responses(batch, out)
        print(f"{len(batch.responses)} responses -> {out}")
        return 0
    if not args.config:
        raise SdgdivError("generate needs either --model or --config")
    config, paths = _load(args)
    only = JobFilter(sdg=args.sdg, source=args.source)
    index = _load_index(config, paths)
    subsets = _load_subsets(config, paths)
    models = {
        key: NgramModel.load(paths.model(*key))
        for key in subsets
        if paths.model(*key).exists() and only.admits(*key)
    }
    total = pipeline.stage_generate(
        config, paths, models, only, pipeline.load_base_models(config, paths)
    )
    print(f"{total} responses")
    pipeline.refresh_manifest(config, paths)
    return 0


def cmd_analyze(args) -> int:
    config, paths = _load(args)
    only = JobFilter.parse(args.only)
    results = pipeline.stage_analyze(config, paths, only)
    for sdg, sets in sorted(results.items()):
        uniques = ", ".join(
            f"{s}:{len(d)}" for s, d in sorted(sets.unique_per_source.items())
        )
        print(f"sdg{sdg}: common {len(sets.common)}, unique {uniques}")
    return 0


def cmd_report(args) -> int:
    config, paths = _load(args)
    results = pipeline.stage_analyze(config, paths, JobFilter())
    pipeline.stage_report(config, paths, results)
    print(f"reports under {paths.root / 'reports'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdgdiv",
        description="Measure divergence between SDG classifications via fine-tuned language models",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute the full pipeline")
    _add_config_arg(p)
    p.add_argument("--only", default=None, help="restrict jobs, e.g. sdg=5,source=openalex")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ingest", help="ingest source files into canonical stores")
    _add_config_arg(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("join", help="build the joint index from ingested stores")
    _add_config_arg(p)
    p.set_defaults(fn=cmd_join)

    p = sub.add_parser("classify", help="build per-(SDG, source) subsets")
    _add_config_arg(p)
    p.add_argument("--sdg", type=int, default=None)
    p.add_argument("--source", default=None)
    p.add_argument("--mechanism", choices=("label", "score", "query"), default=None)
    p.add_argument("--input", default=None, help="label/score file or query file")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("overlap", help="Venn partitions and overlap reports")
    _add_config_arg(p)
    p.set_defaults(fn=cmd_overlap)

    p = sub.add_parser("train", help="train per-(SDG, source) models")
    _add_config_arg(p, with_out=False)
    p.add_argument("--sdg", type=int, default=None)
    p.add_argument("--source", default=None)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--smoothing", choices=("add_k", "kneser_ney"), default=None)
    p.add_argument("--out", default=None, help="extra copy of the single trained model")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="generate responses to prompt sets")
    p.add_argument("--config", default=None, help="run configuration (TOML)")
    p.add_argument("--model", default=None, help="standalone mode: model file")
    p.add_argument("--prompts", default=None, help="standalone mode: prompts file")
    p.add_argument("--strategy", default="top_k", help="strategy spec, e.g. nucleus:p=0.9")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", dest="max_tokens", type=int, default=128)
    p.add_argument("--out", default=None, help="standalone mode: response directory")
    p.add_argument("--sdg", type=int, default=None)
    p.add_argument("--source", default=None)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("analyze", help="extract and threshold noun phrases")
    _add_config_arg(p)
    p.add_argument("--only", default=None)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("report", help="render frequency charts")
    _add_config_arg(p)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except SdgdivError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
