"""Command-line entry point: ``ner-forge <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, make_config, read_config_file
from .linker import ENDPOINT_ENV
from .pipeline import STAGES, Pipeline, StageError

log = logging.getLogger("ner_forge")


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("configuration (flags override the config file)")
    g.add_argument("-c", "--config", type=Path, help="TOML config file")
    g.add_argument("--language", help="wiki language code, e.g. en or hr")
    g.add_argument("--dump", dest="dump_path", type=Path, help="pages-articles XML dump (plain or .bz2)")
    g.add_argument("--endpoint", help=f"SPARQL endpoint URL (default: ${ENDPOINT_ENV} or DBpedia)")
    g.add_argument("--cache", dest="cache_path", type=Path, help="class cache JSONL file")
    g.add_argument("--priorities", dest="priorities_path", type=Path, help="class priority TSV")
    g.add_argument("--uner-map", dest="uner_map_path", type=Path, help="class to UNER tag TSV")
    g.add_argument("--out", dest="out_dir", type=Path, help="output directory")
    g.add_argument("--articles-per-file", type=int)
    g.add_argument("--files-per-folder", type=int)
    g.add_argument("--max-in-flight", type=int, help="concurrent endpoint requests (max 4)")
    g.add_argument("--min-interval", type=float, help="seconds between endpoint requests")
    g.add_argument("--seed", type=int, help="random seed for review sampling")
    g.add_argument("--workers", type=int, help="cap on worker processes/threads")
    g.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ner-forge",
        description="Build a silver-standard UNER-tagged corpus from a MediaWiki dump.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every stage, resuming from the manifest")
    _common(run)
    run.add_argument("--stop-after", choices=STAGES, help="stop once this stage is done")
    run.add_argument("--no-augment", action="store_true", help="skip the gazetteer augmentation pass")
    run.add_argument("--force", action="store_true", help="ignore the manifest and redo every stage")

    helps = {
        "extract": "strip the dump into documents.jsonl and entities.txt",
        "link": "fetch ontology classes for every entity into the cache",
        "build": "tag entities and write the CoNLL corpus",
        "stats": "count tokens and entities of the corpus",
        "gazetteer": "list the distinct tagged entities",
        "augment": "tag unlinked mentions from the gazetteer",
    }
    for stage in STAGES:
        p = sub.add_parser(stage, help=helps[stage])
        _common(p)

    sample = sub.add_parser("sample", help="draw entities from the gazetteer for manual review")
    _common(sample)
    sample.add_argument("-n", type=int, required=True, help="number of entries")
    sample.add_argument("--sample-out", type=Path, help="output TSV (default: out/review_sample.tsv)")
    return parser


_OVERRIDES = (
    "language", "dump_path", "endpoint", "cache_path", "priorities_path", "uner_map_path",
    "out_dir", "articles_per_file", "files_per_folder", "max_in_flight", "min_interval",
    "seed", "workers",
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in _OVERRIDES}
        if getattr(args, "no_augment", False):
            overrides["augment"] = False
        config = make_config(file_values, overrides)
        pipeline = Pipeline(config)
        if args.command == "run":
            manifest = pipeline.run(stop_after=args.stop_after, force=args.force)
            print(f"done: {', '.join(manifest['stages'])} -> {config.out_dir}")
        elif args.command == "sample":
            path = pipeline.sample(args.n, out=args.sample_out)
            print(f"wrote {args.n} entries to {path}")
        else:
            pipeline.check_inputs([args.command])
            summary = pipeline.run_stage(args.command)
            print(f"{args.command}: {summary}")
    except ConfigError as exc:
        print(f"ner-forge: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"ner-forge: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"ner-forge: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
