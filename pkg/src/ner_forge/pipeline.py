"""Stage orchestration with a manifest that makes interrupted runs resumable.

Output tree under ``out_dir``::

    documents.jsonl       stripped articles with link spans
    entities.txt          sorted unique link targets
    corpus/               tagged sentences, CoNLL, folders of files
    stats.json            counts before augmentation
    gazetteer.tsv         entity list
    corpus_augmented/     corpus after the gazetteer pass
    stats_augmented.json
    delta.json            before/after/delta report
    manifest.json         deterministic run report; drives resumption
    timings.json          wall-clock per stage for the last invocation

The class cache lives at ``cache_path``, outside the tree.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, TypeVar

from . import conll
from .builder import build_document
from .config import ConfigError, PipelineConfig
from .extractor import (
    DumpError,
    collect_entities,
    linked_documents,
    parse_dump,
    read_documents,
    strip_and_link,
    write_documents,
)
from .linker import ClassCache, link_all
from .mapper import TableError, compact_iri, load_tables, tag_entity
from .postproc import (
    CorpusStats,
    Gazetteer,
    augment_sentence,
    build_gazetteer,
    compute_stats,
    delta_report,
    sample_for_review,
    write_json,
)

log = logging.getLogger(__name__)

STAGES = ("extract", "link", "build", "stats", "gazetteer", "augment")

T = TypeVar("T")
R = TypeVar("R")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _batched(items: Iterable[T], n: int) -> Iterator[list[T]]:
    it = iter(items)
    while batch := list(islice(it, n)):
        yield batch


def _ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int, **pool_kw) -> Iterator[R]:
    """map() that fans out over processes but yields in input order."""
    if workers <= 1:
        if "initializer" in pool_kw:
            pool_kw["initializer"](*pool_kw.get("initargs", ()))
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=workers, **pool_kw) as pool:
        for batch in _batched(items, 64 * workers):
            yield from pool.map(fn, batch, chunksize=16)


_worker_tags: dict = {}


def _init_build_worker(tags: dict) -> None:
    global _worker_tags
    _worker_tags = tags


def _build_one(doc):
    return build_document(doc, _worker_tags)


class Pipeline:
    def __init__(self, config: PipelineConfig, **link_kw):
        self.config = config
        self.out = config.out_dir
        self.link_kw = link_kw  # forwarded to link_all (tests inject sessions here)
        self.timings: dict[str, dict] = {}
        self.manifest = self._load_manifest()

    # -- paths ---------------------------------------------------------------

    @property
    def documents_path(self) -> Path:
        return self.out / "documents.jsonl"

    @property
    def entities_path(self) -> Path:
        return self.out / "entities.txt"

    @property
    def corpus_dir(self) -> Path:
        return self.out / "corpus"

    @property
    def augmented_dir(self) -> Path:
        return self.out / "corpus_augmented"

    @property
    def manifest_path(self) -> Path:
        return self.out / "manifest.json"

    # -- manifest ------------------------------------------------------------

    def fingerprint(self) -> str:
        """Digest of every setting and input that shapes the output tree."""
        c = self.config
        parts = {
            "language": c.language,
            "articles_per_file": c.articles_per_file,
            "files_per_folder": c.files_per_folder,
            "augment": c.augment,
            "priorities": _sha256(c.priorities_path) if c.priorities_path.exists() else None,
            "uner_map": _sha256(c.uner_map_path) if c.uner_map_path.exists() else None,
            "dump": c.dump_path.stat().st_size if c.dump_path and c.dump_path.exists() else None,
        }
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:16]

    def _load_manifest(self) -> dict:
        fresh = {"fingerprint": self.fingerprint(), "stages": {}}
        if not self.manifest_path.exists():
            return fresh
        with open(self.manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("fingerprint") != fresh["fingerprint"]:
            log.info("settings changed since the last run; starting over")
            return fresh
        return manifest

    def _save_manifest(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        tmp = self.manifest_path.with_suffix(".json.tmp")
        write_json(tmp, self.manifest)
        os.replace(tmp, self.manifest_path)

    def _save_timings(self) -> None:
        write_json(self.out / "timings.json", {"stages": self.timings})

    def is_done(self, stage: str) -> bool:
        return stage in self.manifest["stages"]

    # -- driver --------------------------------------------------------------

    def check_inputs(self, stages: Iterable[str]) -> None:
        """Fail fast (usage error) on missing or unparsable inputs."""
        stages = set(stages)
        c = self.config
        if "extract" in stages:
            if c.dump_path is None:
                raise ConfigError("dump_path is required (config key or --dump)")
            if not c.dump_path.exists():
                raise ConfigError(f"dump not found: {c.dump_path}")
        if stages & {"build"}:
            for p in (c.priorities_path, c.uner_map_path):
                if not p.exists():
                    raise ConfigError(f"mapping file not found: {p}")
            try:
                load_tables(c.priorities_path, c.uner_map_path)
            except TableError as exc:
                raise ConfigError(str(exc)) from None

    def run(self, stop_after: str | None = None, force: bool = False) -> dict:
        stages = list(STAGES)
        if not self.config.augment:
            stages.remove("augment")
        if stop_after is not None:
            stages = stages[: STAGES.index(stop_after) + 1] if stop_after in stages else stages
        if force:
            self.manifest["stages"] = {}
        self.check_inputs(s for s in stages if not self.is_done(s))
        for stage in stages:
            if self.is_done(stage):
                self.timings[stage] = {"seconds": 0.0, "reused": True}
                continue
            self.run_stage(stage)
        self._save_timings()
        return self.manifest

    def run_stage(self, stage: str) -> dict:
        method = getattr(self, "stage_" + stage)
        # everything downstream of a re-run stage is stale
        for later in STAGES[STAGES.index(stage) :]:
            self.manifest["stages"].pop(later, None)
        t0 = time.perf_counter()
        try:
            summary = method()
        except (ConfigError, StageError):
            raise
        except (DumpError, TableError, OSError, ValueError) as exc:
            raise StageError(stage, str(exc)) from exc
        self.timings[stage] = {"seconds": round(time.perf_counter() - t0, 3), "reused": False}
        self.manifest["stages"][stage] = summary
        self._save_manifest()
        return summary

    # -- stages --------------------------------------------------------------

    def stage_extract(self) -> dict:
        self.check_inputs(["extract"])
        counts: Counter = Counter()
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.config.dump_path, "rb") as fh:
            articles = parse_dump(fh, self.config.language, counts)
            if self.config.workers > 1:
                content = (a for a in articles if not a.redirect and a.wikitext.strip())
                docs = _ordered_map(strip_and_link, content, self.config.workers)
            else:
                docs = linked_documents(articles, counts)
            entities: set[str] = set()

            def tee(stream):
                for doc in stream:
                    entities.update(span.target for span in doc.links)
                    yield doc

            n_docs = write_documents(self.documents_path, tee(docs))
        titles = sorted(entities)
        with open(self.entities_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(t + "\n" for t in titles)
        return {
            "pages": counts["pages"],
            "skipped_namespace": counts["skipped_namespace"],
            "redirects": counts["redirects"],
            "documents": n_docs,
            "entities": len(titles),
        }

    def read_entities(self) -> list[str]:
        with open(self.entities_path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]

    def open_cache(self) -> ClassCache:
        return ClassCache.open(self.config.cache_path, self.config.endpoint)

    def stage_link(self) -> dict:
        titles = self.read_entities()
        cache = self.open_cache()
        kw = {"workers": self.config.max_in_flight, "min_interval": self.config.min_interval,
              "language": self.config.language}
        kw.update(self.link_kw)
        link_all(titles, self.config.endpoint, cache, **kw)
        status = Counter(cache.get(t).status for t in titles)
        errors = sorted(t for t in titles if cache.get(t).status == "error")
        return {
            "entities": len(titles),
            "found": status["found"],
            "not_found": status["not_found"],
            "error": status["error"],
            "error_titles": errors,
        }

    def entity_tags(self) -> tuple[dict, list[str]]:
        priorities, mapping = load_tables(self.config.priorities_path, self.config.uner_map_path)
        cache = self.open_cache()
        tags = {}
        unknown = set(mapping.gaps)
        for title in self.read_entities():
            record = cache.get(title)
            if record is None:
                tags[title] = None
                continue
            tags[title] = tag_entity(record, priorities, mapping)
            unknown.update(c for c in record.classes if not priorities.priority(c))
        return tags, sorted(compact_iri(g) for g in unknown)

    def stage_build(self) -> dict:
        self.check_inputs(["build"])
        tags, gaps = self.entity_tags()
        shutil.rmtree(self.corpus_dir, ignore_errors=True)
        c = self.config
        docs = read_documents(self.documents_path)
        results = _ordered_map(
            _build_one, docs, c.workers, initializer=_init_build_worker, initargs=(tags,)
        )
        with conll.CorpusWriter(self.corpus_dir, c.articles_per_file, c.files_per_folder) as writer:
            for sentences in results:
                writer.add_article(sentences)
        return {
            "entities_tagged": sum(t is not None for t in tags.values()),
            "entities_untagged": sum(t is None for t in tags.values()),
            "mapping_gaps": gaps,
            "files": writer.files,
            "sentences": writer.sentences,
        }

    def stage_stats(self) -> dict:
        stats = compute_stats(conll.read_corpus(self.corpus_dir))
        write_json(self.out / "stats.json", stats.to_dict())
        return {"total_tokens": stats.total_tokens, "entity_count": stats.entity_count}

    def stage_gazetteer(self) -> dict:
        gazetteer = build_gazetteer(conll.read_corpus(self.corpus_dir))
        gazetteer.write_tsv(self.out / "gazetteer.tsv")
        return {"entries": len(gazetteer)}

    def stage_augment(self) -> dict:
        gazetteer = Gazetteer.read_tsv(self.out / "gazetteer.tsv")
        automaton = gazetteer.automaton
        shutil.rmtree(self.augmented_dir, ignore_errors=True)
        after = CorpusStats()
        for path in conll.corpus_files(self.corpus_dir):
            sentences = [augment_sentence(s, automaton) for s in conll.read_file(path)]
            for s in sentences:
                after.add_sentence(s)
            conll.write_file(self.augmented_dir / path.relative_to(self.corpus_dir), sentences)
        with open(self.out / "stats.json", encoding="utf-8") as fh:
            before = CorpusStats.from_dict(json.load(fh))
        write_json(self.out / "stats_augmented.json", after.to_dict())
        report = delta_report(before, after)
        write_json(self.out / "delta.json", report)
        return {
            "entity_tokens_delta": report["entity_tokens"]["delta"],
            "entity_count_delta": report["entity_count"]["delta"],
        }

    # -- review sampling (not part of run) -----------------------------------

    def sample(self, n: int, seed: int | None = None, out: Path | None = None) -> Path:
        gazetteer = Gazetteer.read_tsv(self.out / "gazetteer.tsv")
        entries = sample_for_review(gazetteer, n, self.config.seed if seed is None else seed)
        out = out or self.out / "review_sample.tsv"
        Gazetteer(entries).write_tsv(out)
        return out
