"""Re-record the fixture class cache and golden output tree.

    python scripts/regen_fixtures.py            # both
    python scripts/regen_fixtures.py --golden   # golden tree only, from the recorded cache

Review the diff of tests/fixtures/golden before committing.
"""

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
sys.path.insert(0, str(ROOT / "tests"))

from conftest import FIXED_CLOCK, StubEndpoint  # noqa: E402

from ner_forge.config import make_config, read_config_file  # noqa: E402
from ner_forge.extractor import collect_entities, linked_documents, parse_dump  # noqa: E402
from ner_forge.linker import ClassCache, link_all  # noqa: E402
from ner_forge.pipeline import Pipeline  # noqa: E402


def record_cache() -> None:
    with open(FIXTURES / "dump.xml", "rb") as fh:
        titles = collect_entities(linked_documents(parse_dump(fh, "en")))
    responses = json.loads((FIXTURES / "sparql_responses.json").read_text(encoding="utf-8"))
    path = FIXTURES / "class_cache.jsonl"
    path.unlink(missing_ok=True)
    with StubEndpoint(responses) as stub:
        cache = ClassCache.open(path, "https://dbpedia.org/sparql")
        link_all(titles, stub.url, cache, min_interval=0, clock=lambda: FIXED_CLOCK, sleep=lambda s: None)
    print(f"recorded {len(cache)} records -> {path}")


def record_golden() -> None:
    golden = FIXTURES / "golden"
    with tempfile.TemporaryDirectory() as tmp:
        cache = Path(tmp) / "cache.jsonl"
        shutil.copy(FIXTURES / "class_cache.jsonl", cache)
        values = read_config_file(FIXTURES / "fixture.toml")
        config = make_config(values, {"out_dir": Path(tmp) / "out", "cache_path": cache,
                                      "endpoint": "http://127.0.0.1:9/offline"})
        Pipeline(config).run()
        shutil.rmtree(golden, ignore_errors=True)
        shutil.copytree(config.out_dir, golden, ignore=shutil.ignore_patterns("timings.json"))
    print(f"golden tree -> {golden}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--golden", action="store_true", help="only rebuild the golden tree")
    args = ap.parse_args()
    if not args.golden:
        record_cache()
    record_golden()
