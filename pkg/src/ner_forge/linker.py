"""Ontology class lookup over SPARQL, backed by an append-only JSON-lines cache."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import quote

import requests

log = logging.getLogger(__name__)

ENDPOINT_ENV = "NER_FORGE_ENDPOINT"
DEFAULT_ENDPOINT = "https://dbpedia.org/sparql"
ONTOLOGY_NS = "http://dbpedia.org/ontology/"
OWL_THING = "http://www.w3.org/2002/07/owl#Thing"

MAX_IN_FLIGHT = 4
ATTEMPTS = 3
BACKOFF_BASE = 1.0
_CHUNK = 1024

FOUND, NOT_FOUND, ERROR = "found", "not_found", "error"


def default_endpoint() -> str:
    return os.environ.get(ENDPOINT_ENV) or DEFAULT_ENDPOINT


def resource_base(language: str) -> str:
    if language == "en":
        return "http://dbpedia.org/resource/"
    return f"http://{language}.dbpedia.org/resource/"


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class EntityClassRecord:
    title: str
    classes: tuple[str, ...]
    fetched_at: str
    status: str

    def __post_init__(self):
        if bool(self.classes) != (self.status == FOUND):
            raise ValueError(f"{self.title}: status {self.status!r} with {len(self.classes)} classes")

    def to_json(self) -> str:
        return json.dumps(
            {
                "title": self.title,
                "classes": list(self.classes),
                "fetched_at": self.fetched_at,
                "status": self.status,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "EntityClassRecord":
        d = json.loads(line)
        return cls(d["title"], tuple(d["classes"]), d["fetched_at"], d["status"])


def build_query(title: str, base: str) -> str:
    # IRIREF forbids <>"{}|^`\ and spaces; everything else can stay literal
    iri = base + quote(title, safe="!$&'()*+,;=:@/-._~%")
    return (
        "PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\n"
        "PREFIX owl: <http://www.w3.org/2002/07/owl#>\n"
        f"SELECT ?t WHERE {{ <{iri}> rdf:type ?t . "
        f'FILTER(STRSTARTS(STR(?t), "{ONTOLOGY_NS}") || ?t = owl:Thing) }} '
        "ORDER BY ?t"
    )


class RateLimiter:
    """Enforces a minimum delay between consecutive request starts across threads."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.min_interval
        if delay > 0:
            time.sleep(delay)


def _parse_bindings(payload: dict) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for row in payload["results"]["bindings"]:
        seen.setdefault(row["t"]["value"], None)
    return tuple(seen)


def query_classes(
    title: str,
    endpoint: str,
    *,
    language: str = "en",
    session: requests.Session | None = None,
    limiter: RateLimiter | None = None,
    attempts: int = ATTEMPTS,
    backoff: float = BACKOFF_BASE,
    timeout: float = 30.0,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], str] = _utcnow,
) -> EntityClassRecord:
    """Fetch the ontology classes of one entity.

    Failures are retried with exponential backoff (``backoff``, ``2*backoff``,
    ...). A persistent failure yields a record with status ``error`` instead
    of raising, so a long run is never aborted by a flaky endpoint.
    """
    http = session or requests
    params = {"query": build_query(title, resource_base(language)), "format": "json"}
    headers = {"Accept": "application/sparql-results+json"}
    last: Exception | None = None
    for attempt in range(attempts):
        if limiter is not None:
            limiter.wait()
        try:
            resp = http.get(endpoint, params=params, headers=headers, timeout=timeout)
            resp.raise_for_status()
            classes = _parse_bindings(resp.json())
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            last = exc
            if attempt < attempts - 1:
                sleep(backoff * 2**attempt)
            continue
        return EntityClassRecord(title, classes, clock(), FOUND if classes else NOT_FOUND)
    log.warning("giving up on %s after %d attempts: %s", title, attempts, last)
    return EntityClassRecord(title, (), clock(), ERROR)


class ClassCache:
    """title -> EntityClassRecord, persisted as JSON lines.

    The first line of the file names the endpoint; every later line is one
    record. Records are only ever appended, and when a title appears twice
    the later record wins (used for re-fetched errors).
    """

    def __init__(self, endpoint_url: str, path: Path | None = None):
        self.endpoint_url = endpoint_url
        self.path = Path(path) if path is not None else None
        self.records: dict[str, EntityClassRecord] = {}
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: Path, endpoint_url: str) -> "ClassCache":
        path = Path(path)
        cache = cls(endpoint_url, path)
        if path.exists() and path.stat().st_size:
            with open(path, encoding="utf-8") as fh:
                header = json.loads(fh.readline())
                cache.endpoint_url = header.get("endpoint", endpoint_url)
                for line in fh:
                    if line.strip():
                        rec = EntityClassRecord.from_json(line)
                        cache.records[rec.title] = rec
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps({"endpoint": endpoint_url}) + "\n")
        return cache

    def __contains__(self, title: str) -> bool:
        return title in self.records

    def __len__(self) -> int:
        return len(self.records)

    def get(self, title: str) -> EntityClassRecord | None:
        return self.records.get(title)

    def add(self, record: EntityClassRecord) -> None:
        with self._lock:
            self.records[record.title] = record
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(record.to_json() + "\n")

    def status_counts(self) -> dict[str, int]:
        counts = {FOUND: 0, NOT_FOUND: 0, ERROR: 0}
        for rec in self.records.values():
            counts[rec.status] += 1
        return counts


def link_all(
    titles: Iterable[str],
    endpoint: str,
    cache: ClassCache,
    *,
    workers: int = MAX_IN_FLIGHT,
    min_interval: float = 0.1,
    retry_errors: bool = False,
    **query_kw,
) -> ClassCache:
    """Ensure ``cache`` holds a record for every title.

    Cached titles are never re-queried (``retry_errors`` re-queries only
    records whose previous lookup failed). Results are appended to the cache
    in input order regardless of completion order.
    """
    todo = [
        t
        for t in titles
        if t not in cache or (retry_errors and cache.records[t].status == ERROR)
    ]
    if not todo:
        return cache
    limiter = RateLimiter(min_interval)
    local = threading.local()

    def fetch(title: str) -> EntityClassRecord:
        if "session" not in query_kw:
            if not hasattr(local, "session"):
                local.session = requests.Session()
            return query_classes(title, endpoint, session=local.session, limiter=limiter, **query_kw)
        return query_classes(title, endpoint, limiter=limiter, **query_kw)

    n_workers = max(1, min(MAX_IN_FLIGHT, workers))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for i in range(0, len(todo), _CHUNK):
            for record in pool.map(fetch, todo[i : i + _CHUNK]):
                cache.add(record)
    log.info("linked %d titles via %s", len(todo), endpoint)
    return cache
