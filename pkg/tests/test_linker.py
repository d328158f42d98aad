import shutil
import threading
import time

import pytest
import requests

from conftest import FIXED_CLOCK, FIXTURES, StubEndpoint
from ner_forge.linker import (
    ENDPOINT_ENV,
    ERROR,
    FOUND,
    NOT_FOUND,
    ONTOLOGY_NS,
    OWL_THING,
    ClassCache,
    EntityClassRecord,
    RateLimiter,
    build_query,
    default_endpoint,
    link_all,
    query_classes,
    resource_base,
)

FIXTURE_TITLES = [
    line.split('"title": "')[1].split('"')[0]
    for line in (FIXTURES / "class_cache.jsonl").read_text(encoding="utf-8").splitlines()[1:]
]


def fixed(**kw):
    return dict(clock=lambda: FIXED_CLOCK, sleep=lambda s: None, **kw)


def test_european_games_classes_in_endpoint_order(stub_endpoint):
    rec = query_classes("2015_European_Games", stub_endpoint.url, **fixed())
    assert rec.status == FOUND
    assert rec.classes == (
        ONTOLOGY_NS + "Event",
        ONTOLOGY_NS + "SoccerTournament",
        ONTOLOGY_NS + "SocietalEvent",
        ONTOLOGY_NS + "SportsEvent",
        OWL_THING,
    )


def test_absent_resource_not_found(stub_endpoint):
    rec = query_classes("Zzz_Nonexistent_Fixture", stub_endpoint.url, **fixed())
    assert (rec.status, rec.classes) == (NOT_FOUND, ())


def test_buddhism_is_an_ethnic_group(stub_endpoint):
    rec = query_classes("Buddhism", stub_endpoint.url, **fixed())
    assert ONTOLOGY_NS + "EthnicGroup" in rec.classes


def test_persistent_failure_backs_off_then_gives_up(stub_endpoint):
    waits = []
    rec = query_classes("Broken_Fixture_Title", stub_endpoint.url, sleep=waits.append)
    assert rec.status == ERROR and rec.classes == ()
    assert waits == [1.0, 2.0]
    assert stub_endpoint.hits.count("Broken_Fixture_Title") == 3


def test_transient_failure_recovers(no_sleep):
    calls = []

    class Flaky:
        def get(self, url, **kw):
            calls.append(url)
            if len(calls) < 3:
                raise requests.ConnectionError("reset")
            return Ok()

    class Ok:
        def raise_for_status(self):
            pass

        def json(self):
            return {"results": {"bindings": [{"t": {"value": OWL_THING}}]}}

    rec = query_classes("X", "http://stub", session=Flaky(), sleep=no_sleep)
    assert rec.status == FOUND and len(calls) == 3


def test_query_shape_and_escaping():
    q = build_query('Foo_"bar"_{x}', resource_base("en"))
    assert "<http://dbpedia.org/resource/Foo_%22bar%22_%7Bx%7D> rdf:type ?t" in q
    assert f'STRSTARTS(STR(?t), "{ONTOLOGY_NS}")' in q and "owl:Thing" in q
    assert build_query("Zagreb_(grad)", resource_base("hr")).count("<http://hr.dbpedia.org/resource/Zagreb_(grad)>") == 1


def test_endpoint_from_environment(monkeypatch):
    monkeypatch.setenv(ENDPOINT_ENV, "http://localhost:8890/sparql")
    assert default_endpoint() == "http://localhost:8890/sparql"
    monkeypatch.delenv(ENDPOINT_ENV)
    assert default_endpoint() == "https://dbpedia.org/sparql"


def test_record_invariant():
    with pytest.raises(ValueError):
        EntityClassRecord("X", (), FIXED_CLOCK, FOUND)
    with pytest.raises(ValueError):
        EntityClassRecord("X", (OWL_THING,), FIXED_CLOCK, NOT_FOUND)


# -- link_all / cache -------------------------------------------------------


def test_empty_titles_leave_cache_unchanged(tmp_path):
    path = tmp_path / "c.jsonl"
    shutil.copy(FIXTURES / "class_cache.jsonl", path)
    before = path.read_bytes()
    cache = ClassCache.open(path, "x")
    link_all([], "http://127.0.0.1:9/none", cache)
    assert path.read_bytes() == before and len(cache) == len(FIXTURE_TITLES)


def test_fixture_titles_reproduce_recorded_cache(tmp_path, stub_endpoint):
    path = tmp_path / "c.jsonl"
    cache = ClassCache.open(path, "https://dbpedia.org/sparql")
    link_all(FIXTURE_TITLES, stub_endpoint.url, cache, min_interval=0, **fixed())
    assert len(cache) == len(FIXTURE_TITLES) == 17
    assert path.read_bytes() == (FIXTURES / "class_cache.jsonl").read_bytes()

    hits = len(stub_endpoint.hits)
    again = ClassCache.open(path, "https://dbpedia.org/sparql")
    link_all(FIXTURE_TITLES, stub_endpoint.url, again, min_interval=0, **fixed())
    assert len(stub_endpoint.hits) == hits  # nothing re-fetched
    assert path.read_bytes() == (FIXTURES / "class_cache.jsonl").read_bytes()
    assert again.records == cache.records


def test_retry_errors_refetches_only_failures(tmp_path, recorded_responses):
    path = tmp_path / "c.jsonl"
    shutil.copy(FIXTURES / "class_cache.jsonl", path)
    recorded_responses["Broken_Fixture_Title"] = [OWL_THING]
    with StubEndpoint(recorded_responses) as stub:
        cache = ClassCache.open(path, "x")
        link_all(FIXTURE_TITLES, stub.url, cache, retry_errors=True, min_interval=0, **fixed())
        assert stub.hits == ["Broken_Fixture_Title"]
    assert ClassCache.open(path, "x").get("Broken_Fixture_Title").status == FOUND


def test_class_order_round_trips(tmp_path):
    classes = (OWL_THING, ONTOLOGY_NS + "Zeta", ONTOLOGY_NS + "Alpha")
    path = tmp_path / "c.jsonl"
    ClassCache.open(path, "x").add(EntityClassRecord("Odd", classes, FIXED_CLOCK, FOUND))
    assert ClassCache.open(path, "x").get("Odd").classes == classes


def test_in_flight_requests_capped(tmp_path):
    active, peak = [0], [0]
    lock = threading.Lock()

    class Slow:
        def get(self, url, **kw):
            with lock:
                active[0] += 1
                peak[0] = max(peak[0], active[0])
            time.sleep(0.02)
            with lock:
                active[0] -= 1
            return self

        def raise_for_status(self):
            pass

        def json(self):
            return {"results": {"bindings": []}}

    cache = ClassCache("x")
    link_all([f"T{i}" for i in range(40)], "http://stub", cache, workers=16,
             min_interval=0, session=Slow())
    assert len(cache) == 40
    assert peak[0] <= 4


def test_rate_limiter_spaces_requests():
    limiter = RateLimiter(0.02)
    t0 = time.monotonic()
    for _ in range(6):
        limiter.wait()
    assert time.monotonic() - t0 >= 0.1
