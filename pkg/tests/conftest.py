import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
FIXED_CLOCK = "2026-01-01T00:00:00Z"

_SUBJECT = re.compile(r"<http://(?:[a-z-]+\.)?dbpedia\.org/resource/([^>]*)>")


def sparql_payload(classes):
    return {
        "head": {"vars": ["t"]},
        "results": {"bindings": [{"t": {"type": "uri", "value": c}} for c in classes]},
    }


class StubEndpoint:
    """A local SPARQL endpoint that replays recorded responses.

    A title recorded as ``null`` answers HTTP 500; unknown titles answer an
    empty result set.
    """

    def __init__(self, responses: dict):
        self.responses = responses
        self.hits: list[str] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                params = parse_qs(urlparse(self.path).query)
                m = _SUBJECT.search(params.get("query", [""])[0])
                title = unquote(m.group(1)) if m else ""
                stub.hits.append(title)
                classes = stub.responses.get(title, [])
                if classes is None or params.get("format") != ["json"]:
                    self.send_response(500)
                    self.end_headers()
                    return
                body = json.dumps(sparql_payload(classes)).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/sparql-results+json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/sparql"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def recorded_responses():
    with open(FIXTURES / "sparql_responses.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def stub_endpoint(recorded_responses):
    with StubEndpoint(recorded_responses) as stub:
        yield stub


@pytest.fixture
def no_sleep():
    return lambda seconds: None


# -- end-to-end helpers -------------------------------------------------------

GOLDEN = FIXTURES / "golden"
OFFLINE_ENDPOINT = "http://127.0.0.1:9/offline"


def tree_digest(root: Path, exclude=("timings.json",)) -> dict[str, str]:
    """sha256 of every file under ``root``, keyed by relative posix path."""
    import hashlib

    return {
        p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in exclude
    }


def fixture_argv(tmp_path: Path, *extra: str, warm: bool = True) -> list[str]:
    """Options for a fixture run writing to ``tmp_path/out``."""
    import shutil

    cache = tmp_path / "cache.jsonl"
    if warm and not cache.exists():
        shutil.copy(FIXTURES / "class_cache.jsonl", cache)
    return [
        "-c", str(FIXTURES / "fixture.toml"),
        "--out", str(tmp_path / "out"),
        "--cache", str(cache),
        "--endpoint", OFFLINE_ENDPOINT,
        *extra,
    ]


@pytest.fixture
def offline(monkeypatch):
    """Any HTTP request made through requests fails the test."""
    import requests

    calls = []

    def refuse(self, method, url, *args, **kwargs):
        calls.append(url)
        raise AssertionError(f"unexpected network call to {url}")

    monkeypatch.setattr(requests.Session, "request", refuse)
    return calls


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # lets fixtures see whether the test body failed
    outcome = yield
    if call.when == "call":
        item.rep_call = outcome.get_result()
