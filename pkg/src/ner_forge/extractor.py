"""Streaming MediaWiki dump reader and a wikitext stripper that keeps internal links.

Links survive stripping as :class:`LinkSpan` character offsets into the plain
text. Rendering works on a marked intermediate string: every kept link is
wrapped in two private-use sentinels, the whole string is cleaned as ordinary
text, and offsets are read off at the very end.
"""

from __future__ import annotations

import bz2
import html
import io
import json
import logging
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator
from urllib.parse import unquote

log = logging.getLogger(__name__)

TEMPLATE_NESTING_CAP = 16

_OPEN, _CLOSE = "\ue000", "\ue001"


class DumpError(ValueError):
    """The dump is not well-formed XML."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class RawArticle:
    page_id: int
    title: str
    wikitext: str
    language: str
    redirect: bool = False


@dataclass(frozen=True)
class LinkSpan:
    start: int
    end: int
    target: str
    anchor: str


@dataclass(frozen=True)
class LinkedDocument:
    page_id: int
    title: str
    text: str
    links: tuple[LinkSpan, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "page_id": self.page_id,
                "title": self.title,
                "text": self.text,
                "links": [
                    {"start": s.start, "end": s.end, "target": s.target, "anchor": s.anchor}
                    for s in self.links
                ],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "LinkedDocument":
        d = json.loads(line)
        return cls(
            page_id=d["page_id"],
            title=d["title"],
            text=d["text"],
            links=tuple(LinkSpan(**s) for s in d["links"]),
        )


# --------------------------------------------------------------------------
# dump reading


def open_dump(stream: BinaryIO) -> BinaryIO:
    """Return a readable byte stream, transparently decompressing bz2 input."""
    if not hasattr(stream, "peek"):
        stream = io.BufferedReader(stream)  # type: ignore[arg-type]
    if stream.peek(3)[:3] == b"BZh":
        return bz2.BZ2File(stream)  # type: ignore[return-value]
    return stream


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem: ET.Element) -> dict[str, ET.Element]:
    out: dict[str, ET.Element] = {}
    for child in elem:
        out.setdefault(_local(child.tag), child)
    return out


_REDIRECT = re.compile(r"\s*#[^\W\d_]+\s*:?\s*\[\[")


def parse_dump(
    dump_stream: BinaryIO, language: str, counts: Counter | None = None
) -> Iterator[RawArticle]:
    """Yield main-namespace pages of a MediaWiki XML export in document order.

    ``counts`` (if given) is updated with ``pages``, ``skipped_namespace`` and
    ``redirects``. Memory stays flat: each ``<page>`` subtree is discarded
    once it has been yielded.
    """
    counts = counts if counts is not None else Counter()
    context = ET.iterparse(open_dump(dump_stream), events=("start", "end"))
    root = None
    try:
        for event, elem in context:
            if root is None:
                root = elem
            if event != "end" or _local(elem.tag) != "page":
                continue
            counts["pages"] += 1
            fields = _children(elem)
            ns = fields.get("ns")
            if ns is not None and (ns.text or "0").strip() != "0":
                counts["skipped_namespace"] += 1
                root.clear()
                continue
            revision = _children(fields["revision"]) if "revision" in fields else {}
            text_elem = revision.get("text")
            wikitext = (text_elem.text if text_elem is not None else None) or ""
            redirect = "redirect" in fields or bool(_REDIRECT.match(wikitext))
            if redirect:
                counts["redirects"] += 1
            page_id = int((fields["id"].text or "0").strip()) if "id" in fields else 0
            if page_id <= 0:
                counts["skipped_invalid"] += 1
                root.clear()
                continue
            title_elem = fields.get("title")
            title = (title_elem.text if title_elem is not None else None) or ""
            root.clear()
            yield RawArticle(page_id, title, wikitext, language, redirect)
    except ET.ParseError as exc:
        line, col = exc.position
        raise DumpError(f"malformed XML at line {line}, column {col}", exc.position) from exc


# --------------------------------------------------------------------------
# title normalization and link classification

# Namespaces whose links render nothing inline (media and categories).
HIDDEN_NAMESPACES = frozenset(
    {
        "file", "image", "media", "category",
        # Croatian / South Slavic localizations
        "datoteka", "slika", "kategorija",
    }
)
# Namespaces and interwiki prefixes whose links render their text but
# point outside the article space.
OTHER_NAMESPACES = frozenset(
    {
        "template", "help", "portal", "user", "talk", "special", "wikipedia",
        "project", "draft", "module", "mediawiki", "wp", "wikt", "wiktionary",
        "w", "s", "q", "n", "b", "v", "d", "c", "m", "commons", "meta", "mw",
        "species", "wikisource", "wikiquote", "wikinews", "wikibooks",
        "wikiversity", "wikidata", "wikivoyage", "voy", "phab", "doi",
        "predložak", "pomoć", "suradnik", "razgovor", "posebno",
    }
)
_LANG_PREFIX = re.compile(r"[a-z]{2,3}(?:-[a-z]+)*\Z")


def normalize_title(raw: str) -> str:
    """Canonical article title: decoded, fragment-free, underscored, first letter upper."""
    t = unquote(raw).split("#", 1)[0]
    t = " ".join(t.replace("_", " ").split())
    if not t:
        return ""
    return (t[0].upper() + t[1:]).replace(" ", "_")


def _link_kind(target: str) -> str:
    """Classify a raw link target as ``article``, ``hidden`` or ``plain``."""
    colon_link = target.startswith(":")
    body = target[1:] if colon_link else target
    prefix, sep, _ = body.partition(":")
    if not sep:
        return "article"
    p = prefix.strip().lower()
    if p in HIDDEN_NAMESPACES:
        return "plain" if colon_link else "hidden"
    if p in OTHER_NAMESPACES or p.endswith(" talk") or p.endswith("_talk"):
        return "plain"
    if _LANG_PREFIX.match(prefix.strip()):
        return "plain" if colon_link else "hidden"
    return "article"


# --------------------------------------------------------------------------
# balanced-construct scanning

_BRACES = re.compile(r"(?P<open>\{\{)|(?P<close>\}\})")
_TABLES = re.compile(r"(?m)^[ \t]*(?:(?P<open>\{\|)|(?P<close>\|\}))")
_BRACKETS = re.compile(r"(?P<open>\[\[)|(?P<close>\]\])")


def _scan(s: str, token_re: re.Pattern) -> tuple[list[tuple[int, int, int]], list[tuple[int, int]]]:
    """Outermost balanced constructs as (start, end, max depth), plus stray tokens."""
    stack: list[re.Match] = []
    outer: list[tuple[int, int, int]] = []
    stray: list[tuple[int, int]] = []
    depth = 0
    for m in token_re.finditer(s):
        if m.group("open"):
            stack.append(m)
            depth = max(depth, len(stack))
        elif stack:
            opener = stack.pop()
            if not stack:
                outer.append((opener.start(), m.end(), depth))
                depth = 0
        else:
            stray.append((m.start(), m.end()))
    stray.extend((m.start(), m.end()) for m in stack)
    return outer, sorted(stray)


def _delete(s: str, spans: list[tuple[int, int]]) -> str:
    pieces, pos = [], 0
    for a, b in spans:
        pieces.append(s[pos:a])
        pos = b
    pieces.append(s[pos:])
    return "".join(pieces)


def _balanced(s: str, token_re: re.Pattern, what: str):
    outer, stray = _scan(s, token_re)
    if stray:
        log.debug("dropping %d unbalanced %s token(s)", len(stray), what)
        s = _delete(s, stray)
        outer, _ = _scan(s, token_re)
    return s, outer


def _remove_templates(s: str) -> str:
    s, outer = _balanced(s, _BRACES, "template")
    pieces, pos = [], 0
    for a, b, depth in outer:
        pieces.append(s[pos:a])
        if depth > TEMPLATE_NESTING_CAP:
            log.debug("template nested %d deep kept as literal text", depth)
            pieces.append(_BRACES.sub("", s[a:b]))
        pos = b
    pieces.append(s[pos:])
    return "".join(pieces)


def _remove_tables(s: str) -> str:
    s, outer = _balanced(s, _TABLES, "table")
    return _delete(s, [(a, b) for a, b, _ in outer])


# --------------------------------------------------------------------------
# links

_TRAIL = re.compile(r"[^\W\d_]+")


def _remove_hidden_links(s: str) -> str:
    """Delete file, category and interlanguage links before any line-level pass.

    Removing them later could leave table or heading markup at a line start.
    """
    s, outer = _balanced(s, _BRACKETS, "link")
    hidden = [(a, b) for a, b, _ in outer if _link_kind(s[a + 2 : b - 2].partition("|")[0].strip()) == "hidden"]
    return _delete(s, hidden)


def _render_links(s: str, keep_spans: bool) -> tuple[str, list[str]]:
    """Replace every outermost ``[[...]]`` by its visible text.

    With ``keep_spans`` the visible text of article links is wrapped in
    sentinels and the normalized targets are returned in order.
    """
    s, outer = _balanced(s, _BRACKETS, "link")
    targets: list[str] = []
    pieces: list[str] = []
    pos = 0
    for a, b, _ in outer:
        if a < pos:  # swallowed by the previous link's trail
            continue
        pieces.append(s[pos:a])
        pos = b
        inner = s[a + 2 : b - 2]
        raw_target, pipe, label = inner.partition("|")
        kind = _link_kind(raw_target.strip())
        if kind == "hidden":
            continue
        raw_target = raw_target.strip().lstrip(":")
        if pipe and not label.strip():
            # pipe trick: [[Foo (bar)|]] shows "Foo"
            label = re.sub(r"\s*\([^()]*\)\s*$", "", raw_target.partition(":")[2] or raw_target)
        shown = label if pipe else raw_target
        shown, _ = _render_links(shown, keep_spans=False)
        target = normalize_title(raw_target) if kind == "article" else ""
        if keep_spans and target:
            trail = _TRAIL.match(s, pos)
            if trail:
                shown += trail.group()
                pos = trail.end()
        anchor = " ".join(shown.split())
        if not anchor:
            continue
        if keep_spans and target:
            pieces.append(f"{_OPEN}{anchor}{_CLOSE}")
            targets.append(target)
        else:
            pieces.append(anchor)
    pieces.append(s[pos:])
    return "".join(pieces), targets


# --------------------------------------------------------------------------
# stripping

_COMMENT = re.compile(r"<!--.*?(?:-->|\Z)", re.S)
_DROPPED_TAGS = (
    "ref", "references", "math", "chem", "ce", "gallery", "timeline", "score",
    "syntaxhighlight", "source", "pre", "imagemap", "hiero", "graph",
    "mapframe", "maplink", "templatedata", "inputbox", "poem",
)
_DROPPED_SELF = re.compile(r"<(?:%s)\b[^<>]*/>" % "|".join(_DROPPED_TAGS), re.I)
_DROPPED_BLOCK = re.compile(
    r"<(%s)\b[^<>]*>.*?</\1\s*>" % "|".join(_DROPPED_TAGS), re.I | re.S
)
_BR = re.compile(r"<br\s*/?>", re.I)
_TAG = re.compile(r"</?[A-Za-z][A-Za-z0-9]*\b[^<>]*/?>")
_MAGIC = re.compile(r"__[A-Z]+__")
_HEADING = re.compile(r"^(={1,6})\s*(.+?)\s*\1\s*$")
_RULE = re.compile(r"^-{4,}\s*$")
# leading list markers and stray table delimiters
_LINE_START = re.compile(r"^(?:[*#:;]|\{\||\|\}|\s)+")
_QUOTES = re.compile(r"'{2,}")
# quote runs formed only once links are rendered, e.g. ' next to [[']]
_JOINED_QUOTES = re.compile("'(?:[\ue000\ue001]*')+")
_EXTERNAL = re.compile(r"\[(?:https?:|ftp:)?//[^\s\]]+(?:\s+([^\]]*))?\]")
_DOUBLED = re.compile("([\\[\\]{}])((?:[\ue000\ue001]*\\1)+)")
_HSPACE = re.compile(r"[^\S\n]+")
_MARKED = re.compile("\ue000([^\ue000\ue001]*)\ue001")


def _keep_sentinels(m: re.Match) -> str:
    return "".join(c for c in m.group() if c in (_OPEN, _CLOSE))


def _undouble(m: re.Match) -> str:
    return m.group(1) + _keep_sentinels(m)


def _line_markup(line: str) -> str:
    """Strip line-level markup from one line; link sentinels are looked through and kept."""
    visible = line.replace(_OPEN, "").replace(_CLOSE, "")
    drop: list[tuple[int, int]] = []
    m = _LINE_START.match(visible)
    if m and m.end():
        drop.append((0, m.end()))
        rest = visible[m.end():]
    else:
        rest = visible
    offset = len(visible) - len(rest)
    heading = _HEADING.match(rest)
    if heading:
        drop.append((offset, offset + heading.start(2)))
        drop.append((offset + heading.end(2), len(visible)))
    elif _RULE.match(rest):
        drop.append((offset, len(visible)))
    if not drop:
        return line
    out: list[str] = []
    v = 0  # index into visible
    for c in line:
        if c in (_OPEN, _CLOSE):
            out.append(c)
            continue
        if not any(a <= v < b for a, b in drop):
            out.append(c)
        v += 1
    return "".join(out)


def _lines(s: str) -> str:
    """Line-level markup, repeated until stripping one construct exposes no other."""
    out: list[str] = []
    for line in s.split("\n"):
        while True:
            new = _line_markup(line)
            if new == line:
                break
            line = new
        out.append(line)
    return "\n".join(out)


def _tidy_marks(s: str, targets: list[str]) -> tuple[str, list[str]]:
    """Drop blank anchors and move edge whitespace outside the markers."""
    out: list[str] = []
    kept: list[str] = []
    pos = 0
    for m, target in zip(_MARKED.finditer(s), targets):
        out.append(s[pos : m.start()])
        anchor = m.group(1)
        core = anchor.strip()
        if core:
            lead = anchor[: len(anchor) - len(anchor.lstrip())]
            trail = anchor[len(anchor.rstrip()) :]
            out.append(f"{lead}{_OPEN}{core}{_CLOSE}{trail}")
            kept.append(target)
        else:
            out.append(anchor)
        pos = m.end()
    out.append(s[pos:])
    return "".join(out), kept


def _normalize_space(s: str) -> str:
    lines = [_HSPACE.sub(" ", line).strip() for line in s.split("\n")]
    out: list[str] = []
    for line in lines:
        if line or (out and out[-1]):
            out.append(line)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


def strip_markup(wikitext: str) -> tuple[str, list[tuple[int, int, str]]]:
    """Plain text of ``wikitext`` and its article links as (start, end, target)."""
    s = wikitext.replace(_OPEN, "").replace(_CLOSE, "")
    s = _COMMENT.sub("", s)
    s = html.unescape(s).replace(_OPEN, "").replace(_CLOSE, "")
    s = _DROPPED_SELF.sub("", s)
    s = _DROPPED_BLOCK.sub("", s)
    s = _remove_templates(s)
    s = _remove_hidden_links(s)
    s = _remove_tables(s)
    s = _BR.sub(" ", s)
    s = _TAG.sub("", s)
    s = _MAGIC.sub("", s)
    s = _lines(s)
    s = _QUOTES.sub("", s)
    s = _EXTERNAL.sub(lambda m: m.group(1) or "", s)
    s, targets = _render_links(s, keep_spans=True)
    s = _JOINED_QUOTES.sub(_keep_sentinels, s)
    s = _DOUBLED.sub(_undouble, s)
    s = _lines(s)
    s, targets = _tidy_marks(s, targets)
    s = _normalize_space(s)

    pieces: list[str] = []
    spans: list[tuple[int, int, str]] = []
    pos = length = 0
    for m, target in zip(_MARKED.finditer(s), targets):
        before = s[pos : m.start()]
        pieces.append(before)
        length += len(before)
        anchor = m.group(1)
        if anchor:
            spans.append((length, length + len(anchor), target))
        pieces.append(anchor)
        length += len(anchor)
        pos = m.end()
    pieces.append(s[pos:])
    return "".join(pieces), spans


def strip_and_link(article: RawArticle) -> LinkedDocument:
    text, spans = strip_markup(article.wikitext)
    links = tuple(LinkSpan(a, b, target, text[a:b]) for a, b, target in spans)
    return LinkedDocument(article.page_id, article.title, text, links)


def linked_documents(
    articles: Iterable[RawArticle], counts: Counter | None = None
) -> Iterator[LinkedDocument]:
    """strip_and_link over content pages; redirects and empty pages are counted and skipped."""
    counts = counts if counts is not None else Counter()
    for article in articles:
        if article.redirect or not article.wikitext.strip():
            counts["skipped_no_content"] += 1
            continue
        yield strip_and_link(article)


def collect_entities(docs: Iterable[LinkedDocument]) -> list[str]:
    """Unique link targets in code-point order."""
    return sorted({span.target for doc in docs for span in doc.links})


def write_documents(path: Path, docs: Iterable[LinkedDocument]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.to_json() + "\n")
            n += 1
    return n


def read_documents(path: Path) -> Iterator[LinkedDocument]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield LinkedDocument.from_json(line)
