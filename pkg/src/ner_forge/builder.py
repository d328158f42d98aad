"""Sentence splitting, punctuation-isolating tokenization and IOB2 projection of link spans."""

from __future__ import annotations

import bisect
import logging
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .extractor import LinkedDocument
from .mapper import UnerTag

log = logging.getLogger(__name__)

OUTSIDE = "O"

# Lower-cased, without the final period. English plus common Croatian ones.
ABBREVIATIONS = frozenset(
    """
    dr mr mrs ms mx prof st jr sr vs etc e.g i.e cf al approx ca no nos vol
    pp fig gen col lt sgt capt cpt rev hon inc ltd co corp mt ft est dept
    univ jan feb mar apr jun jul aug sep sept oct nov dec
    tj npr sv br god itd sl str gl tzv tisuća mil mlrd pr kr
    """.split()
)

_TERMINAL = re.compile(r"[.!?]+[\"'’”»)\]]*(?=\s|$)")


@dataclass(frozen=True)
class Token:
    surface: str
    label: str = OUTSIDE


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[Token, ...]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.tokens]

    def has_entity(self) -> bool:
        return any(t.label.startswith("B-") for t in self.tokens)


def is_valid_iob2(labels: Sequence[str]) -> bool:
    prev = OUTSIDE
    for label in labels:
        if label.startswith("I-"):
            if prev == OUTSIDE or prev[2:] != label[2:]:
                return False
        elif label != OUTSIDE and not label.startswith("B-"):
            return False
        prev = label
    return True


def entity_runs(labels: Sequence[str]) -> list[tuple[int, int, str]]:
    """(start, end, tag) for every B-/I- run of a valid IOB2 sequence."""
    runs: list[tuple[int, int, str]] = []
    for i, label in enumerate(labels):
        if label.startswith("B-"):
            runs.append((i, i + 1, label[2:]))
        elif label.startswith("I-"):
            start, _, tag = runs[-1]
            runs[-1] = (start, i + 1, tag)
    return runs


# --------------------------------------------------------------------------
# sentences and tokens


def _is_boundary(text: str, m: re.Match, line_end: int) -> bool:
    nxt = m.end()
    while nxt < line_end and text[nxt].isspace():
        nxt += 1
    if nxt >= line_end:
        return True
    if text[nxt].islower():
        return False
    if text[m.start()] == "." and m.end() - m.start() == 1:
        word_start = text.rfind(" ", 0, m.start()) + 1
        word = text[word_start : m.start()].lstrip("(\"'“‘«[").lower()
        if word in ABBREVIATIONS:
            return False
    return True


def sentence_bounds(text: str) -> list[tuple[int, int]]:
    """Character ranges of sentences, whitespace-trimmed, in order."""
    bounds: list[tuple[int, int]] = []

    def emit(a: int, b: int) -> None:
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if a < b:
            bounds.append((a, b))

    line_start = 0
    while line_start <= len(text):
        line_end = text.find("\n", line_start)
        if line_end < 0:
            line_end = len(text)
        start = line_start
        for m in _TERMINAL.finditer(text, line_start, line_end):
            if _is_boundary(text, m, line_end):
                emit(start, m.end())
                start = m.end()
        emit(start, line_end)
        line_start = line_end + 1
    return bounds


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_bounds(text)]


def _is_punct(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def tokenize_spans(sentence: str) -> list[tuple[str, int, int]]:
    """Tokens with their (start, end) offsets in ``sentence``."""
    out: list[tuple[str, int, int]] = []
    for m in re.finditer(r"\S+", sentence):
        a, b = m.start(), m.end()
        while a < b and _is_punct(sentence[a]):
            out.append((sentence[a], a, a + 1))
            a += 1
        tail: list[tuple[str, int, int]] = []
        while b > a and _is_punct(sentence[b - 1]):
            tail.append((sentence[b - 1], b - 1, b))
            b -= 1
        if a < b:
            out.append((sentence[a:b], a, b))
        out.extend(reversed(tail))
    return out


def tokenize(sentence: str) -> list[str]:
    return [surface for surface, _, _ in tokenize_spans(sentence)]


# --------------------------------------------------------------------------
# projection


def project_spans(
    tokens: Sequence[tuple[str, int, int]],
    spans: Iterable[tuple[int, int, str]],
    length: int | None = None,
) -> TaggedSentence:
    """Label tokens from (start, end, tag) spans given in sentence offsets.

    A token touched by a span belongs to it entirely. A token already
    claimed by an earlier span stays with that span.
    """
    labels = [OUTSIDE] * len(tokens)
    starts = [t[1] for t in tokens]
    for start, end, tag in spans:
        if start >= end or start < 0 or (length is not None and end > length):
            raise ValueError(f"span ({start}, {end}) outside sentence of length {length}")
        i = max(bisect.bisect_right(starts, start) - 1, 0)
        first = True
        while i < len(tokens) and tokens[i][1] < end:
            if tokens[i][2] > start and labels[i] == OUTSIDE:
                labels[i] = ("B-" if first else "I-") + tag
                first = False
            elif not first:
                break
            i += 1
    return TaggedSentence(tuple(Token(t[0], lab) for t, lab in zip(tokens, labels)))


def filter_sentences(sentences: Iterable[TaggedSentence]) -> list[TaggedSentence]:
    return [s for s in sentences if s.has_entity()]


def build_document(
    doc: LinkedDocument, tags: Mapping[str, UnerTag | None]
) -> list[TaggedSentence]:
    """Tagged, entity-bearing sentences of one document."""
    bounds = sentence_bounds(doc.text)
    starts = [a for a, _ in bounds]
    per_sentence: list[list[tuple[int, int, str]]] = [[] for _ in bounds]
    for span in doc.links:
        tag = tags.get(span.target)
        if tag is None:
            continue
        k = bisect.bisect_right(starts, span.start) - 1
        if k < 0:
            continue
        a, b = bounds[k]
        end = span.end
        if end > b:
            log.debug("page %d: link %r crosses a sentence boundary, clipped", doc.page_id, span.anchor)
            end = b
        if span.start >= end:
            continue
        per_sentence[k].append((span.start - a, end - a, str(tag)))

    sentences = []
    for (a, b), spans in zip(bounds, per_sentence):
        if not spans:
            continue
        sentence = doc.text[a:b]
        sentences.append(project_spans(tokenize_spans(sentence), spans, len(sentence)))
    return filter_sentences(sentences)


def build_corpus(
    docs: Iterable[LinkedDocument], tags: Mapping[str, UnerTag | None]
) -> Iterator[tuple[int, list[TaggedSentence]]]:
    for doc in docs:
        yield doc.page_id, build_document(doc, tags)
