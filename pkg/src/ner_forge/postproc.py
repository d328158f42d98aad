"""Corpus statistics, the entity gazetteer, gazetteer-driven augmentation and review sampling."""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .automaton import TokenAutomaton
from .builder import OUTSIDE, TaggedSentence, Token, entity_runs, is_valid_iob2

PERSON_TAG = "Name-Person-Name"
LOCATION_PREFIX = "Name-Location"
ORGANIZATION_PREFIX = "Name-Organization"
COARSE_CLASSES = ("Person", "Location", "Organization", "Other")


class IOBError(ValueError):
    """A sentence violates IOB2."""


def _has_prefix(tag: str, prefix: str) -> bool:
    return tag == prefix or tag.startswith(prefix + "-")


def coarse_class(tag: str) -> str:
    if tag == PERSON_TAG:
        return "Person"
    if _has_prefix(tag, LOCATION_PREFIX):
        return "Location"
    if _has_prefix(tag, ORGANIZATION_PREFIX):
        return "Organization"
    return "Other"


def coarse_rollup(per_tag: dict[str, int]) -> dict[str, int]:
    out = dict.fromkeys(COARSE_CLASSES, 0)
    for tag, n in per_tag.items():
        out[coarse_class(tag)] += n
    return out


@dataclass
class CorpusStats:
    total_tokens: int = 0
    non_entity_tokens: int = 0
    entity_tokens: int = 0
    entity_count: int = 0
    per_tag: dict[str, int] = field(default_factory=dict)

    @property
    def coarse(self) -> dict[str, int]:
        return coarse_rollup(self.per_tag)

    def add_sentence(self, sentence: TaggedSentence) -> None:
        labels = sentence.labels
        if not is_valid_iob2(labels):
            raise IOBError(f"invalid IOB2 sequence: {labels}")
        n_out = labels.count(OUTSIDE)
        self.total_tokens += len(labels)
        self.non_entity_tokens += n_out
        self.entity_tokens += len(labels) - n_out
        for label in labels:
            if label.startswith("B-"):
                self.entity_count += 1
                self.per_tag[label[2:]] = self.per_tag.get(label[2:], 0) + 1

    def _combine(self, other: "CorpusStats", sign: int) -> "CorpusStats":
        per_tag = dict(self.per_tag)
        for tag, n in other.per_tag.items():
            per_tag[tag] = per_tag.get(tag, 0) + sign * n
        return CorpusStats(
            self.total_tokens + sign * other.total_tokens,
            self.non_entity_tokens + sign * other.non_entity_tokens,
            self.entity_tokens + sign * other.entity_tokens,
            self.entity_count + sign * other.entity_count,
            {t: n for t, n in per_tag.items() if n},
        )

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return self._combine(other, 1)

    def __sub__(self, other: "CorpusStats") -> "CorpusStats":
        return self._combine(other, -1)

    def to_dict(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "non_entity_tokens": self.non_entity_tokens,
            "entity_tokens": self.entity_tokens,
            "entity_count": self.entity_count,
            "coarse": self.coarse,
            "per_tag": dict(sorted(self.per_tag.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusStats":
        return cls(
            d["total_tokens"], d["non_entity_tokens"], d["entity_tokens"],
            d["entity_count"], dict(d["per_tag"]),
        )


def compute_stats(corpus: Iterable[TaggedSentence]) -> CorpusStats:
    stats = CorpusStats()
    for sentence in corpus:
        stats.add_sentence(sentence)
    return stats


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def delta_report(before: CorpusStats, after: CorpusStats) -> dict:
    """before/after/delta triples for the headline counts and the coarse classes."""
    b, a = before.to_dict(), after.to_dict()
    report: dict = {}
    for key in ("total_tokens", "non_entity_tokens", "entity_tokens", "entity_count"):
        report[key] = {"before": b[key], "after": a[key], "delta": a[key] - b[key]}
    report["coarse"] = {
        c: {"before": b["coarse"][c], "after": a["coarse"][c], "delta": a["coarse"][c] - b["coarse"][c]}
        for c in COARSE_CLASSES
    }
    tags = sorted(set(b["per_tag"]) | set(a["per_tag"]))
    report["per_tag"] = {
        t: {
            "before": b["per_tag"].get(t, 0),
            "after": a["per_tag"].get(t, 0),
            "delta": a["per_tag"].get(t, 0) - b["per_tag"].get(t, 0),
        }
        for t in tags
    }
    return report


# --------------------------------------------------------------------------
# gazetteer


def is_discarded(surfaces: Sequence[str]) -> bool:
    """Entities that are a single character, two lowercase characters, or only digits."""
    text = " ".join(surfaces)
    if len(text) == 1:
        return True
    if len(text) == 2 and all(c.islower() for c in text):
        return True
    return "".join(surfaces).isdigit()


@dataclass(frozen=True)
class GazetteerEntry:
    surfaces: tuple[str, ...]
    tag: str


class Gazetteer:
    def __init__(self, entries: Iterable[GazetteerEntry]):
        self.entries: list[GazetteerEntry] = []
        seen: set[tuple[str, ...]] = set()
        for entry in entries:
            if entry.surfaces in seen:
                raise ValueError(f"duplicate gazetteer entry {' '.join(entry.surfaces)!r}")
            if is_discarded(entry.surfaces):
                raise ValueError(f"gazetteer entry {' '.join(entry.surfaces)!r} violates filters")
            seen.add(entry.surfaces)
            self.entries.append(entry)
        self._automaton: TokenAutomaton[str] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[GazetteerEntry]:
        return iter(self.entries)

    @property
    def automaton(self) -> TokenAutomaton[str]:
        if self._automaton is None:
            self._automaton = TokenAutomaton((e.surfaces, e.tag) for e in self.entries)
        return self._automaton

    def write_tsv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for e in self.entries:
                fh.write(f"{' '.join(e.surfaces)}\t{e.tag}\n")

    @classmethod
    def read_tsv(cls, path: Path) -> "Gazetteer":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                surface, sep, tag = line.partition("\t")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected 'tokens<TAB>tag'")
                entries.append(GazetteerEntry(tuple(surface.split(" ")), tag))
        return cls(entries)


def build_gazetteer(corpus: Iterable[TaggedSentence]) -> Gazetteer:
    """One entry per distinct tagged token sequence.

    A sequence seen with several tags keeps its most frequent one; ties go to
    the tag seen first. Entries are ordered by first occurrence.
    """
    tag_counts: dict[tuple[str, ...], Counter] = {}
    for sentence in corpus:
        surfaces = sentence.surfaces
        for start, end, tag in entity_runs(sentence.labels):
            key = tuple(surfaces[start:end])
            if is_discarded(key):
                continue
            tag_counts.setdefault(key, Counter())[tag] += 1
    # Counter preserves insertion order, and max() keeps the first maximum
    return Gazetteer(
        GazetteerEntry(key, max(counts, key=counts.__getitem__))
        for key, counts in tag_counts.items()
    )


# --------------------------------------------------------------------------
# augmentation


def _outside_runs(labels: Sequence[str]) -> Iterator[tuple[int, int]]:
    start = None
    for i, label in enumerate(labels):
        if label == OUTSIDE:
            if start is None:
                start = i
        elif start is not None:
            yield start, i
            start = None
    if start is not None:
        yield start, len(labels)


def augment_sentence(sentence: TaggedSentence, automaton: TokenAutomaton[str]) -> TaggedSentence:
    """Tag gazetteer matches inside the sentence's maximal runs of O tokens."""
    labels = sentence.labels
    surfaces = sentence.surfaces
    changed = False
    for a, b in list(_outside_runs(labels)):
        for start, end, tag in automaton.leftmost_longest(surfaces[a:b]):
            labels[a + start] = "B-" + tag
            for i in range(a + start + 1, a + end):
                labels[i] = "I-" + tag
            changed = True
    if not changed:
        return sentence
    return TaggedSentence(tuple(Token(s, lab) for s, lab in zip(surfaces, labels)))


def augment(
    corpus: Iterable[TaggedSentence], gazetteer: Gazetteer
) -> tuple[list[TaggedSentence], CorpusStats]:
    """Augmented corpus and the stats difference (after minus before)."""
    automaton = gazetteer.automaton
    before, after = CorpusStats(), CorpusStats()
    out = []
    for sentence in corpus:
        before.add_sentence(sentence)
        new = augment_sentence(sentence, automaton)
        after.add_sentence(new)
        out.append(new)
    return out, after - before


def sample_for_review(gazetteer: Gazetteer, n: int, seed: int) -> list[GazetteerEntry]:
    """Uniform sample of ``n`` distinct entries, reproducible from ``seed``."""
    if n < 0 or n > len(gazetteer):
        raise ValueError(f"cannot sample {n} entries from a gazetteer of {len(gazetteer)}")
    return random.Random(seed).sample(gazetteer.entries, n)
