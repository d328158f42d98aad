"""Class resolution by priority and translation of the chosen class to a UNER tag.

Both tables are plain TSV data files::

    # priorities.tsv                 # uner_map.tsv
    dbo:SoccerTournament<TAB>4       dbo:SoccerTournament<TAB>Name-Event-Occasion-Game
    owl:Thing<TAB>1                  owl:Thing<TAB>NULL

Class identifiers may be full IRIs or use the ``dbo:`` / ``owl:`` prefixes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .linker import ONTOLOGY_NS, OWL_THING, EntityClassRecord

log = logging.getLogger(__name__)

PREFIXES = {
    "dbo:": ONTOLOGY_NS,
    "owl:": "http://www.w3.org/2002/07/owl#",
}
NULL = "NULL"


class TableError(ValueError):
    """A mapping table could not be loaded."""


def expand_iri(name: str) -> str:
    for prefix, ns in PREFIXES.items():
        if name.startswith(prefix):
            return ns + name[len(prefix) :]
    return name


def compact_iri(iri: str) -> str:
    for prefix, ns in PREFIXES.items():
        if iri.startswith(ns):
            return prefix + iri[len(ns) :]
    return iri


@dataclass(frozen=True, order=True)
class UnerTag:
    category: str
    type: str
    subtype: str | None = None

    def __post_init__(self):
        levels = [self.category, self.type]
        if self.subtype is not None:
            levels.append(self.subtype)
        for level in levels:
            if not level or any(c.isspace() for c in level):
                raise ValueError(f"bad UNER tag level {level!r}")

    @classmethod
    def parse(cls, rendered: str) -> "UnerTag":
        """``Name-Event-Historical-Event`` -> (Name, Event, Historical-Event)."""
        parts = rendered.split("-", 2)
        if len(parts) < 2:
            raise ValueError(f"UNER tag needs at least category and type: {rendered!r}")
        return cls(parts[0], parts[1], parts[2] if len(parts) == 3 else None)

    def __str__(self) -> str:
        return "-".join(p for p in (self.category, self.type, self.subtype) if p)


@dataclass(frozen=True)
class PriorityTable:
    entries: dict[str, int]

    def priority(self, cls_iri: str) -> int:
        return self.entries.get(expand_iri(cls_iri), 0)


@dataclass
class UnerMapping:
    entries: dict[str, UnerTag | None]
    gaps: set[str] = field(default_factory=set)

    def lookup(self, cls_iri: str) -> UnerTag | None:
        key = expand_iri(cls_iri)
        if key not in self.entries:
            if key not in self.gaps:
                self.gaps.add(key)
                log.info("no UNER mapping for %s", compact_iri(key))
            return None
        return self.entries[key]


def _read_tsv(path: Path) -> Iterable[tuple[int, str, str]]:
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise TableError(f"{path}:{lineno}: expected 2 tab-separated columns")
            key = expand_iri(cols[0].strip())
            if key in seen:
                raise TableError(f"{path}:{lineno}: duplicate class {cols[0].strip()}")
            seen.add(key)
            yield lineno, key, cols[1].strip()


def load_priorities(path: Path) -> PriorityTable:
    entries: dict[str, int] = {}
    for lineno, key, value in _read_tsv(path):
        try:
            prio = int(value)
        except ValueError:
            raise TableError(f"{path}:{lineno}: priority {value!r} is not an integer") from None
        if prio < 1:
            raise TableError(f"{path}:{lineno}: priority must be >= 1")
        entries[key] = prio
    if entries.get(OWL_THING) != 1:
        raise TableError(f"{path}: owl:Thing must be present with priority 1")
    return PriorityTable(entries)


def load_uner_map(path: Path) -> UnerMapping:
    entries: dict[str, UnerTag | None] = {}
    for lineno, key, value in _read_tsv(path):
        try:
            entries[key] = None if value == NULL else UnerTag.parse(value)
        except ValueError as exc:
            raise TableError(f"{path}:{lineno}: {exc}") from None
    return UnerMapping(entries)


def load_tables(priorities_path: Path, uner_map_path: Path) -> tuple[PriorityTable, UnerMapping]:
    priorities = load_priorities(priorities_path)
    mapping = load_uner_map(uner_map_path)
    missing = sorted(set(priorities.entries) - set(mapping.entries))
    if missing:
        names = ", ".join(compact_iri(m) for m in missing[:5])
        raise TableError(f"{uner_map_path}: no entry for prioritized class(es) {names}")
    return priorities, mapping


def seed_table_paths() -> tuple[Path, Path]:
    """The bundled priority and UNER tables."""
    data = resources.files("ner_forge") / "data"
    return Path(str(data / "priorities.tsv")), Path(str(data / "uner_map.tsv"))


def resolve_class(classes: Sequence[str], priorities: PriorityTable) -> str | None:
    """Highest-priority class; the earliest one wins a tie. Unknown classes never win."""
    best, best_prio = None, 0
    for c in classes:
        p = priorities.priority(c)
        if p > best_prio:
            best, best_prio = c, p
    return best


def map_to_uner(cls_iri: str | None, mapping: UnerMapping) -> UnerTag | None:
    if cls_iri is None:
        return None
    return mapping.lookup(cls_iri)


def tag_entity(
    record: EntityClassRecord, priorities: PriorityTable, mapping: UnerMapping
) -> UnerTag | None:
    return map_to_uner(resolve_class(record.classes, priorities), mapping)
