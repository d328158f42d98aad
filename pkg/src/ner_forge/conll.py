"""CoNLL corpus files: ``surface<TAB>label`` per line, blank line between sentences."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .builder import TaggedSentence, Token

SUFFIX = ".conll"


def write_sentences(fh: TextIO, sentences: Iterable[TaggedSentence]) -> int:
    n = 0
    for sentence in sentences:
        for tok in sentence.tokens:
            fh.write(f"{tok.surface}\t{tok.label}\n")
        fh.write("\n")
        n += 1
    return n


def read_sentences(fh: TextIO) -> Iterator[TaggedSentence]:
    tokens: list[Token] = []
    for lineno, line in enumerate(fh, 1):
        line = line.rstrip("\n")
        if not line:
            if tokens:
                yield TaggedSentence(tuple(tokens))
                tokens = []
            continue
        surface, sep, label = line.partition("\t")
        if not sep or not surface or not label:
            raise ValueError(f"line {lineno}: expected 'surface<TAB>label', got {line!r}")
        tokens.append(Token(surface, label))
    if tokens:
        yield TaggedSentence(tuple(tokens))


def read_file(path: Path) -> list[TaggedSentence]:
    with open(path, encoding="utf-8") as fh:
        return list(read_sentences(fh))


def write_file(path: Path, sentences: Iterable[TaggedSentence]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        return write_sentences(fh, sentences)


def corpus_files(root: Path) -> list[Path]:
    """Corpus files below ``root`` in a stable order."""
    return sorted(root.rglob("*" + SUFFIX), key=lambda p: p.relative_to(root).as_posix())


def read_corpus(root: Path) -> Iterator[TaggedSentence]:
    for path in corpus_files(root):
        yield from read_file(path)


def corpus_path(root: Path, file_index: int, files_per_folder: int) -> Path:
    """Location of the n-th corpus file: folders of ``files_per_folder`` files each."""
    folder = file_index // files_per_folder
    return root / f"{folder:03d}" / f"wiki_{file_index:05d}{SUFFIX}"


class CorpusWriter:
    """Groups per-article sentence lists into files of ``articles_per_file`` articles."""

    def __init__(self, root: Path, articles_per_file: int = 100, files_per_folder: int = 100):
        if articles_per_file < 1 or files_per_folder < 1:
            raise ValueError("articles_per_file and files_per_folder must be >= 1")
        self.root = Path(root)
        self.articles_per_file = articles_per_file
        self.files_per_folder = files_per_folder
        self.files = 0
        self.sentences = 0
        self._batch: list[TaggedSentence] = []
        self._articles = 0

    def add_article(self, sentences: Iterable[TaggedSentence]) -> None:
        self._batch.extend(sentences)
        self._articles += 1
        if self._articles == self.articles_per_file:
            self._flush()

    def _flush(self) -> None:
        if not self._articles:
            return
        path = corpus_path(self.root, self.files, self.files_per_folder)
        self.sentences += write_file(path, self._batch)
        self.files += 1
        self._batch, self._articles = [], 0

    def close(self) -> None:
        self._flush()

    def __enter__(self) -> "CorpusWriter":
        return self

    def __exit__(self, *exc) -> None:
        if exc[0] is None:
            self.close()
