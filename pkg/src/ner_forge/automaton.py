"""Aho-Corasick automaton over token sequences (each symbol is a whole token)."""

from __future__ import annotations

from collections import deque
from typing import Generic, Iterable, Iterator, Sequence, TypeVar

V = TypeVar("V")


class TokenAutomaton(Generic[V]):
    """Multi-pattern matcher; one pass over a token list finds every occurrence.

    ``patterns`` is an iterable of (token sequence, value). Matching is exact
    and case-sensitive. Later duplicates of a sequence replace earlier ones.
    """

    def __init__(self, patterns: Iterable[tuple[Sequence[str], V]]):
        self._goto: list[dict[str, int]] = [{}]
        self._depth: list[int] = [0]
        self._value: list[V | None] = [None]
        self._terminal: list[bool] = [False]
        for tokens, value in patterns:
            if tokens:
                self._add(tokens, value)
        self._fail = [0] * len(self._goto)
        self._out = [-1] * len(self._goto)  # nearest terminal state on the fail chain
        self._build()

    def __len__(self) -> int:
        return sum(self._terminal)

    def _add(self, tokens: Sequence[str], value: V) -> None:
        state = 0
        for tok in tokens:
            nxt = self._goto[state].get(tok)
            if nxt is None:
                nxt = len(self._goto)
                self._goto[state][tok] = nxt
                self._goto.append({})
                self._depth.append(self._depth[state] + 1)
                self._value.append(None)
                self._terminal.append(False)
            state = nxt
        self._value[state] = value
        self._terminal[state] = True

    def _build(self) -> None:
        queue = deque(self._goto[0].values())
        while queue:
            state = queue.popleft()
            for tok, child in self._goto[state].items():
                queue.append(child)
                f = self._fail[state]
                while f and tok not in self._goto[f]:
                    f = self._fail[f]
                target = self._goto[f].get(tok, 0)
                self._fail[child] = target if target != child else 0
                fc = self._fail[child]
                self._out[child] = fc if self._terminal[fc] else self._out[fc]

    def iter_matches(self, tokens: Sequence[str]) -> Iterator[tuple[int, int, V]]:
        """Every (start, end, value) occurrence, ordered by end position."""
        state = 0
        goto, fail = self._goto, self._fail
        for i, tok in enumerate(tokens):
            while state and tok not in goto[state]:
                state = fail[state]
            state = goto[state].get(tok, 0)
            s = state if self._terminal[state] else self._out[state]
            while s > 0:
                yield i + 1 - self._depth[s], i + 1, self._value[s]  # type: ignore[misc]
                s = self._out[s]

    def leftmost_longest(self, tokens: Sequence[str]) -> list[tuple[int, int, V]]:
        """Non-overlapping matches: earliest start first, longest at that start."""
        best: dict[int, tuple[int, V]] = {}
        for start, end, value in self.iter_matches(tokens):
            if start not in best or end > best[start][0]:
                best[start] = (end, value)
        chosen: list[tuple[int, int, V]] = []
        cursor = 0
        for start in sorted(best):
            if start >= cursor:
                end, value = best[start]
                chosen.append((start, end, value))
                cursor = end
        return chosen
