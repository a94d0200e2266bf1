"""Languages of subshifts as nested tables of words.

A word of length ``n`` stands for the cylinder of sequences whose centred
window equals it: ``[-m, m]`` when ``n = 2m + 1`` and ``[1 - m, m]`` when
``n = 2m``. Only the letters are stored; the parity of the length says which
side the level-lowering map drops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InconsistentLanguageError, InsufficientDataError, NotFoundError, ValidationError

EMPTY = ""

FactorOracle = Callable[[int], Iterable[str]]


def pi(word: str) -> str:
    """Drop the leftmost letter of an odd-length word, the rightmost of an even one."""
    n = len(word)
    if n == 0:
        raise ValidationError("the empty word has no parent")
    return word[1:] if n % 2 == 1 else word[:-1]


def extend(word: str, letter: str) -> str:
    """The one-letter extension whose parent is ``word``."""
    # a child has length n + 1; odd children lost their left letter
    return letter + word if len(word) % 2 == 0 else word + letter


def window(n: int) -> tuple[int, int]:
    """Centred coordinate window ``(first, last)`` of a level-``n`` word."""
    if n == 0:
        return (1, 0)
    m, odd = divmod(n, 2)
    return (-m, m) if odd else (1 - m, m)


class LanguageTable:
    """All admissible words up to level ``N`` with their π-tree.

    Immutable after construction. Words on each level are sorted and
    addressed by their position (the word id).
    """

    def __init__(self, levels: Sequence[Iterable[str]]):
        lv = [tuple(sorted(set(words))) for words in levels]
        if not lv or lv[0] != (EMPTY,):
            raise InconsistentLanguageError("level 0 must contain exactly the empty word")
        for n, words in enumerate(lv):
            bad = [w for w in words if len(w) != n]
            if bad:
                raise InconsistentLanguageError(f"level {n} holds words of the wrong length: {bad[:3]}")
        self.levels: tuple[tuple[str, ...], ...] = tuple(lv)
        self.index: tuple[dict[str, int], ...] = tuple({w: i for i, w in enumerate(ws)} for ws in lv)
        self.max_level = len(lv) - 1

        parents = [np.zeros(1, dtype=np.int64)]
        for n in range(1, len(lv)):
            below = self.index[n - 1]
            ids = np.empty(len(lv[n]), dtype=np.int64)
            for i, w in enumerate(lv[n]):
                # closure under both one-letter restrictions, not just π
                for r in (w[1:], w[:-1]):
                    if r not in below:
                        raise InconsistentLanguageError(
                            f"{w!r} is admissible but its restriction {r!r} is missing at level {n - 1}"
                        )
                ids[i] = below[pi(w)]
            parents.append(ids)
        self.parent: tuple[np.ndarray, ...] = tuple(parents)

        children: list[tuple[tuple[int, ...], ...]] = []
        for n in range(len(lv) - 1):
            kids: list[list[int]] = [[] for _ in lv[n]]
            for j, p in enumerate(parents[n + 1]):
                kids[p].append(j)
            if any(not k for k in kids):
                orphan = next(lv[n][i] for i, k in enumerate(kids) if not k)
                raise InconsistentLanguageError(f"{orphan!r} at level {n} has no admissible extension")
            children.append(tuple(tuple(k) for k in kids))
        self.children: tuple[tuple[tuple[int, ...], ...], ...] = tuple(children)
        self._special = tuple(np.array([len(k) > 1 for k in kids], dtype=bool) for kids in children)

        counts = [len(w) for w in lv]
        if any(b < a for a, b in zip(counts, counts[1:])):
            raise InconsistentLanguageError(f"complexity is not nondecreasing: {counts}")
        self._anc_cache: dict[tuple[int, int], np.ndarray] = {}

    def __repr__(self) -> str:
        return f"LanguageTable(max_level={self.max_level}, counts={self.counts()})"

    def __contains__(self, word: str) -> bool:
        return len(word) <= self.max_level and word in self.index[len(word)]

    def counts(self) -> list[int]:
        return [len(w) for w in self.levels]

    def id(self, word: str) -> int:
        try:
            return self.index[len(word)][word]
        except (KeyError, IndexError):
            raise NotFoundError(f"{word!r} is not in the table") from None

    def special(self, n: int) -> np.ndarray:
        """Boolean mask over level ``n`` marking words with several children."""
        if n >= self.max_level:
            raise InsufficientDataError(f"special words at level {n} need level {n + 1}; table stops at {self.max_level}")
        return self._special[n]

    def is_special(self, word: str) -> bool:
        return bool(self.special(len(word))[self.id(word)])

    def children_of(self, word: str) -> list[str]:
        n = len(word)
        if n >= self.max_level:
            raise InsufficientDataError(f"children of a level-{n} word are not tabulated")
        return [self.levels[n + 1][j] for j in self.children[n][self.id(word)]]

    def ancestors(self, n: int, m: int) -> np.ndarray:
        """Array mapping level-``n`` ids to the ids of their π_m images."""
        if not 0 <= m <= n <= self.max_level:
            raise ValidationError(f"need 0 <= m <= n <= {self.max_level}, got m={m}, n={n}")
        key = (n, m)
        if key not in self._anc_cache:
            ids = np.arange(len(self.levels[n]))
            for k in range(n, m, -1):
                ids = self.parent[k][ids]
            ids.setflags(write=False)
            self._anc_cache[key] = ids
        return self._anc_cache[key]

    def to_records(self) -> list[dict]:
        """Rows ``{level, id, letters, parent, special}``; parent is -1 at level 0."""
        rows = []
        for n, words in enumerate(self.levels):
            spec = self._special[n] if n < self.max_level else None
            for i, w in enumerate(words):
                rows.append(
                    {
                        "level": n,
                        "id": i,
                        "letters": w,
                        "parent": int(self.parent[n][i]) if n else -1,
                        "special": None if spec is None else bool(spec[i]),
                    }
                )
        return rows


def build_language(generator: FactorOracle, N: int) -> LanguageTable:
    """Materialise levels ``0..N`` from a factor oracle ``n -> words of length n``."""
    if N < 0:
        raise ValidationError("N must be nonnegative")
    return LanguageTable([[EMPTY]] + [list(generator(n)) for n in range(1, N + 1)])


def project_word(table: LanguageTable, w: str, m: int) -> str:
    """π_m(w): apply π until the word has length ``m``."""
    if w not in table:
        raise NotFoundError(f"{w!r} is not in the table")
    if m > len(w) or m < 0:
        raise ValidationError(f"cannot project a level-{len(w)} word to level {m}")
    while len(w) > m:
        w = pi(w)
    return w


def special_words(table: LanguageTable, n: int) -> list[str]:
    mask = table.special(n)
    return [w for w, s in zip(table.levels[n], mask) if s]


def complexity_profile(table: LanguageTable) -> list[int]:
    return table.counts()


def entropy_profile(source: LanguageTable | Sequence[int]) -> tuple[list[float], list[float]]:
    """``log(#X_n)/n`` for ``n = 1..N`` and its running minimum.

    ``source`` is a table or a complexity sequence starting at ``#X_0``;
    counts may be arbitrary-size integers.
    """
    counts = source.counts() if isinstance(source, LanguageTable) else list(source)
    if len(counts) < 2:
        raise InsufficientDataError("entropy needs at least level 1")
    ratios = [math.log(c) / n for n, c in enumerate(counts) if n >= 1]
    running = list(np.minimum.accumulate(ratios))
    return ratios, [float(x) for x in running]


@dataclass(frozen=True)
class ReturnWords:
    word: str
    returns: tuple[str, ...]
    complete: bool  # False: only a lower bound on the true set

    def max_ratio(self) -> float:
        return max(len(r) for r in self.returns) / len(self.word)


def _occurrences(text: str, w: str) -> list[int]:
    out, i = [], text.find(w)
    while i >= 0:
        out.append(i)
        i = text.find(w, i + 1)
    return out


def return_words(source: LanguageTable | str, w: str, horizon: int) -> ReturnWords:
    """Right return words ``r`` to ``w``: ``rw`` admissible, starting with ``w``,
    containing ``w`` exactly twice, with ``|r| <= horizon``.

    From a table the search is exhaustive and is certified complete when every
    admissible word of length ``horizon + |w|`` starting with ``w`` already
    holds a second occurrence. From a text sample the result is always a lower
    bound.
    """
    if not w:
        raise ValidationError("return words are defined for nonempty words")
    if isinstance(source, str):
        pos = _occurrences(source, w)
        if not pos:
            raise NotFoundError(f"{w!r} does not occur in the sample")
        found = {source[a:b] for a, b in zip(pos, pos[1:]) if b - a <= horizon}
        return ReturnWords(w, tuple(sorted(found, key=lambda r: (len(r), r))), complete=False)

    table = source
    if w not in table:
        raise NotFoundError(f"{w!r} is not in the table")
    top = min(table.max_level, horizon + len(w))
    found = set()
    for L in range(len(w) + 1, top + 1):
        for u in table.levels[L]:
            if u.startswith(w) and u.endswith(w) and len(_occurrences(u, w)) == 2:
                found.add(u[: L - len(w)])
    complete = horizon + len(w) <= table.max_level and all(
        len(_occurrences(u, w)) >= 2 for u in table.levels[horizon + len(w)] if u.startswith(w)
    )
    return ReturnWords(w, tuple(sorted(found, key=lambda r: (len(r), r))), complete=complete)
