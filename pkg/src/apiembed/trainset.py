"""Turn word-API tuples into training text.

Four alignment strategies are available:

* ``shuffle``: ``copies`` random permutations of every tuple.
* ``sequence``: words in order, then APIs in order.
* ``fis``: APIs moved right after their highest-confidence frequent partner word.
* ``fis+shuffle``: as ``fis``, then the un-anchored tokens are shuffled
  around the anchored word/API blocks.

Randomness comes from numpy's PCG64 generator.  Every tuple gets its own
stream seeded with ``(seed, tuple_index)``, so the output does not depend on
how the tuples are partitioned across workers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from apiembed.corpus import WordApiTuple

STRATEGIES = ("shuffle", "sequence", "fis", "fis+shuffle")


@dataclass
class TrainingText:
    lines: list[list[str]]
    strategy: str
    seed: int | None = None
    copies: int = 1

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.lines:
                fh.write(" ".join(line) + "\n")

    def __len__(self):
        return len(self.lines)


def read_training_text(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [ln.split() for ln in fh if ln.strip()]


def tuple_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([index, seed])


def _permute(tokens, rng):
    # numpy's permutation is a Fisher-Yates shuffle
    return [tokens[i] for i in rng.permutation(len(tokens))]


def shuffle_strategy(tuples: Sequence[WordApiTuple], copies: int = 10, seed: int = 0) -> TrainingText:
    if copies < 1:
        raise ValueError("copies must be >= 1")
    lines = []
    for i, tup in enumerate(tuples):
        tokens = list(tup.tokens())
        rng = tuple_rng(seed, i)
        lines.extend(_permute(tokens, rng) for _ in range(copies))
    return TrainingText(lines, "shuffle", seed, copies)


def sequence_strategy(tuples: Sequence[WordApiTuple]) -> TrainingText:
    return TrainingText([list(t.tokens()) for t in tuples], "sequence")


@dataclass
class FisModel:
    """Frequent (word, api) 2-itemsets mined by document co-occurrence."""

    n_tuples: int
    support: float
    word_count: Counter = field(default_factory=Counter)
    pair_count: dict = field(default_factory=dict)

    def confidence(self, word: str, api: str) -> float:
        return self.pair_count[(word, api)] / self.word_count[word]

    def best_word(self, api: str, candidates) -> str | None:
        """Highest-confidence frequent partner of ``api`` among ``candidates``.

        Ties go to the larger pair count, then the lexicographically smaller word.
        """
        best = None
        best_key = None
        for w in candidates:
            c = self.pair_count.get((w, api))
            if c is None:
                continue
            key = (-c / self.word_count[w], -c, w)
            if best_key is None or key < best_key:
                best, best_key = w, key
        return best


def mine_pairs(tuples: Sequence[WordApiTuple], support: float = 0.0001) -> FisModel:
    if not 0.0 < support < 1.0:
        raise ValueError("support must lie in (0, 1)")
    n = len(tuples)
    word_count: Counter = Counter()
    pairs: Counter = Counter()
    for t in tuples:
        words = set(t.words)
        apis = set(t.apis)
        word_count.update(words)
        pairs.update((w, a) for w in words for a in apis)
    frequent = {p: c for p, c in pairs.items() if c / n >= support} if n else {}
    return FisModel(n, support, word_count, frequent)


def _anchor(tup: WordApiTuple, fis: FisModel):
    """Return (blocks, free): anchored word blocks keyed by word position and
    the leftover APIs in original order."""
    present = set(tup.words)
    first_pos = {}
    for i, w in enumerate(tup.words):
        first_pos.setdefault(w, i)
    attached: dict[int, list[str]] = {}
    free = []
    for api in tup.apis:
        w = fis.best_word(api, present)
        if w is None:
            free.append(api)
        else:
            attached.setdefault(first_pos[w], []).append(api)
    return attached, free


def fis_line(tup: WordApiTuple, fis: FisModel) -> list[str]:
    attached, free = _anchor(tup, fis)
    line = []
    for i, w in enumerate(tup.words):
        line.append(w)
        line.extend(attached.get(i, ()))
    line.extend(free)
    return line


def fis_shuffle_line(tup: WordApiTuple, fis: FisModel, rng: np.random.Generator) -> list[str]:
    attached, free = _anchor(tup, fis)
    units = []
    for i, w in enumerate(tup.words):
        units.append([w, *attached[i]] if i in attached else [w])
    units.extend([a] for a in free)
    return [tok for unit in _permute(units, rng) for tok in unit]


def fis_reorder(
    tuples: Sequence[WordApiTuple],
    support: float = 0.0001,
    then_shuffle: bool = False,
    seed: int = 0,
    fis: FisModel | None = None,
) -> TrainingText:
    if fis is None:
        fis = mine_pairs(tuples, support)
    if then_shuffle:
        lines = [fis_shuffle_line(t, fis, tuple_rng(seed, i)) for i, t in enumerate(tuples)]
        return TrainingText(lines, "fis+shuffle", seed)
    return TrainingText([fis_line(t, fis) for t in tuples], "fis")


def make_training_text(
    tuples: Sequence[WordApiTuple],
    strategy: str = "shuffle",
    copies: int = 10,
    seed: int = 0,
    support: float = 0.0001,
) -> TrainingText:
    if strategy == "shuffle":
        return shuffle_strategy(tuples, copies, seed)
    if strategy == "sequence":
        return sequence_strategy(tuples)
    if strategy == "fis":
        return fis_reorder(tuples, support)
    if strategy == "fis+shuffle":
        return fis_reorder(tuples, support, then_shuffle=True, seed=seed)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
