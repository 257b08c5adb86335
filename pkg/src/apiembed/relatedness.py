"""Word-API relatedness: embedding similarities and co-occurrence baselines.

Co-occurrence is counted at tuple level: a term is present in a tuple or not,
regardless of position or repetition.  Logs are natural.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from apiembed.corpus import WordApiTuple, is_api
from apiembed.embedding import EmbeddingModel, OOVError, rank_by_score

METHODS = ("word2api", "pmi", "nsd", "hal")

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass
class CooccurrenceStats:
    n: int
    doc_freq: Counter
    pairs: dict[str, Counter]
    _ppmi_rows: dict = field(default_factory=dict, repr=False, compare=False)

    def pair_freq(self, x: str, y: str) -> int:
        if x == y:
            return 0
        return self.pairs.get(x, {}).get(y, 0)

    def require(self, term: str) -> int:
        df = self.doc_freq.get(term, 0)
        if df == 0:
            raise OOVError(term, "co-occurrence statistics")
        return df

    def terms(self) -> list[str]:
        return sorted(self.doc_freq)

    def api_terms(self) -> list[str]:
        return [t for t in self.terms() if is_api(t)]


def build_stats(tuples: Iterable[WordApiTuple]) -> CooccurrenceStats:
    n = 0
    doc_freq: Counter = Counter()
    pairs: dict[str, Counter] = {}
    for tup in tuples:
        n += 1
        present = sorted(set(tup.tokens()))
        doc_freq.update(present)
        for i, x in enumerate(present):
            row = pairs.setdefault(x, Counter())
            for y in present[:i]:
                row[y] += 1
                pairs[y][x] += 1
    return CooccurrenceStats(n, doc_freq, pairs)


def idf_table(stats: CooccurrenceStats, log: bool = False) -> dict[str, float]:
    """``N / doc_freq`` per term; with ``log=True`` the conventional ``ln(N / doc_freq)``."""
    if log:
        return {t: math.log(stats.n / df) for t, df in stats.doc_freq.items()}
    return {t: stats.n / df for t, df in stats.doc_freq.items()}


# -- embedding similarities -----------------------------------------------------


def sim_word_api(model: EmbeddingModel, w: str, a: str) -> float:
    return model.similarity(w, a)


def _usable(terms, model, idf):
    return sorted({t for t in terms if t in model and t in idf})


def sim_sets(model: EmbeddingModel, idf: dict[str, float], words: Iterable[str], apis: Iterable[str]) -> float:
    """IDF-weighted, symmetric max-similarity between a word set and an API set.

    Terms unknown to the model or the idf table are dropped; an empty side gives 0.
    """
    W = _usable(words, model, idf)
    A = _usable(apis, model, idf)
    if not W or not A:
        return 0.0
    u = model.unit_matrix()
    sims = u[[model.index(t) for t in W]] @ u[[model.index(t) for t in A]].T
    iw = np.array([idf[t] for t in W])
    ia = np.array([idf[t] for t in A])
    left = (sims.max(axis=1) * iw).sum() / iw.sum()
    right = (sims.max(axis=0) * ia).sum() / ia.sum()
    return float(np.clip(0.5 * (left + right), -1.0, 1.0))


# -- co-occurrence baselines -----------------------------------------------------


def pmi(stats: CooccurrenceStats, w: str, a: str) -> float:
    """``ln(f(w,a) / (f(w) f(a)))`` with frequencies as fractions of N; -inf without overlap."""
    fw, fa = stats.require(w), stats.require(a)
    both = stats.pair_freq(w, a)
    if both == 0:
        return NEG_INF
    return math.log(both * stats.n / (fw * fa))


def nsd(stats: CooccurrenceStats, w: str, a: str) -> float:
    """Normalized software distance over document counts; +inf without overlap."""
    fw, fa = stats.require(w), stats.require(a)
    both = stats.pair_freq(w, a)
    if both == 0:
        return POS_INF
    lw, la = math.log(fw), math.log(fa)
    num = max(lw, la) - math.log(both)
    den = math.log(stats.n) - min(lw, la)
    if den == 0:
        return 0.0 if num == 0 else POS_INF
    return num / den


def ppmi_row(stats: CooccurrenceStats, term: str) -> dict[str, float]:
    """Non-zero positive-PMI cells of ``term``'s row (self co-occurrence excluded)."""
    row = stats._ppmi_rows.get(term)
    if row is None:
        df = stats.require(term)
        row = {}
        for other, both in stats.pairs.get(term, {}).items():
            value = math.log(both * stats.n / (df * stats.doc_freq[other]))
            if value > 0:
                row[other] = value
        stats._ppmi_rows[term] = row
    return row


def hal_sim(stats: CooccurrenceStats, w: str, a: str) -> float:
    """Cosine between the PPMI rows of two terms; 0 when either row is all zero."""
    rw, ra = ppmi_row(stats, w), ppmi_row(stats, a)
    if not rw or not ra:
        return 0.0
    if len(ra) < len(rw):
        rw, ra = ra, rw
    dot = sum(v * ra.get(k, 0.0) for k, v in rw.items())
    nw = math.sqrt(sum(v * v for v in rw.values()))
    na = math.sqrt(sum(v * v for v in ra.values()))
    return dot / (nw * na)


def rank_apis(
    word: str,
    method: str = "word2api",
    k: int = 100,
    model: EmbeddingModel | None = None,
    stats: CooccurrenceStats | None = None,
) -> list[tuple[str, float]]:
    """Top-k APIs related to ``word``; NSD ranks ascending, everything else descending."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if method == "word2api":
        if model is None:
            raise ValueError("word2api ranking needs an embedding model")
        qi = model.index(word)
        candidates = [t for t in model.api_terms() if t != word]
        if k <= 0:
            return []
        u = model.unit_matrix()
        scores = np.clip(u[[model.index(t) for t in candidates]] @ u[qi], -1.0, 1.0) if candidates else np.array([])
        return rank_by_score(candidates, scores, k)

    if stats is None:
        raise ValueError(f"{method} ranking needs co-occurrence statistics")
    stats.require(word)
    if k <= 0:
        return []
    candidates = [t for t in stats.api_terms() if t != word]
    fn = {"pmi": pmi, "nsd": nsd, "hal": hal_sim}[method]
    scores = np.array([fn(stats, word, a) for a in candidates], dtype=np.float64)
    return rank_by_score(candidates, scores, k, descending=method != "nsd")


# -- stats cache file ---------------------------------------------------------------


def save_stats(stats: CooccurrenceStats, path) -> None:
    """First line N; then ``term count`` lines; then ``termA termB count`` lines (A < B)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{stats.n}\n")
        for t in stats.terms():
            fh.write(f"{t} {stats.doc_freq[t]}\n")
        for x in stats.terms():
            for y, c in sorted(stats.pairs.get(x, {}).items()):
                if x < y:
                    fh.write(f"{x} {y} {c}\n")


def load_stats(path) -> CooccurrenceStats:
    doc_freq: Counter = Counter()
    pairs: dict[str, Counter] = {}
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip()
        if not head.isdigit():
            raise ValueError(f"{path}:1: expected tuple count")
        for lineno, line in enumerate(fh, 2):
            fields = line.split()
            if len(fields) == 2:
                doc_freq[fields[0]] = int(fields[1])
            elif len(fields) == 3:
                x, y, c = fields[0], fields[1], int(fields[2])
                pairs.setdefault(x, Counter())[y] = c
                pairs.setdefault(y, Counter())[x] = c
            elif fields:
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 fields")
    return CooccurrenceStats(int(head), doc_freq, pairs)


def format_ranking(ranking: Sequence[tuple[str, float]]) -> list[str]:
    return [f"{i} {score:.6f} {term}" for i, (term, score) in enumerate(ranking, 1)]
