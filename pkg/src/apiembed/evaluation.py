"""Ranking and sequence metrics, plus batch harnesses over ranking files.

Relevance flags are binary and in rank order (index 0 is rank 1).
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

NF_RANK = 11


@dataclass(frozen=True)
class JudgedRanking:
    flags: tuple[int, ...]
    n_relevant: int | None = None
    oracle: tuple[str, ...] | None = None

    def __post_init__(self):
        if any(f not in (0, 1) for f in self.flags):
            raise ValueError("relevance flags must be 0 or 1")


def _check_k(flags, k):
    if not 1 <= k <= len(flags):
        raise ValueError(f"k={k} outside 1..{len(flags)}")


def precision_at_k(flags: Sequence[int], k: int) -> float:
    _check_k(flags, k)
    return sum(flags[:k]) / k


def dcg_at_k(flags: Sequence[int], k: int) -> float:
    return sum(r / math.log2(i + 1) for i, r in enumerate(flags[:k], 1))


def ndcg_at_k(flags: Sequence[int], k: int) -> float:
    """DCG@k over the DCG@k of the ideally ordered flags; 0 when nothing is relevant."""
    _check_k(flags, k)
    ideal = dcg_at_k(sorted(flags, reverse=True), k)
    if ideal == 0:
        return 0.0
    return dcg_at_k(flags, k) / ideal


def first_hit(flags: Sequence[int]) -> int | None:
    for i, r in enumerate(flags, 1):
        if r:
            return i
    return None


def first_rank(flags: Sequence[int], max_k: int = 10) -> int:
    """1-based rank of the first relevant item in the top ``max_k``; ``max_k + 1`` if none (NF)."""
    hit = first_hit(flags[:max_k])
    return max_k + 1 if hit is None else hit


def ngrams(seq: Sequence[str], n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def bleu(rec: Sequence[str], orc: Sequence[str], max_n: int = 4) -> float:
    """Add-one smoothed BLEU of a recommended sequence against an oracle.

    n-gram matches are clipped by the oracle counts; brevity penalty applies
    unless the recommendation is strictly longer than the oracle.
    """
    if not rec:
        raise ValueError("recommended sequence is empty")
    log_sum = 0.0
    for n in range(1, max_n + 1):
        rec_ng = ngrams(rec, n)
        orc_ng = ngrams(orc, n)
        matched = sum(min(c, orc_ng[g]) for g, c in rec_ng.items())
        total = sum(rec_ng.values())
        log_sum += math.log((matched + 1) / (total + 1)) / max_n
    bp = 1.0 if len(rec) > len(orc) else math.exp(1.0 - len(orc) / len(rec))
    return bp * math.exp(log_sum)


def bleu_at_k(rec_list: Sequence[Sequence[str]], orc: Sequence[str], k: int, max_n: int = 4) -> float:
    if not rec_list:
        raise ValueError("no recommended sequences")
    return max(bleu(rec, orc, max_n) for rec in rec_list[:k])


def average_precision(ranking: JudgedRanking, standard: bool = False) -> float:
    """Sum of Precision@k at every relevant rank k.

    With ``standard=True`` the sum is divided by the number of relevant items
    (``n_relevant`` if given, else the relevant items in the ranking).
    """
    flags = ranking.flags
    total = 0.0
    hits = 0
    for k, r in enumerate(flags, 1):
        if r:
            hits += 1
            total += hits / k
    if standard:
        denom = ranking.n_relevant if ranking.n_relevant is not None else hits
        return total / denom if denom else 0.0
    return total


def map_score(rankings: Sequence[JudgedRanking | Sequence[int]], standard: bool = False) -> float:
    if not rankings:
        raise ValueError("MAP needs at least one question")
    judged = [r if isinstance(r, JudgedRanking) else JudgedRanking(tuple(r)) for r in rankings]
    return sum(average_precision(r, standard) for r in judged) / len(judged)


def mrr_score(first_ranks: Sequence[int | None]) -> float:
    """Mean reciprocal first rank; ``None`` marks a question with no hit."""
    if not first_ranks:
        raise ValueError("MRR needs at least one question")
    return sum(0.0 if fr is None else 1.0 / fr for fr in first_ranks) / len(first_ranks)


# -- harnesses -----------------------------------------------------------------


def read_judgments(path) -> dict[str, set[str]]:
    """``query_id item_id 0|1`` lines -> relevant items per query."""
    relevant: dict[str, set[str]] = defaultdict(set)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3 or fields[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: expected 'query_id item_id 0|1'")
            relevant.setdefault(fields[0], set())
            if fields[2] == "1":
                relevant[fields[0]].add(fields[1])
    return dict(relevant)


def read_rankings(path) -> dict[str, list[str]]:
    """``query_id rank score item_id`` lines -> items per query in rank order."""
    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'query_id rank score item_id'")
            try:
                rank = int(fields[1])
                float(fields[2])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad rank or score") from None
            rows[fields[0]].append((rank, fields[3]))
    return {q: [item for _, item in sorted(r)] for q, r in rows.items()}


def flags_for(ranking: Sequence[str], relevant: set[str], depth: int | None = None) -> list[int]:
    flags = [1 if item in relevant else 0 for item in ranking]
    if depth is not None:
        flags = (flags + [0] * depth)[:depth]
    return flags


def evaluate_rankings(
    rankings: Mapping[str, Sequence[str]],
    judgments: Mapping[str, set[str]],
    ks: Iterable[int] = (1, 5, 10),
    depth: int = 10,
    standard_ap: bool = False,
) -> list[tuple[str, int | str, float]]:
    """Per-metric, per-k means over the judged queries.

    Rankings shorter than a cutoff are padded with non-relevant items.
    Returns ``(metric, k, value)`` rows.
    """
    queries = sorted(q for q in judgments if q in rankings)
    if not queries:
        raise ValueError("no query has both a ranking and judgments")
    rows: list[tuple[str, int | str, float]] = []
    ks = sorted(set(ks))
    for k in ks:
        flags = [flags_for(rankings[q], judgments[q], k) for q in queries]
        rows.append(("precision", k, sum(precision_at_k(f, k) for f in flags) / len(flags)))
    for k in ks:
        flags = [flags_for(rankings[q], judgments[q], k) for q in queries]
        rows.append(("ndcg", k, sum(ndcg_at_k(f, k) for f in flags) / len(flags)))
    top = [flags_for(rankings[q], judgments[q], depth) for q in queries]
    judged = [JudgedRanking(tuple(f), n_relevant=len(judgments[q])) for f, q in zip(top, queries)]
    rows.append(("map", depth, map_score(judged, standard_ap)))
    rows.append(("mrr", depth, mrr_score([first_hit(f) for f in top])))
    rows.append(("fr", depth, sum(first_rank(f, depth) for f in top) / len(top)))
    return rows


def evaluate_sequences(
    recommended: Mapping[str, Sequence[Sequence[str]]],
    oracles: Mapping[str, Sequence[str]],
    ks: Iterable[int] = (1, 5, 10),
) -> list[tuple[str, int, float]]:
    """Mean BLEU@k of recommended API sequences against oracle sequences."""
    queries = sorted(q for q in oracles if recommended.get(q))
    if not queries:
        raise ValueError("no query has recommendations")
    return [
        ("bleu", k, sum(bleu_at_k(recommended[q], oracles[q], k) for q in queries) / len(queries))
        for k in sorted(set(ks))
    ]


def format_report(rows) -> str:
    lines = ["metric\tk\tvalue"]
    lines.extend(f"{m}\t{k}\t{v:.6f}" for m, k, v in rows)
    return "\n".join(lines) + "\n"
