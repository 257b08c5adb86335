"""API-based query expansion, API-sequence retrieval and API-document linking."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from apiembed.corpus import WordApiTuple, escape_field, tokenize, unescape_field
from apiembed.embedding import EmbeddingModel, rank_by_score
from apiembed.evaluation import JudgedRanking, flags_for, map_score
from apiembed.relatedness import sim_sets

LINK_METHODS = ("vsm", "we", "word2api", "vsm+we", "vsm+word2api")
ALPHA_GRID = tuple(i / 100 for i in range(1, 101))


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class ExpandedQuery:
    entries: tuple[tuple[str, float], ...]
    query: str = ""
    words: tuple[str, ...] = ()

    def apis(self) -> list[str]:
        return [a for a, _ in self.entries]


def query_words(model, idf, text, stop_words=None):
    tokens = tokenize(text, stop_words)
    kept = sorted({t for t in tokens if t in model and t in idf})
    return tokens, kept


def expand_query(
    model: EmbeddingModel,
    idf: dict[str, float],
    query_text: str,
    api_vocabulary: Sequence[str] | None = None,
    k: int = 10,
    stop_words=None,
) -> ExpandedQuery:
    """Represent a query by its ``k`` most similar APIs.

    Each API is scored with the words-APIs similarity between the query words
    and the singleton ``{api}``.
    """
    tokens, words = query_words(model, idf, query_text, stop_words)
    if not words:
        raise QueryError(f"no query word is in the vocabulary (dropped: {', '.join(tokens) or 'nothing'})")
    if api_vocabulary is None:
        api_vocabulary = model.api_terms()
    apis = [a for a in api_vocabulary if a in model and a in idf]
    if not apis or k <= 0:
        return ExpandedQuery((), query_text, tuple(words))
    u = model.unit_matrix()
    sims = u[[model.index(w) for w in words]] @ u[[model.index(a) for a in apis]].T
    iw = np.array([idf[w] for w in words])
    # singleton API side: its idf weight cancels, leaving the best word match
    scores = 0.5 * ((iw @ sims) / iw.sum() + sims.max(axis=0))
    return ExpandedQuery(tuple(rank_by_score(apis, scores, k)), query_text, tuple(words))


@dataclass(frozen=True)
class Recommendation:
    index: int
    tuple: WordApiTuple
    score: float


def recommend_sequences(expanded: ExpandedQuery, tuples: Sequence[WordApiTuple], k: int = 10) -> list[Recommendation]:
    """Rank tuples by cosine between the expansion's API weights and each tuple's 0-1 API vector.

    Ties go to tuples with fewer distinct APIs, then to earlier tuples.
    """
    weights = dict(expanded.entries)
    qnorm = math.sqrt(sum(w * w for w in weights.values()))
    if not weights or qnorm == 0:
        raise QueryError("expanded query is empty")
    scored = []
    for i, tup in enumerate(tuples):
        apis = set(tup.apis)
        if not apis:
            continue
        dot = sum(weights.get(a, 0.0) for a in apis)
        scored.append((dot / (qnorm * math.sqrt(len(apis))), len(apis), i))
    scored.sort(key=lambda s: (-s[0], s[1], s[2]))
    return [Recommendation(i, tuples[i], score) for score, _, i in scored[:k]]


# -- API documents ------------------------------------------------------------


@dataclass(frozen=True)
class ApiDocument:
    class_name: str
    apis: tuple[str, ...]
    description: str
    doc_id: str = ""

    def __post_init__(self):
        if not self.doc_id:
            object.__setattr__(self, "doc_id", self.class_name)
        for api in self.apis:
            if api.split("#", 1)[0] != self.class_name:
                raise ValueError(f"{api!r} does not belong to class {self.class_name!r}")


@dataclass(frozen=True)
class Question:
    qid: str
    text: str
    oracles: tuple[str, ...] = ()


def api_name_text(api: str) -> str:
    """``java.io.BufferedReader#readLine`` -> ``BufferedReader readLine``."""
    cls, _, method = api.partition("#")
    return f"{cls.rsplit('.', 1)[-1]} {method}"


def document_tokens(doc: ApiDocument, stop_words=None) -> list[str]:
    text = " ".join([doc.class_name.rsplit(".", 1)[-1], doc.description, *map(api_name_text, doc.apis)])
    return tokenize(text, stop_words)


def read_documents(path) -> list[ApiDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected class<TAB>apis<TAB>description")
            try:
                docs.append(ApiDocument(fields[0], tuple(fields[1].split()), unescape_field(fields[2])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return docs


def write_documents(docs: Iterable[ApiDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(f"{d.class_name}\t{' '.join(d.apis)}\t{escape_field(d.description)}\n")


def read_questions(path) -> list[Question]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected id<TAB>text[<TAB>oracle ids]")
            oracles = tuple(fields[2].split()) if len(fields) == 3 else ()
            out.append(Question(fields[0], unescape_field(fields[1]), oracles))
    return out


def minmax(scores: np.ndarray) -> np.ndarray:
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


class DocumentIndex:
    """Scores questions against a fixed API document collection."""

    def __init__(self, docs: Sequence[ApiDocument], model: EmbeddingModel | None = None,
                 idf: dict[str, float] | None = None, stop_words=None):
        if not docs:
            raise ValueError("document collection is empty")
        self.docs = list(docs)
        self.model = model
        self.idf = idf
        self.stop_words = stop_words
        self.doc_tokens = [document_tokens(d, stop_words) for d in self.docs]
        n = len(self.docs)
        df = Counter(t for toks in self.doc_tokens for t in set(toks))
        self.vsm_idf = {t: math.log(n / c) for t, c in df.items()}
        self.doc_vectors = [self._tfidf(toks) for toks in self.doc_tokens]
        self.doc_norms = [math.sqrt(sum(v * v for v in vec.values())) for vec in self.doc_vectors]

    def _tfidf(self, tokens):
        tf = Counter(t for t in tokens if t in self.vsm_idf)
        return {t: c * self.vsm_idf[t] for t, c in tf.items() if self.vsm_idf[t] > 0}

    def vsm_scores(self, question: str) -> np.ndarray:
        q = self._tfidf(tokenize(question, self.stop_words))
        qn = math.sqrt(sum(v * v for v in q.values()))
        out = np.zeros(len(self.docs))
        if qn == 0:
            return out
        for i, (vec, dn) in enumerate(zip(self.doc_vectors, self.doc_norms)):
            if dn:
                out[i] = sum(w * vec.get(t, 0.0) for t, w in q.items()) / (qn * dn)
        return out

    def _need_model(self, method):
        if self.model is None or self.idf is None:
            raise ValueError(f"method {method!r} needs an embedding model and an idf table")

    def we_scores(self, question: str) -> np.ndarray:
        self._need_model("we")
        words = set(tokenize(question, self.stop_words))
        return np.array([sim_sets(self.model, self.idf, words, set(toks)) for toks in self.doc_tokens])

    def word2api_scores(self, question: str) -> np.ndarray:
        self._need_model("word2api")
        words = set(tokenize(question, self.stop_words))
        return np.array([sim_sets(self.model, self.idf, words, set(d.apis)) for d in self.docs])

    def component_scores(self, question: str, method: str) -> tuple[np.ndarray, np.ndarray | None]:
        """(VSM-or-single scores, embedding scores) with both min-max normalized for mixed methods."""
        if method not in LINK_METHODS:
            raise ValueError(f"unknown link method {method!r}; expected one of {', '.join(LINK_METHODS)}")
        if method == "vsm":
            return self.vsm_scores(question), None
        if method == "we":
            return self.we_scores(question), None
        if method == "word2api":
            return self.word2api_scores(question), None
        other = self.we_scores(question) if method == "vsm+we" else self.word2api_scores(question)
        return minmax(self.vsm_scores(question)), minmax(other)

    def scores(self, question: str, method: str, alpha: float = 0.5) -> np.ndarray:
        first, second = self.component_scores(question, method)
        if second is None:
            return first
        return mix(first, second, alpha)

    def rank(self, question: str, method: str, alpha: float = 0.5, k: int = 10) -> list[tuple[str, float]]:
        return self.rank_scores(self.scores(question, method, alpha), k)

    def rank_scores(self, scores: np.ndarray, k: int) -> list[tuple[str, float]]:
        return rank_by_score([d.doc_id for d in self.docs], scores, k)


def mix(vsm: np.ndarray, other: np.ndarray, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * vsm + (1.0 - alpha) * other


def link_documents(
    question_text: str,
    docs: Sequence[ApiDocument] | DocumentIndex,
    method: str = "vsm+word2api",
    model: EmbeddingModel | None = None,
    idf: dict[str, float] | None = None,
    alpha: float = 0.36,
    k: int = 10,
) -> list[tuple[str, float]]:
    """Top-k ``(doc_id, score)`` for a question; ties broken by doc id."""
    index = docs if isinstance(docs, DocumentIndex) else DocumentIndex(docs, model, idf)
    return index.rank(question_text, method, alpha, k)


def alpha_curve(
    questions: Sequence[Question],
    index: DocumentIndex,
    base_method: str = "word2api",
    k: int = 10,
) -> list[tuple[float, float]]:
    """MAP of the VSM-integrated ranker at every grid alpha."""
    if base_method not in ("we", "word2api"):
        raise ValueError("base_method must be 'we' or 'word2api'")
    if not questions:
        raise ValueError("no training questions")
    doc_ids = {d.doc_id for d in index.docs}
    for q in questions:
        if not doc_ids.intersection(q.oracles):
            raise ValueError(f"question {q.qid}: no oracle document in the collection")
    method = f"vsm+{base_method}"
    parts = [index.component_scores(q.text, method) for q in questions]
    curve = []
    for alpha in ALPHA_GRID:
        judged = []
        for q, (vsm, other) in zip(questions, parts):
            ranked = [d for d, _ in index.rank_scores(mix(vsm, other, alpha), k)]
            judged.append(JudgedRanking(tuple(flags_for(ranked, set(q.oracles)))))
        curve.append((alpha, map_score(judged)))
    return curve


def tune_alpha(
    questions: Sequence[Question],
    docs: Sequence[ApiDocument] | DocumentIndex,
    base_method: str = "word2api",
    model: EmbeddingModel | None = None,
    idf: dict[str, float] | None = None,
    k: int = 10,
) -> float:
    """Grid alpha in 0.01..1.00 maximizing MAP on training questions (smallest on ties)."""
    index = docs if isinstance(docs, DocumentIndex) else DocumentIndex(docs, model, idf)
    best_alpha, best_map = None, -1.0
    for alpha, value in alpha_curve(questions, index, base_method, k):
        if value > best_map:
            best_alpha, best_map = alpha, value
    return best_alpha
