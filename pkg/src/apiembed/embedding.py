"""CBOW embeddings trained with negative sampling and frequency subsampling.

The hidden layer is the mean of the context input rows; each center token is
scored against itself (label 1) and ``negative`` noise tokens (label 0) drawn
from the unigram distribution raised to the 3/4 power.  The context window
radius is drawn uniformly from ``[1, window]`` per center and never crosses a
line boundary.  Frequent tokens are dropped per occurrence with probability
``1 - keep_probability``.

Random numbers inside the trainer come from the 64-bit linear congruential
generator ``x <- x * 25214903917 + 11 (mod 2**64)`` using bits 16..47 of the
state, seeded per worker from ``TrainConfig.seed``.  With ``workers=1`` a run
is bit-reproducible.  With more workers the line ranges are trained
concurrently without locking.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from apiembed.corpus import is_api

NOISE_POWER = 0.75
MIN_ALPHA_FRACTION = 1e-4
KINDS = ("all", "words", "apis")


class OOVError(LookupError):
    """A term is missing from the model vocabulary."""

    def __init__(self, term, where="model vocabulary"):
        super().__init__(f"{term!r} is not in the {where}")
        self.term = term


class ModelFormatError(ValueError):
    pass


@dataclass
class TrainConfig:
    dim: int = 100
    window: int = 5
    min_count: int = 50
    sample: float = 1e-3
    negative: int = 5
    iterations: int = 5
    alpha: float = 0.05
    seed: int = 1
    workers: int = 1

    def validate(self) -> None:
        for name in ("dim", "window", "min_count", "iterations", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.negative < 0:
            raise ValueError("negative must be >= 0")
        if self.sample < 0:
            raise ValueError("sample must be >= 0 (0 disables subsampling)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class Vocabulary:
    terms: list[str]
    counts: np.ndarray
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def count(self, term) -> int:
        return int(self.counts[self.index[term]])


def build_vocab(lines: Iterable[Sequence[str]], min_count: int = 50) -> Vocabulary:
    """Count tokens and keep those seen at least ``min_count`` times.

    Indices follow descending count, ties broken lexicographically.
    """
    counts: dict[str, int] = {}
    for line in lines:
        for tok in line:
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept, np.array([counts[t] for t in kept], dtype=np.int64))


def keep_probability(term_count: int, total_count: int, sample: float) -> float:
    """Probability of keeping one occurrence of a term, capped at 1.

    ``(sqrt(z / sample) + 1) * sample / z`` with ``z = term_count / total_count``.
    """
    if term_count < 1 or total_count < term_count:
        raise ValueError("need 1 <= term_count <= total_count")
    if sample <= 0:
        raise ValueError("sample must be positive")
    z = term_count / total_count
    return min(1.0, (math.sqrt(z / sample) + 1.0) * sample / z)


# -- numerics ----------------------------------------------------------------


def cbow_ns_loss_and_grad(w_in, w_out, context, center, negatives):
    """Negative-sampling loss of one CBOW example and its exact gradients.

    ``loss = -log s(u_c . h) - sum_n log s(-u_n . h)`` with ``h`` the mean of
    ``w_in[context]``.  Returns ``(loss, grad_in, grad_out)`` as dense arrays.
    """
    context = np.asarray(context)
    h = w_in[context].mean(axis=0)
    targets = np.concatenate([[center], np.asarray(negatives, dtype=int)])
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    scores = w_out[targets] @ h
    sig = 1.0 / (1.0 + np.exp(-scores))
    loss = -np.log(sig[0]) - np.sum(np.log(1.0 - sig[1:]))
    coef = sig - labels  # dL/dscore
    grad_out = np.zeros_like(w_out)
    np.add.at(grad_out, targets, coef[:, None] * h[None, :])
    grad_h = coef @ w_out[targets]
    grad_in = np.zeros_like(w_in)
    np.add.at(grad_in, context, np.broadcast_to(grad_h / len(context), (len(context), w_in.shape[1])))
    return float(loss), grad_in, grad_out


@numba.njit(cache=True, nogil=True)
def _next_random(state):
    return state * np.uint64(25214903917) + np.uint64(11)


@numba.njit(cache=True, nogil=True)
def _uniform(state):
    return float((state >> np.uint64(16)) & np.uint64(0xFFFFFFFF)) / 4294967296.0


@numba.njit(cache=True, nogil=True)
def cbow_ns_update(syn0, syn1, context, n_ctx, targets, n_targets, alpha, neu1, neu1e):
    """One SGD step on a CBOW example; ``targets[0]`` is the center (label 1).

    Output rows are updated in turn; the input-side gradient is accumulated
    against the pre-update output rows and spread as ``1 / n_ctx`` per context slot.
    """
    dim = syn0.shape[1]
    for j in range(dim):
        neu1[j] = 0.0
        neu1e[j] = 0.0
    for c in range(n_ctx):
        row = context[c]
        for j in range(dim):
            neu1[j] += syn0[row, j]
    for j in range(dim):
        neu1[j] /= n_ctx
    for d in range(n_targets):
        t = targets[d]
        label = 1.0 if d == 0 else 0.0
        f = 0.0
        for j in range(dim):
            f += neu1[j] * syn1[t, j]
        g = (label - 1.0 / (1.0 + math.exp(-f))) * alpha
        for j in range(dim):
            neu1e[j] += g * syn1[t, j]
        for j in range(dim):
            syn1[t, j] += g * neu1[j]
    for c in range(n_ctx):
        row = context[c]
        for j in range(dim):
            syn0[row, j] += neu1e[j] / n_ctx


@numba.njit(cache=True, nogil=True)
def _train_lines(syn0, syn1, tokens, offsets, line_lo, line_hi, keep, noise_cdf,
                 window, negative, iterations, alpha0, seed, subsample):
    n_vocab = syn0.shape[0]
    dim = syn0.shape[1]
    neu1 = np.zeros(dim, dtype=np.float64)
    neu1e = np.zeros(dim, dtype=np.float64)
    longest = 0
    for ln in range(line_lo, line_hi):
        longest = max(longest, offsets[ln + 1] - offsets[ln])
    sen = np.empty(max(longest, 1), dtype=np.int64)
    context = np.empty(2 * window, dtype=np.int64)
    targets = np.empty(negative + 1, dtype=np.int64)
    total = (offsets[line_hi] - offsets[line_lo]) * iterations
    done = 0
    state = np.uint64(seed)
    for it in range(iterations):
        for ln in range(line_lo, line_hi):
            sen_len = 0
            for p in range(offsets[ln], offsets[ln + 1]):
                w = tokens[p]
                if subsample:
                    state = _next_random(state)
                    if keep[w] < _uniform(state):
                        continue
                sen[sen_len] = w
                sen_len += 1
            alpha = alpha0 * (1.0 - done / (total + 1.0))
            if alpha < alpha0 * MIN_ALPHA_FRACTION:
                alpha = alpha0 * MIN_ALPHA_FRACTION
            done += offsets[ln + 1] - offsets[ln]
            for pos in range(sen_len):
                state = _next_random(state)
                b = 1 + int((state >> np.uint64(16)) % np.uint64(window))
                n_ctx = 0
                for c in range(max(0, pos - b), min(sen_len, pos + b + 1)):
                    if c != pos:
                        context[n_ctx] = sen[c]
                        n_ctx += 1
                if n_ctx == 0:
                    continue
                center = sen[pos]
                targets[0] = center
                n_targets = 1
                for _ in range(negative):
                    state = _next_random(state)
                    t = np.searchsorted(noise_cdf, _uniform(state), side="right")
                    if t >= n_vocab:
                        t = n_vocab - 1
                    if t == center:
                        continue
                    targets[n_targets] = t
                    n_targets += 1
                cbow_ns_update(syn0, syn1, context, n_ctx, targets, n_targets, alpha, neu1, neu1e)


# -- model -------------------------------------------------------------------


class EmbeddingModel:
    """Vocabulary plus input/output matrices; published vectors are input rows."""

    def __init__(self, vocab: Vocabulary, input_matrix, output_matrix=None, config: TrainConfig | None = None):
        input_matrix = np.asarray(input_matrix)
        if input_matrix.ndim != 2 or input_matrix.shape[0] != len(vocab):
            raise ValueError("input matrix rows must match the vocabulary size")
        self.vocab = vocab
        self.input_matrix = input_matrix
        self.output_matrix = output_matrix
        self.config = config
        self._unit = None

    @classmethod
    def from_vectors(cls, vectors: dict[str, Sequence[float]]) -> "EmbeddingModel":
        terms = list(vectors)
        vocab = Vocabulary(terms, np.zeros(len(terms), dtype=np.int64))
        return cls(vocab, np.array([vectors[t] for t in terms], dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.input_matrix.shape[1]

    @property
    def terms(self) -> list[str]:
        return self.vocab.terms

    def __contains__(self, term) -> bool:
        return term in self.vocab

    def __len__(self):
        return len(self.vocab)

    def index(self, term) -> int:
        try:
            return self.vocab.index[term]
        except KeyError:
            raise OOVError(term) from None

    def vector(self, term) -> np.ndarray:
        return self.input_matrix[self.index(term)]

    def unit_matrix(self) -> np.ndarray:
        """Row-normalized float64 copy of the input matrix (zero rows stay zero)."""
        if self._unit is None:
            m = self.input_matrix.astype(np.float64)
            norms = np.linalg.norm(m, axis=1, keepdims=True)
            self._unit = np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)
        return self._unit

    def similarity(self, a, b) -> float:
        u = self.unit_matrix()
        return float(np.clip(u[self.index(a)] @ u[self.index(b)], -1.0, 1.0))

    def api_terms(self) -> list[str]:
        return [t for t in self.terms if is_api(t)]


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _kind_mask(terms, kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if kind == "all":
        return np.ones(len(terms), dtype=bool)
    want_api = kind == "apis"
    return np.array([is_api(t) == want_api for t in terms], dtype=bool)


def rank_by_score(terms: Sequence[str], scores: np.ndarray, k: int, descending: bool = True):
    """Top-k ``(term, score)`` pairs, ties broken lexicographically by term."""
    if k <= 0 or len(terms) == 0:
        return []
    order = sorted(range(len(terms)), key=lambda i: (-scores[i] if descending else scores[i], terms[i]))
    return [(terms[i], float(scores[i])) for i in order[:k]]


def nearest_terms(model: EmbeddingModel, query_term: str, k: int = 10, kind: str = "all"):
    """Vocabulary terms ranked by cosine to ``query_term`` (the query itself excluded)."""
    qi = model.index(query_term)
    u = model.unit_matrix()
    scores = np.clip(u @ u[qi], -1.0, 1.0)
    mask = _kind_mask(model.terms, kind)
    mask[qi] = False
    idx = np.flatnonzero(mask)
    terms = [model.terms[i] for i in idx]
    return rank_by_score(terms, scores[idx], k)


def encode_lines(lines: Iterable[Sequence[str]], vocab: Vocabulary):
    """Flatten in-vocabulary token ids and per-line offsets."""
    ids = []
    offsets = [0]
    index = vocab.index
    for line in lines:
        ids.extend(index[t] for t in line if t in index)
        offsets.append(len(ids))
    return np.array(ids, dtype=np.int64), np.array(offsets, dtype=np.int64)


def noise_distribution(counts: np.ndarray) -> np.ndarray:
    """Cumulative unigram^0.75 distribution."""
    p = counts.astype(np.float64) ** NOISE_POWER
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    return cdf


def train(lines: Sequence[Sequence[str]], config: TrainConfig | None = None, vocab: Vocabulary | None = None) -> EmbeddingModel:
    """Train a CBOW negative-sampling model on tokenized lines."""
    config = config or TrainConfig()
    config.validate()
    if vocab is None:
        vocab = build_vocab(lines, config.min_count)
    if len(vocab) == 0:
        raise ValueError("empty effective corpus: no token reaches min_count")
    tokens, offsets = encode_lines(lines, vocab)
    if len(tokens) == 0:
        raise ValueError("empty effective corpus: training text has no in-vocabulary tokens")

    rng = np.random.default_rng(config.seed)
    syn0 = ((rng.random((len(vocab), config.dim)) - 0.5) / config.dim).astype(np.float32)
    syn1 = np.zeros((len(vocab), config.dim), dtype=np.float32)

    total = int(vocab.counts.sum())
    if config.sample > 0:
        keep = np.array([keep_probability(int(c), total, config.sample) for c in vocab.counts])
    else:
        keep = np.ones(len(vocab))
    cdf = noise_distribution(vocab.counts)

    n_lines = len(offsets) - 1
    workers = min(config.workers, max(n_lines, 1))
    bounds = np.linspace(0, n_lines, workers + 1).astype(np.int64)
    jobs = [
        (syn0, syn1, tokens, offsets, int(bounds[i]), int(bounds[i + 1]), keep, cdf,
         config.window, config.negative, config.iterations, config.alpha,
         config.seed * 1000003 + i, config.sample > 0)
        for i in range(workers)
    ]
    if workers == 1:
        _train_lines(*jobs[0])
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(lambda a: _train_lines(*a), jobs))
    return EmbeddingModel(vocab, syn0, syn1, config)


# -- persistence -------------------------------------------------------------


def save_model(model: EmbeddingModel, path) -> None:
    """Write ``<vocab_size> <dim>`` then ``token v1 ... vd`` per line.

    Term counts go to a ``<path>.vocab`` sidecar (``term count`` lines).
    """
    m = np.asarray(model.input_matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for term, row in zip(model.terms, m):
            fh.write(term + " " + " ".join(f"{x:.9g}" for x in row.tolist()) + "\n")
    with open(f"{path}.vocab", "w", encoding="utf-8", newline="\n") as fh:
        for term, c in zip(model.terms, model.vocab.counts.tolist()):
            fh.write(f"{term} {c}\n")


def load_model(path) -> EmbeddingModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ModelFormatError(f"{path}:1: expected header '<vocab_size> <dim>'")
        n, dim = int(parts[0]), int(parts[1])
        terms = []
        rows = np.empty((n, dim), dtype=np.float32)
        for lineno, line in enumerate(fh, 2):
            fields = line.split()
            if not fields:
                continue
            if len(terms) >= n:
                raise ModelFormatError(f"{path}:{lineno}: more rows than the header's {n}")
            if len(fields) != dim + 1:
                raise ModelFormatError(f"{path}:{lineno}: expected {dim} values, got {len(fields) - 1}")
            try:
                rows[len(terms)] = [float(x) for x in fields[1:]]
            except ValueError:
                raise ModelFormatError(f"{path}:{lineno}: non-numeric value") from None
            terms.append(fields[0])
    if len(terms) != n:
        raise ModelFormatError(f"{path}: header promises {n} rows, found {len(terms)}")
    counts = np.zeros(n, dtype=np.int64)
    try:
        with open(f"{path}.vocab", encoding="utf-8") as fh:
            saved = dict(line.split() for line in fh if line.strip())
        counts = np.array([int(saved.get(t, 0)) for t in terms], dtype=np.int64)
    except FileNotFoundError:
        pass
    return EmbeddingModel(Vocabulary(terms, counts), rows)


