"""CBOW word embeddings with negative sampling, trained from scratch in numpy."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import TaggedSentence
from .errors import DataError, EmptyVocabulary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CbowConfig:
    dim: int = 200
    epochs: int = 10
    window: int = 10
    negatives: int = 5
    min_count: int = 2
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    sample: float = 1e-3  # frequent-word downsampling threshold, 0 disables
    shrink_window: bool = True  # draw the effective window per position from [1, window]
    rng_seed: int = 0

    def __post_init__(self):
        if self.dim <= 0 or self.epochs <= 0 or self.window <= 0:
            raise ValueError("dim, epochs and window must be positive")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if self.sample < 0:
            raise ValueError("sample must be >= 0")


@dataclass
class EmbeddingTable:
    """Word vectors stored as rows of ``matrix``, in ``words`` order."""

    words: list[str]
    matrix: np.ndarray
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise ValueError("matrix must have one row per word")
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in embedding table")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def vector(self, word: str) -> np.ndarray | None:
        i = self.index.get(word)
        return None if i is None else self.matrix[i]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}

    @classmethod
    def from_dict(cls, vectors: dict[str, Sequence[float]], counts=None) -> "EmbeddingTable":
        words = list(vectors)
        if not words:
            raise EmptyVocabulary("no vectors given")
        return cls(words, np.array([vectors[w] for w in words], dtype=np.float64), dict(counts or {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.words)} {self.dim}\n")
            for w, row in zip(self.words, self.matrix):
                fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        words, rows = read_vector_file(path)
        return cls(words, rows)


def read_vector_file(path) -> tuple[list[str], np.ndarray]:
    """Parse the ``vocab_size dim`` header format shared by word and sentence vectors."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        try:
            n, dim = int(header[0]), int(header[1])
        except (IndexError, ValueError):
            raise DataError(f"{path}: bad header, expected 'count dim'") from None
        keys, rows = [], np.empty((n, dim), dtype=np.float64)
        for i, line in enumerate(fh):
            parts = line.rstrip("\n").split(" ")
            if i >= n or len(parts) != dim + 1:
                raise DataError(f"{path}:{i + 2}: expected {dim} values after the key")
            keys.append(parts[0])
            rows[i] = [float(x) for x in parts[1:]]
    if len(keys) != n:
        raise DataError(f"{path}: header promises {n} rows, found {len(keys)}")
    return keys, rows


def write_vector_file(path, keys: Sequence[str], rows: np.ndarray) -> None:
    EmbeddingTable([str(k) for k in keys], rows).save(path)


# --- training --------------------------------------------------------------


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cbow_loss_and_grads(context: Sequence[int], target: int, negatives: Sequence[int],
                        w_in: np.ndarray, w_out: np.ndarray):
    """Negative-sampling loss for one (context, target, negatives) triple.

    loss = -log σ(u_t·h) - Σ_k log σ(-u_k·h), with h the mean of the context
    input vectors. Returns ``(loss, grad_in, grad_out)`` as dense arrays
    shaped like ``w_in`` and ``w_out``.
    """
    context = np.asarray(context)
    h = w_in[context].mean(axis=0)
    outs = np.concatenate([[target], np.asarray(negatives)])
    signs = np.array([1.0] + [-1.0] * len(negatives))
    scores = w_out[outs] @ h
    loss = -np.sum(np.log(_sigmoid(signs * scores)))
    # d/ds of -log σ(sign·s) is -sign·σ(-sign·s)
    coef = -signs * _sigmoid(-signs * scores)
    grad_out = np.zeros_like(w_out)
    np.add.at(grad_out, outs, coef[:, None] * h[None, :])
    grad_h = coef @ w_out[outs]
    grad_in = np.zeros_like(w_in)
    np.add.at(grad_in, context, np.broadcast_to(grad_h / len(context), (len(context), h.size)))
    return loss, grad_in, grad_out


def build_vocab(corpus: Iterable[TaggedSentence], min_count: int):
    counts = Counter(w for s in corpus for w in s.surfaces)
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    return kept, {w: counts[w] for w in kept}


def _window_sums(x: np.ndarray, window):
    """Sum of rows within ±window of each position, excluding the position itself.

    ``window`` may be an int or one radius per position.
    """
    n = x.shape[0]
    prefix = np.zeros((n + 1,) + x.shape[1:])
    np.cumsum(x, axis=0, out=prefix[1:])
    pos = np.arange(n)
    lo = np.maximum(pos - window, 0)
    hi = np.minimum(pos + window + 1, n)
    return prefix[hi] - prefix[lo] - x, hi - lo - 1


def _scatter_back(g: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Adjoint of ``_window_sums`` for per-position radii.

    Position j collects g[t] from every t != j whose window reaches j.
    """
    n = g.shape[0]
    pos = np.arange(n)
    lo = np.maximum(pos - window, 0)
    hi = np.minimum(pos + window + 1, n)
    diff = np.zeros((n + 1,) + g.shape[1:])
    np.add.at(diff, lo, g)
    np.add.at(diff, hi, -g)
    return np.cumsum(diff, axis=0)[:n] - g


def train_cbow(corpus: Sequence[TaggedSentence], cfg: CbowConfig = CbowConfig()) -> EmbeddingTable:
    """Train CBOW embeddings.

    Each sentence is one synchronous update: every position predicts its
    word from the mean of its window, and the accumulated gradients are
    applied at once. The learning rate decays linearly over all tokens.
    Single-threaded and deterministic for a fixed ``cfg.rng_seed``.
    """
    if not corpus:
        raise EmptyVocabulary("empty training corpus")
    words, counts = build_vocab(corpus, cfg.min_count)
    if not words:
        raise EmptyVocabulary(f"no word reaches min_count={cfg.min_count}")
    index = {w: i for i, w in enumerate(words)}
    rng = np.random.default_rng(cfg.rng_seed)
    vocab_size = len(words)
    w_in = (rng.random((vocab_size, cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((vocab_size, cfg.dim))

    freq = np.array([counts[w] for w in words], dtype=np.float64) ** 0.75
    cum = np.cumsum(freq / freq.sum())
    cum[-1] = 1.0

    raw_counts = np.array([counts[w] for w in words], dtype=np.float64)
    if cfg.sample > 0:
        threshold = cfg.sample * raw_counts.sum()
        keep_prob = np.minimum((np.sqrt(raw_counts / threshold) + 1.0) * threshold / raw_counts, 1.0)
    else:
        keep_prob = np.ones(vocab_size)

    encoded = []
    for s in corpus:
        ids = np.array([index[w] for w in s.surfaces if w in index], dtype=np.int64)
        if ids.size >= 2:
            encoded.append(ids)
    total = cfg.epochs * sum(len(ids) for ids in encoded)
    if total == 0:
        logger.warning("no sentence has two in-vocabulary words; vectors stay at init")
    seen = 0
    for epoch in range(cfg.epochs):
        epoch_loss, epoch_n = 0.0, 0
        for sent_ids in encoded:
            lr = cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * seen / max(total, 1)
            seen += len(sent_ids)
            ids = sent_ids[rng.random(len(sent_ids)) < keep_prob[sent_ids]]
            if ids.size < 2:
                continue
            if cfg.shrink_window:
                radius = rng.integers(1, cfg.window + 1, size=len(ids))
            else:
                radius = np.full(len(ids), cfg.window)
            ctx_sum, ctx_n = _window_sums(w_in[ids], radius)
            h = ctx_sum / ctx_n[:, None]
            negs = np.searchsorted(cum, rng.random((len(ids), cfg.negatives)), side="right")
            negs = np.minimum(negs, vocab_size - 1)
            outs = np.concatenate([ids[:, None], negs], axis=1)
            signs = np.ones(outs.shape)
            signs[:, 1:] = -1.0
            valid = np.ones(outs.shape)
            valid[:, 1:] = negs != ids[:, None]
            u = w_out[outs]
            scores = np.einsum("nkd,nd->nk", u, h)
            epoch_loss -= float(np.sum(valid * np.log(_sigmoid(signs * scores) + 1e-300)))
            epoch_n += len(ids)
            coef = -signs * _sigmoid(-signs * scores) * valid
            grad_h = np.einsum("nk,nkd->nd", coef, u)
            np.add.at(w_out, outs, -lr * coef[..., None] * h[:, None, :])
            back = _scatter_back(grad_h / ctx_n[:, None], radius)
            np.add.at(w_in, ids, -lr * back)
        if epoch_n:
            logger.debug("cbow epoch %d mean loss %.4f", epoch + 1, epoch_loss / epoch_n)
    if not np.all(np.isfinite(w_in)):
        raise DataError("CBOW training produced non-finite vectors")
    return EmbeddingTable(words, w_in, counts)


# --- sentence and aspect vectors -------------------------------------------


def _surfaces(sentence) -> list[str]:
    if isinstance(sentence, TaggedSentence):
        return sentence.surfaces
    return [getattr(t, "surface", t) for t in sentence]


def sum_vectors(words: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    idx = [table.index[w] for w in words if w in table.index]
    if not idx:
        return np.zeros(table.dim)
    return table.matrix[idx].sum(axis=0)


def embed_sentence(sentence, table: EmbeddingTable) -> np.ndarray:
    """Sum of in-vocabulary word vectors; OOV words are skipped."""
    return sum_vectors(_surfaces(sentence), table)


def embed_aspect(seeds: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    seeds = list(dict.fromkeys(seeds))
    if not any(w in table.index for w in seeds):
        logger.warning("no seed word of %s is in the embedding vocabulary", seeds[:5])
    return sum_vectors(seeds, table)
