"""Task-embedding queries and exact cosine k-NN retrieval over the data bank."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .corpus import TaggedSentence
from .embedding import EmbeddingTable, read_vector_file, sum_vectors
from .errors import DataError, EmptyBank, EmptyPriorKnowledge, UnknownBackend
from .pseudolabel import AspectLexicon, PseudoLabeledSentence, PseudoLabeler

logger = logging.getLogger(__name__)

SEED_WORD = "seed-word"
CERTAIN_SENTENCE = "certain-sentence"


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Row-wise unit norm; all-zero rows stay zero."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


class SentenceEncoderBackend(Protocol):
    id: str

    def encode_sentences(self, sentences: Sequence[TaggedSentence]) -> np.ndarray: ...

    def encode_phrases(self, phrases: Sequence[str]) -> np.ndarray: ...


class CbowSumEncoder:
    """l2-normalized sum of CBOW word vectors."""

    id = "cbow-sum"

    def __init__(self, table: EmbeddingTable):
        self.table = table

    @property
    def dim(self):
        return self.table.dim

    def encode_sentences(self, sentences):
        if not sentences:
            return np.zeros((0, self.dim))
        return l2_normalize([sum_vectors(s.surfaces, self.table) for s in sentences])

    def encode_phrases(self, phrases):
        if not phrases:
            return np.zeros((0, self.dim))
        return l2_normalize([sum_vectors(p.split(), self.table) for p in phrases])


class PrecomputedEncoder:
    """Looks vectors up in tables produced by an external encoder.

    Sentences are keyed by their id, phrases by their text. Missing keys
    encode to the zero vector.
    """

    id = "precomputed"

    def __init__(self, sentence_vectors: dict, phrase_vectors: dict | None = None):
        self.sentence_vectors = {int(k): v for k, v in sentence_vectors.items()}
        self.phrase_vectors = dict(phrase_vectors or {})
        dims = {len(v) for v in [*self.sentence_vectors.values(), *self.phrase_vectors.values()]}
        if len(dims) > 1:
            raise DataError(f"precomputed vectors disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop() if dims else 0

    @classmethod
    def from_files(cls, sentence_path, phrase_path=None) -> "PrecomputedEncoder":
        keys, rows = read_vector_file(sentence_path)
        try:
            sentences = {int(k): r for k, r in zip(keys, rows)}
        except ValueError:
            raise DataError(f"{sentence_path}: sentence vector keys must be integer ids") from None
        phrases = {}
        if phrase_path is not None:
            pkeys, prows = read_vector_file(phrase_path)
            phrases = dict(zip(pkeys, prows))
        return cls(sentences, phrases)

    def _lookup(self, table, keys):
        if not keys:
            return np.zeros((0, self.dim))
        zero = np.zeros(self.dim)
        return l2_normalize([table.get(k, zero) for k in keys])

    def encode_sentences(self, sentences):
        return self._lookup(self.sentence_vectors, [s.id for s in sentences])

    def encode_phrases(self, phrases):
        return self._lookup(self.phrase_vectors, [p.replace(" ", "_") for p in phrases])


_ENCODERS = {"cbow-sum": CbowSumEncoder, "precomputed": PrecomputedEncoder.from_files}


def register_encoder(name: str, factory) -> None:
    _ENCODERS[name] = factory


def get_encoder(name: str, *args, **kwargs) -> SentenceEncoderBackend:
    try:
        factory = _ENCODERS[name]
    except KeyError:
        raise UnknownBackend(f"no sentence encoder registered as {name!r}") from None
    return factory(*args, **kwargs)


@dataclass
class TaskEmbeddingSet:
    vectors: np.ndarray
    provenance: list[tuple[str, object]]

    def __len__(self):
        return len(self.provenance)


def build_task_embeddings(lexicon: AspectLexicon, certain: Sequence[TaggedSentence],
                          encoder: SentenceEncoderBackend) -> TaskEmbeddingSet:
    """One query per aspect seed word (in lexicon order) and one per certain sentence.

    Prior knowledge that encodes to the zero vector is dropped.
    """
    seeds = [w for ws in lexicon.seed_sets() for w in ws]
    vectors = np.concatenate([encoder.encode_phrases(seeds), encoder.encode_sentences(list(certain))])
    provenance = [(SEED_WORD, w) for w in seeds] + [(CERTAIN_SENTENCE, s.id) for s in certain]
    keep = np.linalg.norm(vectors, axis=1) > 0 if len(vectors) else np.zeros(0, bool)
    if not keep.all():
        logger.warning("dropping %d task embeddings with no known words", int((~keep).sum()))
    if not keep.any():
        raise EmptyPriorKnowledge("no seed word or certain sentence could be encoded")
    return TaskEmbeddingSet(vectors[keep], [p for p, k in zip(provenance, keep) if k])


@dataclass
class RetrievalIndex:
    ids: np.ndarray
    vectors: np.ndarray

    @classmethod
    def build(cls, bank: Sequence[TaggedSentence], encoder: SentenceEncoderBackend) -> "RetrievalIndex":
        if not bank:
            raise EmptyBank("the data bank is empty")
        ordered = sorted(bank, key=lambda s: s.id)
        ids = np.array([s.id for s in ordered], dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise DataError("duplicate sentence ids in the data bank")
        return cls(ids, encoder.encode_sentences(ordered))

    @classmethod
    def from_vectors(cls, ids, vectors) -> "RetrievalIndex":
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            raise EmptyBank("the data bank is empty")
        order = np.argsort(ids, kind="stable")
        return cls(ids[order], l2_normalize(vectors)[order])

    def __len__(self):
        return len(self.ids)

    def search(self, queries: np.ndarray, k: int, chunk: int = 256) -> list[np.ndarray]:
        """Exact top-k bank ids per query by cosine; ties go to the lower id."""
        if len(self) == 0:
            raise EmptyBank("the data bank is empty")
        if not 1 <= k <= len(self):
            raise ValueError(f"k must lie in [1, {len(self)}], got {k}")
        queries = l2_normalize(queries)
        out = []
        for start in range(0, len(queries), chunk):
            sims = queries[start:start + chunk] @ self.vectors.T
            kth = -np.partition(-sims, k - 1, axis=1)[:, k - 1]
            for row, cut in zip(sims, kth):
                # rows are in id order, so flatnonzero yields ties lowest id first
                above = np.flatnonzero(row > cut)
                tied = np.flatnonzero(row == cut)[:k - len(above)]
                pick = np.concatenate([above, tied])
                pick = pick[np.lexsort((pick, -row[pick]))]
                out.append(self.ids[pick])
        return out


@dataclass
class Retrieved:
    per_query: list[np.ndarray]
    ids: list[int]
    origins: dict[int, list[int]]


def knn_retrieve(index: RetrievalIndex, queries, k: int) -> Retrieved:
    """Top-k neighbours of every query, then the deduplicated union (sorted ids)."""
    vectors = queries.vectors if isinstance(queries, TaskEmbeddingSet) else np.asarray(queries)
    per_query = index.search(vectors, k)
    origins: dict[int, list[int]] = {}
    for qi, hits in enumerate(per_query):
        for sid in hits.tolist():
            origins.setdefault(sid, []).append(qi)
    return Retrieved(per_query, sorted(origins), origins)


@dataclass
class AugmentedSet:
    labeled: list[PseudoLabeledSentence] = field(default_factory=list)
    origins: dict[int, list[int]] = field(default_factory=dict)
    dropped: int = 0

    def __len__(self):
        return len(self.labeled)


def label_augmented(candidates: Sequence[TaggedSentence], labeler: PseudoLabeler, gamma: float,
                    filter_uncertain: bool = True, counts: Counter | None = None,
                    origins: dict[int, list[int]] | None = None) -> AugmentedSet:
    """Pseudo-label retrieved sentences and drop those with connection below ``gamma``."""
    if not candidates:
        return AugmentedSet()
    labeled = labeler.label(list(candidates), counts)
    kept = [p for p in labeled if not filter_uncertain or p.connection >= gamma]
    origins = origins or {}
    return AugmentedSet(kept, {p.sentence.id: origins.get(p.sentence.id, []) for p in kept},
                        len(labeled) - len(kept))


def exclude_overlap(candidates: Sequence[TaggedSentence], in_domain: Sequence[TaggedSentence]):
    """Drop candidates whose token sequence also occurs in the in-domain split."""
    seen = {tuple(s.surfaces) for s in in_domain}
    return [s for s in candidates if tuple(s.surfaces) not in seen]
