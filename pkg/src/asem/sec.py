"""Seed word enhancement: boundary keywords, uncertain keywords and clarity mapping."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import KEYWORD_TAGS, TaggedSentence, bundled_stopwords
from .embedding import EmbeddingTable
from .errors import UnknownAspect
from .pseudolabel import AspectLexicon, PseudoLabeledSentence, PseudoLabeler, filter_uncertain

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-9


def keywords(sentence: TaggedSentence, exclude: Iterable[str] = (), stopwords: Iterable[str] = ()) -> set[str]:
    """Nouns and adjectives of a sentence, minus excluded words and stopwords."""
    drop = set(exclude) | set(stopwords)
    return {t.surface for t in sentence.tokens if t.pos in KEYWORD_TAGS and t.surface not in drop}


def boundary_keywords(labeled: Sequence[PseudoLabeledSentence], exclude=(), stopwords=()) -> set[str]:
    """Keywords that occur in sentences of at least two different pseudo-labels."""
    labels_of: dict[str, set[int]] = {}
    for p in labeled:
        for w in keywords(p.sentence, exclude, stopwords):
            labels_of.setdefault(w, set()).add(p.acd_label)
    return {w for w, labels in labels_of.items() if len(labels) >= 2}


def uncertain_keywords(uncertain: Sequence[PseudoLabeledSentence], exclude=(), stopwords=()) -> set[str]:
    out: set[str] = set()
    for p in uncertain:
        out |= keywords(p.sentence, exclude, stopwords)
    return out


class ClarityTable:
    """Smoothed, l1-normalized TF-IDF of every word in each aspect's pseudo-document.

    The pseudo-document of an aspect is the concatenation of all sentences
    pseudo-labeled with it. IDF is computed over the K pseudo-documents as
    ``ln((1 + K) / (1 + df)) + 1``.
    """

    def __init__(self, labeled: Sequence[PseudoLabeledSentence], aspects: Sequence[str],
                 epsilon: float = DEFAULT_EPSILON):
        self.aspects = list(aspects)
        self.epsilon = epsilon
        k = len(self.aspects)
        docs = [Counter() for _ in range(k)]
        for p in labeled:
            docs[p.acd_label].update(p.sentence.surfaces)
        self.vocab = sorted(set().union(*docs))
        self.index = {w: i for i, w in enumerate(self.vocab)}
        tf = np.array([[d[w] for w in self.vocab] for d in docs], dtype=np.float64).reshape(k, len(self.vocab))
        df = (tf > 0).sum(axis=0)
        idf = np.log((1.0 + k) / (1.0 + df)) + 1.0
        tfidf = tf * idf
        norms = tfidf.sum(axis=1, keepdims=True)
        self.populated = norms[:, 0] > 0
        self.t = np.divide(tfidf, norms, out=np.zeros_like(tfidf), where=norms > 0) + epsilon

    def _aspect(self, aspect) -> int:
        if isinstance(aspect, (int, np.integer)):
            if not 0 <= aspect < len(self.aspects):
                raise UnknownAspect(f"aspect index {aspect} out of range")
            return int(aspect)
        try:
            return self.aspects.index(aspect)
        except ValueError:
            raise UnknownAspect(f"unknown aspect {aspect!r}") from None

    def weight(self, word: str, aspect) -> float:
        i = self._aspect(aspect)
        j = self.index.get(word)
        return self.epsilon if j is None else float(self.t[i, j])

    def clarity(self, word: str, a_i, a_j) -> float:
        ti = self.weight(word, a_i)
        tj = self.weight(word, a_j)
        return ti * math.log(ti / tj)

    def aggregate(self, word: str) -> np.ndarray:
        """Per-aspect sum of clarity against every other populated aspect.

        Aspects with no pseudo-labeled sentence get ``-inf`` and never win.
        """
        k = len(self.aspects)
        out = np.full(k, -np.inf)
        for i in range(k):
            if not self.populated[i]:
                continue
            out[i] = sum(self.clarity(word, i, j) for j in range(k) if j != i and self.populated[j])
        return out


def clarity(word: str, a_i, a_j, labeled: Sequence[PseudoLabeledSentence], aspects: Sequence[str],
            epsilon: float = DEFAULT_EPSILON) -> float:
    table = ClarityTable(labeled, aspects, epsilon)
    return table.clarity(word, a_i, a_j)


def auto_map(words: Iterable[str], table: ClarityTable) -> dict[str, str]:
    """Map each word to the aspect with the highest aggregate clarity.

    Ties go to the lowest aspect index; words whose best aggregate is not
    positive are dropped.
    """
    mapped = {}
    for w in sorted(words):
        agg = table.aggregate(w)
        best = int(np.argmax(agg))
        if agg[best] > 0:
            mapped[w] = table.aspects[best]
    return mapped


@dataclass
class SecTrace:
    """Every intermediate of one enhancement run."""

    labeled: list[PseudoLabeledSentence]
    boundary: set[str]
    uncertain: list[PseudoLabeledSentence]
    uncertain_words: set[str]
    candidates: set[str]
    mapped: dict[str, str]
    clarity: ClarityTable


def enhance_seed_words(sentences: Sequence[TaggedSentence], lexicon: AspectLexicon,
                       table: EmbeddingTable, gamma: float, stopwords: Iterable[str] | None = None,
                       epsilon: float = DEFAULT_EPSILON) -> SecTrace:
    """Run seed enhancement once over ``sentences`` using only the initial seeds.

    Returns the full trace; ``trace.mapped`` is the word→aspect addition map.
    """
    stopwords = bundled_stopwords() if stopwords is None else frozenset(stopwords)
    initial = lexicon.without_additions()
    labeled = PseudoLabeler(initial, table).label_acd(sentences)
    # polarity seeds are given seed words too, so they never become aspect additions
    exclude = initial.initial_words() | {w for ws in initial.polarities.values() for w in ws}
    boundary = boundary_keywords(labeled, exclude, stopwords)
    _, uncertain = filter_uncertain(labeled, gamma)
    uncertain_words = uncertain_keywords(uncertain, exclude, stopwords)
    candidates = boundary & uncertain_words
    clarity_table = ClarityTable(labeled, initial.aspects, epsilon)
    mapped = auto_map(candidates, clarity_table)
    logger.info("SEC: %d boundary, %d uncertain sentences, %d candidates, %d mapped",
                len(boundary), len(uncertain), len(candidates), len(mapped))
    return SecTrace(labeled, boundary, uncertain, uncertain_words, candidates, mapped, clarity_table)
