"""Seed-word pseudo-labels for aspect categories, aspect terms and term polarity."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import NOUN, POLARITIES, SeedLexicon, TaggedSentence, TermSpan
from .embedding import EmbeddingTable, embed_aspect, embed_sentence
from .errors import UnknownAspect

logger = logging.getLogger(__name__)

SEED_OVERLAP = "seed-overlap"
EMBEDDING_DOT = "embedding-dot"

TERM_TAGS = ("B", "I", "O")
POLARITY_TAGS = ("B-POS", "I-POS", "B-NEG", "I-NEG", "O")


@dataclass
class AspectLexicon:
    """Per-aspect seed sets ``G = initial ∪ additional`` plus polarity seeds."""

    initial: dict[str, tuple[str, ...]]
    additional: dict[str, tuple[str, ...]] = field(default_factory=dict)
    polarities: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.additional = {a: tuple(self.additional.get(a, ())) for a in self.initial}
        owner = {}
        for a, words in self.additional.items():
            for w in words:
                if w in owner and owner[w] != a:
                    raise ValueError(f"word {w!r} added to both {owner[w]!r} and {a!r}")
                owner[w] = a

    @classmethod
    def from_seeds(cls, seeds: SeedLexicon, additional: Mapping[str, Iterable[str]] | None = None):
        extra = {a: tuple(ws) for a, ws in (additional if additional is not None else seeds.derived).items()}
        return cls(dict(seeds.aspects), extra, dict(seeds.polarities))

    @property
    def aspects(self) -> list[str]:
        return list(self.initial)

    def seeds(self, aspect: str) -> tuple[str, ...]:
        """G for one aspect, initial seeds first."""
        return tuple(dict.fromkeys(self.initial[aspect] + self.additional[aspect]))

    def seed_sets(self) -> list[tuple[str, ...]]:
        return [self.seeds(a) for a in self.initial]

    def polarity_sets(self) -> list[tuple[str, ...]]:
        return [self.polarities[p] for p in POLARITIES]

    def initial_words(self) -> set[str]:
        return {w for ws in self.initial.values() for w in ws}

    def without_additions(self) -> "AspectLexicon":
        return AspectLexicon(dict(self.initial), {}, dict(self.polarities))

    def with_additions(self, mapped: Mapping[str, str]) -> "AspectLexicon":
        """Lexicon extended by a word→aspect map; words already in any G are skipped."""
        extra = {a: list(ws) for a, ws in self.additional.items()}
        taken = {w for ws in self.seed_sets() for w in ws}
        for word, aspect in mapped.items():
            if aspect not in extra:
                raise UnknownAspect(f"cannot add {word!r} to unknown aspect {aspect!r}")
            if word not in taken:
                extra[aspect].append(word)
                taken.add(word)
        return AspectLexicon(dict(self.initial), extra, dict(self.polarities))


@dataclass(frozen=True)
class SimilarityScores:
    scores: np.ndarray
    mode: str

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class PseudoLabeledSentence:
    sentence: TaggedSentence
    acd_label: int
    connection: float
    term_bio: tuple[str, ...] = ()
    polarity_bio: tuple[str, ...] = ()


class SeedScorer:
    """Piecewise seed/embedding similarity against a fixed list of seed sets.

    Seed-set representations are computed once; call with a word list.
    """

    def __init__(self, seed_sets: Sequence[Iterable[str]], table: EmbeddingTable):
        self.table = table
        self.seed_sets = [frozenset(ws) for ws in seed_sets]
        self.centroids = np.array([embed_aspect(ws, table) for ws in seed_sets])

    def __call__(self, words: Sequence[str]) -> SimilarityScores:
        s = embed_sentence(words, self.table)
        present = set(words)
        matched = [present & g for g in self.seed_sets]
        if not any(matched):
            return SimilarityScores(self.centroids @ s, EMBEDDING_DOT)
        scores = np.zeros(len(self.seed_sets))
        for i, ws in enumerate(matched):
            for w in ws:
                v = self.table.vector(w)
                if v is not None:
                    scores[i] += v @ s
        return SimilarityScores(scores, SEED_OVERLAP)


def similarity(sentence, lexicon: AspectLexicon, table: EmbeddingTable) -> SimilarityScores:
    """Score a sentence against every aspect.

    When no aspect's seed set G intersects the sentence's words, each score
    is the dot product of the summed sentence vector with the summed seed
    vector of that aspect. Otherwise an aspect scores Σ wᵀs over its matched
    seed words w, and unmatched aspects score exactly 0.
    """
    words = sentence.surfaces if isinstance(sentence, TaggedSentence) else list(sentence)
    return SeedScorer(lexicon.seed_sets(), table)(words)


def acd_pseudo_label(scores) -> int:
    """0-based argmax; ties go to the lowest index."""
    values = np.asarray(getattr(scores, "scores", scores), dtype=np.float64)
    return int(np.argmax(values))


def connection(scores) -> float:
    values = np.asarray(getattr(scores, "scores", scores), dtype=np.float64)
    if values.size < 2:
        raise ValueError("connection needs at least two scores")
    top2 = np.sort(values)[-2:]
    return float(top2[1] - top2[0])


def filter_uncertain(labeled: Sequence[PseudoLabeledSentence], gamma: float):
    """Split into (certain, uncertain) by ``connection >= gamma``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    certain = [p for p in labeled if p.connection >= gamma]
    uncertain = [p for p in labeled if p.connection < gamma]
    return certain, uncertain


# --- aspect terms ----------------------------------------------------------


def noun_counts(corpus: Iterable[TaggedSentence]) -> Counter:
    return Counter(t.surface for s in corpus for t in s.tokens if t.pos == NOUN)


def term_tags(sentence: TaggedSentence, qualifying: set[str]) -> list[str]:
    tags = []
    prev_in = False
    for t in sentence.tokens:
        hit = t.pos == NOUN and t.surface in qualifying
        tags.append(("I" if prev_in else "B") if hit else "O")
        prev_in = hit
    return tags


def ate_pseudo_label(corpus: Sequence[TaggedSentence], m: int = 2, counts: Counter | None = None):
    """BIO term tags: nouns seen more than ``m`` times, adjacent ones merged.

    ``counts`` overrides the noun frequencies taken from ``corpus``.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    counts = noun_counts(corpus) if counts is None else counts
    qualifying = {w for w, c in counts.items() if c > m}
    return [term_tags(s, qualifying) for s in corpus]


def spans_from_bio(tags: Sequence[str]) -> list[TermSpan]:
    """Spans of a well-formed B/I/O sequence (``B-X``/``I-X`` types ignored)."""
    spans, start = [], None
    for i, tag in enumerate(tags):
        head = tag[0]
        if head == "B" or head == "O":
            if start is not None:
                spans.append(TermSpan(start, i))
                start = None
            if head == "B":
                start = i
    if start is not None:
        spans.append(TermSpan(start, len(tags)))
    return spans


def context_window(sentence: TaggedSentence, term: TermSpan, window: int) -> list[str]:
    words = sentence.surfaces
    left = words[max(0, term.start - window):term.start]
    right = words[term.end:term.end + window]
    return left + right


def atp_pseudo_label(sentence: TaggedSentence, term: TermSpan, window: int,
                     lexicon: AspectLexicon, table: EmbeddingTable,
                     scorer: SeedScorer | None = None) -> str:
    """Polarity of one term from the ``window`` tokens on each side of it."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 0 <= term.start < term.end <= len(sentence):
        raise ValueError("term span outside sentence")
    scorer = scorer or SeedScorer(lexicon.polarity_sets(), table)
    scores = scorer(context_window(sentence, term, window))
    return POLARITIES[acd_pseudo_label(scores)]


def polarity_tags(n: int, spans: Sequence[TermSpan]) -> list[str]:
    tags = ["O"] * n
    for span in spans:
        pol = span.polarity or POLARITIES[0]
        tags[span.start] = f"B-{pol}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{pol}"
    return tags


def is_well_formed(tags: Sequence[str]) -> bool:
    prev = "O"
    for tag in tags:
        if tag.startswith("I"):
            if prev == "O" or prev[1:] != tag[1:]:
                return False
        prev = tag
    return True


@dataclass
class PseudoLabeler:
    """Bundles the lexicon, embeddings and hyperparameters for batch labeling."""

    lexicon: AspectLexicon
    table: EmbeddingTable
    m: int = 2
    atp_window: int = 20

    def __post_init__(self):
        self.aspect_scorer = SeedScorer(self.lexicon.seed_sets(), self.table)
        self.polarity_scorer = SeedScorer(self.lexicon.polarity_sets(), self.table)

    def scores(self, sentence: TaggedSentence) -> SimilarityScores:
        return self.aspect_scorer(sentence.surfaces)

    def label_acd(self, sentences: Sequence[TaggedSentence]) -> list[PseudoLabeledSentence]:
        out = []
        for s in sentences:
            sc = self.scores(s)
            out.append(PseudoLabeledSentence(s, acd_pseudo_label(sc), connection(sc)))
        return out

    def label(self, sentences: Sequence[TaggedSentence],
              counts: Counter | None = None) -> list[PseudoLabeledSentence]:
        """Full ACD + ATE + ATP labels; noun counts default to ``sentences``."""
        term_bios = ate_pseudo_label(sentences, self.m, counts)
        out = []
        for p, bio in zip(self.label_acd(sentences), term_bios):
            spans = [
                TermSpan(sp.start, sp.end,
                         atp_pseudo_label(p.sentence, sp, self.atp_window, self.lexicon,
                                          self.table, self.polarity_scorer))
                for sp in spans_from_bio(bio)
            ]
            out.append(PseudoLabeledSentence(p.sentence, p.acd_label, p.connection,
                                             tuple(bio), tuple(polarity_tags(len(bio), spans))))
        return out


def write_pseudo_labels(path, labeled: Sequence[PseudoLabeledSentence], aspects: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in labeled:
            fh.write("\t".join([
                str(p.sentence.id), aspects[p.acd_label], repr(p.connection),
                " ".join(p.term_bio), " ".join(p.polarity_bio),
            ]) + "\n")


def read_pseudo_labels(path, sentences: Sequence[TaggedSentence], aspects: Sequence[str]):
    by_id = {s.id: s for s in sentences}
    index = {a: i for i, a in enumerate(aspects)}
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            sid, aspect, conn, terms, pols = line.rstrip("\n").split("\t")
            out.append(PseudoLabeledSentence(by_id[int(sid)], index[aspect], float(conn),
                                             tuple(terms.split()), tuple(pols.split())))
    return out
