"""Corpus ingestion: tokenization, POS tagging, splits and seed lexicons."""

from __future__ import annotations

import configparser
import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .errors import DataError, EmptyCorpus, UnknownBackend

logger = logging.getLogger(__name__)

NOUN, ADJ, VERB, OTHER = "NOUN", "ADJ", "VERB", "OTHER"
TAGS = (NOUN, ADJ, VERB, OTHER)
KEYWORD_TAGS = frozenset({NOUN, ADJ})

POS, NEG = "POS", "NEG"
POLARITIES = (POS, NEG)
_POLARITY_ALIASES = {"pos": POS, "positive": POS, "neg": NEG, "negative": NEG}

SPLIT_ROLES = ("in-domain", "dev", "bank", "test")

# words joined by inner hyphens/apostrophes stay whole; every other
# non-space, non-word character becomes its own token
_TOKEN_RE = re.compile(r"\w+(?:[-'’]\w+)*|[^\w\s]")


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = OTHER

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")
        if self.pos not in TAGS:
            raise ValueError(f"unknown POS tag {self.pos!r}")


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[Token, ...]
    id: int

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def tags(self) -> list[str]:
        return [t.pos for t in self.tokens]

    def __len__(self):
        return len(self.tokens)

    def text(self) -> str:
        return " ".join(self.surfaces)


@dataclass(frozen=True)
class CorpusSplit:
    role: str
    sentences: tuple[TaggedSentence, ...]

    def __post_init__(self):
        if self.role not in SPLIT_ROLES:
            raise ValueError(f"unknown split role {self.role!r}")
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate sentence ids in split {self.role!r}")

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class TermSpan:
    """Token span ``[start, end)`` with an optional POS/NEG polarity."""

    start: int
    end: int
    polarity: str | None = None

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span {self.start}:{self.end}")
        if self.polarity is not None and self.polarity not in POLARITIES:
            raise ValueError(f"bad polarity {self.polarity!r}")


@dataclass(frozen=True)
class LabeledSentence:
    sentence: TaggedSentence
    aspect: str
    terms: tuple[TermSpan, ...] = ()


@dataclass
class SeedLexicon:
    """Initial seed words per aspect, plus polarity seed words.

    ``derived`` carries machine-added words when a lexicon has been
    written back after seed enhancement.
    """

    aspects: dict[str, tuple[str, ...]]
    polarities: dict[str, tuple[str, ...]]
    derived: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.aspects = {a: _dedupe(ws) for a, ws in self.aspects.items()}
        self.polarities = {p: _dedupe(ws) for p, ws in self.polarities.items()}
        self.derived = {a: _dedupe(ws) for a, ws in self.derived.items()}
        if len(self.aspects) < 2:
            raise DataError("a seed lexicon needs at least two aspects")
        for name, words in {**self.aspects, **self.polarities}.items():
            if not words:
                raise DataError(f"seed set {name!r} is empty")
        if set(self.polarities) != set(POLARITIES):
            raise DataError(f"polarity seeds must cover exactly {POLARITIES}")
        unknown = set(self.derived) - set(self.aspects)
        if unknown:
            raise DataError(f"derived seeds for unknown aspects {sorted(unknown)}")

    @property
    def aspect_names(self) -> list[str]:
        return list(self.aspects)


def _dedupe(words: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(w.lower() for w in words))


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(0)) for m in _TOKEN_RE.finditer(text.lower())]


# --- POS tagging -----------------------------------------------------------


class TaggerBackend(Protocol):
    def tag(self, surfaces: Sequence[str]) -> list[str]: ...


_SUFFIX_RULES = (
    ("ness", NOUN), ("ment", NOUN), ("tion", NOUN), ("sion", NOUN), ("ity", NOUN),
    ("ship", NOUN), ("ism", NOUN), ("ist", NOUN), ("ance", NOUN), ("ence", NOUN),
    ("ous", ADJ), ("ful", ADJ), ("ive", ADJ), ("able", ADJ), ("ible", ADJ),
    ("less", ADJ), ("ical", ADJ), ("ish", ADJ), ("ic", ADJ), ("y", ADJ),
    ("ing", VERB), ("ed", VERB), ("ize", VERB), ("ise", VERB),
)


class LexiconTagger:
    """Word→tag lexicon lookup, then suffix heuristics, then OTHER."""

    def __init__(self, lexicon: dict[str, str], suffix_rules=_SUFFIX_RULES, min_stem=3):
        bad = {t for t in lexicon.values() if t not in TAGS}
        if bad:
            raise DataError(f"lexicon uses tags outside {TAGS}: {sorted(bad)}")
        self.lexicon = dict(lexicon)
        self.suffix_rules = tuple(suffix_rules)
        self.min_stem = min_stem

    def tag_word(self, word: str) -> str:
        tag = self.lexicon.get(word)
        if tag is not None:
            return tag
        if not word.isalpha():
            return OTHER
        for suffix, tag in self.suffix_rules:
            if word.endswith(suffix) and len(word) - len(suffix) >= self.min_stem:
                return tag
        return OTHER

    def tag(self, surfaces: Sequence[str]) -> list[str]:
        return [self.tag_word(w) for w in surfaces]

    def extended(self, extra: dict[str, str]) -> "LexiconTagger":
        merged = {**self.lexicon, **extra}
        return LexiconTagger(merged, self.suffix_rules, self.min_stem)


def read_pos_lexicon(path) -> dict[str, str]:
    lexicon = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                word, tag = line.split("\t")
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected 'word<TAB>TAG'") from None
            lexicon[word.lower()] = tag.upper()
    return lexicon


def bundled_pos_lexicon() -> dict[str, str]:
    with resources.as_file(resources.files("asem") / "data" / "pos_lexicon.txt") as p:
        return read_pos_lexicon(p)


def bundled_stopwords() -> frozenset[str]:
    text = (resources.files("asem") / "data" / "stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.split() if w.strip())


_TAGGERS: dict[str, Callable[[], TaggerBackend]] = {
    "lexicon": lambda: LexiconTagger(bundled_pos_lexicon()),
}


def register_tagger(name: str, factory: Callable[[], TaggerBackend]) -> None:
    _TAGGERS[name] = factory


def get_tagger(tagger: str | TaggerBackend = "lexicon") -> TaggerBackend:
    if not isinstance(tagger, str):
        return tagger
    try:
        return _TAGGERS[tagger]()
    except KeyError:
        raise UnknownBackend(f"no tagger backend registered as {tagger!r}") from None


def pos_tag(sentence: Sequence[Token], tagger: str | TaggerBackend = "lexicon") -> list[Token]:
    backend = get_tagger(tagger)
    surfaces = [t.surface for t in sentence]
    tags = backend.tag(surfaces)
    if len(tags) != len(surfaces):
        raise DataError("tagger returned a different number of tags than tokens")
    return [Token(w, t if t in TAGS else OTHER) for w, t in zip(surfaces, tags)]


def make_sentences(texts: Iterable[str], tagger: str | TaggerBackend = "lexicon",
                   start_id: int = 0) -> list[TaggedSentence]:
    """Tokenize and tag raw lines; lines without tokens are skipped."""
    backend = get_tagger(tagger)
    out = []
    next_id = start_id
    for text in texts:
        tokens = tokenize(text)
        if not tokens:
            continue
        out.append(TaggedSentence(tuple(pos_tag(tokens, backend)), next_id))
        next_id += 1
    return out


# --- splits ----------------------------------------------------------------


def split_corpus(sentences: Sequence[TaggedSentence], ratio: float, seed: int):
    """Shuffle deterministically and cut into (in-domain, dev).

    The in-domain part holds ``round(ratio * N)`` sentences (halves round up).
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie strictly between 0 and 1")
    n = len(sentences)
    if n == 0:
        raise EmptyCorpus("cannot split an empty corpus")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(math.floor(ratio * n + 0.5))
    head = sorted(order[:cut])
    tail = sorted(order[cut:])
    return ([sentences[i] for i in head], [sentences[i] for i in tail])


# --- file formats ----------------------------------------------------------


def read_corpus_file(path, tagger: str | TaggerBackend = "lexicon") -> list[TaggedSentence]:
    with open(path, encoding="utf-8") as fh:
        return make_sentences((line.rstrip("\n") for line in fh), tagger)


def parse_polarity(value: str) -> str:
    try:
        return _POLARITY_ALIASES[value.strip().lower()]
    except KeyError:
        raise DataError(f"unknown polarity {value!r}") from None


def read_labeled_file(path, tagger: str | TaggerBackend = "lexicon") -> list[LabeledSentence]:
    """Read ``sentence<TAB>aspect[<TAB>start:end:polarity ...]`` lines.

    Sentences annotated with more than one distinct aspect (comma-separated
    in the aspect column) are dropped.
    """
    backend = get_tagger(tagger)
    out = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise DataError(f"{path}:{lineno}: expected at least 2 tab-separated columns")
            aspects = {a.strip().lower() for a in cols[1].split(",") if a.strip()}
            if len(aspects) != 1:
                dropped += 1
                continue
            tokens = tokenize(cols[0])
            if not tokens:
                continue
            sentence = TaggedSentence(tuple(pos_tag(tokens, backend)), len(out))
            terms = []
            if len(cols) > 2:
                for item in cols[2].split():
                    try:
                        start, end, pol = item.split(":")
                        span = TermSpan(int(start), int(end), parse_polarity(pol))
                    except ValueError as exc:
                        raise DataError(f"{path}:{lineno}: bad term span {item!r} ({exc})") from None
                    if span.end > len(tokens):
                        raise DataError(f"{path}:{lineno}: span {item!r} exceeds sentence length")
                    terms.append(span)
            terms.sort(key=lambda s: s.start)
            for a, b in zip(terms, terms[1:]):
                if b.start < a.end:
                    raise DataError(f"{path}:{lineno}: overlapping term spans")
            out.append(LabeledSentence(sentence, aspects.pop(), tuple(terms)))
    if dropped:
        logger.info("dropped %d multi-aspect sentences from %s", dropped, path)
    return out


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise DataError(f"{path}: {exc}") from None
    return parser


def read_seed_lexicon(path) -> SeedLexicon:
    """Seed lexicon file: INI sections ``aspects``, ``polarities``, optional ``derived``."""
    parser = _read_ini(path)
    for section in ("aspects", "polarities"):
        if not parser.has_section(section):
            raise DataError(f"{path}: missing [{section}] section")
    aspects = {k.lower(): v.split() for k, v in parser.items("aspects")}
    polarities = {}
    for k, v in parser.items("polarities"):
        polarities[parse_polarity(k)] = v.split()
    derived = {}
    if parser.has_section("derived"):
        derived = {k.lower(): v.split() for k, v in parser.items("derived")}
    return SeedLexicon(aspects, polarities, derived)


def write_seed_lexicon(lexicon: SeedLexicon, path) -> None:
    lines = ["[aspects]"]
    lines += [f"{a} = {' '.join(ws)}" for a, ws in lexicon.aspects.items()]
    lines += ["", "[polarities]"]
    lines += [f"{p.lower()} = {' '.join(ws)}" for p, ws in lexicon.polarities.items()]
    derived = {a: ws for a, ws in lexicon.derived.items() if ws}
    if derived:
        lines += ["", "[derived]"]
        lines += [f"{a} = {' '.join(ws)}" for a, ws in derived.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
