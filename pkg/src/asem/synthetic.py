"""Planted restaurant-review generator with known aspect, term and polarity labels.

Every aspect owns a pool of nouns (a few of which are the initial seeds),
adjectives and verbs. A sentence draws its content words from one aspect, so CBOW clusters each
pool, while seed words appear in only a fraction of sentences. ``crossover``
nouns additionally show up beside another aspect's seed in mixed sentences,
which makes them boundary keywords that only clarity mapping can place.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import NEG, POS, SeedLexicon, write_seed_lexicon

ASPECTS = {
    "food": dict(
        seeds=["food", "pizza", "pasta"],
        nouns=["cheese", "bread", "soup", "salad", "steak", "fish", "chicken", "sushi", "dessert", "sauce"],
        adjs=["tasty", "delicious", "fresh", "spicy", "bland", "juicy"],
        verbs=["ate", "tasted", "devoured", "cooked", "grilled", "seasoned"],
    ),
    "service": dict(
        seeds=["service", "waiter", "staff"],
        nouns=["waitress", "server", "host", "manager", "bartender", "owner", "hostess", "employees",
               "reservation", "attitude"],
        adjs=["friendly", "rude", "attentive", "slow", "helpful", "polite"],
        verbs=["greeted", "ignored", "seated", "helped", "served", "thanked"],
    ),
    "ambience": dict(
        seeds=["ambience", "atmosphere", "decor"],
        nouns=["music", "lighting", "seating", "interior", "patio", "view", "noise", "crowd", "vibe",
               "furniture"],
        adjs=["cozy", "romantic", "loud", "quiet", "dark", "elegant"],
        verbs=["decorated", "lit", "relaxed", "chatted", "lounged", "danced"],
    ),
    "drinks": dict(
        seeds=["drinks", "wine", "beer"],
        nouns=["cocktails", "martinis", "coffee", "tea", "juice", "sake", "whiskey", "vodka", "soda",
               "espresso"],
        adjs=["strong", "sweet", "cold", "weak", "smooth", "sour"],
        verbs=["sipped", "poured", "drank", "mixed", "brewed", "chilled"],
    ),
    "price": dict(
        seeds=["price", "prices", "value"],
        nouns=["cost", "money", "dollars", "bucks", "deal", "bill", "tip", "deals", "costs", "charge"],
        adjs=["cheap", "expensive", "pricey", "overpriced", "affordable", "reasonable"],
        verbs=["paid", "charged", "spent", "saved", "tipped", "budgeted"],
    ),
}

# sentiment is carried by the polarity seeds alone; unseeded sentiment adjectives
# spread evenly over aspects and would only add noise to clarity mapping
POLARITY_WORDS = {
    POS: ["good", "great", "excellent", "nice"],
    NEG: ["bad", "awful", "terrible", "poor"],
}

OFF_TOPIC = dict(
    nouns=["weather", "traffic", "movie", "game", "news", "team", "car", "phone", "book", "train"],
    adjs=["sunny", "rainy", "boring", "exciting", "late", "busy"],
    verbs=["drove", "watched", "read", "played", "called", "missed"],
)

# noun -> the aspect whose seed it keeps company with in mixed sentences
# one per home aspect so seed additions stay balanced
CROSSOVER = {"cheese": "drinks", "host": "price", "music": "service", "martinis": "food", "bill": "ambience"}

FILLERS = ["really", "very", "so", "quite", "truly"]

# every aspect sentence carries three nouns, two adjectives and a verb of its
# aspect, so topical words dominate each CBOW window
TEMPLATES = [
    "the {n1} was {pol} and {adj} , we {v} the {n2} and {n3} too",
    "we {v} {adj} {n1} with {n2} and {n3} , {mod} {pol}",
    "{pol} {n1} , {adj} {n2} and {adj2} {n3}",
    "i {v} the {n1} and the {n2} , {mod} {adj} and {adj2} {n3} , {pol} overall",
    "the {adj} {n1} and {adj2} {n2} were {pol} , they {v} the {n3}",
    "our {n1} {v} the {n2} , {adj} {n3} and {pol}",
]

MIXED_TEMPLATE = "the {n1} was {pol} and so was the {n2}"


@dataclass(frozen=True)
class SyntheticConfig:
    n_in_domain: int = 200
    n_bank: int = 2000
    n_test: int = 500
    seed_rate: float = 0.3  # chance a sentence mentions one of its aspect's seeds
    mixed_rate: float = 0.1  # in-domain/bank sentences pairing a crossover noun with another seed
    off_topic_rate: float = 0.2  # bank only
    seed: int = 0


@dataclass
class Sample:
    text: str
    aspect: str | None
    terms: list[tuple[int, int, str]]


class Generator:
    def __init__(self, cfg: SyntheticConfig = SyntheticConfig()):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self._mixed = 0

    def _pick(self, items):
        return items[int(self.rng.integers(len(items)))]

    def _pol_word(self, polarity):
        return self._pick(POLARITY_WORDS[polarity])

    def _render(self, template, slots, polarity):
        tokens, terms = [], []
        for part in template.split():
            if part.startswith("{") and part.endswith("}"):
                key = part[1:-1]
                word = slots[key]
                if key in ("n1", "n2", "n3"):
                    terms.append((len(tokens), len(tokens) + 1, polarity))
                tokens.append(word)
            else:
                tokens.append(part)
        return " ".join(tokens), terms

    def aspect_sentence(self, aspect: str, polarity: str | None = None) -> Sample:
        pool = ASPECTS[aspect]
        polarity = polarity or (POS if self.rng.random() < 0.5 else NEG)
        nouns = pool["nouns"]
        picked = [nouns[i] for i in self.rng.choice(len(nouns), 3, replace=False)]
        if self.rng.random() < self.cfg.seed_rate:
            picked[int(self.rng.integers(3))] = self._pick(pool["seeds"])
        adj, adj2 = (pool["adjs"][i] for i in self.rng.choice(len(pool["adjs"]), 2, replace=False))
        slots = dict(n1=picked[0], n2=picked[1], n3=picked[2], adj=adj, adj2=adj2,
                     v=self._pick(pool["verbs"]), pol=self._pol_word(polarity), mod=self._pick(FILLERS))
        text, terms = self._render(self._pick(TEMPLATES), slots, polarity)
        return Sample(text, aspect, terms)

    def mixed_sentence(self) -> Sample:
        # cycle so every crossover noun shows up even in a small corpus
        crossover = sorted(CROSSOVER)
        noun = crossover[self._mixed % len(crossover)]
        self._mixed += 1
        other = CROSSOVER[noun]
        polarity = POS if self.rng.random() < 0.5 else NEG
        slots = dict(n1=self._pick(ASPECTS[other]["seeds"]), n2=noun, pol=self._pol_word(polarity))
        text, terms = self._render(MIXED_TEMPLATE, slots, polarity)
        return Sample(text, None, terms)

    def off_topic_sentence(self) -> Sample:
        nouns = [OFF_TOPIC["nouns"][i] for i in self.rng.choice(len(OFF_TOPIC["nouns"]), 3, replace=False)]
        adj, adj2 = (OFF_TOPIC["adjs"][i] for i in self.rng.choice(len(OFF_TOPIC["adjs"]), 2, replace=False))
        slots = dict(n1=nouns[0], n2=nouns[1], n3=nouns[2], adj=adj, adj2=adj2, v=self._pick(OFF_TOPIC["verbs"]),
                     pol=self._pol_word(POS), mod=self._pick(FILLERS))
        text, _ = self._render(self._pick(TEMPLATES), slots, POS)
        return Sample(text, None, [])

    def unlabeled(self, n: int, off_topic_rate: float = 0.0) -> list[Sample]:
        aspects = list(ASPECTS)
        out = []
        for _ in range(n):
            r = self.rng.random()
            if r < off_topic_rate:
                out.append(self.off_topic_sentence())
            elif r < off_topic_rate + self.cfg.mixed_rate:
                out.append(self.mixed_sentence())
            else:
                out.append(self.aspect_sentence(self._pick(aspects)))
        return out

    def labeled(self, n: int) -> list[Sample]:
        aspects = list(ASPECTS)
        return [self.aspect_sentence(aspects[i % len(aspects)]) for i in range(n)]


def seed_lexicon() -> SeedLexicon:
    return SeedLexicon(
        {a: p["seeds"] for a, p in ASPECTS.items()},
        {pol: list(ws) for pol, ws in POLARITY_WORDS.items()},
    )


def pos_lexicon() -> dict[str, str]:
    tags = {}
    for pool in ASPECTS.values():
        for w in pool["seeds"] + pool["nouns"]:
            tags[w] = "NOUN"
        for w in pool["adjs"]:
            tags[w] = "ADJ"
    for w in OFF_TOPIC["nouns"]:
        tags[w] = "NOUN"
    for w in OFF_TOPIC["adjs"]:
        tags[w] = "ADJ"
    for pool in list(ASPECTS.values()) + [OFF_TOPIC]:
        for w in pool["verbs"]:
            tags[w] = "VERB"
    for words in POLARITY_WORDS.values():
        for w in words:
            tags[w] = "ADJ"
    for w in FILLERS + ["overall", "our", "i", "we", "they", "too", "with", "were", "so"]:
        tags[w] = "OTHER"
    return tags


CONFIG_TEMPLATE = """\
[paths]
in_domain = in_domain.txt
bank = bank.txt
test = test.tsv
seeds = seeds.ini
pos_lexicon = pos_lexicon.txt
output_dir = out

[embedding]
dim = 100
epochs = 20

[sec]
gamma = {gamma}

[retrieval]
k = 10

[classifier]
epochs = 15

[run]
seed = {seed}
"""


def generate(out_dir, cfg: SyntheticConfig = SyntheticConfig(), gamma: float = 40.0) -> Path:
    """Write a complete synthetic dataset plus a ready-to-run ``config.ini``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gen = Generator(cfg)
    in_domain = gen.unlabeled(cfg.n_in_domain)
    bank = gen.unlabeled(cfg.n_bank, cfg.off_topic_rate)
    test = gen.labeled(cfg.n_test)
    (out / "in_domain.txt").write_text("".join(s.text + "\n" for s in in_domain), encoding="utf-8")
    (out / "bank.txt").write_text("".join(s.text + "\n" for s in bank), encoding="utf-8")
    with open(out / "test.tsv", "w", encoding="utf-8") as fh:
        for s in test:
            spans = " ".join(f"{a}:{b}:{p.lower()}" for a, b, p in s.terms)
            fh.write(f"{s.text}\t{s.aspect}\t{spans}\n")
    write_seed_lexicon(seed_lexicon(), out / "seeds.ini")
    with open(out / "pos_lexicon.txt", "w", encoding="utf-8") as fh:
        for w, t in sorted(pos_lexicon().items()):
            fh.write(f"{w}\t{t}\n")
    (out / "config.ini").write_text(CONFIG_TEMPLATE.format(gamma=gamma, seed=cfg.seed), encoding="utf-8")
    return out
