import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asem.corpus import SeedLexicon, TermSpan
from asem.pseudolabel import (
    EMBEDDING_DOT, SEED_OVERLAP, AspectLexicon, PseudoLabeledSentence, PseudoLabeler,
    acd_pseudo_label, ate_pseudo_label, atp_pseudo_label, connection, filter_uncertain,
    is_well_formed, read_pseudo_labels, similarity, spans_from_bio, write_pseudo_labels,
)

import oracles
from conftest import sent, table


def lexicon(aspects, pos=("good",), neg=("bad",)):
    return AspectLexicon.from_seeds(SeedLexicon(aspects, {"POS": list(pos), "NEG": list(neg)}))


def test_similarity_seed_overlap_example():
    t = table({"pizza": [1, 0], "great": [0.5, 0.5], "waiter": [0, 1]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    sc = similarity(sent("pizza great"), lex, t)
    assert sc.mode == SEED_OVERLAP
    assert sc.scores.tolist() == [1.5, 0.0]
    assert acd_pseudo_label(sc) == 0


def test_similarity_dot_example():
    t = table({"pizza": [1, 0], "waiter": [0, 1], "nice": [0.3, 0.0], "day": [0.0, 0.7]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    sc = similarity(sent("nice day"), lex, t)
    assert sc.mode == EMBEDDING_DOT
    assert np.allclose(sc.scores, [0.3, 0.7])
    assert acd_pseudo_label(sc) == 1


def test_similarity_symmetric_seeds_tie():
    t = table({"pizza": [1, 0], "waiter": [0, 1]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    sc = similarity(sent("pizza waiter"), lex, t)
    assert sc.scores[0] == sc.scores[1] == 1.0
    assert connection(sc) == 0.0
    assert acd_pseudo_label(sc) == 0


def test_argmax_tie_break_and_degenerate_scores():
    assert acd_pseudo_label([1.5, 0]) == 0
    assert acd_pseudo_label([0.7, 0.7]) == 0
    assert acd_pseudo_label([0.0, 0.0, 0.0]) == 0
    t = table({"pizza": [1, 0], "waiter": [0, 1]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    sc = similarity(sent("zzz qqq"), lex, t)
    assert sc.scores.tolist() == [0.0, 0.0]
    assert connection(sc) == 0.0


def test_connection_examples():
    assert connection([5, 2, 1]) == 3
    assert connection([4, 4, 0]) == 0
    assert connection([2.5, 0]) == 2.5
    with pytest.raises(ValueError):
        connection([1.0])


def _labeled(conns):
    return [PseudoLabeledSentence(sent("x", i), 0, c) for i, c in enumerate(conns)]


def test_filter_uncertain_examples():
    data = _labeled([3, 0, 7])
    certain, uncertain = filter_uncertain(data, 2)
    assert [p.sentence.id for p in certain] == [0, 2]
    assert [p.sentence.id for p in uncertain] == [1]
    assert filter_uncertain(data, 0) == (data, [])
    assert filter_uncertain(data, 7.5) == ([], data)
    with pytest.raises(ValueError):
        filter_uncertain(data, -1)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30), st.floats(0, 100), st.floats(0, 100))
@settings(max_examples=100, deadline=None)
def test_filter_monotone_in_gamma(conns, g1, g2):
    g1, g2 = sorted((g1, g2))
    data = _labeled(conns)
    c1, u1 = filter_uncertain(data, g1)
    c2, _ = filter_uncertain(data, g2)
    assert {p.sentence.id for p in c2} <= {p.sentence.id for p in c1}
    assert len(c1) + len(u1) == len(data)


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=6), st.floats(1e-3, 1e3))
@settings(max_examples=200, deadline=None)
def test_argmax_scale_invariant(scores, c):
    scaled = [c * s for s in scores]
    # scaling can merge near-ties through rounding; compare on values, not raw floats
    assert np.isclose(scaled[acd_pseudo_label(scaled)], max(scaled))
    assert acd_pseudo_label(np.array(scores) * 2.0) == acd_pseudo_label(scores)


@given(st.lists(st.integers(-20, 20), min_size=2, max_size=6))
def test_connection_zero_iff_top_two_equal(scores):
    top = sorted(scores)[-2:]
    assert connection(scores) >= 0
    assert (connection(scores) == 0) == (top[0] == top[1])


VOCAB = [f"w{i}" for i in range(14)]


def random_instance(rng, k):
    dim = int(rng.integers(2, 6))
    vectors = {w: rng.normal(size=dim).round(3).tolist() for w in VOCAB if rng.random() < 0.85}
    seed_words = rng.permutation(VOCAB)[: 2 * k]
    seed_sets = [[str(w) for w in seed_words[2 * i:2 * i + int(rng.integers(1, 3))]] for i in range(k)]
    words = [str(w) for w in rng.choice(VOCAB + ["oov1", "oov2"], int(rng.integers(1, 8)))]
    return words, seed_sets, vectors, dim


def test_seed_similarity_matches_brute_force_oracle():
    rng = np.random.default_rng(123)
    for _ in range(300):
        k = int(rng.integers(2, 6))
        words, seed_sets, vectors, dim = random_instance(rng, k)
        lex = AspectLexicon({f"a{i}": tuple(g) for i, g in enumerate(seed_sets)}, {},
                            {"POS": ("good",), "NEG": ("bad",)})
        t = table(vectors) if vectors else table({"zz": [0.0] * dim})
        sc = similarity(words, lex, t)
        label, expect = oracles.seed_similarity_label(words, seed_sets, vectors, dim)
        assert np.allclose(sc.scores, expect, atol=1e-9)
        assert acd_pseudo_label(sc) == label


def test_seed_overlap_mode_has_nonzero_score_unless_oov():
    t = table({"pizza": [1.0, 2.0], "nice": [0.5, 0.5]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    assert similarity(sent("nice pizza"), lex, t).scores[0] != 0
    # the only matched seed is out of vocabulary: overlap mode, all zeros
    sc = similarity(sent("nice waiter"), lex, t)
    assert sc.mode == SEED_OVERLAP and sc.scores.tolist() == [0.0, 0.0]


def test_lexicon_invariants():
    base = lexicon({"food": ["pizza"], "service": ["waiter"]})
    grown = base.with_additions({"cheese": "food", "pizza": "service"})
    assert grown.seeds("food") == ("pizza", "cheese")
    assert grown.seeds("service") == ("waiter",)  # pizza already in G
    assert grown.without_additions() == base
    with pytest.raises(ValueError):
        AspectLexicon({"food": ("pizza",), "service": ("waiter",)},
                      {"food": ("x",), "service": ("x",)}, {"POS": ("good",), "NEG": ("bad",)})


def test_ate_examples():
    corpus = [sent("the pizza/NOUN was good"), sent("pizza/NOUN and soup/NOUN"), sent("more pizza/NOUN")]
    assert ate_pseudo_label(corpus, m=2) == [["O", "B", "O", "O"], ["B", "O", "O"], ["O", "B"]]
    corpus = [sent("hot/NOUN dogs/NOUN rule")] * 3
    assert ate_pseudo_label(corpus, m=2)[0] == ["B", "I", "O"]
    with pytest.raises(ValueError):
        ate_pseudo_label(corpus, m=-1)


def test_ate_matches_brute_force_on_random_corpus():
    rng = np.random.default_rng(5)
    nouns = [f"n{i}" for i in range(15)]
    others = ["the", "good", "was", "very"]
    raw = []
    for _ in range(200):
        length = int(rng.integers(1, 9))
        raw.append([(str(rng.choice(nouns)), "NOUN") if rng.random() < 0.5 else (str(rng.choice(others)), "OTHER")
                    for _ in range(length)])
    corpus = [sent(" ".join(f"{w}/{t}" for w, t in s), i) for i, s in enumerate(raw)]
    for m in (0, 2, 10, 40):
        assert ate_pseudo_label(corpus, m) == oracles.ate_tags(raw, m)


def test_atp_examples():
    t = table({"pizza": [1, 0], "good": [0.6, 0.4], "bad": [0.1, 0.9], "the": [0.1, 0.1], "was": [0.2, 0]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    s = sent("the pizza/NOUN was good")
    assert atp_pseudo_label(s, TermSpan(1, 2), 20, lex, t) == "POS"
    # term at the start: empty left context, still defined
    assert atp_pseudo_label(sent("pizza/NOUN was bad"), TermSpan(0, 1), 2, lex, t) == "NEG"
    # window of one token only sees "the" and "was": dot mode
    assert atp_pseudo_label(s, TermSpan(1, 2), 1, lex, t) in ("POS", "NEG")
    with pytest.raises(ValueError):
        atp_pseudo_label(s, TermSpan(1, 2), 0, lex, t)


def test_atp_tie_goes_to_pos():
    t = table({"good": [1, 0], "bad": [0, 1], "pizza": [1, 1]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    assert atp_pseudo_label(sent("good pizza bad"), TermSpan(1, 2), 5, lex, t) == "POS"


def test_atp_window_excludes_span_and_clips():
    t = table({"good": [1, 0], "bad": [0, 1]})
    lex = lexicon({"food": ["good"], "service": ["x"]}, pos=["good"], neg=["bad"])
    # "good" is the term itself and "bad" sits beyond a window of 1
    s = sent("x good y bad")
    assert atp_pseudo_label(s, TermSpan(1, 2), 1, lex, t) == "POS"  # all zero -> tie -> POS
    assert atp_pseudo_label(s, TermSpan(1, 2), 2, lex, t) == "NEG"


def test_labeler_outputs_well_formed_bio():
    rng = np.random.default_rng(2)
    vocab = {w: rng.normal(size=3) for w in ["pizza", "waiter", "good", "bad", "cheese", "the"]}
    t = table(vocab)
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    corpus = [sent("the pizza/NOUN cheese/NOUN was good", 0), sent("bad waiter/NOUN", 1),
              sent("pizza/NOUN pizza/NOUN waiter/NOUN", 2), sent("the", 3)]
    out = PseudoLabeler(lex, t, m=1, atp_window=3).label(corpus)
    for p in out:
        assert is_well_formed(p.term_bio) and is_well_formed(p.polarity_bio)
        assert len(p.term_bio) == len(p.polarity_bio) == len(p.sentence)
        assert [(s.start, s.end) for s in spans_from_bio(p.term_bio)] == \
               [(s.start, s.end) for s in spans_from_bio(p.polarity_bio)]
    assert out[0].term_bio == ("O", "B", "O", "O", "O")


def test_is_well_formed():
    assert is_well_formed(["B", "I", "O", "B"])
    assert not is_well_formed(["O", "I"])
    assert not is_well_formed(["B-POS", "I-NEG"])
    assert is_well_formed(["B-NEG", "I-NEG", "O"])


def test_pseudo_label_dump_round_trip(tmp_path):
    t = table({"pizza": [1, 0], "waiter": [0, 1], "good": [1, 1]})
    lex = lexicon({"food": ["pizza"], "service": ["waiter"]})
    corpus = [sent("pizza/NOUN good", 0), sent("waiter/NOUN was good", 1)]
    labeled = PseudoLabeler(lex, t, m=0).label(corpus)
    path = tmp_path / "pl.tsv"
    write_pseudo_labels(path, labeled, lex.aspects)
    assert read_pseudo_labels(path, corpus, lex.aspects) == labeled
