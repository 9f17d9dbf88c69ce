import numpy as np
import pytest

from asem.corpus import TermSpan
from asem.errors import LengthMismatch, NoTerms
from asem.evaluation import accuracy, macro_f1, per_class_f1, sentence_atp, span_f1, span_prf

import oracles


def test_macro_f1_examples():
    gold = ["a", "b", "c", "a"]
    assert macro_f1(gold, gold, ["a", "b", "c"]) == 1.0
    gold = ["x"] * 5 + ["y"] * 5
    assert per_class_f1(gold, ["x"] * 10, ["x", "y"]) == {"x": 2 / 3, "y": 0.0}
    assert macro_f1(gold, ["x"] * 10, ["x", "y"]) == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(LengthMismatch):
        macro_f1([], [], ["x"])
    with pytest.raises(LengthMismatch):
        macro_f1(["x"], ["x", "y"], ["x"])


def test_macro_f1_absent_class_flag():
    assert macro_f1(["a", "b"], ["a", "b"], ["a", "b", "c"]) == pytest.approx(2 / 3)
    assert macro_f1(["a", "b"], ["a", "b"], ["a", "b", "c"], exclude_absent=True) == 1.0


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 0, 3]) == 2 / 3
    with pytest.raises(LengthMismatch):
        accuracy([], [])


def test_span_f1_examples():
    spans = [[(0, 1), (3, 5)], [(2, 3)]]
    assert span_f1(spans, spans) == 1.0
    assert span_f1([[(0, 1)]], [[]]) == 0.0
    assert span_prf([[]], [[]]) == (1.0, 1.0, 1.0)
    # TermSpan objects and tuples compare by boundaries only
    assert span_f1([[TermSpan(0, 2, "POS")]], [[(0, 2)]]) == 1.0
    with pytest.raises(LengthMismatch):
        span_f1([[]], [])


def test_span_prf_ten_sentence_fixture():
    gold = [[(0, 1)], [(1, 3)], [(0, 1), (4, 5)], [], [(2, 4)], [(0, 2)], [(5, 6)], [(1, 2), (3, 4)], [], [(0, 1)]]
    pred = [[(0, 1)], [(1, 2)], [(0, 1)], [(3, 4)], [(2, 4)], [(0, 2), (3, 4)], [], [(1, 2), (3, 4)], [], [(0, 1)]]
    # hand count: tp = 1+0+1+0+1+1+0+2+0+1 = 7, fp = 0+1+0+1+0+1+0+0+0+0 = 3, fn = 0+1+1+0+0+0+1+0+0+0 = 3
    p, r, f = span_prf(gold, pred)
    assert p == pytest.approx(0.7, abs=1e-12)
    assert r == pytest.approx(0.7, abs=1e-12)
    assert f == pytest.approx(0.7, abs=1e-12)


def test_sentence_atp_examples():
    assert sentence_atp(["POS", "POS", "NEG"]) == "POS"
    assert sentence_atp(["POS", "NEG"]) == "POS"
    assert sentence_atp(["NEG", "NEG", "POS"]) == "NEG"
    with pytest.raises(NoTerms):
        sentence_atp([])


def test_metrics_match_brute_force_on_500_instances():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        classes = list(range(k))
        gold = rng.integers(0, k, n).tolist()
        pred = rng.integers(0, k, n).tolist()
        assert accuracy(gold, pred) == oracles.accuracy(gold, pred)
        assert abs(macro_f1(gold, pred, classes) - oracles.macro_f1(gold, pred, classes)) < 1e-9

        gs, ps = [], []
        for _ in range(int(rng.integers(1, 8))):
            cands = [(i, i + int(rng.integers(1, 3))) for i in range(0, 10, 2)]
            gs.append([c for c in cands if rng.random() < 0.3])
            ps.append([c for c in cands if rng.random() < 0.3])
        got = span_prf(gs, ps)
        expect = oracles.span_prf(gs, ps)
        assert all(abs(a - b) < 1e-9 for a, b in zip(got, expect))

        pols = rng.choice(["POS", "NEG"], int(rng.integers(1, 6))).tolist()
        assert sentence_atp(pols) == oracles.sentence_polarity(pols)
