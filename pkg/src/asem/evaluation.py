"""Accuracy, macro-F1, exact-match span F1 and sentence-level polarity."""

from __future__ import annotations

from collections import Counter
from typing import Hashable, Iterable, Sequence

from .corpus import POLARITIES
from .errors import LengthMismatch, NoTerms


def _check(gold, predicted):
    if len(gold) != len(predicted):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(predicted)} predictions")
    if not gold:
        raise LengthMismatch("cannot score empty label sequences")


def accuracy(gold: Sequence[Hashable], predicted: Sequence[Hashable]) -> float:
    _check(gold, predicted)
    return sum(g == p for g, p in zip(gold, predicted)) / len(gold)


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def per_class_f1(gold, predicted, classes: Iterable[Hashable]) -> dict:
    _check(gold, predicted)
    out = {}
    for c in classes:
        tp = sum(g == c and p == c for g, p in zip(gold, predicted))
        fp = sum(g != c and p == c for g, p in zip(gold, predicted))
        fn = sum(g == c and p != c for g, p in zip(gold, predicted))
        out[c] = f1_from_counts(tp, fp, fn)
    return out


def macro_f1(gold, predicted, classes: Iterable[Hashable], exclude_absent: bool = False) -> float:
    """Unweighted mean of per-class F1.

    A class absent from both gold and predicted scores 0 unless
    ``exclude_absent`` drops it from the mean.
    """
    classes = list(classes)
    scores = per_class_f1(gold, predicted, classes)
    if exclude_absent:
        present = set(gold) | set(predicted)
        classes = [c for c in classes if c in present]
    if not classes:
        return 0.0
    return sum(scores[c] for c in classes) / len(classes)


def span_prf(gold_spans: Sequence[Iterable], predicted_spans: Sequence[Iterable]):
    """Exact-match (start, end) precision, recall and F1 pooled over sentences.

    Both sides empty counts as a perfect score.
    """
    if len(gold_spans) != len(predicted_spans):
        raise LengthMismatch("gold and predicted span lists differ in length")
    tp = fp = fn = 0
    for gold, pred in zip(gold_spans, predicted_spans):
        g = {_key(s) for s in gold}
        p = {_key(s) for s in pred}
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f1_from_counts(tp, fp, fn)


def span_f1(gold_spans, predicted_spans) -> float:
    return span_prf(gold_spans, predicted_spans)[2]


def _key(span):
    if hasattr(span, "start"):
        return (span.start, span.end)
    return (span[0], span[1])


def sentence_atp(term_polarities: Sequence[str]) -> str:
    """Majority term polarity; a tie resolves to POS."""
    if not term_polarities:
        raise NoTerms("sentence has no polarized terms")
    votes = Counter(term_polarities)
    pos, neg = POLARITIES
    return neg if votes[neg] > votes[pos] else pos
