"""Corpus-level BLEU-4 and GLEU for scoring generated responses.

Both metrics share a single pinned tokenizer (lowercase; alphanumeric runs
and individual punctuation marks are tokens) so the two scores can never
drift apart through tokenization changes. BLEU is the corpus-level
aggregate-count formulation; GLEU is the sentence-level min(precision,
recall) over pooled 1..4-gram counts, averaged over pairs.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

MAX_ORDER = 4
# Floor for zero-count n-gram precisions. Keeps disjoint outputs near zero
# instead of hiding them behind heavier smoothing.
EPSILON = 1e-9

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^a-z0-9\s]")


class EmptyInput(ValueError):
    """A corpus metric was called with no pairs."""


@dataclass(frozen=True)
class ScoredPair:
    """One prediction/reference pair routed to the response-generation task."""

    prediction: str
    reference: str
    category: str = ""
    split_tag: str = ""
    dataset: str = ""

    def __post_init__(self) -> None:
        if not self.reference:
            raise ValueError("ScoredPair.reference must be non-empty")


def tokenize(text: str) -> list[str]:
    """Lowercase, then emit alphanumeric runs and single punctuation marks."""
    return _TOKEN_RE.findall(text.lower())


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(pairs: list[ScoredPair]) -> float:
    """Corpus BLEU with uniform weights over 1..4-gram modified precisions.

    Orders with an empty denominator (every prediction shorter than n) are
    dropped from the geometric mean; zero-count numerators are floored at
    EPSILON. Brevity penalty exp(1 - ref/pred) applies when the prediction
    corpus is shorter than the reference corpus.
    """
    if not pairs:
        raise EmptyInput("bleu4 needs at least one pair")
    clipped = [0] * (MAX_ORDER + 1)
    total = [0] * (MAX_ORDER + 1)
    pred_len = 0
    ref_len = 0
    for pair in pairs:
        pred = tokenize(pair.prediction)
        ref = tokenize(pair.reference)
        pred_len += len(pred)
        ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            pred_counts = _ngram_counts(pred, n)
            total[n] += sum(pred_counts.values())
            clipped[n] += sum((pred_counts & _ngram_counts(ref, n)).values())
    orders = [n for n in range(1, MAX_ORDER + 1) if total[n] > 0]
    if not orders or pred_len == 0:
        return 0.0
    log_sum = 0.0
    for n in orders:
        log_sum += math.log(max(clipped[n] / total[n], EPSILON))
    brevity = 1.0 if pred_len >= ref_len else math.exp(1.0 - ref_len / pred_len)
    return brevity * math.exp(log_sum / len(orders))


def _gleu_sentence(pred: list[str], ref: list[str]) -> float:
    matches = 0
    pred_total = 0
    ref_total = 0
    for n in range(1, MAX_ORDER + 1):
        pred_counts = _ngram_counts(pred, n)
        ref_counts = _ngram_counts(ref, n)
        matches += sum((pred_counts & ref_counts).values())
        pred_total += sum(pred_counts.values())
        ref_total += sum(ref_counts.values())
    if pred_total == 0 or ref_total == 0:
        return 0.0
    return min(matches / pred_total, matches / ref_total)


def gleu(pairs: list[ScoredPair]) -> float:
    """Mean over pairs of min(precision, recall) on pooled 1..4-gram counts."""
    if not pairs:
        raise EmptyInput("gleu needs at least one pair")
    scores = [
        _gleu_sentence(tokenize(pair.prediction), tokenize(pair.reference))
        for pair in pairs
    ]
    return sum(scores) / len(scores)
