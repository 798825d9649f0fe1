"""BLEU-4 / GLEU checks against the frozen oracle fixture and properties."""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from todbench.textmetrics import EmptyInput, ScoredPair, bleu4, gleu, tokenize

from .oracles import oracle_bleu4, oracle_gleu, oracle_tokenize

FIXTURE = json.loads(
    (Path(__file__).parent / "data" / "text_metric_fixture.json").read_text()
)


def _pairs(raw: list[dict]) -> list[ScoredPair]:
    return [ScoredPair(prediction=p["prediction"], reference=p["reference"]) for p in raw]


def test_tokenize_pinned_behaviour():
    assert tokenize("I booked 2 seats, right?") == [
        "i", "booked", "2", "seats", ",", "right", "?",
    ]
    assert tokenize("") == []
    assert tokenize("7:45 pm") == ["7", ":", "45", "pm"]


@given(st.text(max_size=80))
def test_tokenize_matches_oracle(text):
    assert tokenize(text) == oracle_tokenize(text)


def test_fixture_bleu4_matches_frozen_value():
    pairs = _pairs(FIXTURE["pairs"])
    assert bleu4(pairs) == pytest.approx(FIXTURE["expected"]["bleu4"], abs=1e-6)


def test_fixture_gleu_matches_frozen_value():
    pairs = _pairs(FIXTURE["pairs"])
    assert gleu(pairs) == pytest.approx(FIXTURE["expected"]["gleu"], abs=1e-6)


def test_cat_mat_pair_closed_form():
    # Hand-counted: precisions 5/6, 3/5, 2/4, 1/3; equal lengths so no brevity
    # penalty; pooled GLEU counts 11 matches over 18 n-grams each side.
    pair = _pairs(FIXTURE["pairs"][:1])
    assert bleu4(pair) == pytest.approx((1 / 12) ** 0.25, abs=1e-9)
    assert gleu(pair) == pytest.approx(11 / 18, abs=1e-9)


def test_identity_scores_exactly_one():
    pairs = [
        ScoredPair("I found 3 hotels in Fresno.", "I found 3 hotels in Fresno."),
        ScoredPair("Your cab is booked!", "Your cab is booked!"),
    ]
    assert bleu4(pairs) == 1.0
    assert gleu(pairs) == 1.0


def test_disjoint_scores_near_zero():
    pairs = [ScoredPair("aaa bbb ccc ddd", "www xxx yyy zzz")]
    assert bleu4(pairs) < 1e-6
    assert gleu(pairs) == 0.0


def test_single_token_pred_gleu_is_one_over_ref_unigrams():
    # matches pool to 1 unigram; precision 1/1, recall 1/ref_total where the
    # reference contributes unigrams through 4-grams.
    pair = [ScoredPair("yes", "yes definitely")]
    # ref n-grams: 2 unigrams + 1 bigram = 3; pooled matches = 1
    assert gleu(pair) == pytest.approx(1 / 3, abs=1e-9)


def test_brevity_penalty_applies_only_when_shorter():
    short = [ScoredPair("the cat", "the cat sat on a mat")]
    # 1-gram precision 1.0 over 2 tokens, 2-gram 1/1; orders 3,4 dropped.
    # BP = exp(1 - 6/2)
    assert bleu4(short) == pytest.approx(math.exp(1 - 3), abs=1e-9)
    longer = [ScoredPair("the cat sat on a mat tonight", "the cat sat on a mat")]
    # no penalty; hand-counted precisions 6/7, 5/6, 4/5, 3/4 multiply to 3/7
    assert bleu4(longer) == pytest.approx((3 / 7) ** 0.25, abs=1e-9)


def test_empty_pair_list_raises():
    with pytest.raises(EmptyInput):
        bleu4([])
    with pytest.raises(EmptyInput):
        gleu([])


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        ScoredPair("text", "")


def test_order_invariance():
    pairs = _pairs(FIXTURE["pairs"])
    shuffled = pairs[:]
    random.Random(7).shuffle(shuffled)
    assert bleu4(shuffled) == pytest.approx(bleu4(pairs), abs=1e-12)
    assert gleu(shuffled) == pytest.approx(gleu(pairs), abs=1e-12)


def test_appending_exact_match_never_decreases_gleu():
    pairs = _pairs(FIXTURE["pairs"])
    before = gleu(pairs)
    after = gleu(pairs + [ScoredPair("same text here", "same text here")])
    assert after >= before


_SENT = st.lists(
    st.sampled_from("the a cat dog sat ran on under mat rug 7 pm !".split()),
    min_size=1,
    max_size=12,
).map(" ".join)


@given(st.lists(st.tuples(_SENT, _SENT), min_size=1, max_size=6))
def test_metrics_match_oracle_on_random_corpora(raw):
    pairs = [ScoredPair(p, r) for p, r in raw]
    assert bleu4(pairs) == pytest.approx(oracle_bleu4(raw), abs=1e-9)
    assert gleu(pairs) == pytest.approx(oracle_gleu(raw), abs=1e-9)
    assert 0.0 <= bleu4(pairs) <= 1.0
    assert 0.0 <= gleu(pairs) <= 1.0
