"""Tests for the API-call grammar, serializer and fuzzy matcher."""

from __future__ import annotations

import json
import random
import string
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todbench.calls import (
    NOT_A_CALL,
    ApiCall,
    InvokeType,
    MalformedCall,
    fuzzy_match,
    levenshtein,
    normalize_name,
    parse_api_call,
    serialize_api_call,
)

from .oracles import oracle_levenshtein

DATA = Path(__file__).parent / "data"


def test_plain_text_is_not_a_call():
    assert parse_api_call("Have a great day!") is NOT_A_CALL
    assert parse_api_call("") is NOT_A_CALL
    assert parse_api_call("Sure, I can help you with that.") is NOT_A_CALL


def test_transcript_call_strings_parse():
    cases = json.loads((DATA / "call_strings.json").read_text())["cases"]
    for case in cases:
        call = parse_api_call(case["text"])
        assert isinstance(call, ApiCall), case["text"]
        assert call.invoke.value == case["invoke"]
        assert call.method == case["method"]
        assert call.params == case["params"], case["text"]


def test_prefix_is_case_insensitive():
    for text in ("apicall(method=FindBus)", "APICALL(method=FindBus)", "entityquery(method=Q)"):
        call = parse_api_call(text)
        assert isinstance(call, ApiCall)


def test_malformed_unbalanced_paren():
    with pytest.raises(MalformedCall):
        parse_api_call("ApiCall(method='FindBus', parameters={'to': 'LA'")


def test_malformed_unbalanced_quote():
    with pytest.raises(MalformedCall):
        parse_api_call("ApiCall(method='FindBus, parameters=)")


def test_malformed_empty_body():
    with pytest.raises(MalformedCall):
        parse_api_call("ApiCall()")


def test_empty_params_roundtrip():
    call = ApiCall(InvokeType.API_CALL, "FindBus")
    assert serialize_api_call(call) == "ApiCall(method='FindBus', parameters={})"
    assert parse_api_call(serialize_api_call(call)) == call


def test_serialization_is_canonical():
    a = ApiCall(InvokeType.API_CALL, "FindBus", {"b": "2", "a": "1"})
    b = ApiCall(InvokeType.API_CALL, "FindBus", {"a": "1", "b": "2"})
    assert serialize_api_call(a) == serialize_api_call(b)
    text = serialize_api_call(a)
    assert text == "ApiCall(method='FindBus', parameters={'a': '1', 'b': '2'})"
    # serialize . parse . serialize == serialize . parse
    assert serialize_api_call(parse_api_call(text)) == text


def test_parameter_order_insensitivity():
    one = parse_api_call("ApiCall(method=M, a=1, b=2, c=3)")
    two = parse_api_call("ApiCall(method=M, c=3, a=1, b=2)")
    assert one == two


def test_entity_query_prefix():
    call = ApiCall(InvokeType.ENTITY_QUERY, "SearchEntity", {"query_1": "Dacia Duster"})
    text = serialize_api_call(call)
    assert text.startswith("EntityQuery(")
    assert parse_api_call(text) == call


def test_values_with_quotes_roundtrip():
    call = ApiCall(InvokeType.API_CALL, "ReserveRestaurant", {"restaurant_name": "Tony's Pizza"})
    assert parse_api_call(serialize_api_call(call)) == call


def test_normalize_name():
    assert normalize_name("number_of_seats") == "numberofseats"
    assert normalize_name("Reserve-Restaurant") == "reserverestaurant"
    assert normalize_name("BuyBusTicket") == normalize_name("buy_bus_ticket")


IDENT = st.text(alphabet=string.ascii_letters + string.digits + "_", min_size=1, max_size=20)
VALUE = st.text(
    alphabet=string.ascii_letters + string.digits + " _-.:'\"\\/#&",
    min_size=0,
    max_size=30,
)
CALLS = st.builds(
    ApiCall,
    invoke=st.sampled_from(list(InvokeType)),
    method=IDENT,
    params=st.dictionaries(IDENT, VALUE, max_size=6),
)


@given(CALLS)
def test_roundtrip_property(call):
    assert parse_api_call(serialize_api_call(call)) == call


@given(st.text(max_size=200))
@settings(max_examples=300)
def test_parse_never_crashes(text):
    try:
        result = parse_api_call(text)
    except MalformedCall:
        return
    assert result is NOT_A_CALL or isinstance(result, ApiCall)


def test_fuzzy_case_normalization():
    matched, score = fuzzy_match("San Francisco", "san francisco")
    assert matched and score == 1.0


def test_fuzzy_boundary_date_pair():
    # Single edit over ten characters sits exactly on the 0.9 default
    # threshold, so this pair *matches*; pinned deliberately.
    matched, score = fuzzy_match("2019-03-11", "2019-03-12")
    assert score == pytest.approx(0.9)
    assert matched


def test_fuzzy_disjoint_values():
    matched, score = fuzzy_match("Butterfly Restaurant", "Museum of Art")
    assert not matched
    assert score < 0.5
    expected = 1 - oracle_levenshtein("butterfly restaurant", "museum of art") / 20
    assert score == pytest.approx(expected)


def test_fuzzy_strips_quotes_and_whitespace():
    matched, score = fuzzy_match("'San  Francisco'", "san francisco"), None
    assert matched[0] and matched[1] == 1.0


def test_fuzzy_empty_both():
    matched, score = fuzzy_match("", "")
    assert matched and score == 1.0


@given(VALUE, VALUE)
def test_fuzzy_symmetry(a, b):
    assert fuzzy_match(a, b)[1] == pytest.approx(fuzzy_match(b, a)[1])


@given(VALUE)
def test_fuzzy_reflexivity(a):
    matched, score = fuzzy_match(a, a)
    assert matched and score == 1.0


@given(st.text(alphabet=string.ascii_lowercase, max_size=25),
       st.text(alphabet=string.ascii_lowercase, max_size=25))
def test_levenshtein_matches_oracle(a, b):
    assert levenshtein(a, b) == oracle_levenshtein(a, b)


def test_score_monotone_in_edits_at_fixed_length():
    base = "abcdefghij"
    prev = 1.0
    for k in range(1, 6):
        variant = "z" * k + base[k:]
        score = fuzzy_match(base, variant)[1]
        assert score <= prev
        prev = score
