"""Grammar, parser, canonical serializer and fuzzy matcher for API-call strings.

The call text format is the wire format for generation targets: a model output
is an API call iff it contains an ``ApiCall(`` / ``EntityQuery(`` prefix. Input
parsing is deliberately permissive (quoted or bare tokens, optional
``parameters=`` keyword, optional braces); output serialization has exactly one
canonical form, documented byte-exactly in the README.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class InvokeType(str, Enum):
    API_CALL = "api_call"
    ENTITY_QUERY = "entity_query"


_PREFIXES = {InvokeType.API_CALL: "ApiCall", InvokeType.ENTITY_QUERY: "EntityQuery"}


class MalformedCall(ValueError):
    """A call prefix is present but the body cannot be parsed.

    Distinct from NotACall: a malformed call still counts as an attempted
    invocation when scoring invoke accuracy.
    """


class NotACall:
    """Sentinel returned for text that does not contain a call prefix."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotACall"

    def __bool__(self):
        return False


NOT_A_CALL = NotACall()


@dataclass
class ApiCall:
    """Structured external query: invocation type, method, name->value params.

    ``params`` is kept in canonical (lexicographic) key order; two calls that
    differ only in parameter order are equal.
    """

    invoke: InvokeType
    method: str
    params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.method:
            raise ValueError("ApiCall.method must be non-empty")
        self.params = {k: self.params[k] for k in sorted(self.params)}


def normalize_name(name: str) -> str:
    """Comparison key for method and parameter names: lowercase alphanumerics."""
    return re.sub(r"[^a-z0-9]", "", name.lower())


_PREFIX_RE = re.compile(r"(apicall|entityquery)\s*\(", re.IGNORECASE)
_QUOTES = ("'", '"')
_ESCAPE_RE = re.compile(r"([\\'])")


def _escape(text: str) -> str:
    return _ESCAPE_RE.sub(r"\\\1", text)


def serialize_api_call(call: ApiCall) -> str:
    """Canonical single-line form with lexicographic parameter order.

    ``ApiCall(method='M', parameters={'k1': 'v1', 'k2': 'v2'})``. Single quotes
    inside values are backslash-escaped so serialization always round-trips.
    """
    pairs = ", ".join(
        f"'{_escape(k)}': '{_escape(v)}'" for k, v in sorted(call.params.items())
    )
    return f"{_PREFIXES[call.invoke]}(method='{_escape(call.method)}', parameters={{{pairs}}})"


def _scan_body(text: str, start: int) -> str:
    """Return the call body between balanced parens starting at ``start``.

    Tracks quote state (with backslash escapes) so parens and commas inside
    quoted values are inert. Raises MalformedCall on unbalanced input.
    """
    depth = 1
    quote = None
    i = start
    n = len(text)
    while i < n:
        c = text[i]
        if quote is not None:
            if c == "\\":
                i += 2
                continue
            if c == quote:
                quote = None
        elif c in _QUOTES:
            quote = c
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return text[start:i]
        i += 1
    raise MalformedCall(
        "unbalanced quotes in call body" if quote else "unbalanced parentheses in call body"
    )


def _split_top_level(body: str) -> list[str]:
    """Split on commas that are outside quotes."""
    items = []
    buf = []
    quote = None
    i = 0
    while i < len(body):
        c = body[i]
        if quote is not None:
            buf.append(c)
            if c == "\\" and i + 1 < len(body):
                buf.append(body[i + 1])
                i += 2
                continue
            if c == quote:
                quote = None
        elif c in _QUOTES:
            quote = c
            buf.append(c)
        elif c == ",":
            items.append("".join(buf))
            buf = []
        else:
            buf.append(c)
        i += 1
    items.append("".join(buf))
    return [item.strip() for item in items if item.strip()]


def _split_method(body: str) -> tuple[str, str]:
    """Split the body into the method item and the remaining parameter text."""
    quote = None
    i = 0
    while i < len(body):
        c = body[i]
        if quote is not None:
            if c == "\\":
                i += 2
                continue
            if c == quote:
                quote = None
        elif c in _QUOTES:
            quote = c
        elif c == ",":
            return body[:i], body[i + 1 :]
        i += 1
    return body, ""


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] in _QUOTES and token[-1] == token[0]:
        inner = token[1:-1]
        return re.sub(r"\\(.)", r"\1", inner)
    return token


def _find_separator(item: str) -> int:
    """Index of the first ':' or '=' outside quotes, or -1."""
    quote = None
    i = 0
    while i < len(item):
        c = item[i]
        if quote is not None:
            if c == "\\":
                i += 2
                continue
            if c == quote:
                quote = None
        elif c in _QUOTES:
            quote = c
        elif c in ":=":
            return i
        i += 1
    return -1


def parse_api_call(text: str) -> ApiCall | NotACall:
    """Parse model output text into an ApiCall, or NOT_A_CALL for plain text.

    Accepts the full range of formats seen in practice: ``method=NAME`` or
    ``method='NAME'``, parameter blocks with or without the ``parameters=``
    keyword and with or without braces, pairs written ``'name': 'value'`` or
    ``name=value``, arbitrary internal whitespace. Raises MalformedCall when a
    call prefix is present but the body is unparseable.
    """
    m = _PREFIX_RE.search(text)
    if m is None:
        return NOT_A_CALL
    invoke = (
        InvokeType.API_CALL if m.group(1).lower() == "apicall" else InvokeType.ENTITY_QUERY
    )
    body = _scan_body(text, m.end())
    first, remainder = _split_method(body)
    first = first.strip()
    if not first:
        raise MalformedCall("empty call body")

    params: dict[str, str] = {}

    sep = _find_separator(first)
    if sep >= 0 and normalize_name(first[:sep]) == "method":
        method = _unquote(first[sep + 1 :])
    elif sep < 0:
        method = _unquote(first)
    else:
        raise MalformedCall(f"expected method, got {first!r}")
    if not method:
        raise MalformedCall("empty method name")

    remainder = remainder.strip()
    sep = _find_separator(remainder)
    if sep >= 0 and normalize_name(remainder[:sep]) == "parameters":
        remainder = remainder[sep + 1 :].strip()
    # Optional brace delimiters around the whole block; strip one layer
    # before splitting so the pairs inside separate normally.
    if remainder.startswith("{"):
        remainder = remainder[1:].strip()
        if remainder.endswith("}"):
            remainder = remainder[:-1].strip()
    param_items = _split_top_level(remainder)

    for item in param_items:
        sep = _find_separator(item)
        if sep < 0:
            raise MalformedCall(f"parameter without separator: {item!r}")
        name = _unquote(item[:sep])
        value = _unquote(item[sep + 1 :])
        if not name:
            raise MalformedCall(f"empty parameter name in {item!r}")
        params[name] = value

    return ApiCall(invoke=invoke, method=method, params=params)


def levenshtein(a: str, b: str) -> int:
    """Edit distance, two-row dynamic program."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(cur[-1] + 1, prev[j] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def _normalize_value(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] in _QUOTES and text[-1] == text[0]:
        text = text[1:-1]
    return " ".join(text.lower().split())


DEFAULT_FUZZY_THRESHOLD = 0.9


def fuzzy_match(a: str, b: str, threshold: float = DEFAULT_FUZZY_THRESHOLD) -> tuple[bool, float]:
    """Normalized edit-distance similarity of two slot values.

    Both sides are lowercased, whitespace-collapsed and stripped of surrounding
    quotes; score = 1 - distance / max(len). Returns (score >= threshold, score);
    two empty strings score 1.0.
    """
    na, nb = _normalize_value(a), _normalize_value(b)
    longest = max(len(na), len(nb))
    score = 1.0 if longest == 0 else 1.0 - levenshtein(na, nb) / longest
    return score >= threshold, score
