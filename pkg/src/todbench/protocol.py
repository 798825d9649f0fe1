"""The HTTP generation protocol: one POST endpoint, one health probe.

This module is the single source of truth for the wire contract between the
evaluation runner and any generation backend. Backends implement it; the
runner's HTTP client speaks it; `run_conformance` probes a live server and
reports, check by check, whether it honors the contract.

Contract:
  POST /generate   body {"prompt": str, "max_new_units": int, "greedy": bool}
                   -> 200 with body {"text": str}; 400 on malformed requests
  GET  /healthz    -> 200 once the backend is ready to generate
  Any 5xx response is retryable; 4xx is not.
  Optional bearer auth: clients send ``Authorization: Bearer $TODBENCH_HTTP_TOKEN``
  when that environment variable is set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import requests

GENERATE_PATH = "/generate"
HEALTH_PATH = "/healthz"
AUTH_TOKEN_ENV = "TODBENCH_HTTP_TOKEN"
REQUEST_FIELDS = ("prompt", "max_new_units", "greedy")
RESPONSE_FIELD = "text"

DEFAULT_RETRIES = 3
DEFAULT_TIMEOUT_SECONDS = 30.0
BACKOFF_BASE_SECONDS = 0.25


class ProtocolViolation(RuntimeError):
    """A live backend failed one or more conformance checks."""


def auth_headers(environ: dict | None = None) -> dict[str, str]:
    """Bearer-token header when the auth env var is set, else empty."""
    token = (environ if environ is not None else os.environ).get(AUTH_TOKEN_ENV)
    return {"Authorization": f"Bearer {token}"} if token else {}


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    ok: bool
    detail: str


def _generate(base_url: str, body, timeout: float, *,
              raw: bytes | None = None) -> requests.Response:
    headers = auth_headers()
    if raw is not None:
        headers["Content-Type"] = "application/json"
        return requests.post(base_url + GENERATE_PATH, data=raw,
                             headers=headers, timeout=timeout)
    return requests.post(base_url + GENERATE_PATH, json=body,
                         headers=headers, timeout=timeout)


def run_conformance(base_url: str, *, timeout: float = 10.0,
                    prompt: str = "User: hello there\nSystem:",
                    max_new_units: int = 16) -> list[ConformanceCheck]:
    """Probe a live server against every clause of the protocol.

    Returns one check per clause; never raises on a misbehaving server
    (transport errors become failing checks). Use ``assert_conformant`` for
    a single pass/fail call.
    """
    base_url = base_url.rstrip("/")
    checks: list[ConformanceCheck] = []

    def record(name: str, ok: bool, detail: str = "") -> None:
        checks.append(ConformanceCheck(name=name, ok=ok, detail=detail))

    try:
        health = requests.get(base_url + HEALTH_PATH,
                              headers=auth_headers(), timeout=timeout)
        record("healthz_returns_200", health.status_code == 200,
               f"status {health.status_code}")
    except requests.RequestException as exc:
        record("healthz_returns_200", False, f"transport error: {exc}")
    if not checks[-1].ok:
        return checks  # not ready; nothing else is worth probing

    body = {"prompt": prompt, "max_new_units": max_new_units, "greedy": True}
    texts: list[str] = []
    for attempt in ("generate_returns_text", "greedy_is_deterministic"):
        try:
            reply = _generate(base_url, body, timeout)
        except requests.RequestException as exc:
            record(attempt, False, f"transport error: {exc}")
            continue
        if reply.status_code != 200:
            record(attempt, False, f"status {reply.status_code}")
            continue
        try:
            payload = reply.json()
        except ValueError:
            record(attempt, False, "response body is not JSON")
            continue
        text = payload.get(RESPONSE_FIELD)
        if not isinstance(text, str):
            record(attempt, False,
                   f"missing or non-string {RESPONSE_FIELD!r} field")
            continue
        texts.append(text)
        if attempt == "generate_returns_text":
            record(attempt, True)
        else:
            record(attempt, len(texts) == 2 and texts[0] == texts[1],
                   "two identical greedy requests returned different text"
                   if len(texts) == 2 and texts[0] != texts[1] else "")

    try:
        bad = _generate(base_url, None, timeout, raw=b"this is not json")
        record("malformed_body_rejected_400", bad.status_code == 400,
               f"status {bad.status_code}")
    except requests.RequestException as exc:
        record("malformed_body_rejected_400", False, f"transport error: {exc}")

    try:
        missing = _generate(base_url, {"max_new_units": 4, "greedy": True},
                            timeout)
        record("missing_prompt_rejected_400", missing.status_code == 400,
               f"status {missing.status_code}")
    except requests.RequestException as exc:
        record("missing_prompt_rejected_400", False, f"transport error: {exc}")

    try:
        lost = requests.get(base_url + "/definitely-not-a-route",
                            headers=auth_headers(), timeout=timeout)
        record("unknown_path_returns_404", lost.status_code == 404,
               f"status {lost.status_code}")
    except requests.RequestException as exc:
        record("unknown_path_returns_404", False, f"transport error: {exc}")

    return checks


def assert_conformant(base_url: str, *, timeout: float = 10.0) -> None:
    """Raise ProtocolViolation listing every failed conformance check."""
    failures = [c for c in run_conformance(base_url, timeout=timeout) if not c.ok]
    if failures:
        lines = "; ".join(f"{c.name} ({c.detail})" for c in failures)
        raise ProtocolViolation(f"{base_url} violates the protocol: {lines}")
