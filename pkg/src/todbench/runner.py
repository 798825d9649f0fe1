"""End-to-end evaluation: pluggable generation clients, scoring, reporting.

`evaluate` streams an ExampleSet through a client (mock or HTTP), scores every
prediction, and aggregates a MetricReport. Generation runs under a bounded
thread pool; scoring is a sequential pass over the id-sorted records, so a
run's machine-readable outputs are byte-identical regardless of concurrency.

Evaluation conditions on gold history (teacher forcing): each example's prompt
is rendered from the recorded context, never from earlier predictions, which
is what makes per-example parallelism sound.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

from . import protocol
from .apimetrics import (
    ApiTurnScore,
    MetricReport,
    ReportRow,
    aggregate,
    render_tables,
    score_api_turn,
)
from .calls import MalformedCall, NotACall, parse_api_call
from .prompts import PromptConfig, render_prompt, template_fingerprint
from .textmetrics import ScoredPair
from .transform import Example, TargetKind

log = logging.getLogger(__name__)


class ConfigInvalid(ValueError):
    """The evaluation configuration or example set fails pre-flight checks."""


class ClientUnreachable(ConnectionError):
    """The generation backend failed its pre-flight probe."""


class GenerationError(RuntimeError):
    """A single generate call failed after retries; the run continues."""


@dataclass(frozen=True)
class EvalConfig:
    fuzzy_threshold: float = 0.9
    concurrency: int = 8
    max_new_units: int = 120
    include_strict: bool = False
    prompt: PromptConfig = field(default_factory=PromptConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.fuzzy_threshold <= 1.0:
            raise ConfigInvalid(
                f"fuzzy_threshold must be in (0, 1], got {self.fuzzy_threshold}"
            )
        if self.concurrency < 1:
            raise ConfigInvalid(f"concurrency must be >= 1, got {self.concurrency}")
        if self.max_new_units < 1:
            raise ConfigInvalid(
                f"max_new_units must be >= 1, got {self.max_new_units}"
            )


@dataclass(frozen=True)
class GenerationRequest:
    """What a client may look at. Mock clients use the id/gold channel;
    the HTTP client sends only prompt, budget, and the greedy flag."""

    example_id: str
    prompt: str
    max_new_units: int
    gold_text: str


class GoldenClient:
    """Echoes the gold target text: the upper-bound / plumbing-check client."""

    name = "golden"

    def check_ready(self) -> None:
        return None

    def generate(self, request: GenerationRequest) -> str:
        return request.gold_text


class ScriptedClient:
    """Replays a recording: a JSON object mapping example_id -> output text."""

    def __init__(self, recording: str | Path | dict[str, str]):
        if isinstance(recording, (str, Path)):
            self.name = f"scripted:{recording}"
            raw = json.loads(Path(recording).read_text(encoding="utf-8"))
        else:
            self.name = "scripted:<memory>"
            raw = recording
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise ConfigInvalid(
                "a scripted recording must map example_id strings to text"
            )
        self._outputs = dict(raw)

    def check_ready(self) -> None:
        return None

    def generate(self, request: GenerationRequest) -> str:
        try:
            return self._outputs[request.example_id]
        except KeyError:
            raise GenerationError(
                f"recording has no output for {request.example_id}"
            ) from None


class HttpClient:
    """Speaks the generation protocol; retries 5xx and transport errors."""

    def __init__(self, base_url: str, *,
                 retries: int = protocol.DEFAULT_RETRIES,
                 timeout: float = protocol.DEFAULT_TIMEOUT_SECONDS,
                 backoff: float = protocol.BACKOFF_BASE_SECONDS,
                 sleep=time.sleep):
        self.base_url = base_url.rstrip("/")
        self.name = f"http:{self.base_url}"
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self._sleep = sleep
        self._session = requests.Session()

    def check_ready(self) -> None:
        url = self.base_url + protocol.HEALTH_PATH
        try:
            reply = self._session.get(url, headers=protocol.auth_headers(),
                                      timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientUnreachable(f"{url}: {exc}") from exc
        if reply.status_code != 200:
            raise ClientUnreachable(f"{url}: status {reply.status_code}")

    def generate(self, request: GenerationRequest) -> str:
        body = {
            "prompt": request.prompt,
            "max_new_units": request.max_new_units,
            "greedy": True,
        }
        url = self.base_url + protocol.GENERATE_PATH
        last_error = "no attempt made"
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                reply = self._session.post(url, json=body,
                                           headers=protocol.auth_headers(),
                                           timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if reply.status_code >= 500:
                last_error = f"status {reply.status_code}"
                continue
            if reply.status_code != 200:
                raise GenerationError(f"{url}: status {reply.status_code}")
            try:
                text = reply.json().get(protocol.RESPONSE_FIELD)
            except ValueError:
                raise GenerationError(f"{url}: response body is not JSON")
            if not isinstance(text, str):
                raise GenerationError(
                    f"{url}: missing {protocol.RESPONSE_FIELD!r} field"
                )
            return text
        raise GenerationError(
            f"{url}: gave up after {self.retries + 1} attempts ({last_error})"
        )


def make_client(spec: str, **http_kwargs):
    """Build a client from its CLI spec: golden | scripted:<file> | http:<url>."""
    if spec == "golden":
        return GoldenClient()
    if spec.startswith("scripted:"):
        return ScriptedClient(spec.split(":", 1)[1])
    if spec.startswith(("http://", "https://")):
        return HttpClient(spec, **http_kwargs)
    if spec.startswith("http:"):
        return HttpClient("http://" + spec.split(":", 1)[1].lstrip("/"),
                          **http_kwargs)
    raise ConfigInvalid(
        f"unknown client spec {spec!r} (want golden | scripted:<file> | http:<url>)"
    )


@dataclass(frozen=True)
class ExampleRecord:
    example_id: str
    prompt_hash: str
    prediction: str
    gold: str
    task: str  # api_call | response
    category: str  # empty for api_call tasks
    split_tag: str
    dataset: str
    is_multi_domain: bool
    error: str = ""


@dataclass(frozen=True)
class RunResult:
    records: tuple[ExampleRecord, ...]
    report: MetricReport
    manifest: dict


def _record_dict(record: ExampleRecord) -> dict:
    return {
        "example_id": record.example_id,
        "prompt_hash": record.prompt_hash,
        "prediction": record.prediction,
        "gold": record.gold,
        "task": record.task,
        "category": record.category,
        "split_tag": record.split_tag,
        "dataset": record.dataset,
        "is_multi_domain": record.is_multi_domain,
        "error": record.error,
    }


def _is_call_attempt(text: str) -> bool:
    try:
        return not isinstance(parse_api_call(text), NotACall)
    except MalformedCall:
        return True


def score_records(examples: list[Example], records: list[ExampleRecord],
                  config: EvalConfig) -> MetricReport:
    """Pure scoring pass: route each record, then aggregate.

    Predictions on gold API-call turns go to the API metrics whatever their
    shape. Predictions on gold response turns go to the text metrics unless
    they look like a call attempt, in which case they are excluded from
    BLEU/GLEU and counted in the auxiliary false-invoke rate.
    """
    by_id = {example.example_id: example for example in examples}
    api_scores: list[ApiTurnScore] = []
    response_pairs: list[ScoredPair] = []
    false_invokes: list[ScoredPair] = []
    for record in records:
        example = by_id[record.example_id]
        if example.target.kind is TargetKind.API_CALL:
            api_scores.append(score_api_turn(
                example.target.call,
                record.prediction,
                fuzzy_threshold=config.fuzzy_threshold,
                is_multi_domain=example.is_multi_domain,
                split_tag=record.split_tag,
                dataset=record.dataset,
            ))
            continue
        pair = ScoredPair(
            prediction=record.prediction,
            reference=record.gold,
            category=record.category,
            split_tag=record.split_tag,
            dataset=record.dataset,
        )
        if _is_call_attempt(record.prediction):
            false_invokes.append(pair)
        else:
            response_pairs.append(pair)
    return aggregate(api_scores, response_pairs, false_invokes,
                     include_strict=config.include_strict)


def evaluate(examples: list[Example], client,
             config: EvalConfig | None = None,
             build_meta: dict | None = None) -> RunResult:
    """Run the full pipeline; total over per-example failures.

    Raises ConfigInvalid / ClientUnreachable only from pre-flight checks; a
    generate call that fails after retries becomes a record with an error
    note and an empty prediction, which scores zero.
    """
    config = config or EvalConfig()
    seen_ids: set[str] = set()
    for example in examples:
        if example.example_id in seen_ids:
            raise ConfigInvalid(f"duplicate example_id {example.example_id}")
        seen_ids.add(example.example_id)
    client.check_ready()

    started = datetime.now(timezone.utc).isoformat()
    if not examples:
        log.warning("evaluate called with an empty example set")
    ordered = sorted(examples, key=lambda e: e.example_id)

    def run_one(example: Example) -> ExampleRecord:
        prompt = render_prompt(example.prompt_context, config.prompt)
        request = GenerationRequest(
            example_id=example.example_id,
            prompt=prompt,
            max_new_units=config.max_new_units,
            gold_text=example.target_text,
        )
        prediction, error = "", ""
        try:
            prediction = client.generate(request)
        except Exception as exc:  # fault isolation: the run never aborts
            error = f"{type(exc).__name__}: {exc}"
        is_response = example.target.kind is TargetKind.RESPONSE
        return ExampleRecord(
            example_id=example.example_id,
            prompt_hash=hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16],
            prediction=prediction,
            gold=example.target_text,
            task=example.target.kind.value,
            category=example.target.category.value if is_response else "",
            split_tag=example.split_tag.value,
            dataset=example.dataset.value,
            is_multi_domain=example.is_multi_domain,
            error=error,
        )

    if ordered:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            records = list(pool.map(run_one, ordered))
    else:
        records = []

    report = score_records(ordered, records, config)
    failures = sum(1 for r in records if r.error)
    if failures:
        log.warning("%d of %d generate calls failed and scored zero",
                    failures, len(records))
    manifest = {
        "client": client.name,
        "config": {
            "fuzzy_threshold": config.fuzzy_threshold,
            "concurrency": config.concurrency,
            "max_new_units": config.max_new_units,
            "include_strict": config.include_strict,
            "template": config.prompt.template.value,
            "template_fingerprint": template_fingerprint(config.prompt.template),
            "max_context_units": config.prompt.max_context_units,
            "include_api_results": config.prompt.include_api_results,
        },
        "examples": len(records),
        "generation_failures": failures,
        "train_domains": (build_meta or {}).get("train_domains"),
        "build_meta": build_meta or {},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    return RunResult(records=tuple(records), report=report, manifest=manifest)


# --- report files -------------------------------------------------------------

ROWS_FILENAME = "report_rows.jsonl"
TABLES_FILENAME = "report_tables.txt"
RECORDS_FILENAME = "records.jsonl"
MANIFEST_FILENAME = "manifest.json"


def _row_dict(row: ReportRow) -> dict:
    return {
        "dataset": row.dataset,
        "task": row.task,
        "split_tag": row.split_tag,
        "metric": row.metric,
        "value": row.value,
        "support": row.support,
    }


def generate_report(result: RunResult, out_dir: str | Path,
                    formats: tuple[str, ...] = ("rows", "tables")) -> list[Path]:
    """Write the run artifacts; rows/records files are deterministic bytes.

    Timestamps live only in manifest.json, so everything else is reproducible
    byte for byte from the same inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    emit(RECORDS_FILENAME, "".join(
        json.dumps(_record_dict(r), ensure_ascii=False, sort_keys=True) + "\n"
        for r in result.records
    ))
    emit(MANIFEST_FILENAME,
         json.dumps(result.manifest, ensure_ascii=False, indent=2,
                    sort_keys=True) + "\n")
    if "rows" in formats:
        emit(ROWS_FILENAME, "".join(
            json.dumps(_row_dict(row), ensure_ascii=False, sort_keys=True) + "\n"
            for row in result.report.rows
        ))
    if "tables" in formats:
        emit(TABLES_FILENAME, render_tables(result.report))
    return written


def load_report_rows(path: str | Path) -> MetricReport:
    """Rebuild a MetricReport from its machine-readable row file."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            rows.append(ReportRow(
                dataset=raw["dataset"], task=raw["task"],
                split_tag=raw["split_tag"], metric=raw["metric"],
                value=raw["value"], support=raw["support"],
            ))
    return MetricReport(rows=tuple(rows))
