"""Raw annotated dialogs -> the annotation-free, turn-split example format.

The split inserts an explicit API-call turn ahead of every system response
that depended on an external query, and carries the query results into the
response turn's context. After the split, the only annotation keys left on
a turn are the transform's own (``_target_call`` on inserted call turns,
``_api_results`` on result-bearing response turns); the raw query keys are
consumed, which is what makes the operation idempotent.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .calls import ApiCall, InvokeType, serialize_api_call
from .corpus import Dataset, Dialog, DomainSchema, RawTurn, SlotDef, Speaker, base_domain

log = logging.getLogger(__name__)

ENTITY_QUERY_METHOD = "SearchEntity"


class InconsistentAnnotation(Exception):
    """A query annotation without its results, or results without a query."""


class TargetKind(str, Enum):
    RESPONSE = "response"
    API_CALL = "api_call"


class TurnCategory(str, Enum):
    SLOT_FILL = "slot_fill"
    RETRIEVAL = "retrieval"
    GENERAL = "general"


class SplitTag(str, Enum):
    SEEN = "seen"
    UNSEEN = "unseen"
    MIXED = "mixed"


_SLOT_FILL_ACTS = {"INFORM", "OFFER", "INFORM_COUNT", "RECOMMEND"}
_RETRIEVAL_ACTS = {"REQUEST"}


@dataclass(frozen=True)
class Target:
    kind: TargetKind
    call: ApiCall | None = None
    category: TurnCategory | None = None

    def __post_init__(self) -> None:
        if self.kind is TargetKind.API_CALL:
            if self.call is None or self.category is not None:
                raise ValueError("API_CALL target must carry exactly a call")
        else:
            if self.category is None or self.call is not None:
                raise ValueError("RESPONSE target must carry exactly a category")


@dataclass(frozen=True)
class PromptContext:
    domains: tuple[str, ...]
    schemas: tuple[DomainSchema, ...]
    # events of {"speaker": user|system|api_call|api_result, "text": ...}
    history: tuple[dict, ...]
    last_user_utterance: str
    api_results: tuple[dict, ...] | None = None


@dataclass(frozen=True)
class Example:
    example_id: str
    dialog_id: str
    turn_index: int
    dataset: Dataset
    split_tag: SplitTag
    prompt_context: PromptContext
    target: Target
    target_text: str

    def __post_init__(self) -> None:
        if self.target.kind is TargetKind.API_CALL:
            if self.target_text != serialize_api_call(self.target.call):
                raise ValueError(
                    f"{self.example_id}: target_text out of sync with its call"
                )

    @property
    def is_multi_domain(self) -> bool:
        return len({base_domain(d) for d in self.prompt_context.domains}) > 1


@dataclass(frozen=True)
class BuildConfig:
    max_api_results: int = 3


def _coerce_value(value) -> str:
    # BiToD constraints wrap values in relation dicts; lists join with commas.
    if isinstance(value, dict) and "value" in value:
        value = value["value"]
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return str(value)


def _call_params(raw: dict) -> dict[str, str]:
    return {str(k): _coerce_value(v) for k, v in raw.items()}


def _consume_queries(
    dialog: Dialog, index: int, turn: RawTurn
) -> tuple[list[tuple[ApiCall, list[dict]]], dict]:
    """Pull every external query off a system turn's annotations.

    Returns the (call, results) list in insertion order plus the turn's
    annotations with the consumed keys removed.
    """
    where = f"{dialog.dialog_id}[{index}]"
    queries: list[tuple[ApiCall, list[dict]]] = []
    cleaned = dict(turn.annotations)

    frames = turn.annotations.get("frames")
    if frames is not None:
        new_frames = []
        for frame in frames:
            frame = dict(frame)
            has_call = "service_call" in frame
            has_results = "service_results" in frame
            if has_call != has_results:
                raise InconsistentAnnotation(
                    f"{where}: service_call and service_results must co-occur"
                )
            if has_call:
                raw = frame.pop("service_call")
                results = frame.pop("service_results")
                call = ApiCall(
                    invoke=InvokeType.API_CALL,
                    method=str(raw.get("method", "")),
                    params=_call_params(raw.get("parameters", {})),
                )
                queries.append((call, [dict(r) for r in results]))
            new_frames.append(frame)
        cleaned["frames"] = new_frames

    if turn.annotations.get("enrich"):
        entities = turn.annotations.get("entity_query") or []
        snippets = turn.annotations.get("kg_snippets_text") or []
        if not entities or not snippets:
            raise InconsistentAnnotation(
                f"{where}: enrich turn missing entity_query or kg_snippets_text"
            )
        call = ApiCall(
            invoke=InvokeType.ENTITY_QUERY,
            method=ENTITY_QUERY_METHOD,
            params={f"query_{i + 1}": str(e) for i, e in enumerate(entities)},
        )
        queries.append((call, [{"snippet": str(s)} for s in snippets]))
        for key in ("enrich", "entity_query", "kg_snippets_text", "kg_snippets",
                    "enriched_utter"):
            cleaned.pop(key, None)

    if "kb_query" in turn.annotations or "kb_results" in turn.annotations:
        if "kb_query" not in turn.annotations or "kb_results" not in turn.annotations:
            raise InconsistentAnnotation(
                f"{where}: kb_query and kb_results must co-occur"
            )
        raw = turn.annotations["kb_query"]
        call = ApiCall(
            invoke=InvokeType.API_CALL,
            method=str(raw.get("method", "")),
            params=_call_params(raw.get("constraints", {})),
        )
        queries.append(
            (call, [dict(r) for r in turn.annotations["kb_results"]])
        )
        cleaned.pop("kb_query", None)
        cleaned.pop("kb_results", None)

    return queries, cleaned


def _call_to_dict(call: ApiCall) -> dict:
    return {
        "invoke": call.invoke.value,
        "method": call.method,
        "parameters": dict(call.params),
    }


def _call_from_dict(raw: dict) -> ApiCall:
    return ApiCall(
        invoke=InvokeType(raw["invoke"]),
        method=raw["method"],
        params=dict(raw["parameters"]),
    )


def split_api_turns(dialog: Dialog) -> Dialog:
    """Insert explicit API-call turns per the turn-splitting transform."""
    out: list[RawTurn] = []
    changed = False
    for index, turn in enumerate(dialog.turns):
        if turn.speaker is not Speaker.SYSTEM:
            out.append(turn)
            continue
        queries, cleaned = _consume_queries(dialog, index, turn)
        if not queries:
            out.append(turn)
            continue
        changed = True
        merged_results: list[dict] = []
        for call, results in queries:
            out.append(
                RawTurn(
                    speaker=Speaker.SYSTEM,
                    utterance=serialize_api_call(call),
                    annotations={"_target_call": _call_to_dict(call)},
                )
            )
            merged_results.extend(results)
        cleaned["_api_results"] = merged_results
        out.append(RawTurn(speaker=Speaker.SYSTEM, utterance=turn.utterance,
                           annotations=cleaned))
    if not changed:
        return dialog
    return Dialog(
        dialog_id=dialog.dialog_id,
        dataset=dialog.dataset,
        domains=dialog.domains,
        turns=tuple(out),
        source_split=dialog.source_split,
    )


def _turn_acts(turn: RawTurn) -> list[str]:
    acts = []
    for frame in turn.annotations.get("frames", []):
        acts.extend(a.get("act", "") for a in frame.get("actions", []))
    acts.extend(a.get("act", "") for a in turn.annotations.get("Actions", []))
    return [a.upper() for a in acts if a]


def label_turn_category(turn: RawTurn) -> TurnCategory:
    """Category of a SYSTEM response turn; SLOT_FILL wins on mixed acts."""
    acts = _turn_acts(turn)
    if not acts:
        log.warning("turn with no dialog acts labeled GENERAL: %r",
                    turn.utterance[:60])
        return TurnCategory.GENERAL
    if any(a in _SLOT_FILL_ACTS for a in acts):
        return TurnCategory.SLOT_FILL
    if any(a in _RETRIEVAL_ACTS for a in acts):
        return TurnCategory.RETRIEVAL
    return TurnCategory.GENERAL


def assign_domain_split(dialog: Dialog, train_domains: set[str]) -> SplitTag:
    """SEEN / UNSEEN / MIXED by base-domain membership in the training set."""
    if not train_domains:
        raise ValueError("train_domains must be non-empty")
    train_bases = {base_domain(d) for d in train_domains}
    bases = {base_domain(d) for d in dialog.domains}
    hits = bases & train_bases
    if hits == bases:
        return SplitTag.SEEN
    if not hits:
        return SplitTag.UNSEEN
    return SplitTag.MIXED


def render_results(records: list[dict] | tuple[dict, ...]) -> str:
    """Bounded result records as numbered name: value lines."""
    lines = []
    for i, record in enumerate(records, start=1):
        body = " | ".join(f"{k}: {_coerce_value(v)}" for k, v in record.items())
        lines.append(f"result {i}: {body}")
    return "\n".join(lines)


def build_examples(
    dialogs: list[Dialog],
    schemas: list[DomainSchema],
    train_domains: set[str],
    config: BuildConfig = BuildConfig(),
) -> list[Example]:
    """One Example per SYSTEM turn of every split dialog."""
    by_name = {s.domain_name: s for s in schemas}
    examples: list[Example] = []
    for dialog in dialogs:
        try:
            split = split_api_turns(dialog)
            tag = assign_domain_split(dialog, train_domains)
        except InconsistentAnnotation as exc:
            raise InconsistentAnnotation(f"{dialog.dialog_id}: {exc}") from exc
        ctx_schemas = tuple(by_name[d] for d in dialog.domains if d in by_name)
        if len(ctx_schemas) != len(dialog.domains):
            missing = [d for d in dialog.domains if d not in by_name]
            raise InconsistentAnnotation(
                f"{dialog.dialog_id}: no schema for domains {missing}"
            )
        history: list[dict] = []
        last_user = ""
        for index, turn in enumerate(split.turns):
            if turn.speaker is Speaker.USER:
                history.append({"speaker": "user", "text": turn.utterance})
                last_user = turn.utterance
                continue
            raw_results = turn.annotations.get("_api_results")
            api_results = None
            if raw_results is not None:
                api_results = tuple(raw_results[: config.max_api_results])
            call_raw = turn.annotations.get("_target_call")
            if call_raw is not None:
                target = Target(kind=TargetKind.API_CALL,
                                call=_call_from_dict(call_raw))
                target_text = serialize_api_call(target.call)
            else:
                target = Target(kind=TargetKind.RESPONSE,
                                category=label_turn_category(turn))
                target_text = turn.utterance
            examples.append(
                Example(
                    example_id=f"{dialog.dataset.value}/{dialog.dialog_id}/{index}",
                    dialog_id=dialog.dialog_id,
                    turn_index=index,
                    dataset=dialog.dataset,
                    split_tag=tag,
                    prompt_context=PromptContext(
                        domains=dialog.domains,
                        schemas=ctx_schemas,
                        history=tuple(history),
                        last_user_utterance=last_user,
                        api_results=api_results,
                    ),
                    target=target,
                    target_text=target_text,
                )
            )
            # the realized turn joins the history for later examples
            if api_results is not None:
                history.append({"speaker": "api_result",
                                "text": render_results(api_results)})
            if call_raw is not None:
                history.append({"speaker": "api_call", "text": target_text})
            else:
                history.append({"speaker": "system", "text": turn.utterance})
    return examples


# --- ExampleSet file format -------------------------------------------------
# One JSON object per line, keys sorted; this file is the contract between
# the build and evaluate stages (and the training side consumes it too).


def _schema_to_dict(schema: DomainSchema) -> dict:
    return {
        "domain_name": schema.domain_name,
        "description": schema.description,
        "intents": [[name, list(slots)] for name, slots in schema.intents],
        "slots": [
            {
                "name": s.name,
                "description": s.description,
                "is_categorical": s.is_categorical,
                "possible_values": list(s.possible_values),
            }
            for s in schema.slots
        ],
    }


def _schema_from_dict(raw: dict) -> DomainSchema:
    return DomainSchema(
        domain_name=raw["domain_name"],
        description=raw.get("description", ""),
        intents=tuple((name, tuple(slots)) for name, slots in raw["intents"]),
        slots=tuple(
            SlotDef(
                name=s["name"],
                description=s.get("description", ""),
                is_categorical=s["is_categorical"],
                possible_values=tuple(s["possible_values"]),
            )
            for s in raw["slots"]
        ),
    )


def example_to_dict(example: Example, prompt: str | None = None) -> dict:
    target: dict = {"kind": example.target.kind.value}
    if example.target.call is not None:
        target["call"] = _call_to_dict(example.target.call)
    if example.target.category is not None:
        target["category"] = example.target.category.value
    ctx = example.prompt_context
    record = {
        "example_id": example.example_id,
        "dialog_id": example.dialog_id,
        "turn_index": example.turn_index,
        "dataset": example.dataset.value,
        "split_tag": example.split_tag.value,
        "prompt_context": {
            "domains": list(ctx.domains),
            "schemas": [_schema_to_dict(s) for s in ctx.schemas],
            "history": list(ctx.history),
            "last_user_utterance": ctx.last_user_utterance,
            "api_results": list(ctx.api_results) if ctx.api_results is not None else None,
        },
        "target": target,
        "target_text": example.target_text,
    }
    if prompt is not None:
        record["prompt"] = prompt
    return record


def example_from_dict(raw: dict) -> Example:
    ctx = raw["prompt_context"]
    target_raw = raw["target"]
    target = Target(
        kind=TargetKind(target_raw["kind"]),
        call=_call_from_dict(target_raw["call"]) if "call" in target_raw else None,
        category=(TurnCategory(target_raw["category"])
                  if "category" in target_raw else None),
    )
    api_results = ctx.get("api_results")
    return Example(
        example_id=raw["example_id"],
        dialog_id=raw["dialog_id"],
        turn_index=raw["turn_index"],
        dataset=Dataset(raw["dataset"]),
        split_tag=SplitTag(raw["split_tag"]),
        prompt_context=PromptContext(
            domains=tuple(ctx["domains"]),
            schemas=tuple(_schema_from_dict(s) for s in ctx["schemas"]),
            history=tuple(ctx["history"]),
            last_user_utterance=ctx["last_user_utterance"],
            api_results=tuple(api_results) if api_results is not None else None,
        ),
        target=target,
        target_text=raw["target_text"],
    )


def write_examples(path: str | Path, examples: list[Example],
                   render=None) -> None:
    """Write the ExampleSet; ``render(example) -> str`` adds a prompt field."""
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            prompt = render(example) if render is not None else None
            fh.write(json.dumps(example_to_dict(example, prompt),
                                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_examples(path: str | Path) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                examples.append(example_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad example record: {exc}")
    return examples
