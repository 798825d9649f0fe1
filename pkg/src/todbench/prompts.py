"""Prompt renderers driven by the versioned template files.

Each template set is a directory of numbered section files; the number pins
the section order and the filename suffix names the section. Rendering is a
pure function of (context, config): section files are substituted with
string.Template and joined with blank lines. The history and API-result
sections drop out when their content is empty.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from string import Template

from .transform import PromptContext, render_results

TEMPLATE_ROOT = Path(__file__).parent / "templates"


class TemplateKind(str, Enum):
    FINETUNE = "finetune"
    BASELINE = "baseline"


class MissingSchema(Exception):
    """The context's domains are not covered by its schemas."""


class BudgetTooSmall(Exception):
    """Even the mandatory prompt tail exceeds max_context_units."""


@dataclass(frozen=True)
class PromptConfig:
    template: TemplateKind = TemplateKind.FINETUNE
    max_context_units: int = 1000  # whitespace-delimited units, not tokens
    include_api_results: bool = True

    def __post_init__(self) -> None:
        if self.max_context_units <= 0:
            raise ValueError("max_context_units must be positive")


def _units(text: str) -> int:
    return len(text.split())


def _chunk_history(history) -> list[list[dict]]:
    """Group events into user-led chunks (a user event plus its followers)."""
    chunks: list[list[dict]] = []
    for event in history:
        if event["speaker"] == "user" or not chunks:
            chunks.append([event])
        else:
            chunks[-1].append(event)
    return chunks


def truncate_history(
    history, budget: int, reserved_units: int = 0
) -> tuple[tuple[dict, ...], int]:
    """Drop oldest user-led chunks until the history fits the unit budget.

    ``reserved_units`` accounts for content that must share the budget and
    can never be dropped (the pending API-result block). Returns the kept
    suffix and the number of dropped events.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    chunks = _chunk_history(history)
    if not chunks:
        if reserved_units > budget:
            raise BudgetTooSmall(
                f"reserved content needs {reserved_units} units, budget {budget}"
            )
        return (), 0
    cost = [sum(_units(e["text"]) for e in chunk) for chunk in chunks]
    mandatory = cost[-1] + reserved_units
    if mandatory > budget:
        raise BudgetTooSmall(
            f"mandatory tail needs {mandatory} units, budget {budget}"
        )
    total = sum(cost) + reserved_units
    start = 0
    while total > budget:
        total -= cost[start]
        start += 1
    kept = [e for chunk in chunks[start:] for e in chunk]
    dropped = sum(len(chunk) for chunk in chunks[:start])
    return tuple(kept), dropped


def _history_block(history) -> str:
    lines = []
    for event in history:
        speaker = event["speaker"]
        if speaker == "user":
            lines.append(f"User: {event['text']}")
        elif speaker == "api_result":
            lines.append(event["text"])
        else:  # system turns and api_call turns are both system output
            lines.append(f"System: {event['text']}")
    return "\n".join(lines)


def _schemas_block(schemas) -> str:
    parts = []
    for schema in schemas:
        lines = [f"Domain: {schema.domain_name}"]
        if schema.description:
            lines[0] += f" — {schema.description}"
        if schema.intents:
            lines.append("  Intents:")
            for intent, slots in schema.intents:
                uses = f" (uses: {', '.join(slots)})" if slots else ""
                lines.append(f"    {intent}{uses}")
        if schema.slots:
            lines.append("  Slots:")
            for slot in schema.slots:
                desc = slot.description
                if slot.is_categorical:
                    values = ", ".join(slot.possible_values)
                    desc = f"{desc} (one of: {values})" if desc else f"one of: {values}"
                lines.append(f"    {slot.name}: {desc}" if desc
                             else f"    {slot.name}")
        parts.append("\n".join(lines))
    return "\n".join(parts)


@lru_cache(maxsize=None)
def template_fingerprint(kind: TemplateKind) -> str:
    """Stable digest of a template set: filenames plus contents.

    Recorded in run manifests so a report can be traced to the exact template
    text that produced its prompts.
    """
    digest = hashlib.sha256()
    for path in sorted((TEMPLATE_ROOT / kind.value).glob("*.txt")):
        digest.update(path.name.encode())
        digest.update(b"\x00")
        digest.update(path.read_bytes())
    return f"{kind.value}:{digest.hexdigest()[:16]}"


@lru_cache(maxsize=None)
def _sections(kind: TemplateKind) -> tuple[tuple[str, Template], ...]:
    directory = TEMPLATE_ROOT / kind.value
    sections = []
    for path in sorted(directory.glob("*.txt")):
        name = path.stem.split("_", 1)[1]
        sections.append((name, Template(path.read_text())))
    if not sections:
        raise FileNotFoundError(f"no template sections under {directory}")
    return tuple(sections)


def _render(kind: TemplateKind, ctx: PromptContext, config: PromptConfig) -> str:
    if not ctx.domains:
        raise MissingSchema("prompt context names no domains")
    covered = {s.domain_name for s in ctx.schemas}
    missing = [d for d in ctx.domains if d not in covered]
    if missing:
        raise MissingSchema(f"no schema provided for {missing}")
    results_text = ""
    if config.include_api_results and ctx.api_results:
        results_text = render_results(ctx.api_results)
    history, _ = truncate_history(
        ctx.history, config.max_context_units, reserved_units=_units(results_text)
    )
    values = {
        "domains": ", ".join(ctx.domains),
        "schemas": _schemas_block(ctx.schemas),
        "history": _history_block(history),
        "api_results": results_text,
        "last_user_utterance": ctx.last_user_utterance,
    }
    parts = []
    for name, template in _sections(kind):
        if name == "history" and not history:
            continue
        if name == "api_results" and not results_text:
            continue
        parts.append(template.substitute(values).strip("\n"))
    return "\n\n".join(parts) + "\n"


def render_finetune_prompt(ctx: PromptContext,
                           config: PromptConfig | None = None) -> str:
    return _render(TemplateKind.FINETUNE, ctx, config or PromptConfig())


def render_baseline_prompt(ctx: PromptContext,
                           config: PromptConfig | None = None) -> str:
    return _render(
        TemplateKind.BASELINE, ctx,
        config or PromptConfig(template=TemplateKind.BASELINE),
    )


def render_prompt(ctx: PromptContext, config: PromptConfig) -> str:
    """Dispatch on config.template; the CLI entry point."""
    return _render(config.template, ctx, config)
