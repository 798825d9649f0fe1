"""Unified corpus model and loaders for the three raw dialog dataset layouts.

Each loader reads a dataset directory as published and produces the same
in-memory shape: a list of DomainSchema plus a list of Dialog whose turns
keep their per-dataset annotation dicts verbatim. Only the transform module
interprets those annotation blobs; everything downstream of it is
annotation-free.

Layouts expected on disk:

* SGD: ``train/ dev/ test/`` directories, each holding ``schema.json`` and
  one or more ``dialogues_*.json`` files.
* KETOD: ``train.json dev.json test.json`` dialog lists (SGD dialogs merged
  with knowledge-enrichment keys) plus a merged ``schema.json`` at the root.
* BiToD: ``{lang}_train.json {lang}_valid.json {lang}_test.json`` dialog
  maps plus ``ontology.json`` (intents with their domains and slots).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class Dataset(str, Enum):
    SGD = "sgd"
    KETOD = "ketod"
    BITOD = "bitod"


class Speaker(str, Enum):
    USER = "user"
    SYSTEM = "system"


class CorpusError(Exception):
    """Base class for corpus loading failures."""


class MissingFile(CorpusError):
    pass


class MalformedRecord(CorpusError):
    pass


class UnknownDomainReference(CorpusError):
    pass


@dataclass(frozen=True)
class SlotDef:
    name: str
    description: str = ""
    is_categorical: bool = False
    possible_values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise MalformedRecord("slot with empty name")
        if self.is_categorical != bool(self.possible_values):
            raise MalformedRecord(
                f"slot {self.name!r}: possible_values must be non-empty "
                "exactly when is_categorical"
            )


@dataclass(frozen=True)
class DomainSchema:
    domain_name: str
    description: str = ""
    # (intent_name, relevant slot names) in schema order
    intents: tuple[tuple[str, tuple[str, ...]], ...] = ()
    slots: tuple[SlotDef, ...] = ()

    def __post_init__(self) -> None:
        slot_names = [s.name for s in self.slots]
        if len(set(slot_names)) != len(slot_names):
            raise MalformedRecord(f"{self.domain_name}: duplicate slot names")
        intent_names = [i for i, _ in self.intents]
        if len(set(intent_names)) != len(intent_names):
            raise MalformedRecord(f"{self.domain_name}: duplicate intent names")
        known = set(slot_names)
        for intent, slots in self.intents:
            missing = [s for s in slots if s not in known]
            if missing:
                raise MalformedRecord(
                    f"{self.domain_name}/{intent}: unknown slots {missing}"
                )

    def slot(self, name: str) -> SlotDef | None:
        for s in self.slots:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class RawTurn:
    speaker: Speaker
    utterance: str
    annotations: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    dataset: Dataset
    domains: tuple[str, ...]
    turns: tuple[RawTurn, ...]
    source_split: str = ""


@dataclass(frozen=True)
class Stats:
    n_dialogs: int
    n_domains: int
    avg_turns_per_dialog: float


# Published per-dataset statistics used by the ingest report. The SGD row
# describes the train split (whose service list spans 16 base domains); the
# full three-split corpus reaches 20 domains, and ingest reports both counts
# side by side rather than forcing agreement.
REFERENCE_STATS: dict[Dataset, tuple[str, Stats]] = {
    Dataset.SGD: ("train", Stats(16142, 16, 20.44)),
    Dataset.KETOD: ("all", Stats(5324, 13, 9.78)),
    Dataset.BITOD: ("all", Stats(3689, 5, 9.39)),
}

_VARIANT_SUFFIX = re.compile(r"_\d+$")


def base_domain(service_name: str) -> str:
    """Collapse schema-service variants: Restaurants_2 -> Restaurants."""
    return _VARIANT_SUFFIX.sub("", service_name)


def _read_json(path: Path):
    if not path.exists():
        raise MissingFile(str(path))
    try:
        return json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRecord(f"{path}: {exc}") from exc


def _check_alternation(dialog_id: str, source: str, turns: list[RawTurn]) -> None:
    for i, turn in enumerate(turns):
        expect = Speaker.USER if i % 2 == 0 else Speaker.SYSTEM
        if turn.speaker is not expect:
            raise MalformedRecord(
                f"{source}: dialog {dialog_id} turn {i} is {turn.speaker.value}, "
                f"expected {expect.value}"
            )
        if not turn.utterance:
            raise MalformedRecord(
                f"{source}: dialog {dialog_id} turn {i} has an empty utterance"
            )


def _check_domains(dialog: Dialog, known: set[str], source: str) -> None:
    unknown = [d for d in dialog.domains if d not in known]
    if unknown:
        raise UnknownDomainReference(
            f"{source}: dialog {dialog.dialog_id} references unknown "
            f"domains {unknown}"
        )


def _parse_sgd_schema(entry: dict, source: str) -> DomainSchema:
    try:
        slots = tuple(
            SlotDef(
                name=s["name"],
                description=s.get("description", ""),
                is_categorical=bool(s.get("is_categorical", False)),
                possible_values=tuple(s.get("possible_values", [])),
            )
            for s in entry.get("slots", [])
        )
        intents = tuple(
            (
                i["name"],
                tuple(i.get("required_slots", []))
                + tuple(i.get("optional_slots", {})),
            )
            for i in entry.get("intents", [])
        )
        return DomainSchema(
            domain_name=entry["service_name"],
            description=entry.get("description", ""),
            intents=intents,
            slots=slots,
        )
    except KeyError as exc:
        raise MalformedRecord(f"{source}: schema entry missing {exc}") from exc


def _parse_sgd_turn(raw: dict, dialog_id: str, source: str) -> RawTurn:
    try:
        speaker = Speaker(raw["speaker"].lower())
        utterance = raw["utterance"]
    except (KeyError, ValueError) as exc:
        raise MalformedRecord(
            f"{source}: dialog {dialog_id} has a bad turn record: {exc}"
        ) from exc
    annotations = {k: v for k, v in raw.items() if k not in ("speaker", "utterance")}
    return RawTurn(speaker=speaker, utterance=utterance, annotations=annotations)


def _parse_sgd_dialog(
    raw: dict, dataset: Dataset, split: str, source: str
) -> Dialog:
    try:
        dialog_id = str(raw["dialogue_id"])
        services = tuple(raw["services"])
        raw_turns = raw["turns"]
    except KeyError as exc:
        raise MalformedRecord(f"{source}: dialog record missing {exc}") from exc
    turns = [_parse_sgd_turn(t, dialog_id, source) for t in raw_turns]
    _check_alternation(dialog_id, source, turns)
    return Dialog(
        dialog_id=dialog_id,
        dataset=dataset,
        domains=services,
        turns=tuple(turns),
        source_split=split,
    )


def load_sgd(path: str | Path) -> tuple[list[DomainSchema], list[Dialog]]:
    root = Path(path)
    splits = [d for d in ("train", "dev", "test") if (root / d).is_dir()]
    if not splits:
        raise MissingFile(f"{root}: no train/dev/test directories found")
    schemas: dict[str, DomainSchema] = {}
    dialogs: list[Dialog] = []
    for split in splits:
        schema_file = root / split / "schema.json"
        for entry in _read_json(schema_file):
            schema = _parse_sgd_schema(entry, str(schema_file))
            schemas.setdefault(schema.domain_name, schema)
        dialog_files = sorted((root / split).glob("dialogues_*.json"))
        if not dialog_files:
            raise MissingFile(f"{root / split}: no dialogues_*.json files")
        for f in dialog_files:
            for raw in _read_json(f):
                dialogs.append(_parse_sgd_dialog(raw, Dataset.SGD, split, str(f)))
    known = set(schemas)
    for dialog in dialogs:
        _check_domains(dialog, known, str(root))
    dialogs.sort(key=lambda d: (d.dataset.value, d.dialog_id))
    return list(schemas.values()), dialogs


def load_ketod(path: str | Path) -> tuple[list[DomainSchema], list[Dialog]]:
    root = Path(path)
    schemas = [
        _parse_sgd_schema(entry, str(root / "schema.json"))
        for entry in _read_json(root / "schema.json")
    ]
    dialogs: list[Dialog] = []
    # KETOD keeps the enriched utterance alongside the original; the corpus
    # exposes the enriched one as THE utterance (it is what the system said)
    # and leaves both in annotations for the transform.
    for split in ("train", "dev", "test"):
        split_file = root / f"{split}.json"
        if not split_file.exists():
            raise MissingFile(str(split_file))
        for raw in _read_json(split_file):
            dialog = _parse_sgd_dialog(raw, Dataset.KETOD, split, str(split_file))
            turns = []
            for turn in dialog.turns:
                if turn.annotations.get("enrich") and turn.annotations.get(
                    "enriched_utter"
                ):
                    turn = RawTurn(
                        speaker=turn.speaker,
                        utterance=turn.annotations["enriched_utter"],
                        annotations=turn.annotations,
                    )
                turns.append(turn)
            dialogs.append(
                Dialog(
                    dialog_id=dialog.dialog_id,
                    dataset=dialog.dataset,
                    domains=dialog.domains,
                    turns=tuple(turns),
                    source_split=split,
                )
            )
    known = {s.domain_name for s in schemas}
    for dialog in dialogs:
        _check_domains(dialog, known, str(root))
    dialogs.sort(key=lambda d: (d.dataset.value, d.dialog_id))
    return schemas, dialogs


def _bitod_schemas(ontology: dict, source: str) -> list[DomainSchema]:
    domains: dict[str, dict] = {}
    for intent_name, intent in ontology.get("intents", {}).items():
        try:
            domain = intent["domain"]
        except KeyError as exc:
            raise MalformedRecord(f"{source}: intent {intent_name} missing {exc}")
        bucket = domains.setdefault(domain, {"intents": [], "slots": {}})
        slot_names = []
        for slot_name, slot in intent.get("slots", {}).items():
            slot_names.append(slot_name)
            if slot_name not in bucket["slots"]:
                values = tuple(slot.get("values", []))
                bucket["slots"][slot_name] = SlotDef(
                    name=slot_name,
                    description=slot.get("description", ""),
                    is_categorical=bool(values),
                    possible_values=values,
                )
        bucket["intents"].append((intent_name, tuple(slot_names)))
    return [
        DomainSchema(
            domain_name=name,
            intents=tuple(bucket["intents"]),
            slots=tuple(bucket["slots"].values()),
        )
        for name, bucket in sorted(domains.items())
    ]


def _parse_bitod_dialog(
    dialog_id: str,
    raw: dict,
    split: str,
    source: str,
    intent_domains: dict[str, str],
) -> Dialog:
    events = raw.get("Events")
    if not isinstance(events, list):
        raise MalformedRecord(f"{source}: dialog {dialog_id} has no Events list")
    turns: list[RawTurn] = []
    domains: list[str] = []
    pending_kb: dict | None = None
    for event in events:
        agent = event.get("Agent")
        if agent == "KnowledgeBase":
            # Folded into the following Wizard turn so RawTurns stay
            # USER/SYSTEM alternating while the query survives in annotations.
            pending_kb = event
            continue
        if agent not in ("User", "Wizard"):
            raise MalformedRecord(
                f"{source}: dialog {dialog_id} has unknown agent {agent!r}"
            )
        annotations = {k: v for k, v in event.items() if k not in ("Agent", "Text")}
        if agent == "User":
            intent = event.get("active_intent", "")
            if intent:
                if intent not in intent_domains:
                    raise UnknownDomainReference(
                        f"{source}: dialog {dialog_id} intent {intent!r} not in "
                        "ontology"
                    )
                domain = intent_domains[intent]
                if domain not in domains:
                    domains.append(domain)
            speaker = Speaker.USER
        else:
            speaker = Speaker.SYSTEM
            if pending_kb is not None:
                annotations["kb_query"] = {
                    "method": pending_kb.get("API", ""),
                    "constraints": pending_kb.get("Constraints", {}),
                }
                annotations["kb_results"] = pending_kb.get("Items", [])
                pending_kb = None
        turns.append(
            RawTurn(
                speaker=speaker,
                utterance=event.get("Text", ""),
                annotations=annotations,
            )
        )
    _check_alternation(dialog_id, source, turns)
    return Dialog(
        dialog_id=dialog_id,
        dataset=Dataset.BITOD,
        domains=tuple(domains),
        turns=tuple(turns),
        source_split=split,
    )


def load_bitod(
    path: str | Path, language_filter: str = "en"
) -> tuple[list[DomainSchema], list[Dialog]]:
    root = Path(path)
    ontology = _read_json(root / "ontology.json")
    schemas = _bitod_schemas(ontology, str(root / "ontology.json"))
    intent_domains = {
        intent: spec["domain"] for intent, spec in ontology.get("intents", {}).items()
    }
    dialogs: list[Dialog] = []
    found_any = False
    for split in ("train", "valid", "test"):
        split_file = root / f"{language_filter}_{split}.json"
        if not split_file.exists():
            continue
        found_any = True
        data = _read_json(split_file)
        if not isinstance(data, dict):
            raise MalformedRecord(f"{split_file}: expected a dialog_id -> dialog map")
        for dialog_id, raw in data.items():
            dialogs.append(
                _parse_bitod_dialog(
                    dialog_id, raw, split, str(split_file), intent_domains
                )
            )
    if not found_any:
        # A filter selecting a language with no files is an empty corpus, not
        # an error, as long as the directory holds some recognized split file.
        if not any(root.glob("*_train.json")):
            raise MissingFile(f"{root}: no *_train.json dialog files")
    dialogs.sort(key=lambda d: (d.dataset.value, d.dialog_id))
    return schemas, dialogs


def corpus_stats(dialogs: list[Dialog]) -> Stats:
    if not dialogs:
        return Stats(0, 0, 0.0)
    domains = {base_domain(d) for dialog in dialogs for d in dialog.domains}
    total_turns = sum(len(d.turns) for d in dialogs)
    return Stats(
        n_dialogs=len(dialogs),
        n_domains=len(domains),
        avg_turns_per_dialog=total_turns / len(dialogs),
    )


def validate_corpus(
    schemas: list[DomainSchema], dialogs: list[Dialog]
) -> list[str]:
    """Collect (never drop) annotation references that fail to resolve."""
    by_name = {s.domain_name: s for s in schemas}
    problems: list[str] = []
    for dialog in dialogs:
        for idx, turn in enumerate(dialog.turns):
            for frame in turn.annotations.get("frames", []):
                service = frame.get("service")
                schema = by_name.get(service)
                if schema is None:
                    problems.append(
                        f"{dialog.dialog_id}[{idx}]: frame service {service!r} "
                        "has no schema"
                    )
                    continue
                for action in frame.get("actions", []):
                    slot = action.get("slot")
                    if slot and slot not in ("intent", "count") and not schema.slot(slot):
                        problems.append(
                            f"{dialog.dialog_id}[{idx}]: act slot {slot!r} not in "
                            f"{service}"
                        )
    return problems
