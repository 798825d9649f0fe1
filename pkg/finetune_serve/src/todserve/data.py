"""Example-set loading and the desk-scale word tokenizer.

The input format is the harness's example-set JSONL: one JSON object per
line, of which this package reads the ``example_id``, ``prompt`` and
``target_text`` fields (build the file with a prompt template so the
``prompt`` field is present; all other fields are ignored).

The desk-scale preset trains a randomly initialized model, so it also
builds its own vocabulary from the corpus: a word-level tokenizer that
splits identifiers and isolates punctuation, which keeps API-call strings
(quotes, braces, commas) tokenized at a useful granularity.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from todserve.errors import DataError

_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^A-Za-z0-9_\s]")

PAD_TOKEN = "<pad>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"
_SPECIALS = (PAD_TOKEN, EOS_TOKEN, UNK_TOKEN)

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2


@dataclass(frozen=True)
class TrainingExample:
    """One prompt/target pair read from an example-set file."""

    example_id: str
    prompt: str
    target: str


def read_example_set(path: str | Path) -> list[TrainingExample]:
    """Read an example-set JSONL file.

    Raises DataError if the file is missing, contains no examples, or a
    record lacks one of the required string fields.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"example-set file not found: {path}")
    examples: list[TrainingExample] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise DataError(f"{path}:{lineno}: record is not an object")
        for field in ("example_id", "prompt", "target_text"):
            if not isinstance(record.get(field), str):
                raise DataError(
                    f"{path}:{lineno}: missing or non-string field {field!r}"
                    " (build the example set with a prompt template so every"
                    " record carries a rendered prompt)")
        examples.append(TrainingExample(example_id=record["example_id"],
                                        prompt=record["prompt"],
                                        target=record["target_text"]))
    if not examples:
        raise DataError(f"example-set file has no examples: {path}")
    return examples


def tokenize(text: str) -> list[str]:
    """Split text into word and single-punctuation tokens."""
    return _TOKEN_RE.findall(text)


class WordTokenizer:
    """Word-level tokenizer with a corpus-built vocabulary.

    Ids 0/1/2 are reserved for pad, end-of-sequence, and unknown; the rest
    of the vocabulary is ordered by descending corpus frequency with ties
    broken alphabetically, so building twice from the same corpus yields
    the same ids.
    """

    def __init__(self, tokens: list[str]):
        if list(tokens[: len(_SPECIALS)]) != list(_SPECIALS):
            raise DataError("vocabulary must start with the special tokens")
        self._tokens = list(tokens)
        self._ids = {token: i for i, token in enumerate(self._tokens)}

    @classmethod
    def build(cls, texts: list[str], max_vocab: int = 4000) -> "WordTokenizer":
        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(tokenize(text))
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        keep = max(0, max_vocab - len(_SPECIALS))
        return cls(list(_SPECIALS) + ranked[:keep])

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    def encode(self, text: str, add_eos: bool = True) -> list[int]:
        ids = [self._ids.get(token, UNK_ID) for token in tokenize(text)]
        if add_eos:
            ids.append(EOS_ID)
        return ids

    def decode(self, ids: list[int]) -> str:
        words: list[str] = []
        for token_id in ids:
            if token_id == EOS_ID:
                break
            if token_id == PAD_ID:
                continue
            if 0 <= token_id < len(self._tokens):
                words.append(self._tokens[token_id])
            else:
                words.append(UNK_TOKEN)
        return " ".join(words)

    def save(self, path: str | Path) -> None:
        payload = {"format": "todserve-word-tokenizer-v1", "tokens": self._tokens}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordTokenizer":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"tokenizer file not found: {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        if payload.get("format") != "todserve-word-tokenizer-v1":
            raise DataError(f"unrecognized tokenizer file: {path}")
        return cls(payload["tokens"])
