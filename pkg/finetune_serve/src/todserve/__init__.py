"""Adapter fine-tuning and HTTP serving for dialog example sets.

The package consumes example-set JSONL files (records with ``example_id``,
``prompt`` and ``target_text`` fields), fine-tunes a sequence-to-sequence
model by injecting trainable low-rank adapters while keeping the base
weights frozen, and serves the result behind the harness generation
protocol (``POST /generate`` + ``GET /healthz``).
"""

from __future__ import annotations

from todserve.errors import (
    ConfigError,
    DataError,
    DivergenceError,
    TodserveError,
    TrainingError,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DivergenceError",
    "TodserveError",
    "TrainingError",
]
