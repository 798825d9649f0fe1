"""Adapter fine-tuning: config, loop, early stopping, and the training log.

The loop is deliberately plain: AdamW over the adapter parameters only,
linear learning-rate warmup, a held-out slice of the example set for the
early-stopping eval loss, and a NaN check on every step so divergence
aborts instead of burning the epoch budget.
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

from todserve.data import PAD_ID, TrainingExample, WordTokenizer, read_example_set
from todserve.errors import ConfigError, DivergenceError, TrainingError
from todserve.model import (
    GenerationEngine,
    build_desk_model,
    inject_adapters,
    adapter_state,
    load_adapter_state,
    save_artifact,
)

logger = logging.getLogger(__name__)

DESK_BASE_MODEL = "desk"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    The defaults are the published recipe (learning rate 0.01 — high for
    full fine-tuning but adapter-only training touches a tiny parameter
    subset — 500 warmup steps, patience 4); `desk_preset` scales the
    schedule down to smoke-test size without changing the recipe knobs.
    """

    base_model: str = DESK_BASE_MODEL
    adapter_rank: int = 8
    adapter_targets: tuple[str, ...] = ("q", "v")
    learning_rate: float = 0.01
    warmup_steps: int = 500
    early_stop_patience: int = 4
    batch_size: int = 8
    accumulation_steps: int = 1
    max_epochs: int = 20
    eval_fraction: float = 0.05
    max_units: int = 256
    max_vocab: int = 4000
    seed: int = 13

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if self.adapter_rank < 1:
            raise ConfigError("adapter_rank must be >= 1")
        if self.batch_size < 1 or self.accumulation_steps < 1:
            raise ConfigError("batch_size and accumulation_steps must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not 0 < self.eval_fraction < 1:
            raise ConfigError("eval_fraction must be in (0, 1)")
        if not self.adapter_targets:
            raise ConfigError("adapter_targets must not be empty")


def desk_preset(**overrides) -> TrainConfig:
    """Desk-scale preset: tiny model, short schedule, same recipe."""
    values = dict(base_model=DESK_BASE_MODEL, adapter_rank=8,
                  warmup_steps=20, batch_size=16, max_epochs=4,
                  eval_fraction=0.1, max_vocab=2000)
    values.update(overrides)
    return TrainConfig(**values)


@dataclass
class TrainingResult:
    artifact_dir: Path
    log: dict = field(repr=False)


def _split_eval(examples: list[TrainingExample],
                config: TrainConfig) -> tuple[list[TrainingExample],
                                              list[TrainingExample]]:
    order = sorted(examples, key=lambda e: e.example_id)
    random.Random(config.seed).shuffle(order)
    n_eval = max(1, int(len(order) * config.eval_fraction))
    if n_eval >= len(order):
        raise TrainingError("example set too small to hold out an eval slice")
    return order[n_eval:], order[:n_eval]


def _make_batch(tokenizer: WordTokenizer, examples: list[TrainingExample],
                max_units: int) -> dict[str, torch.Tensor]:
    inputs = [tokenizer.encode(e.prompt)[-max_units:] for e in examples]
    targets = [tokenizer.encode(e.target)[:max_units] for e in examples]
    in_width = max(len(ids) for ids in inputs)
    out_width = max(len(ids) for ids in targets)
    input_ids = torch.full((len(examples), in_width), PAD_ID, dtype=torch.long)
    attention = torch.zeros((len(examples), in_width), dtype=torch.long)
    labels = torch.full((len(examples), out_width), -100, dtype=torch.long)
    for row, (ids, target) in enumerate(zip(inputs, targets)):
        input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        attention[row, : len(ids)] = 1
        labels[row, : len(target)] = torch.tensor(target, dtype=torch.long)
    return {"input_ids": input_ids, "attention_mask": attention,
            "labels": labels}


def _batch_loss(model: nn.Module, batch: dict[str, torch.Tensor]) -> torch.Tensor:
    return model(**batch).loss


def _eval_loss(model: nn.Module, tokenizer: WordTokenizer,
               examples: list[TrainingExample], config: TrainConfig) -> float:
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for start in range(0, len(examples), config.batch_size):
            chunk = examples[start: start + config.batch_size]
            total += float(_batch_loss(
                model, _make_batch(tokenizer, chunk, config.max_units))) * len(chunk)
            count += len(chunk)
    model.train()
    return total / count


def _build_model_and_tokenizer(examples: list[TrainingExample],
                               config: TrainConfig):
    if config.base_model == DESK_BASE_MODEL:
        tokenizer = WordTokenizer.build(
            [e.prompt for e in examples] + [e.target for e in examples],
            max_vocab=config.max_vocab)
        return build_desk_model(tokenizer.vocab_size, config.seed), tokenizer
    raise ConfigError(
        f"unsupported base_model {config.base_model!r}: this build ships the"
        f" {DESK_BASE_MODEL!r} preset (randomly initialized desk-scale model"
        " with a corpus tokenizer); pretrained checkpoints need a tokenizer"
        " adapter")


def train(examples_path: str | Path, out_dir: str | Path,
          config: TrainConfig | None = None) -> TrainingResult:
    """Fine-tune adapters on an example set and write the artifact.

    Raises DataError for unusable input files (before any training step),
    DivergenceError if the loss stops being finite, and TrainingError for
    other operational failures. The artifact keeps the adapter weights of
    the best eval-loss epoch, not the last one.
    """
    config = config or TrainConfig()
    examples = read_example_set(examples_path)
    train_set, eval_set = _split_eval(examples, config)
    logger.info("training on %d examples (%d held out for eval)",
                len(train_set), len(eval_set))

    model, tokenizer = _build_model_and_tokenizer(examples, config)
    wrapped = inject_adapters(model, config.adapter_rank,
                              config.adapter_targets)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=config.learning_rate)
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: min(1.0, (step + 1) / max(1, config.warmup_steps)))

    started = time.perf_counter()
    initial_eval = _eval_loss(model, tokenizer, eval_set, config)
    log: dict = {
        "adapter_layers": wrapped,
        "trainable_parameters": sum(p.numel() for p in trainable),
        "initial_eval_loss": initial_eval,
        "epochs": [],
        "events": [],
    }
    best_eval = initial_eval
    best_epoch = 0
    best_state = adapter_state(model)
    stale = 0
    rng = random.Random(config.seed + 1)
    model.train()
    try:
        for epoch in range(1, config.max_epochs + 1):
            order = list(train_set)
            rng.shuffle(order)
            epoch_total = 0.0
            steps = 0
            optimizer.zero_grad()
            for index, start in enumerate(
                    range(0, len(order), config.batch_size)):
                batch = _make_batch(tokenizer,
                                    order[start: start + config.batch_size],
                                    config.max_units)
                loss = _batch_loss(model, batch)
                loss_value = float(loss.detach())
                if not math.isfinite(loss_value):
                    raise DivergenceError(
                        f"training loss became NaN/inf at epoch {epoch}"
                        f" step {index}; aborting the run")
                (loss / config.accumulation_steps).backward()
                if (index + 1) % config.accumulation_steps == 0:
                    optimizer.step()
                    schedule.step()
                    optimizer.zero_grad()
                epoch_total += loss_value
                steps += 1
            eval_loss = _eval_loss(model, tokenizer, eval_set, config)
            entry = {"epoch": epoch, "train_loss": epoch_total / max(1, steps),
                     "eval_loss": eval_loss,
                     "learning_rate": schedule.get_last_lr()[0]}
            log["epochs"].append(entry)
            logger.info("epoch %d: train %.4f eval %.4f", epoch,
                        entry["train_loss"], eval_loss)
            if eval_loss < best_eval:
                best_eval = eval_loss
                best_epoch = epoch
                best_state = adapter_state(model)
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    message = (f"early-stopped after epoch {epoch}"
                               f" (no eval improvement for {stale} epochs,"
                               f" patience {config.early_stop_patience})")
                    log["events"].append(message)
                    logger.info("%s", message)
                    break
    except torch.cuda.OutOfMemoryError as exc:  # pragma: no cover
        raise TrainingError(
            "out of memory: lower batch_size or raise accumulation_steps,"
            " or reduce max_units") from exc

    load_adapter_state(model, best_state)
    log["best_epoch"] = best_epoch
    log["best_eval_loss"] = best_eval
    log["stopped_early"] = any("early-stopped" in e for e in log["events"])
    log["duration_seconds"] = time.perf_counter() - started
    artifact_dir = save_artifact(out_dir, model, tokenizer,
                                 config.adapter_rank, config.adapter_targets,
                                 asdict(config), log)
    return TrainingResult(artifact_dir=artifact_dir, log=log)


def engine_from_training(result: TrainingResult) -> GenerationEngine:
    """Load the just-written artifact (round-trips the on-disk format)."""
    from todserve.model import load_artifact

    return load_artifact(result.artifact_dir)
