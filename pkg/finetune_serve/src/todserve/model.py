"""Model construction, low-rank adapter injection, and artifact I/O.

Adapters follow the standard low-rank recipe: every targeted ``nn.Linear``
is wrapped so its output becomes ``W x + (B A) x * (alpha / rank)`` where
``W`` stays frozen, ``A`` is small-random and ``B`` starts at zero (the
wrapped module is initially an exact no-op). Only ``A``/``B`` receive
gradients, so the base weights are bit-identical before and after
training.

An artifact is a directory:

    base/             frozen base model (transformers save_pretrained)
    tokenizer.json    corpus word tokenizer (desk preset)
    adapter.pt        trained adapter tensors + rank/targets metadata
    train_config.json the TrainConfig used
    training_log.json structured per-epoch loss log
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import torch
import transformers.utils.logging
from torch import nn
from transformers import T5Config, T5ForConditionalGeneration

from todserve.data import EOS_ID, PAD_ID, WordTokenizer
from todserve.errors import TrainingError

# Desk-scale artifacts save and load in milliseconds; shard progress bars
# are pure noise.
transformers.utils.logging.disable_progress_bar()

ADAPTER_FILENAME = "adapter.pt"
TOKENIZER_FILENAME = "tokenizer.json"
BASE_DIRNAME = "base"
TRAIN_CONFIG_FILENAME = "train_config.json"
TRAINING_LOG_FILENAME = "training_log.json"

# Desk-scale base model: small enough that the smoke fine-tune runs on a
# CPU in well under the budget, large enough to have real attention to
# adapt.
_DESK_T5 = dict(d_model=64, d_kv=16, d_ff=128, num_layers=2, num_heads=4)


def build_desk_model(vocab_size: int, seed: int) -> T5ForConditionalGeneration:
    """Build the randomly initialized desk-scale seq2seq base model."""
    config = T5Config(vocab_size=vocab_size, pad_token_id=PAD_ID,
                      eos_token_id=EOS_ID, decoder_start_token_id=PAD_ID,
                      **_DESK_T5)
    torch.manual_seed(seed)
    model = T5ForConditionalGeneration(config)
    model.generation_config.pad_token_id = PAD_ID
    model.generation_config.eos_token_id = EOS_ID
    return model


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float | None = None):
        super().__init__()
        self.base = base
        self.rank = rank
        self.scaling = (alpha if alpha is not None else float(rank)) / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.normal_(self.lora_a, std=0.02)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = nn.functional.linear(nn.functional.linear(x, self.lora_a),
                                      self.lora_b)
        return self.base(x) + update * self.scaling


def inject_adapters(model: nn.Module, rank: int,
                    targets: tuple[str, ...]) -> int:
    """Wrap every targeted Linear child in a LoRALinear; freeze the rest.

    `targets` names the attribute of the linear inside its parent module
    (for T5 attention: "q", "k", "v", "o"). Returns the number of layers
    wrapped; raises TrainingError if nothing matched.
    """
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    wrapped = 0
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if name in targets and isinstance(child, nn.Linear):
                setattr(module, name, LoRALinear(child, rank))
                wrapped += 1
    if not wrapped:
        raise TrainingError(
            f"no linear layers matched adapter targets {targets!r}")
    return wrapped


def adapter_state(model: nn.Module) -> dict[str, torch.Tensor]:
    """The trainable adapter tensors, by parameter name."""
    return {name: parameter.detach().clone()
            for name, parameter in model.named_parameters()
            if parameter.requires_grad}


def load_adapter_state(model: nn.Module,
                       state: dict[str, torch.Tensor]) -> None:
    parameters = dict(model.named_parameters())
    for name, tensor in state.items():
        if name not in parameters:
            raise TrainingError(f"adapter tensor {name!r} has no target in"
                                " the model (rank/targets mismatch?)")
        with torch.no_grad():
            parameters[name].copy_(tensor)


def save_artifact(out_dir: str | Path, model: nn.Module,
                  tokenizer: WordTokenizer, rank: int,
                  targets: tuple[str, ...], train_config: dict,
                  training_log: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _unwrap_adapters(model)
    base.save_pretrained(out_dir / BASE_DIRNAME)
    tokenizer.save(out_dir / TOKENIZER_FILENAME)
    torch.save({"rank": rank, "targets": list(targets),
                "state": adapter_state(model)}, out_dir / ADAPTER_FILENAME)
    (out_dir / TRAIN_CONFIG_FILENAME).write_text(
        json.dumps(train_config, indent=2, sort_keys=True), encoding="utf-8")
    (out_dir / TRAINING_LOG_FILENAME).write_text(
        json.dumps(training_log, indent=2), encoding="utf-8")
    return out_dir


def _unwrap_adapters(model: nn.Module) -> nn.Module:
    """Return a copy of the model with every LoRALinear replaced by its
    frozen base layer (the artifact stores base and adapters separately)."""
    import copy

    clone = copy.deepcopy(model)
    for module in list(clone.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, LoRALinear):
                setattr(module, name, child.base)
    return clone


def load_artifact(artifact_dir: str | Path) -> "GenerationEngine":
    """Load a trained artifact directory into a ready-to-serve engine."""
    artifact_dir = Path(artifact_dir)
    base_dir = artifact_dir / BASE_DIRNAME
    adapter_path = artifact_dir / ADAPTER_FILENAME
    if not base_dir.is_dir() or not adapter_path.is_file():
        raise TrainingError(f"not a trained artifact directory: {artifact_dir}")
    tokenizer = WordTokenizer.load(artifact_dir / TOKENIZER_FILENAME)
    model = T5ForConditionalGeneration.from_pretrained(base_dir)
    payload = torch.load(adapter_path, map_location="cpu")
    inject_adapters(model, payload["rank"], tuple(payload["targets"]))
    load_adapter_state(model, payload["state"])
    return GenerationEngine(model, tokenizer)


class GenerationEngine:
    """Thread-safe greedy/sampling text generation over a loaded model.

    Each request is handled under a lock with no mutable state shared
    between requests beyond the frozen model weights, so concurrent
    requests are isolated and greedy decoding is deterministic.
    """

    def __init__(self, model: nn.Module, tokenizer: WordTokenizer,
                 max_input_units: int = 512):
        model.eval()
        self._model = model
        self._tokenizer = tokenizer
        self._max_input_units = max_input_units
        self._lock = threading.Lock()

    def generate(self, prompt: str, max_new_units: int = 120,
                 greedy: bool = True) -> str:
        ids = self._tokenizer.encode(prompt)[-self._max_input_units:]
        input_ids = torch.tensor([ids], dtype=torch.long)
        attention = torch.ones_like(input_ids)
        with self._lock, torch.no_grad():
            output = self._model.generate(
                input_ids=input_ids, attention_mask=attention,
                max_new_tokens=max_new_units, do_sample=not greedy,
                num_beams=1)
        return self._tokenizer.decode(output[0].tolist())
