"""Command-line interface.

Exit codes: 0 on success, 2 on any pre-flight or runtime failure (bad
paths, invalid config, divergence, port in use).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from todserve.errors import TodserveError
from todserve.training import TrainConfig, desk_preset, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todserve",
        description="Fine-tune adapters on an example set and serve the result")
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="fine-tune adapters on an example set")
    train_p.add_argument("examples", help="example-set JSONL file")
    train_p.add_argument("--out", required=True, help="artifact output directory")
    train_p.add_argument("--preset", choices=("desk", "default"),
                         default="desk")
    train_p.add_argument("--learning-rate", type=float, default=None)
    train_p.add_argument("--epochs", type=int, default=None)
    train_p.add_argument("--batch-size", type=int, default=None)
    train_p.add_argument("--patience", type=int, default=None)
    train_p.add_argument("--warmup-steps", type=int, default=None)
    train_p.add_argument("--adapter-rank", type=int, default=None)
    train_p.add_argument("--seed", type=int, default=None)

    serve_p = sub.add_parser("serve", help="serve a trained artifact")
    serve_p.add_argument("artifact", help="artifact directory written by train")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8080)
    return parser


def _train_config(args: argparse.Namespace) -> TrainConfig:
    overrides = {
        "learning_rate": args.learning_rate,
        "max_epochs": args.epochs,
        "batch_size": args.batch_size,
        "early_stop_patience": args.patience,
        "warmup_steps": args.warmup_steps,
        "adapter_rank": args.adapter_rank,
        "seed": args.seed,
    }
    overrides = {key: value for key, value in overrides.items()
                 if value is not None}
    if args.preset == "desk":
        return desk_preset(**overrides)
    return TrainConfig(**overrides)


def cmd_train(args: argparse.Namespace) -> int:
    result = train(args.examples, args.out, _train_config(args))
    log = result.log
    for entry in log["epochs"]:
        print(f"epoch {entry['epoch']}: train {entry['train_loss']:.4f} "
              f"eval {entry['eval_loss']:.4f}")
    for event in log["events"]:
        print(event)
    print(f"best epoch {log['best_epoch']} "
          f"(eval {log['best_eval_loss']:.4f}, "
          f"initial {log['initial_eval_loss']:.4f})")
    print(f"wrote artifact to {result.artifact_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from todserve.serving import run_server

    run_server(args.artifact, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args)
        return cmd_serve(args)
    except (TodserveError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
