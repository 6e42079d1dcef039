"""Command-line interface: build-data, train, and serve."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .data import build_tuning_dataset, load_corpus, read_dataset, write_dataset
from .errors import DataError, ServingError, TrainingError, UsageError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landre",
        description="Train and serve delimiter-format relation extraction models.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser(
        "build-data", help="convert a dialogue corpus into a training dataset"
    )
    build.add_argument("--corpus", required=True, help="corpus JSON file")
    build.add_argument("--output", required=True, help="dataset JSONL to write")

    train = commands.add_parser("train", help="fit adapters on a dataset")
    train.add_argument("--dataset", required=True, help="dataset JSONL file")
    train.add_argument("--output-dir", required=True, help="adapter output directory")
    train.add_argument("--base-model", default=None, help="base model id or path")
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--batch-size", type=int, default=None)
    train.add_argument("--rank", type=int, default=None)
    train.add_argument("--alpha", type=float, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument(
        "--loss-on-input",
        action="store_true",
        help="include prompt tokens in the loss (default: completion only)",
    )
    train.add_argument(
        "--toy",
        action="store_true",
        help="train a tiny from-scratch model that memorizes the dataset; "
        "fast, for smoke tests and demos",
    )

    serve = commands.add_parser("serve", help="serve a trained adapter over HTTP")
    serve.add_argument("--adapter", required=True, help="adapter directory")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _cmd_build_data(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_file():
        raise DataError(f"corpus file not found: {corpus}")
    dialogues = load_corpus(corpus)
    examples = build_tuning_dataset(dialogues)
    write_dataset(examples, args.output)
    print(f"dialogues: {len(dialogues)}")
    print(f"examples: {len(examples)}")
    print(f"wrote {args.output}")
    return 0


def _cmd_train(args) -> int:
    from . import train as training

    dataset_path = Path(args.dataset)
    if not dataset_path.is_file():
        raise DataError(f"dataset file not found: {dataset_path}")
    examples = read_dataset(dataset_path)
    output_dir = Path(args.output_dir)

    if args.toy:
        if args.base_model:
            raise UsageError("--toy builds its own base model; drop --base-model")
        base_dir = training.prepare_toy_base(
            examples, output_dir / "base", seed=args.seed or 0
        )
        config = training.toy_config(base_dir)
    else:
        config = training.TrainConfig()
        if args.base_model:
            config.base_model = args.base_model
    for name, value in [
        ("epochs", args.epochs),
        ("learning_rate", args.lr),
        ("batch_size", args.batch_size),
        ("lora_rank", args.rank),
        ("lora_alpha", args.alpha),
        ("seed", args.seed),
    ]:
        if value is not None:
            setattr(config, name, value)
    if args.loss_on_input:
        config.loss_on_input = True

    started = time.monotonic()
    result = training.train(examples, config, output_dir, log=print)
    print(f"steps: {result.steps}")
    print(f"final loss: {result.final_loss:.5f}")
    print(f"elapsed: {time.monotonic() - started:.1f}s")
    print(f"adapter saved to {output_dir}")
    return 0


def _cmd_serve(args) -> int:
    from .serve import serve

    if not Path(args.adapter).is_dir():
        raise ServingError(f"adapter directory not found: {args.adapter}")
    print(f"serving {args.adapter} on http://{args.host}:{args.port}/v1")
    serve(args.adapter, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    handlers = {
        "build-data": _cmd_build_data,
        "train": _cmd_train,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ServingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
