"""Adapter training for the delimiter-format extraction task.

The model is trained to continue ``input_text`` with ``output_text`` plus an
end-of-sequence token.  By default the loss covers only the output tokens;
set ``loss_on_input`` to include the prompt.  Only adapter parameters are
updated — the base model stays frozen throughout.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch
from transformers import (
    AutoModelForCausalLM,
    AutoTokenizer,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
    get_linear_schedule_with_warmup,
)
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import WhitespaceSplit

from .data import TuningExample
from .errors import DataError, TrainingError
from .lora import DEFAULT_TARGETS, apply_lora, parameter_counts, save_adapter

TOY_TARGETS = ("wte", "c_attn", "c_proj", "c_fc", "lm_head")


@dataclass
class TrainConfig:
    base_model: str = "gpt2"
    lora_rank: int = 8
    lora_alpha: float = 32
    learning_rate: float = 1e-4
    warmup_fraction: float = 0.06
    epochs: int = 5
    batch_size: int = 4
    seed: int = 0
    target_modules: tuple[str, ...] = DEFAULT_TARGETS
    loss_on_input: bool = False
    max_grad_norm: float = 1.0
    stop_loss: float | None = None
    max_length: int = 1024


@dataclass
class TrainResult:
    adapter_dir: Path
    losses: list[float] = field(default_factory=list)
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.nan


def toy_config(base_dir: str | Path, **overrides) -> TrainConfig:
    """Aggressive settings that let a tiny from-scratch model memorize a
    handful of examples in seconds; used for smoke tests and demos."""
    settings = dict(
        base_model=str(base_dir),
        lora_rank=32,
        lora_alpha=64,
        learning_rate=1e-3,
        epochs=4000,
        batch_size=32,
        target_modules=TOY_TARGETS,
        stop_loss=1e-3,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


def build_word_tokenizer(examples: list[TuningExample]) -> PreTrainedTokenizerFast:
    """Whitespace word-level tokenizer over the dataset's own vocabulary."""
    vocab = {"[PAD]": 0, "[UNK]": 1, "[EOS]": 2}
    words = sorted(
        {w for e in examples for w in f"{e.input_text} {e.output_text}".split()}
    )
    for word in words:
        vocab[word] = len(vocab)
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.pre_tokenizer = WhitespaceSplit()
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        pad_token="[PAD]",
        unk_token="[UNK]",
        eos_token="[EOS]",
    )


def prepare_toy_base(
    examples: list[TuningExample],
    directory: str | Path,
    *,
    seed: int = 0,
    n_layer: int = 2,
    n_embd: int = 128,
    n_head: int = 4,
    n_positions: int = 512,
) -> Path:
    """Create and save a randomly initialized tiny base model + tokenizer."""
    directory = Path(directory)
    tokenizer = build_word_tokenizer(examples)
    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=len(tokenizer),
        n_layer=n_layer,
        n_embd=n_embd,
        n_head=n_head,
        n_positions=n_positions,
        bos_token_id=tokenizer.eos_token_id,
        eos_token_id=tokenizer.eos_token_id,
        pad_token_id=tokenizer.pad_token_id,
    )
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return directory


def load_base(base_model: str):
    """(model, tokenizer) from a local directory or a model-hub identifier."""
    model = AutoModelForCausalLM.from_pretrained(base_model)
    tokenizer = AutoTokenizer.from_pretrained(base_model)
    if tokenizer.pad_token_id is None:
        tokenizer.pad_token = tokenizer.eos_token
    return model, tokenizer


def _encode(examples, tokenizer, config):
    eos = tokenizer.eos_token_id
    rows = []
    for example in examples:
        prompt = tokenizer(example.input_text)["input_ids"]
        completion = tokenizer(example.output_text)["input_ids"] + [eos]
        if len(prompt) + len(completion) > config.max_length:
            raise DataError(
                f"example exceeds max_length={config.max_length}: "
                f"{example.input_text[:60]}..."
            )
        ids = prompt + completion
        if config.loss_on_input:
            labels = list(ids)
        else:
            labels = [-100] * len(prompt) + completion
        rows.append((ids, labels))
    return rows


def _batches(rows, batch_size, pad_id, rng):
    order = list(range(len(rows)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [rows[i] for i in order[start : start + batch_size]]
        width = max(len(ids) for ids, _ in chunk)
        ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
        labels = torch.full((len(chunk), width), -100, dtype=torch.long)
        attention = torch.zeros((len(chunk), width), dtype=torch.long)
        for row, (ids_row, label_row) in enumerate(chunk):
            ids[row, : len(ids_row)] = torch.tensor(ids_row)
            labels[row, : len(label_row)] = torch.tensor(label_row)
            attention[row, : len(ids_row)] = 1
        yield ids, attention, labels


def train(
    examples: list[TuningExample],
    config: TrainConfig,
    output_dir: str | Path,
    log=lambda message: None,
) -> TrainResult:
    """Fit adapters on ``examples`` and save them under ``output_dir``."""
    if not examples:
        raise DataError("cannot train on an empty dataset")
    torch.manual_seed(config.seed)
    model, tokenizer = load_base(config.base_model)
    apply_lora(model, config.lora_rank, config.lora_alpha, config.target_modules)
    trainable, total = parameter_counts(model)
    log(f"trainable parameters: {trainable} / {total} ({trainable / total:.2%})")

    rows = _encode(examples, tokenizer, config)
    steps_per_epoch = math.ceil(len(rows) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    parameters = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(parameters, lr=config.learning_rate)
    scheduler = get_linear_schedule_with_warmup(
        optimizer, int(config.warmup_fraction * total_steps), total_steps
    )

    result = TrainResult(adapter_dir=Path(output_dir))
    model.train()
    try:
        for epoch in range(config.epochs):
            rng = random.Random(config.seed * 1009 + epoch)
            for ids, attention, labels in _batches(
                rows, config.batch_size, tokenizer.pad_token_id, rng
            ):
                loss = model(input_ids=ids, attention_mask=attention, labels=labels).loss
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"training diverged at step {result.steps}: loss={loss.item()}"
                    )
                loss.backward()
                torch.nn.utils.clip_grad_norm_(parameters, config.max_grad_norm)
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
                result.steps += 1
                result.losses.append(loss.item())
                log(f"step {result.steps}/{total_steps} loss {loss.item():.4f}")
            if config.stop_loss is not None and result.losses[-1] < config.stop_loss:
                log(f"stopping early at epoch {epoch}: loss {result.losses[-1]:.5f}")
                break
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise TrainingError(
                f"out of memory with batch_size={config.batch_size}; retry with a "
                f"smaller --batch-size"
            ) from exc
        raise

    model.eval()
    save_adapter(
        model,
        output_dir,
        base_model=config.base_model,
        rank=config.lora_rank,
        alpha=config.lora_alpha,
        target_modules=config.target_modules,
    )
    tokenizer.save_pretrained(Path(output_dir) / "tokenizer")
    return result
