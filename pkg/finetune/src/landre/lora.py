"""Low-rank adaptation of causal language models.

Base weights are frozen; each targeted projection gains an additive
``x @ A^T @ B^T`` path scaled by ``alpha / rank``.  ``B`` starts at zero, so
an untrained adapter leaves the model's behaviour exactly unchanged.
Supported wrap targets are ``torch.nn.Linear``, the fused Conv1D projection
used by GPT-2-style blocks, and ``torch.nn.Embedding``.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch import nn
from transformers.pytorch_utils import Conv1D

from .errors import ServingError

DEFAULT_TARGETS = ("c_attn",)


class LoraLinear(nn.Module):
    """A frozen linear projection plus a trainable low-rank delta."""

    def __init__(self, base: nn.Module, rank: int, alpha: float, fan_in_fan_out: bool):
        super().__init__()
        self.base = base
        weight = base.weight
        if fan_in_fan_out:  # Conv1D stores (in_features, out_features)
            in_features, out_features = weight.shape
        else:
            out_features, in_features = weight.shape
        self.lora_a = nn.Parameter(torch.randn(rank, in_features) * 0.02)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))
        self.scale = alpha / rank

    def forward(self, x):
        return self.base(x) + (x @ self.lora_a.T @ self.lora_b.T) * self.scale


class LoraEmbedding(nn.Module):
    """A frozen embedding table plus a trainable low-rank delta."""

    def __init__(self, base: nn.Embedding, rank: int, alpha: float):
        super().__init__()
        self.base = base
        self.lora_a = nn.Parameter(torch.zeros(base.num_embeddings, rank))
        self.lora_b = nn.Parameter(torch.randn(rank, base.embedding_dim) * 0.02)
        self.scale = alpha / rank

    @property
    def weight(self):  # keep weight-tied heads working against the base table
        return self.base.weight

    def forward(self, ids):
        return self.base(ids) + (self.lora_a[ids] @ self.lora_b) * self.scale


def apply_lora(
    model: nn.Module,
    rank: int,
    alpha: float,
    target_modules: tuple[str, ...] = DEFAULT_TARGETS,
) -> int:
    """Freeze the model and wrap every targeted submodule; returns wrap count."""
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    wrapped = 0
    for module in list(model.modules()):
        for child_name, child in list(module.named_children()):
            if child_name not in target_modules:
                continue
            if isinstance(child, Conv1D):
                replacement = LoraLinear(child, rank, alpha, fan_in_fan_out=True)
            elif isinstance(child, nn.Linear):
                replacement = LoraLinear(child, rank, alpha, fan_in_fan_out=False)
            elif isinstance(child, nn.Embedding):
                replacement = LoraEmbedding(child, rank, alpha)
            else:
                continue
            setattr(module, child_name, replacement)
            wrapped += 1
    if not wrapped:
        raise ServingError(f"no modules matched the adapter targets {target_modules!r}")
    return wrapped


def parameter_counts(model: nn.Module) -> tuple[int, int]:
    """(trainable, total) parameter counts."""
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total


def adapter_state(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if ".lora_a" in name or ".lora_b" in name
    }


def save_adapter(
    model: nn.Module,
    directory: str | Path,
    *,
    base_model: str,
    rank: int,
    alpha: float,
    target_modules: tuple[str, ...],
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state(model), directory / "adapter.pt")
    (directory / "adapter_config.json").write_text(
        json.dumps(
            {
                "base_model": base_model,
                "rank": rank,
                "alpha": alpha,
                "target_modules": list(target_modules),
            },
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )
    return directory


def read_adapter_config(directory: str | Path) -> dict:
    config_path = Path(directory) / "adapter_config.json"
    if not config_path.is_file():
        raise ServingError(f"not an adapter directory (no adapter_config.json): {directory}")
    return json.loads(config_path.read_text(encoding="utf-8"))


def load_adapter(model: nn.Module, directory: str | Path) -> nn.Module:
    """Wrap ``model`` per the stored config and load the adapter weights."""
    config = read_adapter_config(directory)
    apply_lora(
        model,
        rank=int(config["rank"]),
        alpha=float(config["alpha"]),
        target_modules=tuple(config["target_modules"]),
    )
    state = torch.load(Path(directory) / "adapter.pt", map_location="cpu")
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected:
        raise ServingError(f"adapter weights do not match the model: {unexpected[:3]}")
    loaded = set(state)
    expected = set(adapter_state(model))
    if loaded != expected:
        raise ServingError("adapter weights are incomplete for the configured targets")
    return model
