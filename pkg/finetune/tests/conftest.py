"""Shared fixtures: repo paths and a once-per-session trained toy model."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import pytest

FINETUNE_ROOT = Path(__file__).resolve().parents[1]
WORKSPACE_ROOT = FINETUNE_ROOT.parent
TOY_CORPUS = FINETUNE_ROOT / "fixtures" / "toy_corpus.json"
FIXTURE_CORPUS = WORKSPACE_ROOT / "fixtures" / "dialogre_fixture.json"
GOLDEN_DIR = WORKSPACE_ROOT / "fixtures" / "golden"


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def toy_examples():
    from landre.data import build_tuning_dataset, load_corpus

    return build_tuning_dataset(load_corpus(TOY_CORPUS))


@dataclass
class ToyRun:
    adapter_dir: Path
    base_dir: Path
    losses: list[float]
    steps: int
    seconds: float


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory, toy_examples) -> ToyRun:
    """Train the tiny demonstration model once and share it across tests."""
    from landre import train as training

    adapter_dir = tmp_path_factory.mktemp("toy-adapter")
    base_dir = training.prepare_toy_base(toy_examples, adapter_dir / "base")
    started = time.monotonic()
    result = training.train(toy_examples, training.toy_config(base_dir), adapter_dir)
    seconds = time.monotonic() - started
    return ToyRun(adapter_dir, Path(base_dir), result.losses, result.steps, seconds)
