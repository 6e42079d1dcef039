"""Prompt construction for the five querying strategies.

Two families exist:

* direct -- one request per argument pair.  ``vanilla_direct`` asks for the
  relation labels outright (optionally with few-shot demonstrations);
  ``landre`` serializes the pair into a compact delimiter format and expects
  the labels back between pipes.
* indirect -- one request per candidate relation, built from that relation's
  question template (``restrictive``, ``yes_no`` or ``open_ended``), so a
  pair costs as many requests as there are candidate relations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import ArgumentPair, CorpusSplit, Dialogue
from .schema import UNANSWERABLE, RelationSchema

VANILLA_DIRECT = "vanilla_direct"
RESTRICTIVE = "restrictive"
YES_NO = "yes_no"
OPEN_ENDED = "open_ended"
LANDRE = "landre"

STRATEGY_KINDS = (VANILLA_DIRECT, RESTRICTIVE, YES_NO, OPEN_ENDED, LANDRE)
INDIRECT_KINDS = (RESTRICTIVE, YES_NO, OPEN_ENDED)

DEFAULT_INSTRUCTION = (
    "Given a dialogue and an argument pair, list every relation that holds "
    "between the first and the second argument, chosen from the candidate "
    "relations and separated by commas. If no candidate relation holds, "
    "answer unanswerable."
)


@dataclass(frozen=True)
class Strategy:
    kind: str
    shots: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind: {self.kind!r}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.shots and self.kind != VANILLA_DIRECT:
            raise ValueError(f"few-shot demonstrations only apply to {VANILLA_DIRECT}")

    @property
    def is_indirect(self) -> bool:
        return self.kind in INDIRECT_KINDS


@dataclass(frozen=True)
class Demonstration:
    """A solved example shown to the model ahead of the query."""

    dialogue: Dialogue
    pair: ArgumentPair
    labels: tuple[str, ...] = field(default=())

    @staticmethod
    def from_pair(dialogue: Dialogue, pair: ArgumentPair) -> "Demonstration":
        positives = sorted(pair.positive_labels())
        return Demonstration(dialogue, pair, tuple(positives) or (UNANSWERABLE,))


def sample_demonstrations(split: CorpusSplit, shots: int, seed: int) -> list[Demonstration]:
    """Uniform sample of ``shots`` argument pairs from a demonstration split."""
    units = [
        (dialogue, pair)
        for dialogue in split.dialogues
        for pair in dialogue.pairs
    ]
    if shots > len(units):
        raise ValueError(
            f"cannot sample {shots} demonstrations from {len(units)} pairs"
        )
    chosen = random.Random(seed).sample(range(len(units)), shots)
    return [Demonstration.from_pair(*units[i]) for i in chosen]


def render_dialogue(dialogue: Dialogue) -> str:
    return "\n".join(turn.line() for turn in dialogue.turns)


def _pair_block(dialogue: Dialogue, pair: ArgumentPair, answer: str | None) -> str:
    lines = [
        "Dialogue:",
        render_dialogue(dialogue),
        f"Argument pair: ({pair.subject}, {pair.object})",
        "Relations:" if answer is None else f"Relations: {answer}",
    ]
    return "\n".join(lines)


def build_vanilla_prompt(
    dialogue: Dialogue,
    pair: ArgumentPair,
    schema: RelationSchema,
    demonstrations: list[Demonstration] | tuple[Demonstration, ...] = (),
    instruction: str = DEFAULT_INSTRUCTION,
) -> str:
    """Direct prompt asking for the relation labels of one argument pair."""
    blocks = [
        instruction,
        "Candidate relations: " + ", ".join(schema.candidates()),
    ]
    for demo in demonstrations:
        blocks.append(_pair_block(demo.dialogue, demo.pair, ", ".join(demo.labels)))
    blocks.append(_pair_block(dialogue, pair, None))
    return "\n\n".join(blocks)


def build_indirect_questions(
    dialogue: Dialogue,
    pair: ArgumentPair,
    schema: RelationSchema,
    style: str,
) -> list[tuple[str, str]]:
    """One (candidate label, prompt) per candidate relation, in schema order."""
    if style not in INDIRECT_KINDS:
        raise ValueError(f"not an indirect strategy: {style!r}")
    context = "Dialogue:\n" + render_dialogue(dialogue)
    questions = []
    for label in schema.candidates():
        templates = schema.entry(label).templates
        template = getattr(templates, style)
        question = templates.fill(template, pair.subject, pair.object)
        questions.append((label, f"{context}\n\n{question}"))
    return questions


def serialize_landre_input(dialogue: Dialogue, pair: ArgumentPair) -> str:
    """Delimiter-format input: turns joined by single spaces between pipes.

    ``| s1 : t1 s2 : t2 ... | a1 | a2`` -- each utterance contributes
    ``Speaker k : text`` and utterance boundaries are plain whitespace.
    """
    flat = " ".join(f"Speaker {t.speaker_id} : {t.text}" for t in dialogue.turns)
    return f"| {flat} | {pair.subject} | {pair.object}"


def serialize_landre_output(labels: set[str] | frozenset[str], schema: RelationSchema) -> str:
    """Delimiter-format output: ``| r1 | r2 | ... |`` in schema order."""
    positives = [l for l in schema.candidates() if l in labels]
    cells = positives or [UNANSWERABLE]
    return "| " + " | ".join(cells) + " |"


def build_landre_example(
    dialogue: Dialogue,
    pair: ArgumentPair,
    schema: RelationSchema,
    labels: set[str] | None = None,
) -> tuple[str, str | None]:
    """(input, output) in the delimiter format; output is None for queries."""
    input_text = serialize_landre_input(dialogue, pair)
    if labels is None:
        return input_text, None
    return input_text, serialize_landre_output(labels, schema)
