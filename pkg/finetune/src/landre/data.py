"""Corpus reading and delimiter-format example construction.

A corpus file is a JSON array of ``[utterances, relation_entries]``
dialogues: utterances are ``"Speaker k: text"`` strings and each relation
entry names an argument pair (``x``, ``y``) with its relation labels ``r``.
Every (dialogue, argument pair) becomes one training example:

    input:  ``| Speaker 1 : t1 Speaker 2 : t2 ... | a1 | a2``
    output: ``| r1 | r2 | ... |``   (``| unanswerable |`` when no relation holds)

Labels in the output follow the fixed inventory order below, so the same
label set always serializes to the same bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

UNANSWERABLE = "unanswerable"

# Candidate relation inventory, in canonical order.  Output label sets are
# sorted by this order; it must not be reordered.
RELATION_ORDER = (
    "per:positive_impression",
    "per:negative_impression",
    "per:acquaintance",
    "per:alumni",
    "per:boss",
    "per:subordinate",
    "per:client",
    "per:dates",
    "per:friends",
    "per:girl/boyfriend",
    "per:neighbor",
    "per:roommate",
    "per:children",
    "per:other_family",
    "per:parents",
    "per:siblings",
    "per:spouse",
    "per:place_of_residence",
    "per:place_of_work",
    "per:visited_place",
    "per:origin",
    "per:employee_or_member_of",
    "per:schools_attended",
    "per:works",
    "per:age",
    "per:date_of_birth",
    "per:major",
    "per:place_of_birth",
    "per:pet",
    "per:title",
    "per:alternate_names",
    "gpe:residents_of_place",
    "gpe:visitors_of_place",
    "org:employees_or_members",
    "org:students",
)

_RANK = {label: i for i, label in enumerate(RELATION_ORDER)}
_UTTERANCE_RE = re.compile(r"^Speaker \d+: ?", re.DOTALL)


@dataclass(frozen=True)
class TuningExample:
    input_text: str
    output_text: str


@dataclass(frozen=True)
class ArgumentPair:
    subject: str
    object: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class RawDialogue:
    utterances: tuple[str, ...]
    pairs: tuple[ArgumentPair, ...]


def load_corpus(path: str | Path) -> list[RawDialogue]:
    """Parse and validate a corpus file into dialogues with argument pairs."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"corpus is not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise DataError("corpus must be a JSON array of dialogues")
    dialogues = []
    for di, item in enumerate(payload):
        if not (isinstance(item, list) and len(item) == 2):
            raise DataError(f"dialogue {di}: expected [utterances, relation entries]")
        utterances, entries = item
        if not utterances or not all(isinstance(u, str) for u in utterances):
            raise DataError(f"dialogue {di}: utterances must be non-empty strings")
        for ui, utterance in enumerate(utterances):
            if not _UTTERANCE_RE.match(utterance):
                raise DataError(
                    f"dialogue {di}: utterance {ui} does not start with 'Speaker k:'"
                )
        pairs = []
        for ei, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise DataError(f"dialogue {di}: relation entry {ei} must be an object")
            try:
                subject, object_, labels = entry["x"], entry["y"], entry["r"]
            except KeyError as exc:
                raise DataError(
                    f"dialogue {di}: relation entry {ei} is missing {exc}"
                ) from None
            if not (isinstance(subject, str) and isinstance(object_, str)):
                raise DataError(f"dialogue {di}: relation entry {ei} arguments must be strings")
            if not (isinstance(labels, list) and all(isinstance(l, str) for l in labels)):
                raise DataError(f"dialogue {di}: relation entry {ei} labels must be strings")
            pairs.append(ArgumentPair(subject, object_, tuple(labels)))
        dialogues.append(RawDialogue(tuple(utterances), tuple(pairs)))
    return dialogues


def _speaker_and_text(utterance: str) -> tuple[str, str]:
    speaker, rest = utterance.split(":", 1)
    return speaker, rest[1:] if rest.startswith(" ") else rest


def serialize_input(utterances: tuple[str, ...], subject: str, object_: str) -> str:
    turns = " ".join(
        f"{speaker} : {text}" for speaker, text in map(_speaker_and_text, utterances)
    )
    return f"| {turns} | {subject} | {object_}"


def serialize_output(labels: tuple[str, ...]) -> str:
    positives = sorted({l for l in labels if l != UNANSWERABLE}, key=_rank)
    if not positives:
        return f"| {UNANSWERABLE} |"
    return "| " + " | ".join(positives) + " |"


def _rank(label: str) -> int:
    try:
        return _RANK[label]
    except KeyError:
        raise DataError(f"unknown relation label: {label!r}") from None


def build_tuning_dataset(dialogues: list[RawDialogue]) -> list[TuningExample]:
    """One example per (dialogue, argument pair), in corpus order."""
    return [
        TuningExample(
            input_text=serialize_input(d.utterances, pair.subject, pair.object),
            output_text=serialize_output(pair.labels),
        )
        for d in dialogues
        for pair in d.pairs
    ]


def write_dataset(examples: list[TuningExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(
                json.dumps(
                    {"input": example.input_text, "output": example.output_text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_dataset(path: str | Path) -> list[TuningExample]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    examples = []
    for li, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            examples.append(TuningExample(row["input"], row["output"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"dataset line {li + 1} is malformed: {exc}") from None
    return examples
