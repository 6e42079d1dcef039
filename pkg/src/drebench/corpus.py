"""Dialogue corpus: loading, validation, prefixes, mentions, stats, sampling.

The on-disk format is a JSON array of dialogues.  Each dialogue is a two-item
array ``[utterances, relations]``: ``utterances`` is a list of strings shaped
``"Speaker k: text"``; ``relations`` is a list of objects with fields ``x``,
``y``, ``x_type``, ``y_type``, ``r`` (list of relation labels) and ``t`` (list
of trigger strings parallel to ``r``, empty string when the annotation has no
trigger).  A label repeated within one relation object's ``r`` list merges
into a single gold relation carrying several triggers.

Everything returned by :func:`load_split` is immutable, so splits can be
shared freely across worker threads.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .schema import UNANSWERABLE, RelationSchema

ARGUMENT_TYPES = frozenset({"PER", "NAME", "STRING", "ORG", "GPE", "VALUE"})

_UTTERANCE_RE = re.compile(r"^Speaker (\d+): ?(.*)$", re.DOTALL)
_SPEAKER_SURFACE_RE = re.compile(r"^speaker (\d+)$")
_RELATION_FIELDS = ("x", "y", "x_type", "y_type", "r", "t")


@dataclass(frozen=True)
class Turn:
    speaker_id: int
    text: str

    def line(self) -> str:
        """The turn rendered back to its on-disk utterance form."""
        return f"Speaker {self.speaker_id}: {self.text}"


@dataclass(frozen=True)
class GoldRelation:
    label: str
    triggers: tuple[str, ...] = ()


@dataclass(frozen=True)
class ArgumentPair:
    subject: str
    object: str
    subject_type: str
    object_type: str
    gold: tuple[GoldRelation, ...]

    def positive_labels(self) -> set[str]:
        return {g.label for g in self.gold if g.label != UNANSWERABLE}


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    turns: tuple[Turn, ...]
    pairs: tuple[ArgumentPair, ...]


@dataclass(frozen=True)
class CorpusSplit:
    name: str
    dialogues: tuple[Dialogue, ...]


@dataclass(frozen=True)
class CorpusStats:
    num_conversations: int
    num_argument_pairs: int
    avg_turns: float
    avg_dialogue_length_tokens: float
    avg_speakers: float


def _normalize_surface(text: str) -> str:
    return " ".join(text.split()).lower()


def load_split(path: str | Path, split_name: str, schema: RelationSchema) -> CorpusSplit:
    """Load and strictly validate one corpus split.

    Validation failures raise :class:`DataError` naming the dialogue index,
    the offending utterance or relation entry, and the field.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"corpus file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise DataError(f"{path}: expected a top-level array of dialogues")

    dialogues = []
    for di, item in enumerate(raw):
        where = f"dialogue {di}"
        if not isinstance(item, list) or len(item) != 2:
            raise DataError(f"{where}: expected a [utterances, relations] pair")
        utterances, relations = item
        if not isinstance(utterances, list) or not utterances:
            raise DataError(f"{where}: utterance list must be a non-empty array")
        turns = []
        for ui, utt in enumerate(utterances):
            if not isinstance(utt, str):
                raise DataError(f"{where}: utterance {ui}: expected a string")
            match = _UTTERANCE_RE.match(utt)
            if not match:
                raise DataError(
                    f"{where}: utterance {ui}: not of the form 'Speaker k: text': {utt!r}"
                )
            speaker_id = int(match.group(1))
            text = match.group(2).strip()
            if speaker_id < 1:
                raise DataError(f"{where}: utterance {ui}: speaker id must be >= 1")
            if not text:
                raise DataError(f"{where}: utterance {ui}: empty utterance text")
            turns.append(Turn(speaker_id=speaker_id, text=text))

        if not isinstance(relations, list):
            raise DataError(f"{where}: relation list must be an array")
        pairs = []
        for ri, rel in enumerate(relations):
            rwhere = f"{where}: relation {ri}"
            if not isinstance(rel, dict):
                raise DataError(f"{rwhere}: expected an object")
            for field in _RELATION_FIELDS:
                if field not in rel:
                    raise DataError(f"{rwhere}: missing field {field!r}")
            subject, obj = rel["x"], rel["y"]
            for field, value in (("x", subject), ("y", obj)):
                if not isinstance(value, str) or not value.strip():
                    raise DataError(f"{rwhere}: field {field!r} must be a non-empty string")
            for field in ("x_type", "y_type"):
                if rel[field] not in ARGUMENT_TYPES:
                    raise DataError(
                        f"{rwhere}: field {field!r} must be one of "
                        f"{sorted(ARGUMENT_TYPES)}, got {rel[field]!r}"
                    )
            labels, triggers = rel["r"], rel["t"]
            if not isinstance(labels, list) or not labels:
                raise DataError(f"{rwhere}: field 'r' must be a non-empty array of labels")
            if not isinstance(triggers, list) or len(triggers) != len(labels):
                raise DataError(f"{rwhere}: field 't' must be an array parallel to 'r'")
            merged: dict[str, list[str]] = {}
            for label, trigger in zip(labels, triggers):
                if not isinstance(label, str) or label not in schema:
                    raise DataError(f"{rwhere}: unknown relation label {label!r}")
                if not isinstance(trigger, str):
                    raise DataError(f"{rwhere}: trigger for {label!r} must be a string")
                merged.setdefault(label, [])
                if trigger.strip():
                    merged[label].append(trigger.strip())
            gold = tuple(
                GoldRelation(label=label, triggers=tuple(trigs))
                for label, trigs in merged.items()
            )
            pairs.append(
                ArgumentPair(
                    subject=subject.strip(),
                    object=obj.strip(),
                    subject_type=rel["x_type"],
                    object_type=rel["y_type"],
                    gold=gold,
                )
            )
        dialogues.append(
            Dialogue(
                dialogue_id=f"{split_name}-{di:04d}",
                turns=tuple(turns),
                pairs=tuple(pairs),
            )
        )
    return CorpusSplit(name=split_name, dialogues=tuple(dialogues))


def serialize_split(split: CorpusSplit) -> list:
    """Render a split back into the on-disk JSON structure."""
    out = []
    for dialogue in split.dialogues:
        utterances = [turn.line() for turn in dialogue.turns]
        relations = []
        for pair in dialogue.pairs:
            labels: list[str] = []
            triggers: list[str] = []
            for gold in pair.gold:
                if gold.triggers:
                    for trigger in gold.triggers:
                        labels.append(gold.label)
                        triggers.append(trigger)
                else:
                    labels.append(gold.label)
                    triggers.append("")
            relations.append(
                {
                    "x": pair.subject,
                    "y": pair.object,
                    "x_type": pair.subject_type,
                    "y_type": pair.object_type,
                    "r": labels,
                    "t": triggers,
                }
            )
        out.append([utterances, relations])
    return out


def save_split(split: CorpusSplit, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(serialize_split(split), ensure_ascii=False, indent=1),
        encoding="utf-8",
    )


def prefix(dialogue: Dialogue, i: int) -> Dialogue:
    """The dialogue truncated to its first ``i`` turns (argument pairs kept)."""
    if not 1 <= i <= len(dialogue.turns):
        raise ValueError(
            f"prefix length {i} out of range 1..{len(dialogue.turns)} "
            f"for {dialogue.dialogue_id}"
        )
    return Dialogue(
        dialogue_id=dialogue.dialogue_id,
        turns=dialogue.turns[:i],
        pairs=dialogue.pairs,
    )


def first_mention_turn(dialogue: Dialogue, surface: str) -> int | None:
    """1-based index of the first turn mentioning ``surface``, or None.

    A surface is mentioned in a turn when it occurs as a case-insensitive
    substring of the whitespace-normalized turn text.  Surfaces of the form
    "Speaker k" are additionally mentioned in every turn spoken by speaker k.
    """
    needle = _normalize_surface(surface)
    if not needle:
        return None
    speaker_match = _SPEAKER_SURFACE_RE.match(needle)
    speaker_no = int(speaker_match.group(1)) if speaker_match else None
    for i, turn in enumerate(dialogue.turns, start=1):
        if speaker_no is not None and turn.speaker_id == speaker_no:
            return i
        if needle in _normalize_surface(turn.text):
            return i
    return None


def evaluable_prefix(dialogue: Dialogue, pair: ArgumentPair, gold: GoldRelation) -> int | None:
    """Shortest prefix length at which ``gold`` becomes evaluable, or None.

    A relation is evaluable once both arguments and at least one of its
    triggers have been mentioned.  Relations without any trigger annotation
    (and relations none of whose triggers occur in the text) only become
    evaluable at the full dialogue.  Relations whose arguments never occur
    are never evaluable.
    """
    if gold not in pair.gold:
        raise ValueError(f"gold relation {gold.label!r} does not belong to the pair")
    subj_first = first_mention_turn(dialogue, pair.subject)
    obj_first = first_mention_turn(dialogue, pair.object)
    if subj_first is None or obj_first is None:
        return None
    trigger_firsts = [
        first for trigger in gold.triggers
        if (first := first_mention_turn(dialogue, trigger)) is not None
    ]
    trigger_first = min(trigger_firsts) if trigger_firsts else len(dialogue.turns)
    return max(subj_first, obj_first, trigger_first)


def dialogue_token_length(dialogue: Dialogue) -> int:
    """Whitespace token count over the dialogue's utterance lines."""
    return sum(len(turn.line().split()) for turn in dialogue.turns)


def compute_stats(split: CorpusSplit) -> CorpusStats:
    n = len(split.dialogues)
    if n == 0:
        return CorpusStats(0, 0, 0.0, 0.0, 0.0)
    return CorpusStats(
        num_conversations=n,
        num_argument_pairs=sum(len(d.pairs) for d in split.dialogues),
        avg_turns=sum(len(d.turns) for d in split.dialogues) / n,
        avg_dialogue_length_tokens=sum(dialogue_token_length(d) for d in split.dialogues) / n,
        avg_speakers=sum(len({t.speaker_id for t in d.turns}) for d in split.dialogues) / n,
    )


def sample_k_shot(split: CorpusSplit, k: int, seed: int) -> CorpusSplit:
    """Greedy per-relation subsample capping each label at ``k`` argument pairs.

    Pairs are visited in a seed-determined random order; a pair is kept only
    while every one of its gold labels is still below the cap, so no label
    ends up supported by more than ``k`` pairs.  When ``k`` exceeds every
    label's support the whole split survives.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    units = [
        (di, pi)
        for di, dialogue in enumerate(split.dialogues)
        for pi in range(len(dialogue.pairs))
    ]
    random.Random(seed).shuffle(units)
    counts: dict[str, int] = {}
    keep: set[tuple[int, int]] = set()
    for di, pi in units:
        labels = {g.label for g in split.dialogues[di].pairs[pi].gold}
        if all(counts.get(label, 0) < k for label in labels):
            keep.add((di, pi))
            for label in labels:
                counts[label] = counts.get(label, 0) + 1
    dialogues = []
    for di, dialogue in enumerate(split.dialogues):
        pairs = tuple(p for pi, p in enumerate(dialogue.pairs) if (di, pi) in keep)
        if pairs:
            dialogues.append(
                Dialogue(dialogue_id=dialogue.dialogue_id, turns=dialogue.turns, pairs=pairs)
            )
    return CorpusSplit(name=split.name, dialogues=tuple(dialogues))


def subsample_dialogues(split: CorpusSplit, n: int, seed: int) -> CorpusSplit:
    """Uniform random subset of ``n`` dialogues, kept in original order."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n >= len(split.dialogues):
        return split
    chosen = sorted(random.Random(seed).sample(range(len(split.dialogues)), n))
    return CorpusSplit(name=split.name, dialogues=tuple(split.dialogues[i] for i in chosen))
