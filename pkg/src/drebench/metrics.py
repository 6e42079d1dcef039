"""Micro-averaged scoring, in the standard and the conversational setting.

Counting is over (argument pair, relation) triples -- a gold triple is
recovered when its label is in the predicted set for that pair, a predicted
triple is spurious when it is not in gold.  ``unanswerable`` marks abstention
and never enters the counts as a positive class.

The conversational setting scores each relation against dialogue prefixes.
With ``per_prefix`` records (every prefix of every dialogue queried), a
relation enters the reference set of prefix i once its evaluable prefix is
<= i, and every prediction at every prefix is judged.  With
``minimal_prefix`` records (only each relation's evaluable prefix queried),
each gold relation is judged exactly once, at its evaluable prefix, and
false positives accrue at every queried prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

from .corpus import ArgumentPair, CorpusSplit, Dialogue, evaluable_prefix
from .errors import DataError
from .schema import UNANSWERABLE, RelationSchema

if TYPE_CHECKING:  # pragma: no cover
    from .runner import PredictionRecord

PER_PREFIX = "per_prefix"
MINIMAL_PREFIX = "minimal_prefix"
CONVERSATIONAL_MODES = (PER_PREFIX, MINIMAL_PREFIX)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_relation: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    precision_c: float | None = None
    recall_c: float | None = None
    f1_c: float | None = None


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1) with zero denominators scored as zero."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


class _Counts:
    def __init__(self) -> None:
        self.tp = 0
        self.fp = 0
        self.fn = 0
        self.per_relation: dict[str, list[int]] = {}

    def _slot(self, label: str) -> list[int]:
        return self.per_relation.setdefault(label, [0, 0, 0])

    def judge(self, predicted: set[str], gold: set[str]) -> None:
        for label in predicted & gold:
            self.tp += 1
            self._slot(label)[0] += 1
        for label in predicted - gold:
            self.fp += 1
            self._slot(label)[1] += 1
        for label in gold - predicted:
            self.fn += 1
            self._slot(label)[2] += 1

    def frozen(self) -> dict[str, tuple[int, int, int]]:
        return {label: tuple(v) for label, v in sorted(self.per_relation.items())}


def _pair_index(split: CorpusSplit) -> dict[tuple[str, int], tuple[Dialogue, ArgumentPair]]:
    return {
        (dialogue.dialogue_id, pi): (dialogue, pair)
        for dialogue in split.dialogues
        for pi, pair in enumerate(dialogue.pairs)
    }


def _positive_predictions(record, schema: RelationSchema) -> set[str]:
    if not record.predicted:
        raise DataError(
            f"record {record.dialogue_id}/{record.pair_index}: empty prediction set"
        )
    for label in record.predicted:
        if label not in schema:
            raise DataError(
                f"record {record.dialogue_id}/{record.pair_index}: "
                f"unknown predicted label {label!r}"
            )
    return {l for l in record.predicted if l != UNANSWERABLE}


def predictions_by_pair(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
) -> dict[tuple[str, int], set[str]]:
    """Full-dialogue predictions per pair, strictly validated.

    Every record must target a known pair at its full prefix, no pair may be
    judged twice, and every pair of the split must be covered.
    """
    index = _pair_index(split)
    by_pair: dict[tuple[str, int], set[str]] = {}
    for record in records:
        key = (record.dialogue_id, record.pair_index)
        if key not in index:
            raise DataError(f"record for unknown pair {key}")
        dialogue, _ = index[key]
        if record.prefix_turns != len(dialogue.turns):
            raise DataError(
                f"record {key} is at prefix {record.prefix_turns}, not the full "
                f"dialogue ({len(dialogue.turns)} turns); wrong setting?"
            )
        if key in by_pair:
            raise DataError(f"duplicate record for pair {key}")
        by_pair[key] = _positive_predictions(record, schema)
    missing = sorted(set(index) - set(by_pair))
    if missing:
        raise DataError(f"no record for pair {missing[0]} (+{len(missing) - 1} more)")
    return by_pair


def score_standard(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
) -> EvalReport:
    """Micro P/R/F1 of full-dialogue predictions against gold label sets."""
    index = _pair_index(split)
    by_pair = predictions_by_pair(records, split, schema)
    counts = _Counts()
    for key, predicted in by_pair.items():
        _, pair = index[key]
        counts.judge(predicted, pair.positive_labels())
    precision, recall, f1 = f1_from_counts(counts.tp, counts.fp, counts.fn)
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        tp=counts.tp,
        fp=counts.fp,
        fn=counts.fn,
        per_relation=counts.frozen(),
    )


def _evaluable_map(split: CorpusSplit):
    """(pair key) -> {label: evaluable prefix or None} over positive golds."""
    out: dict[tuple[str, int], dict[str, int | None]] = {}
    for dialogue in split.dialogues:
        for pi, pair in enumerate(dialogue.pairs):
            slots = {}
            for gold in pair.gold:
                if gold.label != UNANSWERABLE:
                    slots[gold.label] = evaluable_prefix(dialogue, pair, gold)
            out[(dialogue.dialogue_id, pi)] = slots
    return out


def score_conversational(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
    mode: str = PER_PREFIX,
) -> EvalReport:
    """Conversational micro P/R/F1 (the _c fields) over prefix predictions.

    With ``per_prefix`` records the report's plain precision/recall/f1 are
    additionally filled from the full-prefix records, which by construction
    equal standard scoring of those predictions.  In ``minimal_prefix`` mode
    the plain fields are not derivable and stay at zero.
    """
    if mode not in CONVERSATIONAL_MODES:
        raise DataError(f"unknown conversational mode: {mode!r}")
    index = _pair_index(split)
    evaluable = _evaluable_map(split)
    records = list(records)

    by_slot: dict[tuple[str, int, int], set[str]] = {}
    for record in records:
        key = (record.dialogue_id, record.pair_index)
        if key not in index:
            raise DataError(f"record for unknown pair {key}")
        dialogue, _ = index[key]
        if not 1 <= record.prefix_turns <= len(dialogue.turns):
            raise DataError(
                f"record {key} at prefix {record.prefix_turns} is out of range"
            )
        slot = key + (record.prefix_turns,)
        if slot in by_slot:
            raise DataError(f"duplicate record for pair {key} at prefix {record.prefix_turns}")
        by_slot[slot] = _positive_predictions(record, schema)

    if mode == PER_PREFIX:
        wanted = {
            key + (i,)
            for key, (dialogue, _) in index.items()
            for i in range(1, len(dialogue.turns) + 1)
        }
    else:
        wanted = {
            key + (at,)
            for key, slots in evaluable.items()
            for at in {p for p in slots.values() if p is not None}
        }
    if set(by_slot) != wanted:
        missing = sorted(wanted - set(by_slot))
        extra = sorted(set(by_slot) - wanted)
        detail = []
        if missing:
            detail.append(f"missing {missing[0]} (+{len(missing) - 1} more)")
        if extra:
            detail.append(f"unexpected {extra[0]} (+{len(extra) - 1} more)")
        raise DataError(
            f"records do not match the {mode} query plan: {'; '.join(detail)}"
        )

    counts = _Counts()
    if mode == PER_PREFIX:
        for (dlg_id, pi, i), predicted in sorted(by_slot.items()):
            slots = evaluable[(dlg_id, pi)]
            gold_here = {l for l, at in slots.items() if at is not None and at <= i}
            counts.judge(predicted, gold_here)
    else:
        for (dlg_id, pi, i), predicted in sorted(by_slot.items()):
            slots = evaluable[(dlg_id, pi)]
            gold_here = {l for l, at in slots.items() if at is not None and at <= i}
            # each relation is judged once, at exactly its evaluable prefix
            for label in (l for l, at in slots.items() if at == i):
                if label in predicted:
                    counts.tp += 1
                    counts._slot(label)[0] += 1
                else:
                    counts.fn += 1
                    counts._slot(label)[2] += 1
            for label in predicted - gold_here:
                counts.fp += 1
                counts._slot(label)[1] += 1

    precision_c, recall_c, f1_c = f1_from_counts(counts.tp, counts.fp, counts.fn)
    precision = recall = f1 = 0.0
    if mode == PER_PREFIX:
        full = [
            r for r in records
            if r.prefix_turns == len(index[(r.dialogue_id, r.pair_index)][0].turns)
        ]
        std = score_standard(full, split, schema)
        precision, recall, f1 = std.precision, std.recall, std.f1
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        tp=counts.tp,
        fp=counts.fp,
        fn=counts.fn,
        per_relation=counts.frozen(),
        precision_c=precision_c,
        recall_c=recall_c,
        f1_c=f1_c,
    )
