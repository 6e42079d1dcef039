"""Post-hoc analyses over standard-setting prediction records.

Three views complement the headline scores: per-relation error rates ranked
by gold-triple frequency, micro F1 grouped by the relations' symmetry class,
and micro F1 bucketed by dialogue token length.  ``emit_report`` renders all
of them into a markdown document plus machine-readable CSV files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .corpus import CorpusSplit, CorpusStats, dialogue_token_length
from .errors import DataError
from .metrics import EvalReport, _Counts, f1_from_counts, predictions_by_pair
from .schema import ASYMMETRIC, OTHER, SYMMETRIC, RelationSchema

if TYPE_CHECKING:  # pragma: no cover
    from .runner import PredictionRecord

DEFAULT_LENGTH_BUCKETS: tuple[tuple[float, float], ...] = (
    (0, 100),
    (100, 200),
    (200, 300),
    (300, 400),
    (400, 500),
    (500, math.inf),
)


@dataclass(frozen=True)
class ErrorRow:
    label: str
    gold_triples: int
    wrong: int

    @property
    def error_rate(self) -> float:
        """Percentage of this relation's gold triples not recovered."""
        return 100.0 * self.wrong / self.gold_triples


@dataclass(frozen=True)
class LengthBucket:
    lower: float
    upper: float
    f1: float
    gold_triples: int


def error_rates(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
    top_k: int = 10,
) -> list[ErrorRow]:
    """Error rows for the ``top_k`` most frequent gold relations."""
    if top_k < 1:
        raise DataError("top_k must be >= 1")
    by_pair = predictions_by_pair(records, split, schema)
    triples: dict[str, int] = {}
    wrong: dict[str, int] = {}
    for dialogue in split.dialogues:
        for pi, pair in enumerate(dialogue.pairs):
            predicted = by_pair[(dialogue.dialogue_id, pi)]
            for label in pair.positive_labels():
                triples[label] = triples.get(label, 0) + 1
                if label not in predicted:
                    wrong[label] = wrong.get(label, 0) + 1
    ranked = sorted(triples.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        ErrorRow(label=label, gold_triples=count, wrong=wrong.get(label, 0))
        for label, count in ranked[:top_k]
    ]


def group_scores_by_symmetry(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
) -> dict[str, float]:
    """Micro F1 per symmetry class; gold-side events follow the gold label's
    class, spurious predictions follow the predicted label's class."""
    by_pair = predictions_by_pair(records, split, schema)
    counts = {cls: _Counts() for cls in (ASYMMETRIC, SYMMETRIC, OTHER)}
    for dialogue in split.dialogues:
        for pi, pair in enumerate(dialogue.pairs):
            predicted = by_pair[(dialogue.dialogue_id, pi)]
            gold = pair.positive_labels()
            for label in predicted & gold:
                counts[schema.entry(label).symmetry].tp += 1
            for label in gold - predicted:
                counts[schema.entry(label).symmetry].fn += 1
            for label in predicted - gold:
                counts[schema.entry(label).symmetry].fp += 1
    return {
        cls: f1_from_counts(c.tp, c.fp, c.fn)[2]
        for cls, c in counts.items()
    }


def scores_by_length(
    records: Iterable["PredictionRecord"],
    split: CorpusSplit,
    schema: RelationSchema,
    buckets: Iterable[tuple[float, float]] | None = None,
) -> list[LengthBucket]:
    """Micro F1 per dialogue-length bucket (half-open intervals, (lower, upper])."""
    bounds = list(buckets) if buckets is not None else list(DEFAULT_LENGTH_BUCKETS)
    if not bounds:
        raise DataError("at least one length bucket is required")
    for lower, upper in bounds:
        if not lower < upper:
            raise DataError(f"empty length bucket: ({lower}, {upper}]")
    ordered = sorted(bounds)
    for (_, prev_upper), (next_lower, _) in zip(ordered, ordered[1:]):
        if next_lower < prev_upper:
            raise DataError("length buckets overlap")

    by_pair = predictions_by_pair(records, split, schema)
    counts = {bound: _Counts() for bound in bounds}
    for dialogue in split.dialogues:
        length = dialogue_token_length(dialogue)
        slot = next(
            (c for (lower, upper), c in counts.items() if lower < length <= upper), None
        )
        if slot is None:
            continue
        for pi, pair in enumerate(dialogue.pairs):
            slot.judge(by_pair[(dialogue.dialogue_id, pi)], pair.positive_labels())
    return [
        LengthBucket(
            lower=lower,
            upper=upper,
            f1=f1_from_counts(c.tp, c.fp, c.fn)[2],
            gold_triples=c.tp + c.fn,
        )
        for (lower, upper), c in counts.items()
    ]


def _fmt_bound(value: float) -> str:
    return "inf" if math.isinf(value) else str(int(value))


def _score_rows(report: EvalReport) -> list[tuple[str, str]]:
    rows = [
        ("precision", f"{report.precision:.4f}"),
        ("recall", f"{report.recall:.4f}"),
        ("f1", f"{report.f1:.4f}"),
        ("tp", str(report.tp)),
        ("fp", str(report.fp)),
        ("fn", str(report.fn)),
    ]
    if report.f1_c is not None:
        rows += [
            ("precision_c", f"{report.precision_c:.4f}"),
            ("recall_c", f"{report.recall_c:.4f}"),
            ("f1_c", f"{report.f1_c:.4f}"),
        ]
    return rows


def emit_report(
    report: EvalReport,
    rows: list[ErrorRow],
    groups: dict[str, float],
    buckets: list[LengthBucket],
    out_dir: str | Path,
    run_id: str,
    stats: CorpusStats | None = None,
) -> Path:
    """Write ``{run_id}.report.md`` and sibling CSVs into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def csv_path(stem: str) -> Path:
        return out_dir / f"{run_id}.{stem}.csv"

    def write_csv(stem: str, header: list[str], data: list[list]) -> None:
        with open(csv_path(stem), "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(data)

    lines = [f"# Evaluation report: {run_id}", ""]

    if stats is not None:
        lines += [
            "## Corpus profile",
            "",
            "| metric | value |",
            "| --- | --- |",
            f"| conversations | {stats.num_conversations} |",
            f"| argument pairs | {stats.num_argument_pairs} |",
            f"| avg turns | {stats.avg_turns:.1f} |",
            f"| avg length (tokens) | {stats.avg_dialogue_length_tokens:.1f} |",
            f"| avg speakers | {stats.avg_speakers:.1f} |",
            "",
        ]
        write_csv(
            "corpus_profile",
            ["metric", "value"],
            [
                ["conversations", stats.num_conversations],
                ["argument_pairs", stats.num_argument_pairs],
                ["avg_turns", f"{stats.avg_turns:.4f}"],
                ["avg_length_tokens", f"{stats.avg_dialogue_length_tokens:.4f}"],
                ["avg_speakers", f"{stats.avg_speakers:.4f}"],
            ],
        )

    lines += ["## Scores", "", "| metric | value |", "| --- | --- |"]
    lines += [f"| {name} | {value} |" for name, value in _score_rows(report)]
    lines.append("")
    write_csv("scores", ["metric", "value"], [list(row) for row in _score_rows(report)])

    lines += ["## Per-relation counts", ""]
    if report.per_relation:
        lines += ["| relation | tp | fp | fn |", "| --- | --- | --- | --- |"]
        lines += [
            f"| {label} | {tp} | {fp} | {fn} |"
            for label, (tp, fp, fn) in report.per_relation.items()
        ]
    else:
        lines.append("No data.")
    lines.append("")
    write_csv(
        "per_relation",
        ["relation", "tp", "fp", "fn"],
        [[label, *counts] for label, counts in report.per_relation.items()],
    )

    lines += ["## Hardest relations", ""]
    if rows:
        lines += ["| relation | gold triples | wrong | error rate |", "| --- | --- | --- | --- |"]
        lines += [
            f"| {r.label} | {r.gold_triples} | {r.wrong} | {r.error_rate:.1f}% |"
            for r in rows
        ]
    else:
        lines.append("No data.")
    lines.append("")
    write_csv(
        "error_rates",
        ["relation", "gold_triples", "wrong", "error_rate"],
        [[r.label, r.gold_triples, r.wrong, f"{r.error_rate:.4f}"] for r in rows],
    )

    lines += ["## Scores by relation symmetry", ""]
    if groups:
        lines += ["| class | f1 |", "| --- | --- |"]
        lines += [f"| {cls} | {groups[cls]:.4f} |" for cls in sorted(groups)]
    else:
        lines.append("No data.")
    lines.append("")
    write_csv("symmetry", ["class", "f1"], [[cls, f"{groups[cls]:.4f}"] for cls in sorted(groups)])

    lines += ["## Scores by dialogue length", ""]
    if buckets:
        lines += ["| bucket | gold triples | f1 |", "| --- | --- | --- |"]
        lines += [
            f"| ({_fmt_bound(b.lower)}, {_fmt_bound(b.upper)}] | {b.gold_triples} | {b.f1:.4f} |"
            for b in buckets
        ]
    else:
        lines.append("No data.")
    lines.append("")
    write_csv(
        "length_buckets",
        ["lower", "upper", "gold_triples", "f1"],
        [[_fmt_bound(b.lower), _fmt_bound(b.upper), b.gold_triples, f"{b.f1:.4f}"] for b in buckets],
    )

    report_path = out_dir / f"{run_id}.report.md"
    report_path.write_text("\n".join(lines), encoding="utf-8")
    return report_path
