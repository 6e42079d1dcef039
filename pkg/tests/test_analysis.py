import math

import pytest

from drebench.analysis import (
    DEFAULT_LENGTH_BUCKETS,
    LengthBucket,
    emit_report,
    error_rates,
    group_scores_by_symmetry,
    scores_by_length,
)
from drebench.corpus import ArgumentPair, CorpusSplit, Dialogue, GoldRelation, Turn
from drebench.errors import DataError
from drebench.metrics import score_standard
from drebench.runner import PredictionRecord
from drebench.schema import UNANSWERABLE


def _record(dialogue_id, pair_index, predicted, prefix_turns=1):
    return PredictionRecord(
        dialogue_id=dialogue_id,
        pair_index=pair_index,
        prefix_turns=prefix_turns,
        predicted=frozenset(predicted),
        raw="synthetic",
        strategy="vanilla_direct",
        shots=0,
        timestamp=0.0,
    )


def analysis_fixture():
    """Thirty gold triples over three dialogues of controlled length.

    Ten triples per dialogue: five per:friends (symmetric), three
    per:children (asymmetric), two per:title (no inverse).  The first
    dialogue is predicted perfectly, the second misses one triple of each
    relation, the third misses two of each and adds one spurious
    per:parents.  Hand-derived totals:

    * error rates: friends 3/15, children 3/9, title 3/6
    * symmetry F1: symmetric 8/9, asymmetric 3/4, other 2/3
    * length buckets: (0,100] perfect, (100,200] 14/17, (200,300] 8/15
    """
    plans = [
        ("an-0000", 2, 0, 0, 0, False),   # 4 tokens -> (0, 100]
        ("an-0001", 148, 1, 1, 1, False), # 150 tokens -> (100, 200]
        ("an-0002", 248, 2, 2, 2, True),  # 250 tokens -> (200, 300]
    ]
    dialogues = []
    records = []
    for dialogue_id, pad_words, miss_friends, miss_children, miss_title, spurious in plans:
        turns = (Turn(1, " ".join(["pad"] * pad_words)),)
        pairs = []
        layout = [("per:friends", 5, miss_friends), ("per:children", 3, miss_children),
                  ("per:title", 2, miss_title)]
        for label, total, misses in layout:
            for j in range(total):
                pair_index = len(pairs)
                pairs.append(
                    ArgumentPair(
                        f"P{pair_index}", f"Q{pair_index}", "PER", "PER",
                        (GoldRelation(label, ()),),
                    )
                )
                if j < misses:
                    predicted = {UNANSWERABLE}
                    if spurious and label == "per:title" and j == 0:
                        predicted = {"per:parents"}
                else:
                    predicted = {label}
                records.append(_record(dialogue_id, pair_index, predicted))
        dialogues.append(Dialogue(dialogue_id, turns, tuple(pairs)))
    return CorpusSplit("an", tuple(dialogues)), records


def test_fixture_has_thirty_triples(schema):
    split, records = analysis_fixture()
    total = sum(len(p.positive_labels()) for d in split.dialogues for p in d.pairs)
    assert total == 30
    report = score_standard(records, split, schema)
    assert (report.tp, report.fp, report.fn) == (21, 1, 9)


def test_error_rates_hand_derivation(schema):
    split, records = analysis_fixture()
    rows = error_rates(records, split, schema)
    assert [(r.label, r.gold_triples, r.wrong) for r in rows] == [
        ("per:friends", 15, 3),
        ("per:children", 9, 3),
        ("per:title", 6, 3),
    ]
    assert rows[0].error_rate == pytest.approx(20.0)
    assert rows[1].error_rate == pytest.approx(100.0 / 3.0)
    assert rows[2].error_rate == pytest.approx(50.0)


def test_error_rates_top_k(schema):
    split, records = analysis_fixture()
    rows = error_rates(records, split, schema, top_k=2)
    assert [r.label for r in rows] == ["per:friends", "per:children"]
    with pytest.raises(DataError):
        error_rates(records, split, schema, top_k=0)


def test_error_rates_tie_breaks_alphabetically(schema):
    dialogue = Dialogue(
        "tie-0000",
        (Turn(1, "hello"),),
        (
            ArgumentPair("A", "B", "PER", "PER", (GoldRelation("per:title", ()),)),
            ArgumentPair("C", "D", "PER", "PER", (GoldRelation("per:age", ()),)),
        ),
    )
    split = CorpusSplit("tie", (dialogue,))
    records = [
        _record("tie-0000", 0, {"per:title"}),
        _record("tie-0000", 1, {UNANSWERABLE}),
    ]
    rows = error_rates(records, split, schema)
    assert [r.label for r in rows] == ["per:age", "per:title"]


def test_symmetry_groups_hand_derivation(schema):
    split, records = analysis_fixture()
    groups = group_scores_by_symmetry(records, split, schema)
    assert set(groups) == {"asymmetric", "symmetric", "other"}
    assert groups["symmetric"] == pytest.approx(8.0 / 9.0)
    assert groups["asymmetric"] == pytest.approx(0.75)
    assert groups["other"] == pytest.approx(2.0 / 3.0)


def test_symmetry_groups_report_empty_classes_as_zero(schema):
    dialogue = Dialogue(
        "o-0000",
        (Turn(1, "hello"),),
        (ArgumentPair("A", "B", "PER", "STRING", (GoldRelation("per:title", ()),)),),
    )
    split = CorpusSplit("o", (dialogue,))
    records = [_record("o-0000", 0, {"per:title"})]
    groups = group_scores_by_symmetry(records, split, schema)
    assert groups == {"other": 1.0, "asymmetric": 0.0, "symmetric": 0.0}


def test_scores_by_length_hand_derivation(schema):
    split, records = analysis_fixture()
    buckets = scores_by_length(records, split, schema)
    assert len(buckets) == 6
    assert [(b.lower, b.upper) for b in buckets] == list(DEFAULT_LENGTH_BUCKETS)
    assert buckets[0].f1 == 1.0 and buckets[0].gold_triples == 10
    assert buckets[1].f1 == pytest.approx(14.0 / 17.0)
    assert buckets[1].gold_triples == 10
    assert buckets[2].f1 == pytest.approx(8.0 / 15.0)
    assert buckets[2].gold_triples == 10
    for empty in buckets[3:]:
        assert empty.f1 == 0.0 and empty.gold_triples == 0


def test_scores_by_length_custom_and_invalid_buckets(schema):
    split, records = analysis_fixture()
    custom = scores_by_length(records, split, schema, buckets=[(0, math.inf)])
    assert len(custom) == 1
    assert custom[0].gold_triples == 30
    with pytest.raises(DataError, match="overlap"):
        scores_by_length(records, split, schema, buckets=[(0, 100), (50, 200)])
    with pytest.raises(DataError, match="empty length bucket"):
        scores_by_length(records, split, schema, buckets=[(100, 100)])
    with pytest.raises(DataError, match="at least one"):
        scores_by_length(records, split, schema, buckets=[])


def test_analysis_validates_records_like_scoring(schema):
    split, records = analysis_fixture()
    with pytest.raises(DataError, match="no record"):
        error_rates(records[:-1], split, schema)


def test_emit_report_writes_markdown_and_csvs(tmp_path, schema):
    split, records = analysis_fixture()
    report = score_standard(records, split, schema)
    rows = error_rates(records, split, schema)
    groups = group_scores_by_symmetry(records, split, schema)
    buckets = scores_by_length(records, split, schema)
    path = emit_report(report, rows, groups, buckets, tmp_path, "run123")
    assert path == tmp_path / "run123.report.md"
    text = path.read_text(encoding="utf-8")
    assert "# Evaluation report: run123" in text
    assert "| per:friends | 15 | 3 | 20.0% |" in text
    assert "| symmetric | 0.8889 |" in text
    assert "| (200, 300] | 10 | 0.5333 |" in text
    for stem in ("scores", "per_relation", "error_rates", "symmetry", "length_buckets"):
        assert (tmp_path / f"run123.{stem}.csv").is_file()
    again = emit_report(report, rows, groups, buckets, tmp_path, "run123")
    assert again.read_bytes() == text.encode("utf-8")


def test_emit_report_handles_empty_inputs(tmp_path):
    from drebench.metrics import EvalReport

    report = EvalReport(0.0, 0.0, 0.0, 0, 0, 0, {})
    path = emit_report(report, [], {}, [], tmp_path, "empty")
    text = path.read_text(encoding="utf-8")
    assert text.count("No data.") == 4
