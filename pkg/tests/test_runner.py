import json

import pytest

from drebench.client import ConstantClient, ReplayClient, write_transcript
from drebench.errors import DataError, EndpointError
from drebench.metrics import (
    MINIMAL_PREFIX,
    PER_PREFIX,
    score_conversational,
    score_standard,
)
from drebench.prompts import Strategy
from drebench.runner import (
    CONVERSATIONAL,
    STANDARD,
    PredictionRecord,
    RunConfig,
    build_gold_transcript,
    plan_units,
    read_run_log,
    run,
    run_conversational,
    run_standard,
    write_run_log,
)
from drebench.schema import UNANSWERABLE


def _config(kind="vanilla_direct", setting=STANDARD, mode=PER_PREFIX, **kwargs):
    return RunConfig(
        strategy=Strategy(kind), setting=setting, conversational_mode=mode, **kwargs
    )


def test_run_config_validation():
    with pytest.raises(DataError):
        RunConfig(strategy=Strategy("landre"), setting="sideways")
    with pytest.raises(DataError):
        RunConfig(strategy=Strategy("landre"), conversational_mode="sideways")
    with pytest.raises(DataError):
        RunConfig(strategy=Strategy("landre"), parallelism=0)


def test_plan_unit_counts(fixture_split):
    standard = plan_units(fixture_split, _config())
    assert len(standard) == 12
    assert all(i == len(d.turns) for d, _, i in standard)
    per_prefix = plan_units(fixture_split, _config(setting=CONVERSATIONAL))
    assert len(per_prefix) == sum(
        len(d.turns) * len(d.pairs) for d in fixture_split.dialogues
    ) == 44
    minimal = plan_units(fixture_split, _config(setting=CONVERSATIONAL, mode=MINIMAL_PREFIX))
    # one unit per distinct evaluable prefix of each pair's positive relations
    assert len(minimal) == 12
    assert all(unit in per_prefix for unit in minimal)


def test_gold_echo_standard_run_is_perfect(fixture_split, schema):
    for kind in ("vanilla_direct", "landre", "restrictive", "yes_no", "open_ended"):
        client = ReplayClient(build_gold_transcript(fixture_split, schema, Strategy(kind)))
        records = run_standard(fixture_split, _config(kind), client, schema)
        assert len(records) == 12
        report = score_standard(records, fixture_split, schema)
        assert report.f1 == 1.0, kind
        assert report.fp == 0 and report.fn == 0


def test_gold_echo_conversational_runs_are_perfect(fixture_split, schema):
    transcript = build_gold_transcript(fixture_split, schema, Strategy("vanilla_direct"))
    for mode in (PER_PREFIX, MINIMAL_PREFIX):
        client = ReplayClient(transcript)
        records = run_conversational(
            fixture_split, _config(setting=CONVERSATIONAL, mode=mode), client, schema
        )
        report = score_conversational(records, fixture_split, schema, mode)
        assert report.f1_c == 1.0, mode


def test_indirect_run_issues_one_request_per_candidate(fixture_split, schema):
    client = ReplayClient(build_gold_transcript(fixture_split, schema, Strategy("yes_no")))
    records = run_standard(fixture_split, _config("yes_no"), client, schema)
    assert client.calls == 35 * 12
    assert len(records) == 12


def test_constant_abstention_scores_zero(fixture_split, schema):
    client = ConstantClient("unanswerable")
    records = run_standard(fixture_split, _config(), client, schema)
    assert all(r.predicted == frozenset({UNANSWERABLE}) for r in records)
    report = score_standard(records, fixture_split, schema)
    assert report.precision == 0.0 and report.recall == 0.0 and report.f1 == 0.0


def test_records_are_sorted_and_parallelism_invariant(fixture_split, schema):
    transcript = build_gold_transcript(fixture_split, schema, Strategy("vanilla_direct"))
    config_serial = _config(setting=CONVERSATIONAL)
    serial = run(fixture_split, config_serial, ReplayClient(transcript), schema)
    config_parallel = RunConfig(
        strategy=Strategy("vanilla_direct"),
        setting=CONVERSATIONAL,
        conversational_mode=PER_PREFIX,
        parallelism=8,
    )
    parallel = run(fixture_split, config_parallel, ReplayClient(transcript), schema)
    assert serial == parallel
    keys = [(r.dialogue_id, r.pair_index, r.prefix_turns) for r in serial]
    assert keys == sorted(keys)


def test_run_log_round_trip(tmp_path, fixture_split, schema):
    client = ReplayClient(build_gold_transcript(fixture_split, schema, Strategy("landre")))
    records = run_standard(
        fixture_split, _config("landre"), client, schema, log_path=tmp_path / "log.jsonl"
    )
    loaded = read_run_log(tmp_path / "log.jsonl")
    assert loaded == records


def test_run_log_bytes_are_deterministic(tmp_path, fixture_split, schema):
    transcript = build_gold_transcript(fixture_split, schema, Strategy("vanilla_direct"))
    paths = []
    for name in ("a.jsonl", "b.jsonl"):
        path = tmp_path / name
        run(
            fixture_split,
            _config(setting=CONVERSATIONAL),
            ReplayClient(transcript),
            schema,
            log_path=path,
        )
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_aborted_run_persists_partial_results(tmp_path, fixture_split, schema):
    transcript = build_gold_transcript(fixture_split, schema, Strategy("vanilla_direct"))
    # drop the transcript entries for the last dialogue: the run must fail
    # but keep everything completed before the failure
    keep = [r for r in transcript if "Janice" not in r.prompt]
    log_path = tmp_path / "partial.jsonl"
    with pytest.raises(EndpointError, match="no transcript entry"):
        run(fixture_split, _config(), ReplayClient(keep), schema, log_path=log_path)
    partial = read_run_log(log_path)
    assert 0 < len(partial) < 12
    assert all(r.dialogue_id != "fixture-0004" for r in partial)


def test_few_shot_requires_demo_split(fixture_split, schema):
    config = RunConfig(strategy=Strategy("vanilla_direct", shots=2))
    with pytest.raises(DataError, match="demonstration split"):
        run(fixture_split, config, ConstantClient("x"), schema)


def test_few_shot_round_trip(fixture_split, schema):
    strategy = Strategy("vanilla_direct", shots=2)
    transcript = build_gold_transcript(
        fixture_split, schema, strategy, demo_split=fixture_split, seed=3
    )
    config = RunConfig(strategy=strategy, seed=3)
    records = run(
        fixture_split, config, ReplayClient(transcript), schema, demo_split=fixture_split
    )
    report = score_standard(records, fixture_split, schema)
    assert report.f1 == 1.0
    assert all(r.shots == 2 for r in records)


def test_setting_guards(fixture_split, schema):
    client = ConstantClient("unanswerable")
    with pytest.raises(DataError):
        run_standard(fixture_split, _config(setting=CONVERSATIONAL), client, schema)
    with pytest.raises(DataError):
        run_conversational(fixture_split, _config(setting=STANDARD), client, schema)


def test_prediction_record_round_trip():
    record = PredictionRecord(
        dialogue_id="x-0000",
        pair_index=1,
        prefix_turns=3,
        predicted=frozenset({"per:friends", UNANSWERABLE}),
        raw=("a", "b"),
        strategy="yes_no",
        shots=0,
        timestamp=0.0,
    )
    assert PredictionRecord.from_dict(record.to_dict()) == record
    assert json.dumps(record.to_dict(), sort_keys=True)  # json-serializable
    with pytest.raises(DataError, match="missing field"):
        PredictionRecord.from_dict({"dialogue_id": "x"})


def test_gold_transcript_covers_every_prefix(fixture_split, schema):
    transcript = build_gold_transcript(fixture_split, schema, Strategy("landre"))
    # every (pair, prefix) has exactly one input line in the transcript
    assert len(transcript) == 44
    assert len({r.prompt for r in transcript}) == 44
