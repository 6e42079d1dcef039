"""Run orchestration: query plans, threaded execution, prediction logs.

A run walks a corpus split and produces one :class:`PredictionRecord` per
queried (pair, prefix) unit.  The standard setting queries each pair once,
at the full dialogue.  The conversational setting queries dialogue prefixes:
``per_prefix`` mode queries every prefix of every dialogue, while
``minimal_prefix`` mode queries only the prefixes at which some gold
relation first becomes evaluable.

Workers share an immutable split and a thread-safe client, so units fan out
over a thread pool.  Results are gathered and sorted into a deterministic
order; if the client fails hard the records finished so far are still
persisted before the error propagates.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

from .client import CompletionClient, CompletionRecord, make_record
from .corpus import ArgumentPair, CorpusSplit, Dialogue, evaluable_prefix, prefix
from .errors import DataError, EndpointError
from .metrics import CONVERSATIONAL_MODES, MINIMAL_PREFIX, PER_PREFIX
from .parse import (
    aggregate_indirect,
    parse_boolean_answer,
    parse_direct_answer,
    parse_landre_output,
    parse_open_ended_answer,
)
from .prompts import (
    LANDRE,
    OPEN_ENDED,
    VANILLA_DIRECT,
    Demonstration,
    Strategy,
    build_indirect_questions,
    build_landre_example,
    build_vanilla_prompt,
    sample_demonstrations,
    serialize_landre_output,
)
from .schema import UNANSWERABLE, RelationSchema

logger = logging.getLogger(__name__)

STANDARD = "standard"
CONVERSATIONAL = "conversational"
SETTINGS = (STANDARD, CONVERSATIONAL)


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy
    setting: str = STANDARD
    conversational_mode: str = PER_PREFIX
    seed: int = 0
    parallelism: int = 1

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise DataError(f"unknown setting: {self.setting!r}")
        if self.conversational_mode not in CONVERSATIONAL_MODES:
            raise DataError(f"unknown conversational mode: {self.conversational_mode!r}")
        if self.parallelism < 1:
            raise DataError("parallelism must be >= 1")


@dataclass(frozen=True)
class PredictionRecord:
    dialogue_id: str
    pair_index: int
    prefix_turns: int
    predicted: frozenset[str]
    raw: str | tuple[str, ...]
    strategy: str
    shots: int
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "pair_index": self.pair_index,
            "prefix_turns": self.prefix_turns,
            "predicted": sorted(self.predicted),
            "raw": list(self.raw) if isinstance(self.raw, tuple) else self.raw,
            "strategy": self.strategy,
            "shots": self.shots,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(data: dict) -> "PredictionRecord":
        try:
            raw = data["raw"]
            return PredictionRecord(
                dialogue_id=data["dialogue_id"],
                pair_index=int(data["pair_index"]),
                prefix_turns=int(data["prefix_turns"]),
                predicted=frozenset(data["predicted"]),
                raw=tuple(raw) if isinstance(raw, list) else raw,
                strategy=data["strategy"],
                shots=int(data.get("shots", 0)),
                timestamp=float(data.get("timestamp", 0.0)),
            )
        except KeyError as exc:
            raise DataError(f"prediction record is missing field {exc}") from None


def write_run_log(records: list[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def read_run_log(path: str | Path) -> list[PredictionRecord]:
    records = []
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(PredictionRecord.from_dict(json.loads(line)))
                except json.JSONDecodeError:
                    raise DataError(f"{path}: line {lineno}: not valid JSON") from None
    except FileNotFoundError:
        raise DataError(f"run log not found: {path}") from None
    return records


def _positive_evaluable_prefixes(dialogue: Dialogue, pair: ArgumentPair) -> dict[str, int]:
    """Evaluable prefix per positive gold label, never-evaluable ones dropped."""
    out = {}
    for gold in pair.gold:
        if gold.label == UNANSWERABLE:
            continue
        at = evaluable_prefix(dialogue, pair, gold)
        if at is not None:
            out[gold.label] = at
    return out


def plan_units(split: CorpusSplit, config: RunConfig) -> list[tuple[Dialogue, int, int]]:
    """The (dialogue, pair index, prefix length) units a run must query."""
    units = []
    for dialogue in split.dialogues:
        m = len(dialogue.turns)
        for pi, pair in enumerate(dialogue.pairs):
            if config.setting == STANDARD:
                units.append((dialogue, pi, m))
            elif config.conversational_mode == PER_PREFIX:
                units.extend((dialogue, pi, i) for i in range(1, m + 1))
            else:
                prefixes = sorted(set(_positive_evaluable_prefixes(dialogue, pair).values()))
                units.extend((dialogue, pi, i) for i in prefixes)
    return units


def _predict_unit(
    dialogue: Dialogue,
    pair_index: int,
    prefix_turns: int,
    schema: RelationSchema,
    strategy: Strategy,
    client: CompletionClient,
    demonstrations: list[Demonstration],
) -> PredictionRecord:
    head = prefix(dialogue, prefix_turns)
    pair = dialogue.pairs[pair_index]
    if strategy.kind == VANILLA_DIRECT:
        completion = client.complete(
            build_vanilla_prompt(head, pair, schema, demonstrations)
        )
        predicted = parse_direct_answer(completion.response, schema)
        raw: str | tuple[str, ...] = completion.response
        timestamp = completion.timestamp
    elif strategy.kind == LANDRE:
        completion = client.complete(build_landre_example(head, pair, schema)[0])
        predicted = parse_landre_output(completion.response, schema)
        raw = completion.response
        timestamp = completion.timestamp
    else:
        judgments = []
        answers = []
        timestamp = 0.0
        for label, question in build_indirect_questions(head, pair, schema, strategy.kind):
            completion = client.complete(question)
            if strategy.kind == OPEN_ENDED:
                positive = parse_open_ended_answer(completion.response, pair)
            else:
                positive = parse_boolean_answer(completion.response, strategy.kind)
            judgments.append((label, positive))
            answers.append(completion.response)
            timestamp = max(timestamp, completion.timestamp)
        predicted = aggregate_indirect(judgments)
        raw = tuple(answers)
    return PredictionRecord(
        dialogue_id=dialogue.dialogue_id,
        pair_index=pair_index,
        prefix_turns=prefix_turns,
        predicted=predicted,
        raw=raw,
        strategy=strategy.kind,
        shots=strategy.shots,
        timestamp=timestamp,
    )


def run(
    split: CorpusSplit,
    config: RunConfig,
    client: CompletionClient,
    schema: RelationSchema,
    demo_split: CorpusSplit | None = None,
    log_path: str | Path | None = None,
) -> list[PredictionRecord]:
    """Execute a run plan and return records sorted by (dialogue, pair, prefix).

    On a hard endpoint failure the records completed so far are written to
    ``log_path`` (when given) before the error propagates.
    """
    demonstrations: list[Demonstration] = []
    if config.strategy.shots:
        if demo_split is None:
            raise DataError("few-shot runs need a demonstration split")
        demonstrations = sample_demonstrations(demo_split, config.strategy.shots, config.seed)
    units = plan_units(split, config)
    logger.info(
        "running %d units (%s, %s, parallelism %d)",
        len(units),
        config.strategy.kind,
        config.setting,
        config.parallelism,
    )

    records: list[PredictionRecord] = []
    failure: BaseException | None = None
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [
            pool.submit(
                _predict_unit, dialogue, pi, i, schema, config.strategy, client, demonstrations
            )
            for dialogue, pi, i in units
        ]
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        for future in pending:
            future.cancel()
        for future in done:
            if future.cancelled():
                continue
            error = future.exception()
            if error is not None:
                failure = failure or error
            else:
                records.append(future.result())
    records.sort(key=lambda r: (r.dialogue_id, r.pair_index, r.prefix_turns))
    if log_path is not None:
        write_run_log(records, log_path)
    if failure is not None:
        logger.error("run aborted after %d/%d units: %s", len(records), len(units), failure)
        raise failure
    return records


def run_standard(split, config, client, schema, demo_split=None, log_path=None):
    if config.setting != STANDARD:
        raise DataError("run_standard needs a standard-setting config")
    return run(split, config, client, schema, demo_split, log_path)


def run_conversational(split, config, client, schema, demo_split=None, log_path=None):
    if config.setting != CONVERSATIONAL:
        raise DataError("run_conversational needs a conversational-setting config")
    return run(split, config, client, schema, demo_split, log_path)


def build_gold_transcript(
    split: CorpusSplit,
    schema: RelationSchema,
    strategy: Strategy,
    demo_split: CorpusSplit | None = None,
    seed: int = 0,
    model: str = "gold-echo",
) -> list[CompletionRecord]:
    """A transcript answering every possible query with the gold annotation.

    Covers every prefix of every pair, so it can replay standard runs and
    both conversational modes.  At prefix i the echoed answer reflects the
    relations evaluable at i -- at the full dialogue that is exactly the
    positive gold set.
    """
    demonstrations: list[Demonstration] = []
    if strategy.shots:
        if demo_split is None:
            raise DataError("few-shot transcripts need a demonstration split")
        demonstrations = sample_demonstrations(demo_split, strategy.shots, seed)
    scripted: dict[str, str] = {}
    # open-ended questions name only the subject, so pairs sharing a subject
    # share questions; collect every object the answer must name first
    open_positives: dict[str, list[str]] = {}

    def put(prompt: str, response: str) -> None:
        if scripted.get(prompt, response) != response:
            raise DataError(
                "conflicting gold answers for one prompt; the corpus asks the "
                f"same question twice with different gold: {prompt[:120]!r}"
            )
        scripted[prompt] = response

    for dialogue in split.dialogues:
        for pi, pair in enumerate(dialogue.pairs):
            evaluable = _positive_evaluable_prefixes(dialogue, pair)
            for i in range(1, len(dialogue.turns) + 1):
                head = prefix(dialogue, i)
                gold_here = {label for label, at in evaluable.items() if at <= i}
                if strategy.kind == VANILLA_DIRECT:
                    ordered = [l for l in schema.candidates() if l in gold_here]
                    put(
                        build_vanilla_prompt(head, pair, schema, demonstrations),
                        ", ".join(ordered) if ordered else UNANSWERABLE,
                    )
                elif strategy.kind == LANDRE:
                    put(
                        build_landre_example(head, pair, schema)[0],
                        serialize_landre_output(gold_here, schema),
                    )
                elif strategy.kind == OPEN_ENDED:
                    for label, question in build_indirect_questions(
                        head, pair, schema, strategy.kind
                    ):
                        positives = open_positives.setdefault(question, [])
                        if label in gold_here and pair.object not in positives:
                            positives.append(pair.object)
                else:
                    for label, question in build_indirect_questions(
                        head, pair, schema, strategy.kind
                    ):
                        holds = label in gold_here
                        if strategy.kind == "yes_no":
                            answer = "Yes." if holds else "No."
                        else:
                            answer = "True" if holds else "False"
                        put(question, answer)
    for question, objects in open_positives.items():
        put(question, " and ".join(objects) + "." if objects else "It is not stated.")
    return [make_record(p, r, model=model) for p, r in scripted.items()]
