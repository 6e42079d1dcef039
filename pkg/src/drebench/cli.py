"""Command-line front end.

Verbs: ``stats`` profiles a corpus split, ``sample`` writes a per-relation
capped subset, ``run`` executes a benchmark run against an endpoint,
``score`` / ``analyze`` / ``report`` evaluate a finished run.

Option values resolve in precedence order: command-line flag, then config
file (``--config``, YAML), then environment variable (``DREBENCH_<OPTION>``),
then the built-in default.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 endpoint error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import analysis, metrics, runner
from .client import (
    ConstantClient,
    EndpointConfig,
    HttpChatClient,
    ReplayClient,
)
from .corpus import (
    compute_stats,
    load_split,
    sample_k_shot,
    save_split,
    subsample_dialogues,
)
from .errors import DataError, EndpointError, UsageError
from .prompts import STRATEGY_KINDS, Strategy
from .schema import load_schema

logger = logging.getLogger(__name__)

_DEFAULTS = {
    "split_name": "dev",
    "schema": None,
    "runs_dir": "runs",
    "endpoint": None,
    "model": "gpt-3.5-turbo",
    "api_key_env": "DRE_API_KEY",
    "temperature": 0.0,
    "max_tokens": 256,
    "rpm": 600,
    "max_retries": 3,
    "seed": 0,
    "parallelism": 1,
    "shots": 0,
    "setting": "standard",
    "mode": "per_prefix",
    "limit_dialogues": 0,
    "top_k": 10,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="drebench", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="YAML file with option defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML file with option defaults")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    p = add("stats", "profile a corpus split")
    p.add_argument("--corpus", help="corpus JSON file")
    p.add_argument("--split-name", dest="split_name")
    p.add_argument("--schema", help="relation schema TSV (defaults to the shipped one)")

    p = add("sample", "write a split capped at k pairs per relation")
    p.add_argument("--corpus", help="corpus JSON file")
    p.add_argument("--split-name", dest="split_name")
    p.add_argument("--schema")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="where to write the sampled split")

    p = add("run", "query an endpoint over a corpus split")
    p.add_argument("--corpus")
    p.add_argument("--split-name", dest="split_name")
    p.add_argument("--schema")
    p.add_argument("--strategy", choices=STRATEGY_KINDS)
    p.add_argument("--shots", type=int)
    p.add_argument("--demo-corpus", dest="demo_corpus", help="split demonstrations are drawn from")
    p.add_argument("--setting", choices=runner.SETTINGS)
    p.add_argument("--mode", choices=metrics.CONVERSATIONAL_MODES)
    p.add_argument(
        "--endpoint",
        help="http(s) URL, or replay:TRANSCRIPT.jsonl, goldecho, constant:TEXT",
    )
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--rpm", type=int, help="request rate limit per minute")
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--no-cache", action="store_true", help="disable the completion cache")
    p.add_argument("--limit-dialogues", dest="limit_dialogues", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--runs-dir", dest="runs_dir")
    p.add_argument("--run-id", dest="run_id", help="override the config-derived id")

    for name, help_ in (
        ("score", "score a finished run"),
        ("analyze", "per-relation, symmetry and length analyses of a run"),
        ("report", "write the markdown/CSV report for a run"),
    ):
        p = add(name, help_)
        p.add_argument("--run", required=False, help="run id or run directory")
        p.add_argument("--runs-dir", dest="runs_dir")
        if name == "analyze":
            p.add_argument("--top-k", dest="top_k", type=int)
    return parser


class _Options:
    """Flag > config file > environment > default resolution."""

    def __init__(self, args: argparse.Namespace):
        self._args = vars(args)
        self._config: dict = {}
        config_path = self._args.get("config") or os.environ.get("DREBENCH_CONFIG")
        if config_path:
            try:
                loaded = yaml.safe_load(Path(config_path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise UsageError(f"config file not found: {config_path}") from None
            except yaml.YAMLError as exc:
                raise UsageError(f"config file is not valid YAML: {exc}") from None
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise UsageError("config file must hold a mapping of options")
            self._config = {str(k).replace("-", "_"): v for k, v in loaded.items()}

    def get(self, key: str, required: bool = False):
        value = self._args.get(key)
        if value is None or value is False and key == "no_cache":
            if key in self._config:
                value = self._config[key]
            else:
                env = os.environ.get(f"DREBENCH_{key.upper()}")
                value = env if env is not None else _DEFAULTS.get(key)
        if value is None and required:
            raise UsageError(f"missing required option: --{key.replace('_', '-')}")
        default = _DEFAULTS.get(key)
        if value is not None and default is not None and not isinstance(value, type(default)):
            try:
                value = type(default)(value)
            except (TypeError, ValueError):
                raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from None
        return value


def _load_inputs(options: _Options):
    schema = load_schema(options.get("schema"))
    corpus_path = options.get("corpus", required=True)
    split = load_split(corpus_path, options.get("split_name"), schema)
    return schema, corpus_path, split


def _cmd_stats(options: _Options) -> int:
    _, _, split = _load_inputs(options)
    stats = compute_stats(split)
    print(f"split: {split.name}")
    print(f"conversations: {stats.num_conversations}")
    print(f"argument pairs: {stats.num_argument_pairs}")
    print(f"avg turns: {stats.avg_turns:.1f}")
    print(f"avg dialogue length (tokens): {stats.avg_dialogue_length_tokens:.1f}")
    print(f"avg speakers: {stats.avg_speakers:.1f}")
    return 0


def _cmd_sample(options: _Options) -> int:
    _, _, split = _load_inputs(options)
    k = options.get("k", required=True)
    output = options.get("output", required=True)
    try:
        sampled = sample_k_shot(split, k=int(k), seed=int(options.get("seed")))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_split(sampled, output)
    kept = sum(len(d.pairs) for d in sampled.dialogues)
    print(f"wrote {output}: {len(sampled.dialogues)} dialogues, {kept} argument pairs")
    return 0


def _run_snapshot(options: _Options, corpus_path: str) -> dict:
    return {
        "corpus": str(Path(corpus_path).resolve()),
        "split_name": options.get("split_name"),
        "schema": options.get("schema"),
        "strategy": options.get("strategy", required=True),
        "shots": options.get("shots"),
        "demo_corpus": options.get("demo_corpus"),
        "setting": options.get("setting"),
        "mode": options.get("mode"),
        "endpoint": options.get("endpoint", required=True),
        "model": options.get("model"),
        "temperature": options.get("temperature"),
        "max_tokens": options.get("max_tokens"),
        "limit_dialogues": options.get("limit_dialogues"),
        "seed": options.get("seed"),
    }


def _make_client(snapshot: dict, split, schema, run_dir: Path, cache: bool):
    endpoint = snapshot["endpoint"]
    strategy = Strategy(snapshot["strategy"], snapshot["shots"])
    if endpoint == "goldecho":
        demo_split = _demo_split(snapshot, schema)
        transcript = runner.build_gold_transcript(
            split, schema, strategy, demo_split, snapshot["seed"], model=snapshot["model"]
        )
        return ReplayClient(transcript)
    if endpoint.startswith("replay:"):
        return ReplayClient(endpoint.split(":", 1)[1])
    if endpoint.startswith("constant:"):
        return ConstantClient(endpoint.split(":", 1)[1])
    if endpoint.startswith("http://") or endpoint.startswith("https://"):
        config = EndpointConfig(
            base_url=endpoint,
            model=snapshot["model"],
            api_key_env=snapshot.get("api_key_env") or _DEFAULTS["api_key_env"],
            temperature=snapshot["temperature"],
            max_tokens=snapshot["max_tokens"],
            requests_per_minute=int(snapshot.get("rpm") or _DEFAULTS["rpm"]),
            max_retries=int(snapshot.get("max_retries") or _DEFAULTS["max_retries"]),
        )
        cache_path = run_dir / "cache.jsonl" if cache else None
        return HttpChatClient(config, cache_path=cache_path)
    raise UsageError(
        f"endpoint must be an http(s) URL, 'goldecho', 'replay:PATH' or "
        f"'constant:TEXT', got {endpoint!r}"
    )


def _demo_split(snapshot: dict, schema):
    if not snapshot["shots"]:
        return None
    if not snapshot["demo_corpus"]:
        raise UsageError("--shots > 0 needs --demo-corpus to draw demonstrations from")
    return load_split(snapshot["demo_corpus"], "demo", schema)


def _cmd_run(options: _Options) -> int:
    schema, corpus_path, split = _load_inputs(options)
    snapshot = _run_snapshot(options, corpus_path)
    snapshot["rpm"] = options.get("rpm")
    snapshot["max_retries"] = options.get("max_retries")
    snapshot["api_key_env"] = options.get("api_key_env")
    if snapshot["limit_dialogues"]:
        split = subsample_dialogues(split, snapshot["limit_dialogues"], snapshot["seed"])

    run_id = options.get("run_id") or derive_run_id(snapshot)
    runs_dir = Path(options.get("runs_dir"))
    run_dir = runs_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "run.yaml").write_text(
        yaml.safe_dump(snapshot, sort_keys=True), encoding="utf-8"
    )

    client = _make_client(snapshot, split, schema, run_dir, cache=not options.get("no_cache"))
    config = runner.RunConfig(
        strategy=Strategy(snapshot["strategy"], snapshot["shots"]),
        setting=snapshot["setting"],
        conversational_mode=snapshot["mode"],
        seed=snapshot["seed"],
        parallelism=int(options.get("parallelism")),
    )
    log_path = run_dir / "predictions.jsonl"
    records = runner.run(
        split, config, client, schema,
        demo_split=_demo_split(snapshot, schema),
        log_path=log_path,
    )
    print(f"run {run_id}: {len(records)} predictions ({client.calls} completions)")
    print(f"wrote {log_path}")
    return 0


def derive_run_id(snapshot: dict) -> str:
    canon = json.dumps(snapshot, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _load_run(options: _Options):
    run = options.get("run", required=True)
    run_dir = Path(run)
    if not run_dir.is_dir():
        run_dir = Path(options.get("runs_dir")) / run
    if not run_dir.is_dir():
        raise DataError(f"run directory not found: {run_dir}")
    snap_path = run_dir / "run.yaml"
    if not snap_path.is_file():
        raise DataError(f"run snapshot not found: {snap_path}")
    snapshot = yaml.safe_load(snap_path.read_text(encoding="utf-8"))
    schema = load_schema(snapshot.get("schema"))
    split = load_split(snapshot["corpus"], snapshot["split_name"], schema)
    if snapshot.get("limit_dialogues"):
        split = subsample_dialogues(split, snapshot["limit_dialogues"], snapshot["seed"])
    records = runner.read_run_log(run_dir / "predictions.jsonl")
    return run_dir, snapshot, schema, split, records


def _score_run(snapshot, records, split, schema) -> metrics.EvalReport:
    if snapshot["setting"] == runner.CONVERSATIONAL:
        return metrics.score_conversational(records, split, schema, snapshot["mode"])
    return metrics.score_standard(records, split, schema)


def _full_prefix_records(snapshot, records, split):
    """Standard-style records for analysis: straight for standard runs, the
    full-prefix slice for per_prefix conversational runs."""
    if snapshot["setting"] == runner.STANDARD:
        return records
    if snapshot["mode"] != metrics.PER_PREFIX:
        raise DataError(
            "analysis needs full-dialogue predictions; minimal_prefix runs have none"
        )
    turns = {d.dialogue_id: len(d.turns) for d in split.dialogues}
    return [r for r in records if r.prefix_turns == turns[r.dialogue_id]]


def _cmd_score(options: _Options) -> int:
    run_dir, snapshot, schema, split, records = _load_run(options)
    report = _score_run(snapshot, records, split, schema)
    payload = {
        "run": run_dir.name,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
    }
    if report.f1_c is not None:
        payload.update(
            precision_c=report.precision_c, recall_c=report.recall_c, f1_c=report.f1_c
        )
    (run_dir / "scores.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for key in ("precision", "recall", "f1", "precision_c", "recall_c", "f1_c"):
        if key in payload:
            print(f"{key}: {payload[key]:.4f}")
    print(f"tp: {report.tp}  fp: {report.fp}  fn: {report.fn}")
    return 0


def _cmd_analyze(options: _Options) -> int:
    run_dir, snapshot, schema, split, records = _load_run(options)
    full = _full_prefix_records(snapshot, records, split)
    rows = analysis.error_rates(full, split, schema, top_k=int(options.get("top_k")))
    groups = analysis.group_scores_by_symmetry(full, split, schema)
    buckets = analysis.scores_by_length(full, split, schema)
    print("hardest relations (gold triples, wrong, error rate):")
    for row in rows:
        print(f"  {row.label}: {row.gold_triples}, {row.wrong}, {row.error_rate:.1f}%")
    print("f1 by symmetry class:")
    for cls in sorted(groups):
        print(f"  {cls}: {groups[cls]:.4f}")
    print("f1 by dialogue length:")
    for bucket in buckets:
        bound = f"({analysis._fmt_bound(bucket.lower)}, {analysis._fmt_bound(bucket.upper)}]"
        print(f"  {bound}: {bucket.gold_triples} gold, f1 {bucket.f1:.4f}")
    return 0


def _cmd_report(options: _Options) -> int:
    run_dir, snapshot, schema, split, records = _load_run(options)
    report = _score_run(snapshot, records, split, schema)
    full = _full_prefix_records(snapshot, records, split)
    rows = analysis.error_rates(full, split, schema)
    groups = analysis.group_scores_by_symmetry(full, split, schema)
    buckets = analysis.scores_by_length(full, split, schema)
    path = analysis.emit_report(
        report, rows, groups, buckets, run_dir, run_dir.name, stats=compute_stats(split)
    )
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "sample": _cmd_sample,
    "run": _cmd_run,
    "score": _cmd_score,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(asctime)s %(name)s %(levelname)s %(message)s",
            stream=sys.stderr,
        )
        options = _Options(args)
        return _COMMANDS[args.verb](options)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
