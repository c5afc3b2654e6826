"""Command-line pipelines: ingest, build, score, eval, partition, advantages.

Every command is reproducible: identical inputs, seed, and config yield
byte-identical artifacts. A content-hash manifest is written next to
each output; timestamps appear only there. An optional INI config file
(one section per command) supplies defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import corpus, curriculum, grpo, metrics, rewards, rollout
from .manifest import RunManifest


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _map_ordered(fn, items, jobs: int):
    """Order-preserving map, threaded when jobs > 1."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# config-file merging: flags > config file > defaults

def _merge_config(args: argparse.Namespace, section: str,
                  specs: dict[str, tuple]) -> dict:
    """Resolve option values and return the final config snapshot."""
    parser = configparser.ConfigParser()
    if getattr(args, "config", None):
        parser.read(args.config)
    resolved = {}
    for dest, (convert, default) in specs.items():
        value = getattr(args, dest, None)
        if value is None and parser.has_option(section, dest):
            raw = parser.get(section, dest)
            value = convert(raw)
        if value is None:
            value = default
        setattr(args, dest, value)
        resolved[dest] = value
    return resolved


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# ---------------------------------------------------------------------------
# gold-side loading: accepts records, training samples, or plain gold lines

@dataclass
class GoldEntry:
    sample_id: str
    gold_answer: str
    gold_titles: list[str]
    known_titles: list[str]
    num_hops: int
    aliases: list[str] = field(default_factory=list)


def _load_gold(path: str) -> dict[str, GoldEntry]:
    entries: dict[str, GoldEntry] = {}
    with open(path, encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "gold_passages" in obj:  # unified record line
                gold_titles = [p["title"] for p in obj["gold_passages"]]
                known = gold_titles + [p["title"] for p in obj["distractor_passages"]]
                entry = GoldEntry(
                    sample_id=obj["id"],
                    gold_answer=obj["gold_answer"],
                    gold_titles=gold_titles,
                    known_titles=known,
                    num_hops=len(gold_titles),
                    aliases=list(obj.get("answer_aliases", [])),
                )
            elif "passages" in obj:  # training-sample line
                entry = GoldEntry(
                    sample_id=obj["record_id"],
                    gold_answer=obj["gold_answer"],
                    gold_titles=list(obj["gold_titles"]),
                    known_titles=[p["title"] for p in obj["passages"]],
                    num_hops=len(obj["gold_titles"]),
                    aliases=[],
                )
            elif "gold_titles" in obj:  # plain gold line
                gold_titles = list(obj["gold_titles"])
                entry = GoldEntry(
                    sample_id=obj["sample_id"],
                    gold_answer=obj["gold_answer"],
                    gold_titles=gold_titles,
                    known_titles=list(obj.get("known_titles", gold_titles)),
                    num_hops=int(obj.get("num_hops", len(gold_titles))),
                    aliases=list(obj.get("answer_aliases", [])),
                )
            else:
                raise ValueError(f"{path}:{line_no}: unrecognized gold line shape")
            entries[entry.sample_id] = entry
    return entries


# ---------------------------------------------------------------------------
# ingest

def cmd_ingest(args) -> int:
    config = _merge_config(args, "ingest", {
        "split": (str, "train"),
        "diagnostics": (str, None),
    })
    diag_path = args.diagnostics or args.output + ".diagnostics.jsonl"
    manifest = RunManifest(command="ingest", config_snapshot={
        "format": args.format, "input": args.input, "output": args.output, **config,
    })
    manifest.add_input(args.input)

    diagnostics: list[corpus.Diagnostic] = []
    count = 0
    try:
        with open(args.input, "rb") as raw, \
                open(args.output, "w", encoding="utf-8") as out:
            for record in corpus.iter_dataset(
                args.format, raw, split=args.split, diagnostics=diagnostics
            ):
                out.write(corpus.record_to_json(record) + "\n")
                count += 1
    except corpus.ParseError as exc:
        return _fail(f"{args.input}: {exc}")

    with open(diag_path, "w", encoding="utf-8") as fp:
        for diag in diagnostics:
            fp.write(diag.to_json() + "\n")
    manifest.add_output(args.output)
    manifest.add_output(diag_path)
    manifest.write(args.output + ".manifest.json")

    errors = [d for d in diagnostics if d.severity == "error"]
    print(f"ingested {count} records from {args.input} "
          f"({len(errors)} rejected, {len(diagnostics) - len(errors)} warnings)")
    if count == 0:
        _warn("no records ingested")
    if errors:
        for diag in errors:
            print(f"  rejected {diag.record_id!r}: {diag.message}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# build

def cmd_build(args) -> int:
    config = _merge_config(args, "build", {
        "kind": (str, None),
        "K": (int, None),
        "n": (int, None),
        "ordering": (str, "by_difficulty"),
        "seed": (int, 0),
        "eval_setting": (str, None),
        "max_distractors": (int, curriculum.DEFAULT_EVAL_MAX_DISTRACTORS),
    })
    if (args.kind is None) == (args.eval_setting is None):
        print("error: give exactly one of --kind or --eval-setting", file=sys.stderr)
        return 2

    with open(args.records, encoding="utf-8") as fp:
        records = list(corpus.read_records(fp))

    manifest = RunManifest(command="build", config_snapshot={
        "records": args.records, "output": args.output, **config,
    }, seed=args.seed)
    manifest.add_input(args.records)

    try:
        if args.kind is not None:
            if args.K is None:
                args.K = curriculum.DEFAULT_K[records[0].dataset] if records else 10
                print(f"using K={args.K} (default for "
                      f"{records[0].dataset if records else 'empty input'})")
            n = args.n if args.n is not None else len(records)
            spec = curriculum.CurriculumSpec(
                kind=args.kind, K=args.K, n=n, ordering=args.ordering, seed=args.seed
            )
            samples = curriculum.build_training_set(records, spec)
        else:
            setting = curriculum.EvalSetting(
                kind=args.eval_setting, max_distractors=args.max_distractors
            )
            samples = [
                curriculum.build_eval_sample(r, setting, args.seed) for r in records
            ]
    except ValueError as exc:
        return _fail(str(exc))

    with open(args.output, "w", encoding="utf-8") as fp:
        curriculum.write_samples(samples, fp)
    histogram = curriculum.level_histogram(samples)
    summary_path = args.output + ".summary.json"
    with open(summary_path, "w", encoding="utf-8") as fp:
        json.dump({"count": len(samples),
                   "level_histogram": {str(k): v for k, v in histogram.items()}},
                  fp, indent=2)
        fp.write("\n")
    manifest.add_output(args.output)
    manifest.add_output(summary_path)
    manifest.write(args.output + ".manifest.json")
    print(f"built {len(samples)} samples -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# score

def cmd_score(args) -> int:
    config = _merge_config(args, "score", {
        "gamma_answer": (float, 5.0),
        "gamma_correct": (float, 5.0),
        "gamma_incorrect": (float, 2.0),
        "gamma_format": (float, 1.0),
        "penalty": (float, 1.0),
        "max_completion_chars": (int, 8192),
        "formatting_only": (_parse_bool, False),
        "strict_format": (_parse_bool, False),
        "jobs": (int, 1),
    })
    reward_config = rewards.RewardConfig(
        gamma_answer=args.gamma_answer,
        gamma_correct=args.gamma_correct,
        gamma_incorrect=args.gamma_incorrect,
        gamma_format=args.gamma_format,
        penalty_p=args.penalty,
        enable_answer=not args.formatting_only,
        enable_citation=not args.formatting_only,
        max_completion_chars=args.max_completion_chars,
        strict_format=args.strict_format,
    )
    gold = _load_gold(args.gold)

    pairs: list[tuple[str, str]] = []
    with open(args.completions, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append((str(obj["sample_id"]), obj["completion"]))

    orphans = sorted({sid for sid, _ in pairs if sid not in gold})
    if orphans:
        return _fail(
            f"{len(orphans)} completion sample ids missing from gold file: "
            + ", ".join(orphans)
        )

    def score(pair):
        sid, completion = pair
        entry = gold[sid]
        return rewards.total_reward(
            completion, entry.gold_answer, entry.gold_titles, reward_config,
            known_titles=entry.known_titles,
        )

    breakdowns = _map_ordered(score, pairs, args.jobs)

    manifest = RunManifest(command="score", config_snapshot={
        "completions": args.completions, "gold": args.gold,
        "output": args.output, **config,
    })
    manifest.add_input(args.completions)
    manifest.add_input(args.gold)
    with open(args.output, "w", encoding="utf-8") as fp:
        for (sid, _), breakdown in zip(pairs, breakdowns):
            fp.write(rewards.breakdown_to_json(sid, breakdown) + "\n")
    manifest.add_output(args.output)
    manifest.write(args.output + ".manifest.json")
    print(f"scored {len(pairs)} completions -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# eval

def cmd_eval(args) -> int:
    config = _merge_config(args, "eval", {
        "per_hop": (_parse_bool, False),
        "use_aliases": (_parse_bool, False),
        "include_em": (_parse_bool, False),
        "jobs": (int, 1),
    })
    gold = _load_gold(args.gold)

    generations: dict[str, list[tuple[int, str]]] = {}
    with open(args.generations, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            sid = str(obj["sample_id"])
            bucket = generations.setdefault(sid, [])
            idx = obj.get("generation_index")
            bucket.append(
                (int(idx) if idx is not None else len(bucket), obj["completion"])
            )
    if not generations:
        return _fail(f"{args.generations}: no generations to evaluate")
    orphans = sorted(sid for sid in generations if sid not in gold)
    if orphans:
        return _fail(
            f"{len(orphans)} generation sample ids missing from gold file: "
            + ", ".join(orphans)
        )

    def build_record(sid: str) -> metrics.GenerationRecord:
        entry = gold[sid]
        parsed = [
            rewards.parse_completion(text, known_titles=entry.known_titles)
            for _, text in sorted(generations[sid], key=lambda g: g[0])
        ]
        return metrics.GenerationRecord(
            sample_id=sid,
            generations=parsed,
            gold_answer=entry.gold_answer,
            gold_titles=entry.gold_titles,
            num_hops=entry.num_hops,
            aliases=entry.aliases,
        )

    sample_ids = list(generations)
    records = _map_ordered(build_record, sample_ids, args.jobs)
    scores = _map_ordered(
        lambda r: metrics.sample_scores(r, args.use_aliases), records, args.jobs
    )
    report = metrics.evaluate_run(
        records, use_aliases=args.use_aliases,
        include_em=args.include_em, precomputed=scores,
    )
    text = metrics.format_report(report, per_hop=args.per_hop)

    manifest = RunManifest(command="eval", config_snapshot={
        "generations": args.generations, "gold": args.gold,
        "output": args.output, **config,
    })
    manifest.add_input(args.generations)
    manifest.add_input(args.gold)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fp:
            fp.write(text)
        manifest.add_output(args.output)
        manifest.write(args.output + ".manifest.json")
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# partition

def cmd_partition(args) -> int:
    config = _merge_config(args, "partition", {
        "k": (int, 8),
        "seed": (int, 0),
        "live": (_parse_bool, False),
        "base_url": (str, "http://localhost:8000/v1"),
        "model": (str, "model"),
        "temperature": (float, rollout.DEFAULT_PROBE_TEMPERATURE),
        "jobs": (int, 1),
    })
    with open(args.records, encoding="utf-8") as fp:
        records = list(corpus.read_records(fp))
    if not records:
        return _fail(f"{args.records}: no records to partition")

    store = rollout.ReplayStore(args.replay)
    if not args.live and len(store) == 0:
        return _fail(f"{args.replay}: replay store is empty")
    endpoint = rollout.EndpointConfig(
        base_url=args.base_url, model_name=args.model, temperature=args.temperature
    )
    client = rollout.CompletionClient(
        endpoint, mode="record" if args.live else "replay", store=store
    )

    def probe(record: corpus.QaRecord) -> metrics.GenerationRecord:
        # Probe at the maximum synthetic difficulty: every distractor shown.
        level = max(1, record.num_hops + record.num_distractors - 2)
        sample = curriculum.sample_at_level(record, level, args.seed)
        bundle = rollout.render_prompt(sample)
        texts = client.sample_completions(bundle, args.k)
        return metrics.GenerationRecord(
            sample_id=record.id,
            generations=[rewards.parse_completion(t) for t in texts],
            gold_answer=record.gold_answer,
            gold_titles=list(record.gold_titles),
            num_hops=record.num_hops,
        )

    try:
        gen_records = _map_ordered(probe, records, args.jobs)
    except rollout.ReplayMissError as exc:
        return _fail(str(exc))
    except rollout.TransportError as exc:
        return _fail(str(exc))

    answerable, unanswerable, neither = metrics.partition_by_passk(gen_records)
    clip = min(len(answerable), len(unanswerable))

    manifest = RunManifest(command="partition", config_snapshot={
        "records": args.records, "replay": args.replay,
        "output_prefix": args.output_prefix, **config,
    }, seed=args.seed)
    manifest.add_input(args.records)
    manifest.add_input(args.replay)
    outputs = {
        ".answerable.txt": answerable,
        ".unanswerable.txt": unanswerable,
        ".neither.txt": neither,
        ".answerable_clipped.txt": answerable[:clip],
        ".unanswerable_clipped.txt": unanswerable[:clip],
    }
    for suffix, ids in outputs.items():
        path = args.output_prefix + suffix
        with open(path, "w", encoding="utf-8") as fp:
            fp.writelines(i + "\n" for i in ids)
        manifest.add_output(path)
    manifest.write(args.output_prefix + ".manifest.json")
    print(f"partitioned {len(records)} records: {len(answerable)} answerable, "
          f"{len(unanswerable)} unanswerable, {len(neither)} neither "
          f"(clipped sets of {clip})")
    return 0


# ---------------------------------------------------------------------------
# advantages

def cmd_advantages(args) -> int:
    config = _merge_config(args, "advantages", {
        "std_epsilon": (float, 1e-8),
    })
    grpo_config = grpo.GrpoConfig(std_epsilon=args.std_epsilon)

    groups: list[grpo.RolloutGroup] = []
    with open(args.rewards, encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                group = grpo.group_from_json(line)
            except (ValueError, KeyError) as exc:
                return _fail(f"{args.rewards}:{line_no}: malformed group line ({exc})")
            if len(group.rewards) < 2:
                return _fail(
                    f"{args.rewards}:{line_no}: group {group.prompt_id!r} has "
                    f"{len(group.rewards)} rewards; need at least 2"
                )
            groups.append(group)

    for group in groups:
        group.advantages = grpo.group_advantages(group.rewards, grpo_config)
    fraction = grpo.zero_signal_fraction(groups)

    manifest = RunManifest(command="advantages", config_snapshot={
        "rewards": args.rewards, "output": args.output, **config,
    })
    manifest.add_input(args.rewards)
    with open(args.output, "w", encoding="utf-8") as fp:
        for group in groups:
            fp.write(grpo.group_result_to_json(group) + "\n")
    summary_path = args.output + ".summary.json"
    with open(summary_path, "w", encoding="utf-8") as fp:
        json.dump({"groups": len(groups),
                   "zero_signal_fraction": rewards.format_number(fraction)}, fp)
        fp.write("\n")
    manifest.add_output(args.output)
    manifest.add_output(summary_path)
    manifest.write(args.output + ".manifest.json")
    print(f"zero_signal_fraction {rewards.format_number(fraction)} "
          f"over {len(groups)} groups")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hopkit",
        description="Curriculum compilation, reward scoring, and evaluation "
                    "for RL post-training of multi-hop QA generators.",
    )
    parser.add_argument("--config", help="INI config file; one section per command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a raw dataset file to unified records")
    p.add_argument("--format", required=True, choices=corpus.DATASETS)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--split", choices=corpus.SPLITS)
    p.add_argument("--diagnostics", help="diagnostics path (default <output>.diagnostics.jsonl)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build a curriculum training set or eval samples")
    p.add_argument("--records", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", choices=curriculum.CURRICULUM_KINDS)
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--n", type=int)
    p.add_argument("--ordering", choices=curriculum.ORDERINGS)
    p.add_argument("--seed", type=int)
    p.add_argument("--eval-setting", dest="eval_setting", choices=curriculum.EVAL_KINDS)
    p.add_argument("--max-distractors", dest="max_distractors", type=int)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("score", help="score completions with the rule-based rewards")
    p.add_argument("--completions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gamma-answer", dest="gamma_answer", type=float)
    p.add_argument("--gamma-correct", dest="gamma_correct", type=float)
    p.add_argument("--gamma-incorrect", dest="gamma_incorrect", type=float)
    p.add_argument("--gamma-format", dest="gamma_format", type=float)
    p.add_argument("--penalty", type=float)
    p.add_argument("--max-completion-chars", dest="max_completion_chars", type=int)
    p.add_argument("--formatting-only", dest="formatting_only",
                   action="store_const", const=True)
    p.add_argument("--strict-format", dest="strict_format",
                   action="store_const", const=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="aggregate generations into an F1 report")
    p.add_argument("--generations", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output")
    p.add_argument("--per-hop", dest="per_hop", action="store_const", const=True)
    p.add_argument("--use-aliases", dest="use_aliases", action="store_const", const=True)
    p.add_argument("--include-em", dest="include_em", action="store_const", const=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("partition", help="partition records by base-model pass@k")
    p.add_argument("--records", required=True)
    p.add_argument("--replay", required=True)
    p.add_argument("--output-prefix", dest="output_prefix", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--live", action="store_const", const=True,
                   help="query the endpoint and record, instead of replaying")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("advantages", help="group-relative advantages and zero-signal stats")
    p.add_argument("--rewards", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--std-epsilon", dest="std_epsilon", type=float)
    p.set_defaults(func=cmd_advantages)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
