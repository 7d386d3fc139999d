"""Command-line entry point.

Subcommands: ``simworld`` (generate a synthetic world), ``tag`` (tag a
library or task file), ``select`` (run a selection strategy on an instance
file), ``evolve`` (full epoch loop), ``score`` (score a candidate file),
``retrieve`` (BM25 query), ``eval`` (k-fold protocol), ``sweep`` (parameter
sweeps), and ``report`` (re-render a report JSON as Markdown).

Configuration precedence is flag > environment > config file > default; the
fully resolved configuration is echoed into every report. Exit codes: 0 on
success, 1 on usage errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from skillforge.cover import CoverInstance, SelectionResult, select_sources
from skillforge.errors import ConfigError, SkillForgeError
from skillforge.evolve import CandidateSkill
from skillforge.harness import (
    EvolutionReport,
    ProviderBundle,
    RunConfig,
    emit_report,
    evolve_library,
    mock_provider_factory,
    run_kfold,
    sweep,
    write_sweep_csv,
)
from skillforge.model import (
    FailurePair,
    Skill,
    SkillLibrary,
    Task,
    Trajectory,
    load_library,
    load_tasks,
    save_library,
)
from skillforge.providers.base import ChatRequest
from skillforge.providers.http import (
    HttpChatProvider,
    HttpConfig,
    HttpEmbeddingProvider,
    HttpLikelihoodProvider,
)
from skillforge.retrieval import build_index, retrieve
from skillforge.scoring import filter_and_update, score_candidate, write_score_csv
from skillforge.tags import (
    EquivalenceIndex,
    dump_tags,
    generate_skill_tags,
    generate_target_tags,
)
from skillforge.world import (
    SyntheticWorld,
    WorldConfig,
    generate_world,
    load_world,
    save_world,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillforge",
        description="Grow an agent skill library from failed task trajectories.",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file with RunConfig fields")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mock", action="store_true", help="use seeded offline mock providers")
        p.add_argument("--noise-rate", type=float, default=None, help="mock generator noise rate")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--filter-ratio", type=float, default=None)
        p.add_argument("--strategy", default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--k", type=int, default=None, help="retrieval depth")
        p.add_argument("--folds", type=int, default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--label-scale", type=float, default=None)
        p.add_argument("--chat-url", default=None)
        p.add_argument("--embed-url", default=None)
        p.add_argument("--logprob-url", default=None)

    p = sub.add_parser("simworld", help="generate a synthetic world")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tasks", type=int, default=50)
    p.add_argument("--coverable-fraction", type=float, default=0.4)
    p.add_argument("--tags", type=int, default=10)
    p.add_argument("--covered-tags", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simworld)

    p = sub.add_parser("tag", help="tag a skill library or infer task target tags")
    add_common(p)
    p.add_argument("--library", help="library JSONL to tag")
    p.add_argument("--tasks", help="task JSONL to infer target tags for")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="retag skills that already carry tags")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("select", help="run a selection strategy on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--strategy", default="greedy")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evolve", help="run the full epoch loop on a world")
    add_common(p)
    p.add_argument("--world-dir", help="directory produced by simworld; generated when omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-prompts", help="directory for assembled generation prompts")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("score", help="score a candidate file")
    add_common(p)
    p.add_argument("--candidates", required=True, help="candidate JSONL")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("retrieve", help="BM25-retrieve skills for a query")
    p.add_argument("--library", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="k-fold evolution and held-out evaluation")
    add_common(p)
    p.add_argument("--world-dir")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--paraphrase-provider",
        help="chat endpoint used to paraphrase task descriptions before evaluation",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="parameter sweeps over the k-fold protocol")
    add_common(p)
    p.add_argument(
        "--dimension", required=True, choices=("epochs", "filter_ratio", "label_scale", "transfer")
    )
    p.add_argument("--world-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-render a report JSON as Markdown")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def _load_file_config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def resolve_run_config(args) -> RunConfig:
    file_cfg = _load_file_config(args)
    defaults = RunConfig()

    def pick(flag: str, key: str, default):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        if key in file_cfg:
            return file_cfg[key]
        return default

    return RunConfig(
        epochs=pick("epochs", "epochs", defaults.epochs),
        filter_ratio=pick("filter_ratio", "filter_ratio", defaults.filter_ratio),
        strategy=pick("strategy", "strategy", defaults.strategy),
        delta=pick("delta", "delta", defaults.delta),
        retrieval_k=pick("k", "retrieval_k", defaults.retrieval_k),
        folds=pick("folds", "folds", defaults.folds),
        runs=pick("runs", "runs", defaults.runs),
        seed=pick("seed", "seed", defaults.seed),
        label_scale=pick("label_scale", "label_scale", defaults.label_scale),
    )


def _resolve_providers(args, config: RunConfig):
    """Return (factory, bundle). Mock providers stay fully offline."""
    if getattr(args, "mock", False):
        noise = getattr(args, "noise_rate", None) or 0.0
        factory = mock_provider_factory(noise_rate=noise)
        return factory, factory(config.seed)
    overrides = {}
    for flag, key in (("chat_url", "chat_url"), ("embed_url", "embed_url"), ("logprob_url", "logprob_url")):
        value = getattr(args, flag, None)
        if value:
            overrides[key] = value
    http = HttpConfig.from_env(**overrides)
    if not (http.chat_url and http.embed_url and http.logprob_url):
        raise ConfigError(
            "provider endpoints are not configured; pass --mock or set "
            "SKILLFORGE_CHAT_URL, SKILLFORGE_EMBED_URL, and SKILLFORGE_LOGPROB_URL"
        )
    bundle = ProviderBundle(
        chat=HttpChatProvider(http),
        embedder=HttpEmbeddingProvider(http),
        likelihood=HttpLikelihoodProvider(http),
    )
    return (lambda seed: bundle), bundle


def _resolve_world(args, config: RunConfig) -> SyntheticWorld:
    world_dir = getattr(args, "world_dir", None)
    if world_dir:
        return load_world(world_dir)
    return generate_world(WorldConfig(seed=config.seed))


def cmd_simworld(args) -> int:
    config = WorldConfig(
        seed=args.seed,
        n_tasks=args.tasks,
        coverable_fraction=args.coverable_fraction,
        n_tags=args.tags,
        covered_tags=args.covered_tags,
    )
    world = generate_world(config)
    save_world(world, args.out)
    print(f"wrote world with {len(world.tasks)} tasks and {len(world.initial_skills)} skills to {args.out}")
    return 0


def cmd_tag(args) -> int:
    config = resolve_run_config(args)
    _, bundle = _resolve_providers(args, config)
    if bool(args.library) == bool(args.tasks):
        raise ConfigError("pass exactly one of --library or --tasks")
    if args.library:
        library = load_library(args.library)
        tagged = []
        for skill in library:
            if skill.tags and not args.force:
                tagged.append(skill)
                continue
            tags = generate_skill_tags(skill, bundle.chat)
            tagged.append(
                Skill(
                    id=skill.id,
                    name=skill.name,
                    description=skill.description,
                    body=skill.body,
                    tags=tags,
                    origin=skill.origin,
                    created_epoch=skill.created_epoch,
                )
            )
        result = SkillLibrary(skills=tuple(tagged), epoch=library.epoch)
        save_library(result, args.out)
        dump_tags(result, Path(args.out).with_suffix(".tags.json"))
        print(f"tagged {len(result)} skills -> {args.out}")
        return 0
    tasks = load_tasks(args.tasks)
    mapping = {}
    for task in tasks:
        pair = FailurePair(task=task, trajectory=Trajectory(task_id=task.id))
        mapping[task.id] = sorted(generate_target_tags(pair, bundle.chat))
    Path(args.out).write_text(json.dumps(mapping, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"inferred target tags for {len(mapping)} tasks -> {args.out}")
    return 0


def cmd_select(args) -> int:
    instance = CoverInstance.from_file(args.instance)
    result = select_sources(instance, args.strategy)
    print(",".join(result.selected))
    return 0


def cmd_evolve(args) -> int:
    config = resolve_run_config(args)
    factory, bundle = _resolve_providers(args, config)
    world = _resolve_world(args, config)
    library, report, stats_list = evolve_library(
        config, world, bundle, dump_dir=args.dump_prompts
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_library(library, out / "library.jsonl")
    emit_report(report, out / "report")
    for epoch, stats in enumerate(stats_list):
        if stats.score_rows:
            write_score_csv(stats.score_rows, out / f"scores-epoch-{epoch}.csv")
    print(
        f"evolved library to {len(library)} skills over {config.epochs} epochs; "
        f"pass rate {report.base_pass_rate:.3f} -> {report.final_pass_rate:.3f}"
    )
    return 0


def cmd_score(args) -> int:
    config = resolve_run_config(args)
    _, bundle = _resolve_providers(args, config)
    rows_in = [
        json.loads(line)
        for line in Path(args.candidates).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not rows_in:
        raise ConfigError("candidate file is empty")

    all_tags: set[str] = set()
    for row in rows_in:
        all_tags |= set(row.get("tags", []))
        all_tags |= set(row.get("target_tags", []))
    index = EquivalenceIndex(delta=config.delta)
    index.add_tags(all_tags, bundle.embedder)

    empty_selection = SelectionResult(
        selected=(), covered=frozenset(), uncovered=frozenset(), irrelevant_count=0
    )
    scored = []
    for row in rows_in:
        skill = Skill(
            id=row["id"],
            name=row.get("name", row["id"]),
            description=row.get("description", ""),
            body=row["body"],
            tags=frozenset(row.get("tags", [])),
            origin=row.get("origin", "evolved"),
            created_epoch=int(row.get("created_epoch", 0)),
        )
        candidate = CandidateSkill(
            skill=skill, source_pair_id=row["pair_id"], selection=empty_selection
        )
        task = Task(id=row["pair_id"], description=row["task_description"])
        scored.append(
            score_candidate(
                candidate, frozenset(row.get("target_tags", [])), task, index, bundle.likelihood
            )
        )
    ratio = config.filter_ratio
    _, _, rows = filter_and_update(scored, SkillLibrary(), ratio)
    write_score_csv(rows, args.out)
    print(f"scored {len(scored)} candidates -> {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    library = load_library(args.library)
    index = build_index(library)
    for skill_id, score in retrieve(index, args.query, args.k):
        print(f"{skill_id}\t{score:.4f}")
    return 0


def cmd_eval(args) -> int:
    config = resolve_run_config(args)
    factory, bundle = _resolve_providers(args, config)
    world = _resolve_world(args, config)
    task_transform = None
    if args.paraphrase_provider:
        if getattr(args, "mock", False):
            raise ConfigError("--paraphrase-provider needs a real chat endpoint, not --mock")
        http = HttpConfig.from_env(chat_url=args.paraphrase_provider)
        task_transform = _paraphrase_transform(HttpChatProvider(http))
    report = run_kfold(config, world, factory, task_transform=task_transform)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    json_path, md_path = emit_report(report, out / "report")
    print(
        f"evaluated {config.folds}-fold x {config.runs} runs; held-out pass rate "
        f"{report.base_pass_rate:.3f} -> {report.final_pass_rate:.3f} ({json_path}, {md_path})"
    )
    return 0


def cmd_sweep(args) -> int:
    config = resolve_run_config(args)
    factory, _ = _resolve_providers(args, config)
    world = load_world(args.world_dir) if args.world_dir else None
    rows = sweep(config, args.dimension, world=world, provider_factory=factory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(
        json.dumps({"dimension": args.dimension, "config": config.to_dict(), "rows": rows}, indent=2)
        + "\n",
        encoding="utf-8",
    )
    write_sweep_csv(rows, out / "sweep.csv")
    print(f"swept {args.dimension} over {len(rows)} cells -> {out}")
    return 0


def cmd_report(args) -> int:
    raw = json.loads(Path(args.input).read_text(encoding="utf-8"))
    report = EvolutionReport.from_dict(raw)
    Path(args.out).write_text(report.markdown(), encoding="utf-8")
    print(f"rendered {args.input} -> {args.out}")
    return 0


def _paraphrase_transform(chat):
    def transform(tasks):
        out = []
        for task in tasks:
            request = ChatRequest(
                system="You paraphrase task descriptions without changing their meaning.",
                user=task.description,
                max_tokens=512,
            )
            reply = chat.complete(request)
            description = reply.text.strip() or task.description
            out.append(Task(id=task.id, description=description, metadata=dict(task.metadata)))
        return tuple(out)

    return transform


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    if not argv:
        parser.print_help()
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if not hasattr(args, "func"):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except SkillForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
