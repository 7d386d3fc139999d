"""End-to-end orchestration: epoch loop, k-fold protocol, sweeps, reports.

One evolution epoch evaluates every training task against the current
library, keeps the failures, infers their required tags, selects covering
source skills, generates and scores candidate skills, and folds the retained
top fraction back into the library. The k-fold protocol evolves on all folds
but one and measures pass rate on the held-out fold, for every fold and every
run seed; epoch 0 is always evaluated first so the no-evolution baseline
anchors each report.

Wall-clock numbers come from an injectable monotonic clock and are excluded
from determinism comparisons (see ``strip_wall_clock``).
"""

from __future__ import annotations

import json
import logging
import random
import statistics
import threading
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

from skillforge._parallel import DEFAULT_MAX_WORKERS, parallel_map
from skillforge.errors import ConfigError, InputError, ScoringError, TaggingError
from skillforge.evolve import CandidateSkill, GenerationConfig, generate_candidates
from skillforge.model import (
    EvaluationRecord,
    SkillLibrary,
    Task,
    Trajectory,
    collect_failures,
)
from skillforge.providers.base import (
    ChatProvider,
    ChatResponse,
    EmbeddingProvider,
    LikelihoodProvider,
    LikelihoodResult,
)
from skillforge.providers.mock import MockChatProvider, MockEmbedder, MockLikelihoodScorer
from skillforge.retrieval import Bm25Index, build_index, retrieve
from skillforge.scoring import (
    filter_and_update,
    retention_count,
    score_candidate,
    sigmoid,
)
from skillforge.tags import EquivalenceIndex, TagSet, generate_target_tags
from skillforge.world import SyntheticWorld, WorldConfig, generate_transfer_worlds, generate_world

logger = logging.getLogger(__name__)

REPORT_VERSION = 1

EPOCH_SWEEP_VALUES = (0, 1, 2, 3, 4, 5)
RATIO_SWEEP_VALUES = (0.1, 0.2, 0.5, 1.0)
LABEL_SCALE_SWEEP_VALUES = (0.0, 0.25, 0.5, 0.75, 1.0)
SWEEP_DIMENSIONS = ("epochs", "filter_ratio", "label_scale", "transfer")


@dataclass(frozen=True)
class RunConfig:
    epochs: int = 3
    filter_ratio: float = 0.2
    strategy: str = "greedy"
    delta: float = 0.9
    retrieval_k: int = 5
    folds: int = 3
    runs: int = 3
    seed: int = 7
    label_scale: float = 1.0
    max_workers: int = DEFAULT_MAX_WORKERS

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not 0.0 < self.filter_ratio <= 1.0:
            raise ConfigError("filter_ratio must lie in (0, 1]")
        if self.retrieval_k < 1:
            raise ConfigError("retrieval_k must be at least 1")
        if self.folds < 1 or self.runs < 1:
            raise ConfigError("folds and runs must be at least 1")
        if not 0.0 <= self.label_scale <= 1.0:
            raise ConfigError("label_scale must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "filter_ratio": self.filter_ratio,
            "strategy": self.strategy,
            "delta": self.delta,
            "retrieval_k": self.retrieval_k,
            "folds": self.folds,
            "runs": self.runs,
            "seed": self.seed,
            "label_scale": self.label_scale,
            "max_workers": self.max_workers,
        }


@dataclass(frozen=True)
class ProviderBundle:
    chat: ChatProvider
    embedder: EmbeddingProvider
    likelihood: LikelihoodProvider

    def audit_names(self) -> tuple[str, ...]:
        return (
            type(self.chat).__name__,
            type(self.embedder).__name__,
            type(self.likelihood).__name__,
        )


def mock_provider_factory(
    noise_rate: float = 0.0, embed_seed: int = 0
) -> Callable[[int], ProviderBundle]:
    """Factory of seeded mock bundles; the embedder seed stays fixed because
    the embedding model does not change between runs."""

    def factory(seed: int) -> ProviderBundle:
        return ProviderBundle(
            chat=MockChatProvider(seed=seed, noise_rate=noise_rate),
            embedder=MockEmbedder(seed=embed_seed),
            likelihood=MockLikelihoodScorer(seed=seed),
        )

    return factory


class UsageMeter:
    """Thread-safe ledger of provider calls and token counts."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.chat_calls = 0
        self.likelihood_calls = 0
        self.embed_calls = 0
        self.tokens = 0

    def add_chat(self, response: ChatResponse) -> None:
        with self._lock:
            self.chat_calls += 1
            self.tokens += response.tokens_in + response.tokens_out

    def add_likelihood(self, result: LikelihoodResult) -> None:
        with self._lock:
            self.likelihood_calls += 1
            self.tokens += result.token_count

    def add_embed(self, count: int) -> None:
        with self._lock:
            self.embed_calls += 1


class _MeteredChat:
    def __init__(self, inner: ChatProvider, meter: UsageMeter) -> None:
        self._inner = inner
        self._meter = meter

    def complete(self, request):
        response = self._inner.complete(request)
        self._meter.add_chat(response)
        return response


class _MeteredLikelihood:
    def __init__(self, inner: LikelihoodProvider, meter: UsageMeter) -> None:
        self._inner = inner
        self._meter = meter

    def score_likelihood(self, condition, continuation):
        result = self._inner.score_likelihood(condition, continuation)
        self._meter.add_likelihood(result)
        return result


class _MeteredEmbedder:
    def __init__(self, inner: EmbeddingProvider, meter: UsageMeter) -> None:
        self._inner = inner
        self._meter = meter

    def embed(self, texts):
        vectors = self._inner.embed(texts)
        self._meter.add_embed(len(texts))
        return vectors


def metered(bundle: ProviderBundle, meter: UsageMeter) -> ProviderBundle:
    return ProviderBundle(
        chat=_MeteredChat(bundle.chat, meter),
        embedder=_MeteredEmbedder(bundle.embedder, meter),
        likelihood=_MeteredLikelihood(bundle.likelihood, meter),
    )


def simulate_agent(
    task: Task,
    library: SkillLibrary,
    index: Bm25Index,
    world: SyntheticWorld,
    k: int,
    eq: EquivalenceIndex | None = None,
) -> EvaluationRecord:
    """Oracle agent for the synthetic world.

    Retrieves the top-k skills for the task description and succeeds when
    their tag classes cover at least the world's coverage threshold of the
    task's required tag classes. The trajectory records the retrieved skill
    ids and, on failure, the missing tags, which is what later tag inference
    reads.
    """
    required = world.required_tags(task)
    hits = retrieve(index, task.description, k)
    retrieved_tags: set[str] = set()
    for skill_id, _ in hits:
        skill = library.get(skill_id)
        if skill is not None:
            retrieved_tags |= skill.tags

    if eq is not None:
        required_classes = eq.canonical_set(required)
        retrieved_classes = eq.canonical_set(retrieved_tags)
    else:
        required_classes = frozenset(required)
        retrieved_classes = frozenset(retrieved_tags)

    covered = required_classes & retrieved_classes
    fraction = len(covered) / len(required_classes) if required_classes else 1.0
    success = fraction >= world.coverage_threshold - 1e-9

    retrieved_note = ", ".join(sid for sid, _ in hits) if hits else "none"
    steps = [("retrieve_skills", f"retrieved: {retrieved_note}")]
    if success:
        steps.append(("check_coverage", "all required capabilities covered"))
        final = "success"
    else:
        missing = sorted(required_classes - retrieved_classes)
        steps.append(("check_coverage", f"missing knowledge: {', '.join(missing)}"))
        final = f"failure: missing {', '.join(missing)}"
    trajectory = Trajectory(task_id=task.id, steps=tuple(steps), final_output=final)
    return EvaluationRecord(
        task=task, trajectory=trajectory, quality=1 if success else 0, tokens_used=0, wall_clock_ms=0
    )


def _evaluation_index(
    library: SkillLibrary, tasks: Sequence[Task], world: SyntheticWorld, config: RunConfig,
    embedder: EmbeddingProvider,
) -> EquivalenceIndex:
    tags: set[str] = set()
    for skill in library:
        tags |= skill.tags
    for task in tasks:
        tags |= world.required_tags(task)
    index = EquivalenceIndex(delta=config.delta)
    index.add_tags(tags, embedder)
    return index


def evaluate_tasks(
    tasks: Sequence[Task],
    library: SkillLibrary,
    world: SyntheticWorld,
    config: RunConfig,
    embedder: EmbeddingProvider,
) -> list[EvaluationRecord]:
    index = build_index(library)
    eq = _evaluation_index(library, tasks, world, config, embedder)
    return parallel_map(
        lambda task: simulate_agent(task, library, index, world, config.retrieval_k, eq),
        tasks,
        max_workers=config.max_workers,
    )


def pass_rate(records: Sequence[EvaluationRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.quality for r in records) / len(records)


@dataclass(frozen=True)
class EpochStats:
    """What one evolution step did: counts, mean scores, and costs."""

    n_failures: int
    n_candidates: int
    n_retained: int
    mean_f_tag: float | None
    mean_alignment: float | None
    tokens_used: int
    wall_clock_ms: int
    score_rows: tuple[dict, ...] = ()


def run_epoch(
    library: SkillLibrary,
    tasks: Sequence[Task],
    world: SyntheticWorld,
    providers: ProviderBundle,
    config: RunConfig,
    clock: Callable[[], float] = time.monotonic,
    dump_dir: str | Path | None = None,
) -> tuple[list[EvaluationRecord], SkillLibrary, EpochStats]:
    """One full evolution epoch over ``tasks``; returns the evaluation records
    (measured on the incoming library), the updated library, and the stats row."""
    meter = UsageMeter()
    wrapped = metered(providers, meter)
    started = clock()

    records = evaluate_tasks(tasks, library, world, config, wrapped.embedder)
    failures = collect_failures(records)
    ordered = sorted(failures, key=lambda pair: pair.task.id)

    def _infer(pair):
        try:
            return generate_target_tags(pair, wrapped.chat)
        except TaggingError as exc:
            logger.warning("skipping pair %s: %s", pair.task.id, exc)
            return None

    inferred = parallel_map(_infer, ordered, max_workers=config.max_workers)
    target_tags: dict[str, TagSet] = {}
    tagged_pairs = []
    for pair, tags in zip(ordered, inferred):
        if tags is None:
            continue
        target_tags[pair.task.id] = tags
        tagged_pairs.append(pair)
    ordered = tagged_pairs

    eq = _evaluation_index(library, list(tasks), world, config, wrapped.embedder)
    all_targets: set[str] = set()
    for tags in target_tags.values():
        all_targets |= tags
    eq.add_tags(all_targets, wrapped.embedder)

    generation = GenerationConfig(epoch=library.epoch)
    candidates = generate_candidates(
        ordered,
        library,
        eq,
        wrapped.chat,
        generation,
        target_tags,
        strategy=config.strategy,
        dump_dir=dump_dir,
        max_workers=config.max_workers,
    )

    candidate_tags: set[str] = set()
    for candidate in candidates:
        candidate_tags |= candidate.skill.tags
    eq.add_tags(candidate_tags, wrapped.embedder)

    tasks_by_id = {task.id: task for task in tasks}

    def _score(candidate: CandidateSkill) -> CandidateSkill | None:
        try:
            return score_candidate(
                candidate,
                target_tags[candidate.source_pair_id],
                tasks_by_id[candidate.source_pair_id],
                eq,
                wrapped.likelihood,
            )
        except ScoringError as exc:
            logger.warning("dropping candidate %s: %s", candidate.skill.id, exc)
            return None

    scored = [c for c in parallel_map(_score, candidates, max_workers=config.max_workers) if c]

    updated, retained, rows = filter_and_update(
        scored, library, config.filter_ratio, eq, wrapped.embedder
    )
    stats = EpochStats(
        n_failures=len(failures),
        n_candidates=len(scored),
        n_retained=len(retained),
        mean_f_tag=_mean([c.scores.f_tag for c in scored]),
        mean_alignment=_mean([c.scores.alignment for c in scored]),
        tokens_used=meter.tokens,
        wall_clock_ms=int((clock() - started) * 1000),
        score_rows=tuple(rows),
    )
    return records, updated, stats


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    library_size: int
    train_pass_rate: float
    holdout_pass_rate: float
    n_failures: int | None = None
    n_candidates: int | None = None
    n_retained: int | None = None
    mean_f_tag: float | None = None
    mean_alignment: float | None = None
    tokens_used: int = 0
    wall_clock_ms: int = 0

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "library_size": self.library_size,
            "train_pass_rate": self.train_pass_rate,
            "holdout_pass_rate": self.holdout_pass_rate,
            "n_failures": self.n_failures,
            "n_candidates": self.n_candidates,
            "n_retained": self.n_retained,
            "mean_f_tag": self.mean_f_tag,
            "mean_alignment": self.mean_alignment,
            "tokens_used": self.tokens_used,
            "wall_clock_ms": self.wall_clock_ms,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> EpochRow:
        return cls(**raw)


@dataclass(frozen=True)
class CellResult:
    fold: int
    run: int
    seed: int
    rows: tuple[EpochRow, ...]

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "run": self.run,
            "seed": self.seed,
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> CellResult:
        return cls(
            fold=raw["fold"],
            run=raw["run"],
            seed=raw["seed"],
            rows=tuple(EpochRow.from_dict(r) for r in raw["rows"]),
        )


@dataclass(frozen=True)
class EvolutionReport:
    config: dict
    leaky: bool
    providers: tuple[str, ...]
    cells: tuple[CellResult, ...]

    def per_epoch_summary(self) -> list[dict]:
        epochs = max((len(cell.rows) for cell in self.cells), default=0)
        summary = []
        for e in range(epochs):
            holdout = [cell.rows[e].holdout_pass_rate for cell in self.cells if e < len(cell.rows)]
            train = [cell.rows[e].train_pass_rate for cell in self.cells if e < len(cell.rows)]
            sizes = [cell.rows[e].library_size for cell in self.cells if e < len(cell.rows)]
            f_tags = [
                cell.rows[e].mean_f_tag
                for cell in self.cells
                if e < len(cell.rows) and cell.rows[e].mean_f_tag is not None
            ]
            aligns = [
                cell.rows[e].mean_alignment
                for cell in self.cells
                if e < len(cell.rows) and cell.rows[e].mean_alignment is not None
            ]
            tokens = [cell.rows[e].tokens_used for cell in self.cells if e < len(cell.rows)]
            wall = [cell.rows[e].wall_clock_ms for cell in self.cells if e < len(cell.rows)]
            summary.append(
                {
                    "epoch": e,
                    "mean_holdout_pass_rate": _mean(holdout),
                    "std_holdout_pass_rate": statistics.pstdev(holdout) if len(holdout) > 1 else 0.0,
                    "mean_train_pass_rate": _mean(train),
                    "mean_library_size": _mean([float(s) for s in sizes]),
                    "mean_f_tag": _mean(f_tags),
                    "mean_alignment": _mean(aligns),
                    "tokens_used": sum(tokens),
                    "wall_clock_ms": sum(wall),
                }
            )
        return summary

    @property
    def base_pass_rate(self) -> float:
        summary = self.per_epoch_summary()
        return summary[0]["mean_holdout_pass_rate"] if summary else 0.0

    @property
    def final_pass_rate(self) -> float:
        summary = self.per_epoch_summary()
        return summary[-1]["mean_holdout_pass_rate"] if summary else 0.0

    @property
    def total_tokens(self) -> int:
        return sum(row.tokens_used for cell in self.cells for row in cell.rows)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "config": dict(self.config),
            "leaky": self.leaky,
            "providers": list(self.providers),
            "success_rule": "synthetic tag-coverage world (artifact construction)",
            "cells": [cell.to_dict() for cell in self.cells],
            "summary": {
                "per_epoch": self.per_epoch_summary(),
                "base_pass_rate": self.base_pass_rate,
                "final_pass_rate": self.final_pass_rate,
                "total_tokens": self.total_tokens,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> EvolutionReport:
        return cls(
            config=dict(raw["config"]),
            leaky=raw["leaky"],
            providers=tuple(raw["providers"]),
            cells=tuple(CellResult.from_dict(c) for c in raw["cells"]),
        )

    def markdown(self) -> str:
        cfg = self.config
        lines = [
            "# Evolution report",
            "",
            f"- seed: {cfg.get('seed')}",
            f"- folds: {cfg.get('folds')}, runs: {cfg.get('runs')}, epochs: {cfg.get('epochs')}",
            f"- strategy: {cfg.get('strategy')}, filter ratio: {cfg.get('filter_ratio')}, "
            f"delta: {cfg.get('delta')}, retrieval k: {cfg.get('retrieval_k')}",
            f"- label scale: {cfg.get('label_scale')}",
            f"- leaky protocol: {'yes' if self.leaky else 'no'}",
            f"- providers: {', '.join(self.providers)}",
            "- success rule: synthetic tag-coverage world (artifact construction)",
            "",
            "| epoch | library size | train pass | holdout pass | coverage F1 | alignment | tokens | time (ms) |",
            "|------:|-------------:|-----------:|-------------:|------------:|----------:|-------:|----------:|",
        ]
        for row in self.per_epoch_summary():
            f_tag = f"{row['mean_f_tag']:.3f}" if row["mean_f_tag"] is not None else "-"
            align = f"{row['mean_alignment']:.3f}" if row["mean_alignment"] is not None else "-"
            lines.append(
                f"| {row['epoch']} | {row['mean_library_size']:.1f} "
                f"| {row['mean_train_pass_rate']:.3f} | {row['mean_holdout_pass_rate']:.3f} "
                f"| {f_tag} | {align} | {row['tokens_used']} | {row['wall_clock_ms']} |"
            )
        lines.append("")
        lines.append(
            f"Base pass rate {self.base_pass_rate:.3f}, final pass rate {self.final_pass_rate:.3f}."
        )
        return "\n".join(lines) + "\n"


def apply_label_scale(world: SyntheticWorld, scale: float, seed: int) -> SkillLibrary:
    """Keep a seeded fraction of the world's human-labeled initial skills."""
    skills = list(world.initial_skills)
    keep = round(len(skills) * scale)
    rng = random.Random(seed ^ 0xAB5C)
    rng.shuffle(skills)
    return SkillLibrary(skills=tuple(skills[:keep]), epoch=0)


def _partition_folds(tasks: Sequence[Task], folds: int, seed: int) -> list[list[Task]]:
    ordered = sorted(tasks, key=lambda t: t.id)
    rng = random.Random(seed ^ 0xF01D)
    rng.shuffle(ordered)
    return [ordered[i::folds] for i in range(folds)]


def run_kfold(
    config: RunConfig,
    world: SyntheticWorld,
    provider_factory: Callable[[int], ProviderBundle] | None = None,
    clock: Callable[[], float] = time.monotonic,
    task_transform: Callable[[Sequence[Task]], Sequence[Task]] | None = None,
) -> EvolutionReport:
    """Evolve on all folds but one and score the held-out fold, per run seed.

    With ``folds=1`` evolution and evaluation share the same tasks; the
    report is flagged leaky. ``task_transform`` is an optional hook applied
    to the task list up front (e.g. paraphrasing descriptions).
    """
    factory = provider_factory or mock_provider_factory()
    tasks: Sequence[Task] = world.tasks
    if task_transform is not None:
        tasks = tuple(task_transform(tasks))
    if len(tasks) < config.folds:
        raise ConfigError(f"cannot split {len(tasks)} tasks into {config.folds} folds")

    leaky = config.folds == 1
    if leaky:
        logger.warning("folds=1: evolving and evaluating on the same tasks (leaky protocol)")

    cells: list[CellResult] = []
    audit: tuple[str, ...] = ()
    for run_idx in range(config.runs):
        run_seed = config.seed + run_idx
        providers = factory(run_seed)
        audit = providers.audit_names()
        fold_lists = _partition_folds(tasks, config.folds, run_seed)
        for fold_idx in range(config.folds):
            holdout = fold_lists[fold_idx]
            if leaky:
                train = list(holdout)
            else:
                train = [t for i, lst in enumerate(fold_lists) if i != fold_idx for t in lst]
                train.sort(key=lambda t: t.id)
            library = apply_label_scale(world, config.label_scale, run_seed)

            rows: list[EpochRow] = []
            pending: EpochStats | None = None
            for epoch in range(config.epochs + 1):
                holdout_records = evaluate_tasks(
                    holdout, library, world, config, providers.embedder
                )
                if epoch < config.epochs:
                    records, new_library, stats = run_epoch(
                        library, train, world, providers, config, clock=clock
                    )
                    train_rate = pass_rate(records)
                else:
                    train_rate = pass_rate(
                        evaluate_tasks(train, library, world, config, providers.embedder)
                    )
                rows.append(
                    EpochRow(
                        epoch=epoch,
                        library_size=len(library),
                        train_pass_rate=train_rate,
                        holdout_pass_rate=pass_rate(holdout_records),
                        n_failures=pending.n_failures if pending else None,
                        n_candidates=pending.n_candidates if pending else None,
                        n_retained=pending.n_retained if pending else None,
                        mean_f_tag=pending.mean_f_tag if pending else None,
                        mean_alignment=pending.mean_alignment if pending else None,
                        tokens_used=pending.tokens_used if pending else 0,
                        wall_clock_ms=pending.wall_clock_ms if pending else 0,
                    )
                )
                if epoch < config.epochs:
                    pending = stats
                    library = new_library
            cells.append(CellResult(fold=fold_idx, run=run_idx, seed=run_seed, rows=tuple(rows)))

    return EvolutionReport(
        config=config.to_dict(), leaky=leaky, providers=audit, cells=tuple(cells)
    )


def evolve_library(
    config: RunConfig,
    world: SyntheticWorld,
    providers: ProviderBundle,
    clock: Callable[[], float] = time.monotonic,
    dump_dir: str | Path | None = None,
) -> tuple[SkillLibrary, EvolutionReport, list[EpochStats]]:
    """Evolve on every task of the world (no folding) and return the final library.

    The report mirrors the k-fold shape with a single leaky cell, so the same
    emitters work for both entry points. The per-epoch stats (with their score
    rows) are returned alongside for CSV dumps.
    """
    library = apply_label_scale(world, config.label_scale, config.seed)
    tasks = sorted(world.tasks, key=lambda t: t.id)
    rows: list[EpochRow] = []
    stats_list: list[EpochStats] = []
    pending: EpochStats | None = None
    for epoch in range(config.epochs + 1):
        if epoch < config.epochs:
            records, new_library, stats = run_epoch(
                library, tasks, world, providers, config, clock=clock, dump_dir=dump_dir
            )
            stats_list.append(stats)
            train_rate = pass_rate(records)
        else:
            train_rate = pass_rate(evaluate_tasks(tasks, library, world, config, providers.embedder))
        rows.append(
            EpochRow(
                epoch=epoch,
                library_size=len(library),
                train_pass_rate=train_rate,
                holdout_pass_rate=train_rate,
                n_failures=pending.n_failures if pending else None,
                n_candidates=pending.n_candidates if pending else None,
                n_retained=pending.n_retained if pending else None,
                mean_f_tag=pending.mean_f_tag if pending else None,
                mean_alignment=pending.mean_alignment if pending else None,
                tokens_used=pending.tokens_used if pending else 0,
                wall_clock_ms=pending.wall_clock_ms if pending else 0,
            )
        )
        if epoch < config.epochs:
            pending = stats
            library = new_library
    report = EvolutionReport(
        config=config.to_dict(),
        leaky=True,
        providers=providers.audit_names(),
        cells=(CellResult(fold=0, run=0, seed=config.seed, rows=tuple(rows)),),
    )
    return library, report, stats_list


def sweep(
    config: RunConfig,
    dimension: str,
    world: SyntheticWorld | None = None,
    provider_factory: Callable[[int], ProviderBundle] | None = None,
    world_config: WorldConfig | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> list[dict]:
    """Rerun the k-fold protocol over one sweep dimension, one row per cell."""
    if dimension not in SWEEP_DIMENSIONS:
        raise ConfigError(f"unknown sweep dimension {dimension!r}; expected one of {SWEEP_DIMENSIONS}")
    factory = provider_factory or mock_provider_factory()
    world_config = world_config or WorldConfig(seed=config.seed)
    if world is None and dimension != "transfer":
        world = generate_world(world_config)

    grids = {
        "epochs": (EPOCH_SWEEP_VALUES, lambda v: replace(config, epochs=v)),
        "filter_ratio": (RATIO_SWEEP_VALUES, lambda v: replace(config, filter_ratio=v)),
        "label_scale": (LABEL_SCALE_SWEEP_VALUES, lambda v: replace(config, label_scale=v)),
    }
    rows: list[dict] = []
    if dimension in grids:
        values, vary = grids[dimension]
        reports = parallel_map(
            lambda value: run_kfold(vary(value), world, factory, clock=clock),
            values,
            max_workers=config.max_workers,
        )
        rows = [_sweep_row(dimension, value, report) for value, report in zip(values, reports)]
    else:
        world_a, world_b = generate_transfer_worlds(world_config)
        named = {"A": world_a, "B": world_b}
        for source_name, source_world in named.items():
            providers = factory(config.seed)
            library, _, _ = evolve_library(config, source_world, providers, clock=clock)
            for target_name, target_world in named.items():
                records = evaluate_tasks(
                    sorted(target_world.tasks, key=lambda t: t.id),
                    library,
                    target_world,
                    config,
                    providers.embedder,
                )
                rows.append(
                    {
                        "dimension": "transfer",
                        "value": f"{source_name}->{target_name}",
                        "source": source_name,
                        "target": target_name,
                        "base_pass_rate": None,
                        "final_pass_rate": pass_rate(records),
                        "total_tokens": None,
                    }
                )
    return rows


def _sweep_row(dimension: str, value, report: EvolutionReport) -> dict:
    return {
        "dimension": dimension,
        "value": value,
        "source": None,
        "target": None,
        "base_pass_rate": report.base_pass_rate,
        "final_pass_rate": report.final_pass_rate,
        "total_tokens": report.total_tokens,
    }


def write_sweep_csv(rows: Sequence[dict], path: str | Path) -> None:
    import csv

    columns = ("dimension", "value", "source", "target", "base_pass_rate", "final_pass_rate", "total_tokens")
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key) for key in columns})


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n in ascending value order, ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation with average-rank ties.

    Two identical constant sequences count as perfectly correlated; a single
    constant side has no defined ranking and scores 0.
    """
    if len(x) != len(y) or len(x) < 2:
        raise InputError("spearman needs two sequences of equal length >= 2")
    if list(x) == list(y):
        return 1.0
    rx = average_ranks(x)
    ry = average_ranks(y)
    mean_r = (len(x) + 1) / 2
    num = sum((a - mean_r) * (b - mean_r) for a, b in zip(rx, ry))
    den_x = sum((a - mean_r) ** 2 for a in rx)
    den_y = sum((b - mean_r) ** 2 for b in ry)
    if den_x == 0 or den_y == 0:
        logger.warning("constant ranking in spearman; correlation undefined, reporting 0")
        return 0.0
    return num / (den_x * den_y) ** 0.5


def scorer_sensitivity(
    candidates: Sequence[CandidateSkill],
    tasks_by_id: Mapping[str, Task],
    scorers: Sequence[LikelihoodProvider],
) -> list[dict]:
    """Recompute task alignment under each scorer and compare to the first.

    Each scorer uses its own token counts. Reported per scorer: mean
    alignment, mean absolute difference from the reference, Spearman
    correlation of the alignment rankings, and the overlap of the top-20%
    candidate sets (the filter rule's retention count).
    """
    if len(candidates) < 2:
        raise InputError("scorer sensitivity needs at least 2 candidates")
    if len(scorers) < 1:
        raise InputError("scorer sensitivity needs at least 1 scorer")

    ordered = sorted(candidates, key=lambda c: c.skill.id)
    alignments: list[list[float]] = []
    for scorer in scorers:
        values = []
        for candidate in ordered:
            task = tasks_by_id[candidate.source_pair_id]
            conditional = scorer.score_likelihood(task.description, candidate.skill.body)
            unconditional = scorer.score_likelihood("", candidate.skill.body)
            values.append(
                sigmoid(
                    (conditional.sum_logprob - unconditional.sum_logprob) / conditional.token_count
                )
            )
        alignments.append(values)

    k = retention_count(len(ordered), 0.2)

    def top_set(values: Sequence[float]) -> frozenset[str]:
        ranked = sorted(
            range(len(ordered)), key=lambda i: (-values[i], ordered[i].skill.id)
        )
        return frozenset(ordered[i].skill.id for i in ranked[:k])

    reference = alignments[0]
    reference_top = top_set(reference)
    rows = []
    for idx, (scorer, values) in enumerate(zip(scorers, alignments)):
        name = getattr(scorer, "name", f"scorer-{idx}")
        rows.append(
            {
                "scorer": name,
                "mean_alignment": _mean(values),
                "mae": _mean([abs(a - b) for a, b in zip(values, reference)]),
                "spearman": spearman(values, reference),
                "top_overlap": len(top_set(values) & reference_top) / k,
            }
        )
    return rows


def emit_report(report: EvolutionReport, base_path: str | Path) -> tuple[Path, Path]:
    """Write ``<base>.json`` and ``<base>.md`` for a finished report."""
    base = Path(base_path)
    json_path = base.with_suffix(".json")
    md_path = base.with_suffix(".md")
    json_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    md_path.write_text(report.markdown(), encoding="utf-8")
    return json_path, md_path


def strip_wall_clock(obj):
    """Zero every wall_clock_ms field, recursively; used by determinism checks."""
    if isinstance(obj, dict):
        return {
            key: (0 if key == "wall_clock_ms" else strip_wall_clock(value))
            for key, value in obj.items()
        }
    if isinstance(obj, list):
        return [strip_wall_clock(item) for item in obj]
    return obj
