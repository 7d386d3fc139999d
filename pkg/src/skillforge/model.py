"""Domain types for skills, tasks, trajectories, and evaluation records.

The skill library persists as JSONL: a leading metadata line carrying the
epoch and format version, then one skill per line sorted by id. The file is
canonical, so saving the same library twice yields byte-identical output.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from skillforge.errors import IntegrityError, InputError, ParseError

LIBRARY_FORMAT = "skillforge-library"
LIBRARY_VERSION = 1

ORIGIN_HUMAN = "human"
ORIGIN_EVOLVED = "evolved"


@dataclass(frozen=True)
class Skill:
    """A reusable unit of procedural knowledge with its knowledge tags."""

    id: str
    name: str
    description: str
    body: str
    tags: frozenset[str] = frozenset()
    origin: str = ORIGIN_HUMAN
    created_epoch: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise InputError("skill id must be non-empty")
        if self.origin not in (ORIGIN_HUMAN, ORIGIN_EVOLVED):
            raise InputError(f"unknown skill origin: {self.origin!r}")
        if self.created_epoch < 0:
            raise InputError("created_epoch must be non-negative")
        if self.origin == ORIGIN_HUMAN and self.created_epoch != 0:
            raise InputError("human skills must have created_epoch 0")
        object.__setattr__(self, "tags", frozenset(self.tags))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "body": self.body,
            "tags": sorted(self.tags),
            "origin": self.origin,
            "created_epoch": self.created_epoch,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> Skill:
        try:
            return cls(
                id=raw["id"],
                name=raw["name"],
                description=raw["description"],
                body=raw["body"],
                tags=frozenset(raw.get("tags", [])),
                origin=raw.get("origin", ORIGIN_HUMAN),
                created_epoch=int(raw.get("created_epoch", 0)),
            )
        except KeyError as exc:
            raise ParseError(f"skill record missing field {exc}") from exc


@dataclass(frozen=True)
class SkillLibrary:
    """An immutable snapshot of the skill collection at a given epoch.

    Skills are kept sorted by id, so the in-memory order always matches the
    canonical serialization.
    """

    skills: tuple[Skill, ...] = ()
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.epoch < 0:
            raise InputError("library epoch must be non-negative")
        ordered = tuple(sorted(self.skills, key=lambda s: s.id))
        seen: set[str] = set()
        for skill in ordered:
            if skill.id in seen:
                raise IntegrityError(f"duplicate skill id: {skill.id!r}")
            seen.add(skill.id)
        object.__setattr__(self, "skills", ordered)

    def __len__(self) -> int:
        return len(self.skills)

    def __iter__(self):
        return iter(self.skills)

    def get(self, skill_id: str) -> Skill | None:
        for skill in self.skills:
            if skill.id == skill_id:
                return skill
        return None

    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.skills)


@dataclass(frozen=True)
class Task:
    """A task instance identified by id with a free-text description."""

    id: str
    description: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.description:
            raise InputError(f"task {self.id!r} has an empty description")

    def to_dict(self) -> dict:
        return {"id": self.id, "description": self.description, "metadata": dict(self.metadata)}

    @classmethod
    def from_dict(cls, raw: dict) -> Task:
        return cls(id=raw["id"], description=raw["description"], metadata=dict(raw.get("metadata", {})))


@dataclass(frozen=True)
class Trajectory:
    """An execution trace: ordered (action, observation) steps plus the final output."""

    task_id: str
    steps: tuple[tuple[str, str], ...] = ()
    final_output: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple((str(a), str(o)) for a, o in self.steps))

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "steps": [{"action": a, "observation": o} for a, o in self.steps],
            "final_output": self.final_output,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> Trajectory:
        return cls(
            task_id=raw["task_id"],
            steps=tuple((s["action"], s["observation"]) for s in raw.get("steps", [])),
            final_output=raw.get("final_output", ""),
        )


@dataclass(frozen=True)
class EvaluationRecord:
    """One task evaluation: the trajectory, its binary quality, and its cost."""

    task: Task
    trajectory: Trajectory
    quality: int
    tokens_used: int = 0
    wall_clock_ms: int = 0

    def __post_init__(self) -> None:
        if self.quality not in (0, 1):
            raise InputError("quality must be 0 or 1")
        if self.tokens_used < 0 or self.wall_clock_ms < 0:
            raise InputError("cost fields must be non-negative")
        if self.trajectory.task_id != self.task.id:
            raise IntegrityError(
                f"trajectory task_id {self.trajectory.task_id!r} does not match task {self.task.id!r}"
            )


@dataclass(frozen=True)
class FailurePair:
    """A task together with the failed trajectory it produced."""

    task: Task
    trajectory: Trajectory

    def __post_init__(self) -> None:
        if self.trajectory.task_id != self.task.id:
            raise IntegrityError(
                f"trajectory task_id {self.trajectory.task_id!r} does not match task {self.task.id!r}"
            )


def load_library(path: str | Path) -> SkillLibrary:
    """Load a skill library from JSONL.

    An empty file yields an empty library at epoch 0. A metadata line (any
    object with a ``format`` key) may appear first and carries the epoch.
    """
    path = Path(path)
    epoch = 0
    skills: list[Skill] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(raw, dict):
                raise ParseError("expected a JSON object", line=lineno)
            if raw.get("format") == LIBRARY_FORMAT:
                epoch = int(raw.get("epoch", 0))
                continue
            skill = Skill.from_dict(raw)
            if skill.id in seen:
                raise IntegrityError(f"duplicate skill id {skill.id!r} at line {lineno}")
            seen.add(skill.id)
            skills.append(skill)
    return SkillLibrary(skills=tuple(skills), epoch=epoch)


def save_library(library: SkillLibrary, path: str | Path) -> None:
    """Write the canonical JSONL form: metadata line, then skills sorted by id."""
    path = Path(path)
    lines = [
        json.dumps(
            {"format": LIBRARY_FORMAT, "version": LIBRARY_VERSION, "epoch": library.epoch},
            separators=(",", ":"),
        )
    ]
    for skill in library.skills:
        lines.append(json.dumps(skill.to_dict(), separators=(",", ":"), ensure_ascii=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def add_skills(library: SkillLibrary, new: Iterable[Skill]) -> SkillLibrary:
    """Return a new library containing the prior skills plus ``new``, one epoch later."""
    new = tuple(new)
    existing = set(library.ids())
    for skill in new:
        if skill.id in existing:
            raise IntegrityError(f"skill id {skill.id!r} already present in library")
        existing.add(skill.id)
    return SkillLibrary(skills=library.skills + new, epoch=library.epoch + 1)


def collect_failures(records: Sequence[EvaluationRecord]) -> tuple[FailurePair, ...]:
    """Keep exactly the failed records, in order, as task-trajectory pairs."""
    return tuple(FailurePair(task=r.task, trajectory=r.trajectory) for r in records if r.quality == 0)


def load_tasks(path: str | Path) -> tuple[Task, ...]:
    """Load tasks from JSONL, one task object per line."""
    tasks = []
    for lineno, raw in _iter_jsonl(path):
        try:
            tasks.append(Task.from_dict(raw))
        except KeyError as exc:
            raise ParseError(f"task record missing field {exc}", line=lineno) from exc
    return tuple(tasks)


def save_tasks(tasks: Sequence[Task], path: str | Path) -> None:
    Path(path).write_text(
        "".join(json.dumps(t.to_dict(), separators=(",", ":"), ensure_ascii=True) + "\n" for t in tasks),
        encoding="utf-8",
    )


def load_trajectories(path: str | Path) -> tuple[Trajectory, ...]:
    """Load trajectories from JSONL, one trajectory object per line."""
    out = []
    for lineno, raw in _iter_jsonl(path):
        try:
            out.append(Trajectory.from_dict(raw))
        except KeyError as exc:
            raise ParseError(f"trajectory record missing field {exc}", line=lineno) from exc
    return tuple(out)


def save_trajectories(trajectories: Sequence[Trajectory], path: str | Path) -> None:
    Path(path).write_text(
        "".join(
            json.dumps(t.to_dict(), separators=(",", ":"), ensure_ascii=True) + "\n"
            for t in trajectories
        ),
        encoding="utf-8",
    )


def _iter_jsonl(path: str | Path):
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
