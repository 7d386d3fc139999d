"""Candidate-skill generation from failure pairs.

For each failed task-trajectory pair the engine selects source skills that
cover the task's required tag classes, assembles a generation prompt from the
task, the trajectory, the selected skills, and the still-uncovered tags, and
parses the chat reply into a new skill. Candidate tags are then produced by
the same tagging path used for library skills rather than trusted from the
generator's own claims, so the scoring pipeline sees one uniform tag source.

Generation is best effort per pair: a pair whose completion stays unparseable
after two re-asks, or whose provider calls fail hard, is skipped with a log
entry instead of aborting the epoch.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING

from skillforge import prompts
from skillforge._parallel import DEFAULT_MAX_WORKERS, parallel_map
from skillforge.cover import CoverInstance, SelectionResult, select_sources
from skillforge.errors import InputError, ParseError, ProviderError, TaggingError
from skillforge.model import ORIGIN_EVOLVED, FailurePair, Skill, SkillLibrary
from skillforge.providers.base import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    ChatProvider,
    ChatRequest,
)
from skillforge.tags import EquivalenceIndex, TagSet, generate_skill_tags

if TYPE_CHECKING:
    from skillforge.scoring import ScoreRecord

logger = logging.getLogger(__name__)

PARSE_REASKS = 2

_NAME_RE = re.compile(r"^NAME:\s*(.+)$", re.MULTILINE)
_DESCRIPTION_RE = re.compile(r"^DESCRIPTION:\s*(.+)$", re.MULTILINE)
_BODY_RE = re.compile(r"^BODY:\s*\n?(.*)\Z", re.MULTILINE | re.DOTALL)


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    candidates_per_pair: int = 1
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.candidates_per_pair < 1:
            raise InputError("candidates_per_pair must be at least 1")
        if self.max_tokens < 1:
            raise InputError("max_tokens must be at least 1")
        if self.epoch < 0:
            raise InputError("epoch must be non-negative")


@dataclass(frozen=True)
class CandidateSkill:
    """A generated skill plus the selection snapshot that produced it."""

    skill: Skill
    source_pair_id: str
    selection: SelectionResult
    scores: ScoreRecord | None = None


def candidate_id(epoch: int, pair_id: str, seq: int) -> str:
    return f"evo-{epoch}-{pair_id}-{seq}"


def build_cover_instance(
    target: TagSet, library: SkillLibrary, index: EquivalenceIndex
) -> CoverInstance:
    """Canonicalize the target tags and every library skill's tags into class ids."""
    return CoverInstance(
        target_classes=index.canonical_set(target),
        skill_classes={skill.id: index.canonical_set(skill.tags) for skill in library},
    )


def assemble_generation_prompt(
    pair: FailurePair,
    selection: SelectionResult,
    sources: Sequence[Skill],
    uncovered: Sequence[str],
    config: GenerationConfig = GenerationConfig(),
) -> ChatRequest:
    """Deterministically render the generation request for one failure pair."""
    if tuple(s.id for s in sources) != selection.selected:
        raise InputError("sources must match selection.selected in order")
    lines = [
        f"{prompts.TASK_HEADER} {pair.task.description}",
        "",
        prompts.TRAJECTORY_HEADER,
        prompts.render_trajectory(pair.trajectory.steps, pair.trajectory.final_output),
        "",
        prompts.SOURCE_SKILLS_HEADER,
    ]
    if not sources:
        lines.append(prompts.NO_SOURCE_SKILLS)
    else:
        for skill in sources:
            lines.append(f"### {skill.name}")
            lines.append(f"description: {skill.description}")
            lines.append(f"{prompts.SOURCE_TAGS_PREFIX} {', '.join(sorted(skill.tags))}")
            lines.append("body:")
            lines.append(skill.body)
    lines.append("")
    lines.append(prompts.UNCOVERED_HEADER)
    if uncovered:
        lines.extend(f"- {tag}" for tag in sorted(uncovered))
    else:
        lines.append(prompts.NO_UNCOVERED)
    lines.append("")
    lines.append(prompts.GENERATION_INSTRUCTION)
    return ChatRequest(
        system=prompts.GENERATE_SYSTEM,
        user="\n".join(lines),
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


def parse_skill_response(text: str) -> tuple[str, str, str]:
    """Extract the NAME / DESCRIPTION / BODY sections of a generation reply."""
    name = _NAME_RE.search(text)
    description = _DESCRIPTION_RE.search(text)
    body = _BODY_RE.search(text)
    if not (name and description and body):
        raise ParseError("reply is missing a NAME, DESCRIPTION, or BODY section")
    body_text = body.group(1).strip()
    if not body_text:
        raise ParseError("reply has an empty BODY section")
    return name.group(1).strip(), description.group(1).strip(), body_text


def generate_candidates(
    failures: Sequence[FailurePair],
    library: SkillLibrary,
    index: EquivalenceIndex,
    chat: ChatProvider,
    config: GenerationConfig,
    target_tags: Mapping[str, TagSet],
    strategy: str = "greedy",
    dump_dir: str | Path | None = None,
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> list[CandidateSkill]:
    """Generate one or more candidate skills per failure pair.

    ``target_tags`` maps each failing task id to its inferred required tag
    set; every tag must already be present in ``index``, as must the tags of
    every library skill. Provider calls run with bounded parallelism over the
    pairs; collection order is canonical (pair id, then sequence number).
    """
    prepped: list[tuple[str, SelectionResult, ChatRequest, int]] = []
    for pair in sorted(failures, key=lambda p: p.task.id):
        pair_id = pair.task.id
        if pair_id not in target_tags:
            raise InputError(f"no target tags supplied for failing task {pair_id!r}")
        instance = build_cover_instance(target_tags[pair_id], library, index)
        selection = select_sources(instance, strategy)
        sources = [library.get(sid) for sid in selection.selected]
        uncovered = sorted(selection.uncovered)
        request = assemble_generation_prompt(pair, selection, sources, uncovered, config)
        if dump_dir is not None:
            _dump_prompt(Path(dump_dir), config.epoch, pair_id, request)
        for seq in range(config.candidates_per_pair):
            prepped.append((pair_id, selection, request, seq))

    skills = parallel_map(
        lambda item: _complete_one(chat, item[2], config, item[0], item[3]),
        prepped,
        max_workers=max_workers,
    )
    return [
        CandidateSkill(skill=skill, source_pair_id=pair_id, selection=selection)
        for (pair_id, selection, _, _), skill in zip(prepped, skills)
        if skill is not None
    ]


def _complete_one(
    chat: ChatProvider, request: ChatRequest, config: GenerationConfig, pair_id: str, seq: int
) -> Skill | None:
    parsed = None
    try:
        for attempt in range(PARSE_REASKS + 1):
            reply = chat.complete(request)
            try:
                parsed = parse_skill_response(reply.text)
                break
            except ParseError as exc:
                logger.warning(
                    "unparseable candidate for pair %s (attempt %d): %s", pair_id, attempt + 1, exc
                )
        if parsed is None:
            logger.warning("skipping pair %s: reply stayed unparseable", pair_id)
            return None
        name, description, body = parsed
        skill = Skill(
            id=candidate_id(config.epoch, pair_id, seq),
            name=name,
            description=description,
            body=body,
            tags=frozenset(),
            origin=ORIGIN_EVOLVED,
            created_epoch=config.epoch,
        )
        return replace(skill, tags=generate_skill_tags(skill, chat))
    except (ProviderError, TaggingError) as exc:
        logger.warning("skipping pair %s: %s", pair_id, exc)
        return None


def _dump_prompt(directory: Path, epoch: int, pair_id: str, request: ChatRequest) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"evo-{epoch}-{pair_id}.prompt.txt"
    path.write_text(f"SYSTEM:\n{request.system}\n\nUSER:\n{request.user}\n", encoding="utf-8")
