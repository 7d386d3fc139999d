"""Knowledge-tag generation, normalization, equivalence indexing, and quality metrics.

Tags are plain normalized strings; tag sets are frozensets of them. Semantic
equivalence is a union-find partition over all known tags, joining two tags
whenever their embedding cosine similarity reaches the threshold ``delta``.
The transitive closure makes equivalence a true equivalence relation even
though raw cosine similarity is not transitive, and gives every set formula a
well-defined element identity: each tag maps to the lexicographically
smallest member of its class.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from skillforge import prompts
from skillforge.errors import ConfigError, InputError, MissingTagError, TaggingError
from skillforge.model import FailurePair, Skill, SkillLibrary
from skillforge.providers.base import ChatProvider, ChatRequest, EmbeddingProvider

logger = logging.getLogger(__name__)

TagSet = frozenset[str]

_COLLAPSE_RE = re.compile(r"[\s_]+")
_BULLET_RE = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s*")

TAG_RETRIES = 2


def normalize_tag(raw: str) -> str:
    """Lowercase, trim, and collapse whitespace/underscore runs to one underscore."""
    text = _COLLAPSE_RE.sub("_", raw.strip().lower()).strip("_")
    if not text:
        raise InputError(f"tag is empty after normalization: {raw!r}")
    return text


def normalize_tag_set(raw_tags: Iterable[str]) -> TagSet:
    return frozenset(normalize_tag(t) for t in raw_tags)


def parse_tag_list(text: str) -> list[str]:
    """Parse a model's tag list reply.

    Accepts one tag per line or comma-separated tags, with optional bullets
    or numbering. Returns normalized tags, deduplicated, in reply order.
    """
    found: list[str] = []
    seen: set[str] = set()
    for line in text.splitlines():
        line = _BULLET_RE.sub("", line).strip()
        if not line:
            continue
        pieces = line.split(",") if "," in line else [line]
        for piece in pieces:
            piece = piece.strip()
            if not piece or len(piece.split()) > 8:
                continue
            if not any(ch.isalnum() for ch in piece):
                continue
            try:
                tag = normalize_tag(piece)
            except InputError:
                continue
            if tag not in seen:
                seen.add(tag)
                found.append(tag)
    return found


def build_skill_tag_request(skill: Skill) -> ChatRequest:
    user = (
        f"Skill name: {skill.name}\n"
        f"Skill description: {skill.description}\n"
        "Skill body:\n"
        f"{skill.body}\n\n"
        "List the knowledge tags this skill contains, one per line."
    )
    return ChatRequest(system=prompts.SKILL_TAG_SYSTEM, user=user)


def build_target_tag_request(pair: FailurePair) -> ChatRequest:
    user = (
        f"{prompts.TASK_HEADER} {pair.task.description}\n\n"
        f"{prompts.TRAJECTORY_HEADER}\n"
        f"{prompts.render_trajectory(pair.trajectory.steps, pair.trajectory.final_output)}\n\n"
        "List the knowledge tags required to solve this task, one per line."
    )
    return ChatRequest(system=prompts.TARGET_TAG_SYSTEM, user=user)


def _tags_from_chat(request: ChatRequest, chat: ChatProvider, what: str) -> TagSet:
    last_reply = ""
    for _ in range(TAG_RETRIES + 1):
        reply = chat.complete(request)
        last_reply = reply.text
        tags = parse_tag_list(reply.text)
        if tags:
            return frozenset(tags)
    raise TaggingError(f"no parseable tags for {what} after {TAG_RETRIES} retries: {last_reply[:120]!r}")


def generate_skill_tags(skill: Skill, chat: ChatProvider) -> TagSet:
    """Ask the chat provider for the skill's knowledge tags."""
    if not skill.body:
        raise InputError(f"skill {skill.id!r} has an empty body")
    return _tags_from_chat(build_skill_tag_request(skill), chat, f"skill {skill.id!r}")


def generate_target_tags(pair: FailurePair, chat: ChatProvider) -> TagSet:
    """Infer the tag set a failed task requires from the task and its trajectory."""
    return _tags_from_chat(build_target_tag_request(pair), chat, f"task {pair.task.id!r}")


class EquivalenceIndex:
    """Union-find partition of tags under embedding-cosine equivalence."""

    def __init__(self, delta: float = 0.9) -> None:
        if not 0.0 < delta <= 1.0:
            raise ConfigError(f"delta must lie in (0, 1], got {delta}")
        self.delta = delta
        self._parent: dict[str, str] = {}
        self._vectors: dict[str, np.ndarray] = {}

    @classmethod
    def build(
        cls, tags: Iterable[str], embedder: EmbeddingProvider, delta: float = 0.9
    ) -> EquivalenceIndex:
        index = cls(delta=delta)
        index.add_tags(tags, embedder)
        return index

    def __contains__(self, tag: str) -> bool:
        return tag in self._parent

    def __len__(self) -> int:
        return len(self._parent)

    @property
    def members(self) -> tuple[str, ...]:
        return tuple(sorted(self._parent))

    def add_tags(self, tags: Iterable[str], embedder: EmbeddingProvider) -> None:
        """Insert new tags, joining them to any tag within cosine ``delta``.

        Existing memberships can only merge, never split, so adding an
        unrelated tag leaves prior classes untouched. All parent pointers are
        flattened before returning, which keeps lookups pure reads and the
        index safe to share across concurrent scoring workers.
        """
        new = sorted(set(tags) - set(self._parent))
        if not new:
            return
        vectors = embedder.embed(new)
        for tag, vector in zip(new, vectors):
            self._parent[tag] = tag
            self._vectors[tag] = np.asarray(vector, dtype=np.float64)
        known = self.members
        for tag in new:
            v = self._vectors[tag]
            for other in known:
                if other == tag:
                    continue
                if float(np.dot(v, self._vectors[other])) >= self.delta:
                    self._union(tag, other)
        for tag in self._parent:
            self._parent[tag] = self._find(tag)

    def _find(self, tag: str) -> str:
        root = tag
        while self._parent[root] != root:
            root = self._parent[root]
        return root

    def _union(self, a: str, b: str) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        keep, drop = (ra, rb) if ra < rb else (rb, ra)
        self._parent[drop] = keep

    def representative(self, tag: str) -> str:
        if tag not in self._parent:
            raise MissingTagError(f"tag {tag!r} is not in the equivalence index")
        return self._find(tag)

    def canonical_set(self, tags: Iterable[str]) -> TagSet:
        return frozenset(self.representative(t) for t in tags)

    def classes(self) -> dict[str, tuple[str, ...]]:
        grouped: dict[str, list[str]] = {}
        for tag in sorted(self._parent):
            grouped.setdefault(self._find(tag), []).append(tag)
        return {rep: tuple(members) for rep, members in sorted(grouped.items())}

    def dump(self, path: str | Path) -> None:
        mapping = {tag: self._find(tag) for tag in sorted(self._parent)}
        Path(path).write_text(json.dumps(mapping, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def build_equivalence(
    tags: Iterable[str], embedder: EmbeddingProvider, delta: float = 0.9
) -> EquivalenceIndex:
    return EquivalenceIndex.build(tags, embedder, delta=delta)


def semantic_intersection(a: Iterable[str], b: Iterable[str], index: EquivalenceIndex) -> int:
    """Size of the class-canonical intersection of two tag sets."""
    return len(index.canonical_set(a) & index.canonical_set(b))


def _prf(intersection: int, predicted: int, reference: int) -> tuple[float, float, float]:
    p = intersection / predicted if predicted else 0.0
    r = intersection / reference if reference else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass(frozen=True)
class TagQualityReport:
    exact_precision: float
    exact_recall: float
    exact_f1: float
    semantic_precision: float
    semantic_recall: float
    semantic_f1: float


def tag_quality_metrics(
    predicted: TagSet, reference: TagSet, index: EquivalenceIndex
) -> TagQualityReport:
    """Exact-string and class-canonical precision/recall/F1."""
    ep, er, ef = _prf(len(predicted & reference), len(predicted), len(reference))
    cp = index.canonical_set(predicted)
    cr = index.canonical_set(reference)
    sp, sr, sf = _prf(len(cp & cr), len(cp), len(cr))
    return TagQualityReport(ep, er, ef, sp, sr, sf)


def self_consistency(runs: Sequence[TagSet], index: EquivalenceIndex) -> float:
    """Mean pairwise semantic F1 across independent tag-generation runs."""
    if len(runs) < 2:
        raise InputError("self_consistency needs at least 2 runs")
    scores = []
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            scores.append(tag_quality_metrics(runs[i], runs[j], index).semantic_f1)
    return sum(scores) / len(scores)


def dump_tags(library: SkillLibrary, path: str | Path) -> None:
    """Write the skill-id to tag-list mapping as JSON."""
    mapping = {skill.id: sorted(skill.tags) for skill in library}
    Path(path).write_text(json.dumps(mapping, indent=2, sort_keys=True) + "\n", encoding="utf-8")
