"""Source-skill selection as a bi-criteria set-cover problem.

The objective is lexicographic: first cover as many target tag classes as
possible, then among maximum-coverage selections introduce as few irrelevant
classes as possible. Every strategy runs to coverage exhaustion, so the
covered set always equals the coverable subset of the target (classes some
library skill can provide); the remaining target classes are reported as
uncovered and flow into candidate generation.

Strategies:

* ``greedy``      - largest marginal coverage, ties broken by fewer newly
                    introduced irrelevant classes, then by skill order.
* ``primal_dual`` - dual variables on uncovered target classes are raised
                    uniformly until some skill's dual sum reaches its cost
                    (1 + newly introduced irrelevant classes; the +1 floor
                    keeps zero-irrelevant skills comparable).
* ``lp_round``    - fractional relaxation minimizing the number of introduced
                    irrelevant classes subject to coverage, rounded at 0.5,
                    followed by a greedy repair pass.
* ``brute_force`` - exhaustive oracle over all subsets (at most 20 skills).

All strategies finish with a redundancy prune that drops, scanning in reverse
order of addition, any skill whose removal leaves the covered target classes
unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from skillforge.errors import ConfigError, InputError, SizeError

STRATEGIES = ("greedy", "primal_dual", "lp_round", "brute_force")

LP_SIZE_CAP = 500
BRUTE_FORCE_CAP = 20


@dataclass(frozen=True)
class CoverInstance:
    """Canonicalized selection instance: target classes and per-skill classes."""

    target_classes: frozenset[str]
    skill_classes: dict[str, frozenset[str]]
    skill_order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        order = self.skill_order or tuple(sorted(self.skill_classes))
        if sorted(order) != sorted(self.skill_classes):
            raise InputError("skill_order must be a permutation of the skill ids")
        object.__setattr__(self, "skill_order", order)
        object.__setattr__(
            self,
            "skill_classes",
            {sid: frozenset(classes) for sid, classes in self.skill_classes.items()},
        )
        object.__setattr__(self, "target_classes", frozenset(self.target_classes))

    @property
    def coverable(self) -> frozenset[str]:
        reachable: set[str] = set()
        for classes in self.skill_classes.values():
            reachable |= classes
        return self.target_classes & reachable

    @classmethod
    def from_file(cls, path: str | Path) -> CoverInstance:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            target_classes=frozenset(raw["targets"]),
            skill_classes={sid: frozenset(classes) for sid, classes in raw["skills"].items()},
        )

    def to_file(self, path: str | Path) -> None:
        payload = {
            "targets": sorted(self.target_classes),
            "skills": {sid: sorted(self.skill_classes[sid]) for sid in self.skill_order},
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    covered: frozenset[str]
    uncovered: frozenset[str]
    irrelevant_count: int

    def snapshot(self) -> dict:
        return {
            "selected": list(self.selected),
            "covered": sorted(self.covered),
            "uncovered": sorted(self.uncovered),
            "irrelevant_count": self.irrelevant_count,
        }


def _result(instance: CoverInstance, selected: list[str]) -> SelectionResult:
    union: set[str] = set()
    for sid in selected:
        union |= instance.skill_classes[sid]
    covered = frozenset(union & instance.target_classes)
    return SelectionResult(
        selected=tuple(selected),
        covered=covered,
        uncovered=frozenset(instance.target_classes - covered),
        irrelevant_count=len(union - instance.target_classes),
    )


def prune_redundant(instance: CoverInstance, selection: list[str] | tuple[str, ...]) -> tuple[str, ...]:
    """Drop skills (latest additions first) whose removal keeps coverage intact."""
    for sid in selection:
        if sid not in instance.skill_classes:
            raise InputError(f"selection references unknown skill {sid!r}")
    kept = list(selection)

    def covered(ids: list[str]) -> frozenset[str]:
        union: set[str] = set()
        for sid in ids:
            union |= instance.skill_classes[sid]
        return frozenset(union & instance.target_classes)

    for sid in list(reversed(kept)):
        trial = [s for s in kept if s != sid]
        if covered(trial) == covered(kept):
            kept = trial
    return tuple(kept)


def greedy_select(instance: CoverInstance) -> SelectionResult:
    order_index = {sid: i for i, sid in enumerate(instance.skill_order)}
    remaining = set(instance.coverable)
    introduced: set[str] = set()
    selected: list[str] = []
    chosen: set[str] = set()
    while remaining:
        best_sid = None
        best_key: tuple[int, int, int] | None = None
        for sid in instance.skill_order:
            if sid in chosen:
                continue
            classes = instance.skill_classes[sid]
            gain = len(classes & remaining)
            if gain == 0:
                continue
            new_irrelevant = len((classes - instance.target_classes) - introduced)
            key = (-gain, new_irrelevant, order_index[sid])
            if best_key is None or key < best_key:
                best_key = key
                best_sid = sid
        if best_sid is None:
            break
        chosen.add(best_sid)
        selected.append(best_sid)
        remaining -= instance.skill_classes[best_sid]
        introduced |= instance.skill_classes[best_sid] - instance.target_classes
    return _result(instance, list(prune_redundant(instance, selected)))


def primal_dual_select(instance: CoverInstance) -> SelectionResult:
    order_index = {sid: i for i, sid in enumerate(instance.skill_order)}
    coverable = instance.coverable
    uncovered = set(coverable)
    duals = {e: 0.0 for e in coverable}
    introduced: set[str] = set()
    selected: list[str] = []
    chosen: set[str] = set()
    while uncovered:
        best_sid = None
        best_key: tuple[float, int, int] | None = None
        for sid in instance.skill_order:
            if sid in chosen:
                continue
            classes = instance.skill_classes[sid]
            newly = classes & uncovered
            if not newly:
                continue
            cost = 1 + len((classes - instance.target_classes) - introduced)
            paid = sum(duals[e] for e in classes & coverable)
            delta = (cost - paid) / len(newly)
            key = (delta, len((classes - instance.target_classes) - introduced), order_index[sid])
            if best_key is None or key < best_key:
                best_key = key
                best_sid = sid
        if best_sid is None:
            break
        step = max(best_key[0], 0.0)
        for e in uncovered:
            duals[e] += step
        chosen.add(best_sid)
        selected.append(best_sid)
        uncovered -= instance.skill_classes[best_sid]
        introduced |= instance.skill_classes[best_sid] - instance.target_classes
    return _result(instance, list(prune_redundant(instance, selected)))


def lp_round_select(instance: CoverInstance) -> SelectionResult:
    from scipy.optimize import linprog

    n_skills = len(instance.skill_order)
    all_classes: set[str] = set()
    for classes in instance.skill_classes.values():
        all_classes |= classes
    if n_skills > LP_SIZE_CAP or len(all_classes | instance.target_classes) > LP_SIZE_CAP:
        raise SizeError(
            f"instance exceeds the LP cap of {LP_SIZE_CAP} skills/classes; use the greedy strategy"
        )

    coverable = sorted(instance.coverable)
    irrelevant = sorted(all_classes - instance.target_classes)
    selected: list[str] = []

    if coverable and n_skills:
        sid_index = {sid: i for i, sid in enumerate(instance.skill_order)}
        irr_index = {c: n_skills + j for j, c in enumerate(irrelevant)}
        n_vars = n_skills + len(irrelevant)

        # Objective: minimize the number of introduced irrelevant classes.
        cost = np.zeros(n_vars)
        cost[n_skills:] = 1.0

        rows: list[np.ndarray] = []
        bounds_rhs: list[float] = []
        # Coverage: each coverable target class needs fractional selection >= 1.
        for cls in coverable:
            row = np.zeros(n_vars)
            for sid in instance.skill_order:
                if cls in instance.skill_classes[sid]:
                    row[sid_index[sid]] = -1.0
            rows.append(row)
            bounds_rhs.append(-1.0)
        # Linking: selecting a skill forces its irrelevant classes on.
        for sid in instance.skill_order:
            for cls in instance.skill_classes[sid] - instance.target_classes:
                row = np.zeros(n_vars)
                row[sid_index[sid]] = 1.0
                row[irr_index[cls]] = -1.0
                rows.append(row)
                bounds_rhs.append(0.0)

        outcome = linprog(
            cost,
            A_ub=np.array(rows),
            b_ub=np.array(bounds_rhs),
            bounds=[(0.0, 1.0)] * n_vars,
            method="highs",
        )
        if outcome.status == 0:
            selected = [
                sid for sid in instance.skill_order if outcome.x[sid_index[sid]] >= 0.5
            ]
        # A failed solve falls through to the repair pass, which still
        # guarantees maximum coverage.

    selected = _greedy_repair(instance, selected)
    return _result(instance, list(prune_redundant(instance, selected)))


def _greedy_repair(instance: CoverInstance, selected: list[str]) -> list[str]:
    """Extend a partial selection until all coverable target classes are covered."""
    order_index = {sid: i for i, sid in enumerate(instance.skill_order)}
    chosen = set(selected)
    union: set[str] = set()
    for sid in selected:
        union |= instance.skill_classes[sid]
    remaining = set(instance.coverable) - union
    introduced = union - instance.target_classes
    result = list(selected)
    while remaining:
        best_sid = None
        best_key: tuple[int, int, int] | None = None
        for sid in instance.skill_order:
            if sid in chosen:
                continue
            classes = instance.skill_classes[sid]
            gain = len(classes & remaining)
            if gain == 0:
                continue
            key = (-gain, len((classes - instance.target_classes) - introduced), order_index[sid])
            if best_key is None or key < best_key:
                best_key = key
                best_sid = sid
        if best_sid is None:
            break
        chosen.add(best_sid)
        result.append(best_sid)
        remaining -= instance.skill_classes[best_sid]
        introduced |= instance.skill_classes[best_sid] - instance.target_classes
    return result


def brute_force_select(instance: CoverInstance) -> SelectionResult:
    """Exhaustive oracle: maximum coverage, then minimum irrelevant classes,
    then fewest skills, then lexicographically smallest id tuple."""
    ids = instance.skill_order
    n = len(ids)
    if n > BRUTE_FORCE_CAP:
        raise SizeError(f"brute force is capped at {BRUTE_FORCE_CAP} skills, got {n}")

    class_ids = sorted(instance.target_classes | {c for cl in instance.skill_classes.values() for c in cl})
    bit = {c: i for i, c in enumerate(class_ids)}
    target_mask = 0
    for c in instance.target_classes:
        target_mask |= 1 << bit[c]
    skill_masks = []
    for sid in ids:
        mask = 0
        for c in instance.skill_classes[sid]:
            mask |= 1 << bit[c]
        skill_masks.append(mask)

    union_masks = [0] * (1 << n)
    for subset in range(1, 1 << n):
        low = subset & -subset
        union_masks[subset] = union_masks[subset ^ low] | skill_masks[low.bit_length() - 1]

    best_subset = 0
    best_cov = 0
    best_irr = 0
    best_size = 0
    best_ids: tuple[str, ...] = ()
    for subset in range(1 << n):
        mask = union_masks[subset]
        cov = (mask & target_mask).bit_count()
        irr = (mask & ~target_mask).bit_count()
        size = subset.bit_count()
        if subset and cov == 0:
            continue
        if (cov, -irr, -size) < (best_cov, -best_irr, -best_size):
            continue
        subset_ids = tuple(sorted(ids[i] for i in range(n) if subset >> i & 1))
        if (cov, -irr, -size) == (best_cov, -best_irr, -best_size) and subset_ids >= best_ids:
            continue
        best_subset, best_cov, best_irr, best_size, best_ids = subset, cov, irr, size, subset_ids

    order = [ids[i] for i in range(n) if best_subset >> i & 1]
    return _result(instance, order)


def select_sources(instance: CoverInstance, strategy: str = "greedy") -> SelectionResult:
    if strategy == "greedy":
        return greedy_select(instance)
    if strategy == "primal_dual":
        return primal_dual_select(instance)
    if strategy == "lp_round":
        return lp_round_select(instance)
    if strategy == "brute_force":
        return brute_force_select(instance)
    raise ConfigError(f"unknown selection strategy {strategy!r}; expected one of {STRATEGIES}")
