"""Prompt templates shared by the tagging and generation stages.

The section markers below are a stable contract: the deterministic mock chat
provider recognizes requests by their system prompt and reads the marked
sections back out of the user prompt.
"""

from __future__ import annotations

SKILL_TAG_SYSTEM = (
    "You label reusable agent skills with knowledge tags. Each tag is a short "
    "phrase naming one capability the skill contains. Reply with one tag per line."
)

TARGET_TAG_SYSTEM = (
    "You read a task and a failed attempt at it, then infer the knowledge tags "
    "the task requires. Each tag is a short phrase naming one required "
    "capability. Reply with one tag per line."
)

GENERATE_SYSTEM = (
    "You write reusable skills for an agent. Reply with exactly three sections: "
    "a NAME: line, a DESCRIPTION: line, and a BODY: section holding the procedure."
)

TASK_HEADER = "Task:"
TRAJECTORY_HEADER = "Failed trajectory:"
SOURCE_SKILLS_HEADER = "Source skills:"
NO_SOURCE_SKILLS = "No source skills selected."
UNCOVERED_HEADER = "Missing knowledge tags:"
NO_UNCOVERED = "None."
SOURCE_TAGS_PREFIX = "tags:"

GENERATION_INSTRUCTION = (
    "Write one reusable skill that transfers the useful knowledge from the "
    "source skills, covers the missing knowledge tags when possible, and "
    "generalizes to a class of related tasks rather than only this instance. "
    "Reply exactly in this format:\n"
    "NAME: <short name>\n"
    "DESCRIPTION: <one-line description>\n"
    "BODY:\n"
    "<procedure text>"
)


def render_trajectory(steps, final_output: str) -> str:
    if not steps:
        lines = ["(no steps recorded)"]
    else:
        lines = []
        for i, (action, observation) in enumerate(steps, start=1):
            lines.append(f"{i}. action: {action}")
            lines.append(f"   observation: {observation}")
    lines.append(f"Final output: {final_output}")
    return "\n".join(lines)
