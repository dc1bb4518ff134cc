"""Pipeline compositions under evaluation and their description grammar.

Each benchmark row is a PipelineSpec plus a shorthand description string
("MC", "MC2", ranking/feedback groups, and [...]xN repetition). The
description parser is the reference interpreter the composition-fidelity
check compares real runs against: it maps a description to the exact
stage-label sequence a faithful run must produce.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from moose.core import Stage
from moose.harness.oracle import FeedbackStrength
from moose.protocol import EventKind, SessionState

ROUTE_TO_FINE = "Route(C→E)"
ROUTE_TO_COARSE = "Route(E→C)"


class Ranking(str, Enum):
    SELF = "self"
    ORACLE = "oracle"
    NONE = "none"


@dataclass(frozen=True)
class PipelineSpec:
    """One benchmark composition.

    ``run_exploration`` is true for every composition that starts from the
    divergent stage; the refinement-only baseline seeds directly from the
    question. ``feedback_rounds`` with ``run_refinement`` loop
    rank→feedback→refine; without it they loop back into exploration.
    """

    name: str
    description: str
    use_blueprint: bool = False
    ranking: Ranking = Ranking.NONE
    feedback_rounds: int = 0
    feedback_strength: FeedbackStrength = FeedbackStrength.STANDARD
    run_refinement: bool = False
    run_exploration: bool = True

    def __post_init__(self):
        if self.feedback_rounds < 0:
            raise ValueError("feedback_rounds must be non-negative")
        if self.feedback_rounds > 0 and not (self.run_refinement or self.run_exploration):
            raise ValueError(
                "feedback rounds need refinement or an exploration continuation"
            )


def _feedback_row(n: int, strength: FeedbackStrength) -> PipelineSpec:
    strength_word = "strong feedback" if strength is FeedbackStrength.STRONG else "feedback"
    infix = "strong_feedback" if strength is FeedbackStrength.STRONG else "feedback"
    suffix = "" if n == 1 else f"_x{n}"
    return PipelineSpec(
        name=f"MC2_with_{infix}{suffix}_oracle_rank",
        description=("MC + initial blueprint + (oracle-ranking) + MC2 + "
                     f"[(oracle ranking + {strength_word}) + MC2]x{n}"),
        use_blueprint=True,
        ranking=Ranking.ORACLE,
        feedback_rounds=n,
        feedback_strength=strength,
        run_refinement=True,
    )


TABLE_ROWS: tuple[PipelineSpec, ...] = (
    PipelineSpec(name="baseline_MC", description="MC"),
    PipelineSpec(name="baseline_MC2", description="MC2",
                 run_refinement=True, run_exploration=False),
    PipelineSpec(name="MC_with_hint", description="MC + initial blueprint",
                 use_blueprint=True),
    PipelineSpec(name="MC_with_soft_feedback_with_hint",
                 description="MC + initial blueprint + (oracle ranking + soft feedback) + MC",
                 use_blueprint=True, ranking=Ranking.ORACLE, feedback_rounds=1,
                 feedback_strength=FeedbackStrength.SOFT),
    PipelineSpec(name="MC_with_feedback_with_hint",
                 description="MC + initial blueprint + (oracle ranking + feedback) + MC",
                 use_blueprint=True, ranking=Ranking.ORACLE, feedback_rounds=1),
    PipelineSpec(name="MC2_with_MC_input_self_rank",
                 description="MC + initial blueprint + (self-ranking) + MC2",
                 use_blueprint=True, ranking=Ranking.SELF, run_refinement=True),
    PipelineSpec(name="MC2_with_MC_input_oracle_rank",
                 description="MC + initial blueprint + (oracle-ranking) + MC2",
                 use_blueprint=True, ranking=Ranking.ORACLE, run_refinement=True),
    _feedback_row(1, FeedbackStrength.STANDARD),
    _feedback_row(2, FeedbackStrength.STANDARD),
    _feedback_row(3, FeedbackStrength.STANDARD),
    _feedback_row(4, FeedbackStrength.STANDARD),
    _feedback_row(1, FeedbackStrength.STRONG),
    _feedback_row(2, FeedbackStrength.STRONG),
    _feedback_row(3, FeedbackStrength.STRONG),
    _feedback_row(4, FeedbackStrength.STRONG),
)


def pipeline_by_name(name: str) -> PipelineSpec:
    for spec in TABLE_ROWS:
        if spec.name == name:
            return spec
    raise KeyError(f"unknown pipeline {name!r}")


_REPEAT = re.compile(r"^\[(.*)\]x(\d+)$")


def _split_segments(description: str) -> list[str]:
    """Split on top-level ' + ', honoring (...) and [...] nesting."""
    segments: list[str] = []
    depth = 0
    current: list[str] = []
    i = 0
    while i < len(description):
        char = description[i]
        if char in "([":
            depth += 1
        elif char in ")]":
            depth -= 1
        if depth == 0 and description.startswith(" + ", i):
            segments.append("".join(current).strip())
            current = []
            i += 3
            continue
        current.append(char)
        i += 1
    if current:
        segments.append("".join(current).strip())
    return [segment for segment in segments if segment]


def parse_description(description: str, explore_rounds: int = 1) -> list[str]:
    """Reference interpreter: description string → expected stage labels.

    MC expands to one Explore per configured round, MC2 to one Refine,
    crossing stages inserts the route the protocol requires, ranking groups
    are silent, and any group naming feedback emits one Feedback.
    """
    labels: list[str] = []
    stage = Stage.EXPLORATORY

    def walk(segments: list[str]) -> None:
        nonlocal stage
        for segment in segments:
            repeat = _REPEAT.match(segment)
            if repeat:
                inner = _split_segments(repeat.group(1))
                for _ in range(int(repeat.group(2))):
                    walk(inner)
                continue
            if segment == "MC":
                if stage is Stage.FINE_GRAINED:
                    labels.append(ROUTE_TO_COARSE)
                    stage = Stage.EXPLORATORY
                labels.extend(["Explore"] * explore_rounds)
                continue
            if segment == "MC2":
                if stage is Stage.EXPLORATORY:
                    labels.append(ROUTE_TO_FINE)
                    stage = Stage.FINE_GRAINED
                labels.append("Refine")
                continue
            if segment == "initial blueprint":
                continue
            if segment.startswith("(") and segment.endswith(")"):
                if "feedback" in segment:
                    labels.append("Feedback")
                continue
            raise ValueError(f"unrecognized description segment: {segment!r}")

    walk(_split_segments(description))
    return labels


_EVENT_LABELS = {
    EventKind.EXPLORE_ROUND: "Explore",
    EventKind.REFINE_RUN: "Refine",
    EventKind.FEEDBACK_APPLIED: "Feedback",
}


def stage_sequence_of(session: SessionState) -> list[str]:
    """Derive the run's stage labels straight from its event log."""
    labels: list[str] = []
    for event in session.events:
        if event.kind in _EVENT_LABELS:
            labels.append(_EVENT_LABELS[event.kind])
        elif event.kind is EventKind.ROUTED:
            to_fine = Stage(event.payload["to"]) is Stage.FINE_GRAINED
            labels.append(ROUTE_TO_FINE if to_fine else ROUTE_TO_COARSE)
    return labels
