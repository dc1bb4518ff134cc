"""Domain types and the hypothesis search tree.

Everything here is an immutable value: tree operations return new trees,
so snapshots can be shared freely across threads. No I/O and no model
calls live in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterator, Mapping

from moose.errors import (
    DuplicateNode,
    EmptyFeedback,
    EmptyQuestion,
    InvalidScore,
    StageFieldViolation,
    StepIndexViolation,
    UnknownNode,
    UnknownParent,
)

SCORE_MIN = 0.0
SCORE_MAX = 10.0
AVERAGE_TOLERANCE = 1e-9

#: Default self-evaluation criteria; configurable wherever scoring is invoked.
DEFAULT_CRITERIA = ("plausibility", "novelty", "specificity", "feasibility")


class Stage(str, Enum):
    """The two search regimes a node can belong to."""

    EXPLORATORY = "exploratory"
    FINE_GRAINED = "fine_grained"


class AdditionKind(str, Enum):
    PRIOR_HYPOTHESIS = "prior_hypothesis"
    FEEDBACK = "feedback"


@dataclass(frozen=True)
class ContextAddition:
    """One append-only extension of the working background."""

    kind: AdditionKind
    text: str
    source_node: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("context addition text must be non-empty")
        if self.kind is AdditionKind.PRIOR_HYPOTHESIS and not self.source_node:
            raise ValueError("prior-hypothesis additions must name a source node")


@dataclass(frozen=True)
class ResearchContext:
    """The evolving background a generation step conditions on.

    ``additions`` is append-only: deriving a richer context keeps the
    original list as a prefix (see :meth:`extended`).
    """

    question: str
    survey: str | None = None
    blueprint: str | None = None
    additions: tuple[ContextAddition, ...] = ()

    def __post_init__(self):
        if not self.question.strip():
            raise EmptyQuestion("research question must be non-empty")

    def extended(self, *additions: ContextAddition) -> ResearchContext:
        return replace(self, additions=self.additions + tuple(additions))


@dataclass(frozen=True)
class Inspiration:
    """One searchable corpus item: a paper title plus abstract."""

    id: str
    title: str
    abstract: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("inspiration id must be non-empty")
        if not self.title.strip():
            raise ValueError("inspiration title must be non-empty")


@dataclass(frozen=True)
class InspirationCorpus:
    entries: tuple[Inspiration, ...]
    name: str = "corpus"

    def __post_init__(self):
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise ValueError(f"duplicate inspiration id: {entry.id!r}")
            seen.add(entry.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Inspiration]:
        return iter(self.entries)

    def get(self, inspiration_id: str) -> Inspiration | None:
        for entry in self.entries:
            if entry.id == inspiration_id:
                return entry
        return None

    def ids(self) -> list[str]:
        return [entry.id for entry in self.entries]


@dataclass(frozen=True)
class EvaluationScore:
    """Per-criterion scores in [0, 10] with their arithmetic mean."""

    criteria: Mapping[str, float]
    average: float

    def __post_init__(self):
        if not self.criteria:
            raise InvalidScore("criteria must be non-empty")
        for name, value in self.criteria.items():
            if not (SCORE_MIN <= value <= SCORE_MAX):
                raise InvalidScore(f"criterion {name!r} out of range: {value}")
        mean = sum(self.criteria.values()) / len(self.criteria)
        if abs(mean - self.average) > AVERAGE_TOLERANCE:
            raise InvalidScore(
                f"stored average {self.average} disagrees with criteria mean {mean}"
            )

    @classmethod
    def from_criteria(cls, criteria: Mapping[str, float]) -> EvaluationScore:
        return cls(criteria=dict(criteria), average=sum(criteria.values()) / len(criteria))

    def to_dict(self) -> dict[str, Any]:
        return {"criteria": dict(self.criteria), "average": self.average}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EvaluationScore:
        return cls(criteria=dict(data["criteria"]), average=data["average"])


@dataclass(frozen=True)
class HypothesisNode:
    """One hypothesis state in the search tree.

    ``step_index`` counts same-stage steps from the stage entry point: the
    root sits at 0, a same-stage child is parent+1, and the counter resets
    to 1 when a child crosses stages.
    """

    id: str
    parent: str | None
    stage: Stage
    text: str
    step_index: int
    inspiration_used: str | None = None
    abstraction_level: int | None = None
    scores: EvaluationScore | None = None
    created_by_event: str = ""

    def __post_init__(self):
        if self.step_index < 0:
            raise StepIndexViolation(f"negative step_index on node {self.id!r}")
        if self.parent is None and self.step_index != 0:
            raise StepIndexViolation("root node must have step_index 0")
        if self.stage is Stage.EXPLORATORY:
            if self.abstraction_level is not None:
                raise StageFieldViolation("exploratory node carries abstraction_level")
            if self.parent is not None and self.inspiration_used is None:
                raise StageFieldViolation(
                    "non-root exploratory node must record inspiration_used"
                )
        else:
            if self.inspiration_used is not None:
                raise StageFieldViolation("fine-grained node carries inspiration_used")
            if self.abstraction_level is None:
                raise StageFieldViolation("fine-grained node must carry abstraction_level")

    def with_scores(self, scores: EvaluationScore) -> HypothesisNode:
        return replace(self, scores=scores)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "parent": self.parent,
            "stage": self.stage.value,
            "text": self.text,
            "step_index": self.step_index,
            "inspiration_used": self.inspiration_used,
            "abstraction_level": self.abstraction_level,
            "scores": self.scores.to_dict() if self.scores else None,
            "created_by_event": self.created_by_event,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> HypothesisNode:
        scores = data.get("scores")
        return cls(
            id=data["id"],
            parent=data["parent"],
            stage=Stage(data["stage"]),
            text=data["text"],
            step_index=data["step_index"],
            inspiration_used=data.get("inspiration_used"),
            abstraction_level=data.get("abstraction_level"),
            scores=EvaluationScore.from_dict(scores) if scores else None,
            created_by_event=data.get("created_by_event", ""),
        )


# --- guiding signals ---------------------------------------------------------


@dataclass(frozen=True)
class InitialBlueprint:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("blueprint text must be non-empty")


@dataclass(frozen=True)
class RouteTransition:
    node: str
    target: Stage


@dataclass(frozen=True)
class DirectionalFeedback:
    node: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise EmptyFeedback("feedback text must be non-empty")


GuidingSignal = InitialBlueprint | RouteTransition | DirectionalFeedback


# --- the search tree ---------------------------------------------------------


@dataclass(frozen=True)
class SearchTree:
    root: str
    nodes: Mapping[str, HypothesisNode]
    active: str

    def __post_init__(self):
        if self.root not in self.nodes:
            raise UnknownNode(f"root {self.root!r} missing from node map")
        if self.active not in self.nodes:
            raise UnknownNode(f"active {self.active!r} missing from node map")

    def node(self, node_id: str) -> HypothesisNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def children_of(self, node_id: str) -> list[HypothesisNode]:
        return sorted(
            (n for n in self.nodes.values() if n.parent == node_id),
            key=lambda n: n.id,
        )

    def leaves(self) -> list[HypothesisNode]:
        parents = {n.parent for n in self.nodes.values() if n.parent is not None}
        return sorted(
            (n for n in self.nodes.values() if n.id not in parents),
            key=lambda n: n.id,
        )

    def with_active(self, node_id: str) -> SearchTree:
        if node_id not in self.nodes:
            raise UnknownNode(f"unknown node {node_id!r}")
        return replace(self, active=node_id)

    def with_node_scores(self, node_id: str, scores: EvaluationScore) -> SearchTree:
        node = self.node(node_id)
        nodes = dict(self.nodes)
        nodes[node_id] = node.with_scores(scores)
        return replace(self, nodes=nodes)


def seed_text(context: ResearchContext) -> str:
    """Canonical rendering of the root node from question + blueprint."""
    parts = [f"Research question: {context.question.strip()}"]
    if context.blueprint and context.blueprint.strip():
        parts.append(f"Blueprint: {context.blueprint.strip()}")
    return "\n".join(parts)


def render_context(context: ResearchContext) -> str:
    """Render the full background, additions last, for prompt consumption."""
    parts = [f"Research question: {context.question.strip()}"]
    if context.survey and context.survey.strip():
        parts.append(f"Literature survey: {context.survey.strip()}")
    if context.blueprint and context.blueprint.strip():
        parts.append(f"Blueprint: {context.blueprint.strip()}")
    labels = {
        AdditionKind.PRIOR_HYPOTHESIS: "Earlier hypothesis",
        AdditionKind.FEEDBACK: "Expert feedback",
    }
    for addition in context.additions:
        parts.append(f"{labels[addition.kind]}: {addition.text}")
    return "\n".join(parts)


def new_tree(background: ResearchContext, *, root_id: str = "n000000",
             created_by_event: str = "") -> SearchTree:
    """Create a one-node tree whose root renders the background."""
    if not background.question.strip():
        raise EmptyQuestion("research question must be non-empty")
    root = HypothesisNode(
        id=root_id,
        parent=None,
        stage=Stage.EXPLORATORY,
        text=seed_text(background),
        step_index=0,
        created_by_event=created_by_event,
    )
    return SearchTree(root=root_id, nodes={root_id: root}, active=root_id)


def attach_child(tree: SearchTree, parent: str, node: HypothesisNode) -> SearchTree:
    """Attach ``node`` under ``parent``, validating the step/stage contract."""
    if parent not in tree.nodes:
        raise UnknownParent(f"unknown parent {parent!r}")
    if node.id in tree.nodes:
        raise DuplicateNode(f"node id {node.id!r} already present")
    if node.parent != parent:
        raise UnknownParent(
            f"node {node.id!r} names parent {node.parent!r}, expected {parent!r}"
        )
    parent_node = tree.nodes[parent]
    if node.stage is parent_node.stage:
        expected = parent_node.step_index + 1
    else:
        expected = 1
    if node.step_index != expected:
        raise StepIndexViolation(
            f"node {node.id!r} has step_index {node.step_index}, expected {expected}"
        )
    nodes = dict(tree.nodes)
    nodes[node.id] = node
    return replace(tree, nodes=nodes)


def path_to_root(tree: SearchTree, node_id: str) -> list[HypothesisNode]:
    """Return the root-first chain of nodes ending at ``node_id``."""
    current = tree.node(node_id)
    chain = [current]
    while current.parent is not None:
        current = tree.node(current.parent)
        chain.append(current)
    chain.reverse()
    return chain


# --- canonical export --------------------------------------------------------


def tree_document(tree: SearchTree) -> dict[str, Any]:
    """The canonical tree document: one record per node, sorted by id."""
    return {
        "root": tree.root,
        "active": tree.active,
        "nodes": [tree.nodes[nid].to_dict() for nid in sorted(tree.nodes)],
    }


def canonical_json(document: Any) -> str:
    """The single JSON encoding reused bit-exactly by persistence and the API."""
    return json.dumps(document, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def export_tree(tree: SearchTree) -> str:
    return canonical_json(tree_document(tree))


def tree_from_document(document: Mapping[str, Any]) -> SearchTree:
    nodes = {rec["id"]: HypothesisNode.from_dict(rec) for rec in document["nodes"]}
    return SearchTree(root=document["root"], nodes=nodes, active=document["active"])


class IdAllocator:
    """Per-session allocator of lexicographically sortable sequential ids."""

    def __init__(self, prefix: str, start: int = 0):
        self._prefix = prefix
        self._next = start

    def allocate(self) -> str:
        value = f"{self._prefix}{self._next:06d}"
        self._next += 1
        return value

    @property
    def position(self) -> int:
        return self._next
