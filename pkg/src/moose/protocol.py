"""The session state machine: guiding signals, event log, replay.

A session is an immutable value; every operation returns a new one with
exactly one event appended. The event log carries the full node records
each engine run produced, so a session is reconstructible from (base
inputs, events) alone with no model access, and a stored export can be
verified by replaying it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

from moose.core import (
    AdditionKind,
    ContextAddition,
    DirectionalFeedback,
    EvaluationScore,
    GuidingSignal,
    HypothesisNode,
    IdAllocator,
    InitialBlueprint,
    InspirationCorpus,
    ResearchContext,
    RouteTransition,
    SearchTree,
    Stage,
    canonical_json,
    new_tree,
    tree_document,
)
from moose.errors import (
    BlueprintLocked,
    CorpusInvalid,
    CorruptSession,
    EmptyFeedback,
    EmptyQuestion,
    RefinementError,
    SameStageRoute,
    ScoreUnavailable,
    StageMismatch,
)
from moose.explore import ExploreConfig, explore_round
from moose.gateway import Gateway
from moose.refine import RefineConfig, RefineOutcome, refine_hierarchical, score_hypothesis


class EventKind(str, Enum):
    INIT = "init"
    BLUEPRINT_SET = "blueprint_set"
    EXPLORE_ROUND = "explore_round"
    FEEDBACK_APPLIED = "feedback_applied"
    ROUTED = "routed"
    REFINE_RUN = "refine_run"
    SELF_RANKED = "self_ranked"


@dataclass(frozen=True)
class ProtocolEvent:
    id: str
    kind: EventKind
    timestamp: float
    payload: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "timestamp": self.timestamp,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ProtocolEvent:
        return cls(id=data["id"], kind=EventKind(data["kind"]),
                   timestamp=data["timestamp"], payload=data["payload"])


class LogicalClock:
    """Deterministic tick source: 0.0, 1.0, 2.0, ..."""

    def __init__(self, start: int = 0):
        self._next = start

    def __call__(self) -> float:
        value = float(self._next)
        self._next += 1
        return value


@dataclass(frozen=True)
class SessionState:
    """One discovery session: base inputs, tree, and the guiding-signal log.

    ``stage_of_active`` matches the active node's stage except between a
    route and the engine run that consumes it, when the routed node is
    pending reinterpretation at the target stage.
    """

    session_id: str
    base_context: ResearchContext
    corpus_ref: str
    tree: SearchTree
    events: tuple[ProtocolEvent, ...]
    stage_of_active: Stage
    node_seq: int
    event_seq: int
    clock: Callable[[], float] = field(compare=False, repr=False, default=time.time)

    @property
    def active_node(self) -> HypothesisNode:
        return self.tree.node(self.tree.active)

    def _next_event(self, kind: EventKind, payload: Mapping[str, Any],
                    *, event_id: str) -> ProtocolEvent:
        return ProtocolEvent(id=event_id, kind=kind,
                             timestamp=self.clock(), payload=dict(payload))

    def _event_id(self) -> str:
        return f"e{self.event_seq:06d}"


# --- constructors ------------------------------------------------------------


def init_session(question: str, survey: str | None = None,
                 blueprint: str | None = None,
                 corpus: InspirationCorpus | None = None, *,
                 session_id: str = "session",
                 clock: Callable[[], float] | None = None) -> SessionState:
    """Open a session: Init event, optional BlueprintSet, one-node tree."""
    if not question or not question.strip():
        raise EmptyQuestion("research question must be non-empty")
    if corpus is None or len(corpus) == 0:
        raise CorpusInvalid("session requires a non-empty inspiration corpus")
    clock = clock or time.time
    base = ResearchContext(question=question, survey=survey, blueprint=blueprint)
    init_id = "e000000"
    tree = new_tree(base, root_id="n000000", created_by_event=init_id)
    events = [ProtocolEvent(
        id=init_id,
        kind=EventKind.INIT,
        timestamp=clock(),
        payload={
            "question": question,
            "survey": survey,
            "corpus_ref": corpus.name,
            "root": tree.node(tree.root).to_dict(),
        },
    )]
    event_seq = 1
    if blueprint is not None and blueprint.strip():
        events.append(ProtocolEvent(
            id=f"e{event_seq:06d}",
            kind=EventKind.BLUEPRINT_SET,
            timestamp=clock(),
            payload={"text": blueprint},
        ))
        event_seq += 1
    return SessionState(
        session_id=session_id,
        base_context=base,
        corpus_ref=corpus.name,
        tree=tree,
        events=tuple(events),
        stage_of_active=Stage.EXPLORATORY,
        node_seq=1,
        event_seq=event_seq,
        clock=clock,
    )


# --- guiding signals ----------------------------------------------------------


def apply_feedback(session: SessionState, node_id: str, feedback: str) -> SessionState:
    """Record directional feedback on a node and make that node active.

    The augmented context takes effect on the next engine run under this
    node; feedback never triggers a generation by itself.
    """
    if not feedback or not feedback.strip():
        raise EmptyFeedback("feedback text must be non-empty")
    node = session.tree.node(node_id)
    event = session._next_event(
        EventKind.FEEDBACK_APPLIED,
        {"node": node_id, "text": feedback, "prior": node.text},
        event_id=session._event_id(),
    )
    return replace(
        session,
        tree=session.tree.with_active(node_id),
        events=session.events + (event,),
        event_seq=session.event_seq + 1,
    )


def route(session: SessionState, node_id: str, target: Stage) -> SessionState:
    """Move a node across stages; the node becomes the seed for the next run."""
    node = session.tree.node(node_id)
    if target is node.stage:
        raise SameStageRoute(f"node {node_id!r} is already at stage {target.value}")
    event = session._next_event(
        EventKind.ROUTED,
        {"node": node_id, "from": node.stage.value, "to": target.value},
        event_id=session._event_id(),
    )
    return replace(
        session,
        tree=session.tree.with_active(node_id),
        events=session.events + (event,),
        stage_of_active=target,
        event_seq=session.event_seq + 1,
    )


def apply_signal(session: SessionState, signal: GuidingSignal) -> SessionState:
    if isinstance(signal, InitialBlueprint):
        raise BlueprintLocked("the initial blueprint is immutable after session init")
    if isinstance(signal, RouteTransition):
        return route(session, signal.node, signal.target)
    if isinstance(signal, DirectionalFeedback):
        return apply_feedback(session, signal.node, signal.text)
    raise TypeError(f"unknown guiding signal: {signal!r}")


# --- derived context ----------------------------------------------------------


def _is_descendant(tree: SearchTree, node_id: str, ancestor: str) -> bool:
    current = tree.node(node_id)
    while current.parent is not None:
        if current.parent == ancestor:
            return True
        current = tree.node(current.parent)
    return False


def context_for(session: SessionState, node_id: str) -> ResearchContext:
    """Base context plus every feedback addition whose scope covers the node.

    Feedback applied at n reaches n itself and any descendant of n created
    after the feedback event; siblings and pre-existing descendants are
    untouched.
    """
    node = session.tree.node(node_id)
    context = session.base_context
    for event in session.events:
        if event.kind is not EventKind.FEEDBACK_APPLIED:
            continue
        target = event.payload["node"]
        in_scope = node_id == target or (
            _is_descendant(session.tree, node_id, target)
            and node.created_by_event > event.id
        )
        if in_scope:
            context = context.extended(
                ContextAddition(
                    kind=AdditionKind.PRIOR_HYPOTHESIS,
                    text=event.payload["prior"],
                    source_node=target,
                ),
                ContextAddition(kind=AdditionKind.FEEDBACK, text=event.payload["text"]),
            )
    return context


def route_summary(session: SessionState, node_id: str,
                  corpus: InspirationCorpus | None = None) -> str:
    """Bullet summary of the inspirations along the node's root path."""
    from moose.core import path_to_root

    lines = []
    for step in path_to_root(session.tree, node_id):
        if step.inspiration_used is None:
            continue
        title = step.inspiration_used
        if corpus is not None:
            entry = corpus.get(step.inspiration_used)
            if entry is not None:
                title = entry.title
        lines.append(f"- {title}")
    return "\n".join(lines)


def expansion_context(session: SessionState, node_id: str,
                      corpus: InspirationCorpus | None = None) -> ResearchContext:
    """The widened background a routed node carries into refinement."""
    node = session.tree.node(node_id)
    summary = route_summary(session, node_id, corpus)
    text = node.text if not summary else f"Reached via:\n{summary}\n\n{node.text}"
    return context_for(session, node_id).extended(
        ContextAddition(kind=AdditionKind.PRIOR_HYPOTHESIS, text=text,
                        source_node=node_id)
    )


# --- engine runs ---------------------------------------------------------------


def run_explore(session: SessionState, corpus: InspirationCorpus,
                cfg: ExploreConfig, gateway: Gateway, *,
                node: str | None = None) -> tuple[SessionState, list[str]]:
    """One exploratory round under ``node`` (default: the active node)."""
    target = node if node is not None else session.tree.active
    target_node = session.tree.node(target)
    if session.stage_of_active is not Stage.EXPLORATORY:
        raise StageMismatch("session is in the fine-grained stage; route first")
    event_id = session._event_id()
    ids = IdAllocator("n", session.node_seq)
    tree = session.tree.with_active(target)
    tree, new_ids = explore_round(
        tree, context_for(session, target), corpus, cfg, gateway, ids,
        created_by_event=event_id,
        routed=target_node.stage is Stage.FINE_GRAINED,
    )
    event = session._next_event(
        EventKind.EXPLORE_ROUND,
        {
            "parent": target,
            "nodes": [tree.node(nid).to_dict() for nid in new_ids],
        },
        event_id=event_id,
    )
    session = replace(
        session,
        tree=tree,
        events=session.events + (event,),
        node_seq=ids.position,
        event_seq=session.event_seq + 1,
    )
    return session, new_ids


def run_refine(session: SessionState, cfg: RefineConfig, gateway: Gateway, *,
               node: str | None = None,
               corpus: InspirationCorpus | None = None,
               log: list[dict] | None = None) -> tuple[SessionState, RefineOutcome]:
    """Hierarchical refinement seeded at ``node`` (default: the active node)."""
    start = node if node is not None else session.tree.active
    start_node = session.tree.node(start)
    if session.stage_of_active is not Stage.FINE_GRAINED:
        raise StageMismatch("session is in the exploratory stage; route first")
    if start_node.stage is Stage.EXPLORATORY:
        context = expansion_context(session, start, corpus)
    else:
        context = context_for(session, start)
    event_id = session._event_id()
    ids = IdAllocator("n", session.node_seq)
    tree = session.tree.with_active(start)
    try:
        tree, outcome = refine_hierarchical(
            tree, context, start, cfg, gateway, ids,
            created_by_event=event_id, log=log,
        )
    except RefinementError as exc:
        partial_tree = exc.tree if exc.tree is not None else tree
        outcome = exc.outcome
        accepted = [nid for nid in sorted(partial_tree.nodes)
                    if partial_tree.node(nid).created_by_event == event_id]
        event = session._next_event(
            EventKind.REFINE_RUN,
            {
                "start": start,
                **(outcome.to_payload() if outcome else {}),
                "nodes": [partial_tree.node(nid).to_dict() for nid in accepted],
                "error": str(exc),
            },
            event_id=event_id,
        )
        final = outcome.final_node if outcome else start
        exc.session = replace(
            session,
            tree=partial_tree.with_active(final),
            events=session.events + (event,),
            node_seq=ids.position,
            event_seq=session.event_seq + 1,
        )
        raise
    accepted = [nid for nid in sorted(tree.nodes)
                if tree.node(nid).created_by_event == event_id]
    event = session._next_event(
        EventKind.REFINE_RUN,
        {
            "start": start,
            **outcome.to_payload(),
            "nodes": [tree.node(nid).to_dict() for nid in accepted],
        },
        event_id=event_id,
    )
    session = replace(
        session,
        tree=tree.with_active(outcome.final_node),
        events=session.events + (event,),
        node_seq=ids.position,
        event_seq=session.event_seq + 1,
    )
    return session, outcome


def self_rank(session: SessionState, candidates: Sequence[str], gateway: Gateway,
              criteria: tuple[str, ...] | None = None,
              ) -> tuple[SessionState, list[tuple[str, EvaluationScore | None]]]:
    """Score candidates with the model's own rubric and order them.

    Best average first; ties by node id; candidates whose score is
    unavailable sort last (recorded as null in the event payload).
    """
    if not candidates:
        raise ValueError("self_rank requires at least one candidate")
    from moose.refine import RefineConfig as _RC

    criteria = criteria or _RC().criteria
    scored: list[tuple[str, EvaluationScore | None]] = []
    for node_id in candidates:
        node = session.tree.node(node_id)
        try:
            score = score_hypothesis(context_for(session, node_id), node.text,
                                     gateway, criteria)
        except ScoreUnavailable:
            score = None
        scored.append((node_id, score))
    scored.sort(key=lambda pair: (pair[1] is None,
                                  -(pair[1].average if pair[1] else 0.0),
                                  pair[0]))
    event = session._next_event(
        EventKind.SELF_RANKED,
        {
            "candidates": list(candidates),
            "ranking": [[nid, score.to_dict() if score else None]
                        for nid, score in scored],
        },
        event_id=session._event_id(),
    )
    tree = session.tree
    for node_id, score in scored:
        if score is not None:
            tree = tree.with_node_scores(node_id, score)
    session = replace(
        session,
        tree=tree,
        events=session.events + (event,),
        event_seq=session.event_seq + 1,
    )
    return session, scored


# --- trace validation -----------------------------------------------------------


@dataclass(frozen=True)
class TraceReport:
    ok: bool
    index: int | None = None
    rule: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_trace(events: Sequence[ProtocolEvent]) -> TraceReport:
    """Check the event log against the protocol grammar.

    Init, then an optional BlueprintSet, then any mix of engine rounds,
    feedback, routes, and rankings, with engine runs legal only in their
    stage; refinement therefore cannot precede the first route to the
    fine-grained stage. Total function: returns the first violation rather
    than raising.
    """
    if not events:
        return TraceReport(False, 0, "log must start with Init")
    stage = Stage.EXPLORATORY
    previous_id: str | None = None
    for index, event in enumerate(events):
        if previous_id is not None and event.id <= previous_id:
            return TraceReport(False, index, "event ids must strictly increase")
        previous_id = event.id
        if index == 0:
            if event.kind is not EventKind.INIT:
                return TraceReport(False, 0, "log must start with Init")
            continue
        if event.kind is EventKind.INIT:
            return TraceReport(False, index, "Init is only legal at position 0")
        if event.kind is EventKind.BLUEPRINT_SET:
            if index != 1:
                return TraceReport(False, index,
                                   "BlueprintSet is only legal immediately after Init")
            continue
        if event.kind is EventKind.ROUTED:
            stage = Stage(event.payload["to"])
            continue
        if event.kind is EventKind.EXPLORE_ROUND:
            if stage is not Stage.EXPLORATORY:
                return TraceReport(False, index,
                                   "ExploreRound requires the exploratory stage")
            continue
        if event.kind is EventKind.REFINE_RUN:
            if stage is not Stage.FINE_GRAINED:
                return TraceReport(False, index,
                                   "RefineRun requires a prior route to fine-grained")
            continue
        # FeedbackApplied and SelfRanked are stage-agnostic.
    return TraceReport(True)


# --- export / replay -------------------------------------------------------------


def session_document(session: SessionState) -> dict[str, Any]:
    return {
        "session_id": session.session_id,
        "base": {
            "question": session.base_context.question,
            "survey": session.base_context.survey,
            "blueprint": session.base_context.blueprint,
            "corpus_ref": session.corpus_ref,
        },
        "events": [event.to_dict() for event in session.events],
        "tree": tree_document(session.tree),
    }


def export_session(session: SessionState) -> str:
    return canonical_json(session_document(session))


def _max_seq(ids: Sequence[str], prefix: str) -> int:
    best = 0
    for value in ids:
        if value.startswith(prefix):
            try:
                best = max(best, int(value[len(prefix):]) + 1)
            except ValueError:
                continue
    return best


def replay_session(document: Mapping[str, Any], *,
                   clock: Callable[[], float] | None = None) -> SessionState:
    """Rebuild a session purely from its base inputs and event log."""
    base_info = document["base"]
    events = [ProtocolEvent.from_dict(rec) for rec in document["events"]]
    if not events or events[0].kind is not EventKind.INIT:
        raise CorruptSession("event log must start with Init")
    init = events[0]
    base = ResearchContext(
        question=base_info["question"],
        survey=base_info.get("survey"),
        blueprint=base_info.get("blueprint"),
    )
    root = HypothesisNode.from_dict(init.payload["root"])
    tree = SearchTree(root=root.id, nodes={root.id: root}, active=root.id)
    stage = Stage.EXPLORATORY
    from moose.core import attach_child

    for event in events[1:]:
        if event.kind is EventKind.BLUEPRINT_SET:
            continue
        if event.kind is EventKind.EXPLORE_ROUND:
            tree = tree.with_active(event.payload["parent"])
            for record in event.payload["nodes"]:
                node = HypothesisNode.from_dict(record)
                tree = attach_child(tree, node.parent, node)
        elif event.kind is EventKind.FEEDBACK_APPLIED:
            tree = tree.with_active(event.payload["node"])
        elif event.kind is EventKind.ROUTED:
            tree = tree.with_active(event.payload["node"])
            stage = Stage(event.payload["to"])
        elif event.kind is EventKind.REFINE_RUN:
            for record in event.payload["nodes"]:
                node = HypothesisNode.from_dict(record)
                tree = attach_child(tree, node.parent, node)
            final = event.payload.get("final", event.payload["start"])
            tree = tree.with_active(final)
        elif event.kind is EventKind.SELF_RANKED:
            for node_id, score in event.payload["ranking"]:
                if score is not None:
                    tree = tree.with_node_scores(node_id, EvaluationScore.from_dict(score))
    return SessionState(
        session_id=document["session_id"],
        base_context=base,
        corpus_ref=base_info["corpus_ref"],
        tree=tree,
        events=tuple(events),
        stage_of_active=stage,
        node_seq=_max_seq(list(tree.nodes), "n"),
        event_seq=_max_seq([event.id for event in events], "e"),
        clock=clock or time.time,
    )


def restore_session(document: Mapping[str, Any], *,
                    clock: Callable[[], float] | None = None) -> SessionState:
    """Replay a stored export and refuse to load on any mismatch."""
    try:
        session = replay_session(document, clock=clock)
    except CorruptSession:
        raise
    except Exception as exc:
        raise CorruptSession(f"replay failed: {exc}") from exc
    if export_session(session) != canonical_json(document):
        raise CorruptSession("stored export disagrees with event-log replay")
    return session
