"""Pipeline execution and report aggregation.

One run drives a whole session for one (pipeline, entry) pair through the
protocol layer, simulating the navigator: exploration rounds deepen along
the selector's top pick, ranking chooses the node to route or critique,
and oracle feedback closes the loop. Search steps count refinement
proposal calls only, read back from the gateway's own accounting.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from moose.core import InspirationCorpus, Stage
from moose.errors import MooseError
from moose.explore import ExploreConfig
from moose.gateway import Gateway
from moose.harness.dataset import GroundTruthEntry
from moose.harness.matching import compute_recall
from moose.harness.oracle import oracle_feedback, oracle_rank
from moose.harness.pipelines import PipelineSpec, Ranking, stage_sequence_of
from moose.protocol import (
    LogicalClock,
    SessionState,
    apply_feedback,
    export_session,
    init_session,
    route,
    run_explore,
    run_refine,
    self_rank,
)
from moose.refine import RefineConfig


@dataclass(frozen=True)
class RunConfigs:
    """Engine knobs for harness runs; defaults are demo-scale."""

    explore: ExploreConfig = ExploreConfig(beam_width=2, shortlist_size=15, max_rounds=1)
    refine: RefineConfig = RefineConfig(proposals_per_step=1, patience=1,
                                        max_steps_per_level=3)


@dataclass(frozen=True)
class RunReport:
    entry_id: str
    pipeline: str
    recall: float
    search_steps: int
    stage_sequence: tuple[str, ...]
    export_digest: str
    incomplete: bool = False

    def __post_init__(self):
        if not 0.0 <= self.recall <= 1.0:
            raise ValueError(f"recall out of range: {self.recall}")
        if self.search_steps < 0:
            raise ValueError("search_steps must be non-negative")

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "pipeline": self.pipeline,
            "recall": self.recall,
            "search_steps": self.search_steps,
            "stage_sequence": list(self.stage_sequence),
            "export_digest": self.export_digest,
            "incomplete": self.incomplete,
        }


def derive_blueprint(entry: GroundTruthEntry) -> str:
    """Hint text for *_with_hint rows: survey digest plus the question."""
    sentences = re.split(r"(?<=[.!?])\s+", entry.survey.strip())
    digest = " ".join(sentence for sentence in sentences[:2] if sentence)
    if digest:
        return f"{digest} Guiding question: {entry.question}"
    return f"Guiding question: {entry.question}"


def _rank_leaves(session: SessionState, entry: GroundTruthEntry, ranking: Ranking,
                 gateway: Gateway) -> tuple[SessionState, list[str]]:
    leaves = [node.id for node in session.tree.leaves()]
    if ranking is Ranking.SELF:
        session, scored = self_rank(session, leaves, gateway)
        return session, [node_id for node_id, _ in scored]
    candidates = [(node_id, session.tree.node(node_id).text) for node_id in leaves]
    return session, oracle_rank(candidates, entry)


def _ensure_fine_grained(session: SessionState, node_id: str) -> SessionState:
    if session.tree.node(node_id).stage is Stage.EXPLORATORY:
        return route(session, node_id, Stage.FINE_GRAINED)
    if session.stage_of_active is not Stage.FINE_GRAINED:
        raise MooseError(
            f"node {node_id!r} is fine-grained but the session is exploratory; "
            "no legal route exists"
        )
    return session


def run_pipeline(spec: PipelineSpec, entry: GroundTruthEntry,
                 corpus: InspirationCorpus, configs: RunConfigs,
                 gateway: Gateway, *, session_id: str | None = None,
                 clock=None, session_sink=None,
                 log_sink: list[dict] | None = None) -> RunReport:
    """Execute one composition for one entry and report recall and steps.

    The gateway must be fresh for the run: search_steps is its count of
    refinement-proposal calls. Engine errors abort the run and flag the
    report incomplete instead of raising. Recall is computed on the node
    the last generative step produced (a refinement's best, else the top
    pick of the last exploration round), falling back to the last ranking
    winner and then the newest node for degenerate runs.
    """
    session_id = session_id or f"{spec.name}--{entry.entry_id}"
    clock = clock if clock is not None else LogicalClock()
    blueprint = derive_blueprint(entry) if spec.use_blueprint else None
    session = init_session(entry.question, entry.survey, blueprint, corpus,
                           session_id=session_id, clock=clock)
    incomplete = False
    final_node: str | None = None
    last_ranked: str | None = None
    try:
        frontier = session.tree.root
        if spec.run_exploration:
            for _ in range(configs.explore.max_rounds):
                session, new_ids = run_explore(session, corpus, configs.explore,
                                               gateway, node=frontier)
                if new_ids:
                    frontier = new_ids[0]
                    final_node = frontier
        if spec.run_refinement:
            if spec.run_exploration and spec.ranking is not Ranking.NONE:
                session, ordered = _rank_leaves(session, entry, spec.ranking, gateway)
                target = ordered[0]
                last_ranked = target
            elif spec.run_exploration:
                target = max(session.tree.nodes)
            else:
                target = session.tree.root
            session = _ensure_fine_grained(session, target)
            session, outcome = run_refine(session, configs.refine, gateway,
                                          node=target, corpus=corpus, log=log_sink)
            final_node = outcome.final_node
        for _ in range(spec.feedback_rounds):
            session, ordered = _rank_leaves(session, entry, spec.ranking, gateway)
            top = ordered[0]
            last_ranked = top
            feedback = oracle_feedback(session.tree.node(top).text, entry,
                                       spec.feedback_strength, gateway)
            session = apply_feedback(session, top, feedback)
            if spec.run_refinement:
                session = _ensure_fine_grained(session, top)
                session, outcome = run_refine(session, configs.refine, gateway,
                                              node=top, corpus=corpus, log=log_sink)
                final_node = outcome.final_node
            else:
                frontier = top
                for _ in range(configs.explore.max_rounds):
                    session, new_ids = run_explore(session, corpus,
                                                   configs.explore, gateway,
                                                   node=frontier)
                    if new_ids:
                        frontier = new_ids[0]
                        final_node = frontier
    except MooseError as exc:
        incomplete = True
        session = getattr(exc, "session", session)
    if final_node is None:
        if last_ranked is not None:
            final_node = last_ranked
        elif len(session.tree.nodes) > 1:
            final_node = max(session.tree.nodes)
        else:
            final_node = session.tree.root
    export = export_session(session)
    if session_sink is not None:
        session_sink(session)
    return RunReport(
        entry_id=entry.entry_id,
        pipeline=spec.name,
        recall=compute_recall(session.tree.node(final_node).text, entry),
        search_steps=gateway.calls_for("propose_refinement"),
        stage_sequence=tuple(stage_sequence_of(session)),
        export_digest=hashlib.sha256(export.encode("utf-8")).hexdigest(),
        incomplete=incomplete,
    )


@dataclass(frozen=True)
class AggregateRow:
    pipeline: str
    runs: int
    mean_recall: float
    mean_search_steps: float


@dataclass(frozen=True)
class Aggregate:
    rows: tuple[AggregateRow, ...]

    def to_dict(self) -> dict:
        return {"rows": [
            {
                "pipeline": row.pipeline,
                "runs": row.runs,
                "mean_recall": row.mean_recall,
                "mean_search_steps": row.mean_search_steps,
            }
            for row in self.rows
        ]}

    def render_text(self) -> str:
        """Plain-text table: method, recall, search steps; '-' for no steps."""
        name_width = max(len("Method Name"),
                         *(len(row.pipeline) for row in self.rows)) if self.rows else 11
        lines = [f"{'Method Name':<{name_width}}  {'Recall':>8}  {'# Search Steps':>15}"]
        for row in self.rows:
            steps = "-" if row.mean_search_steps == 0 else f"{row.mean_search_steps:.1f}"
            lines.append(
                f"{row.pipeline:<{name_width}}  {row.mean_recall * 100:>7.2f}%  {steps:>15}"
            )
        return "\n".join(lines) + "\n"


def aggregate(reports: list[RunReport]) -> Aggregate:
    """Arithmetic means per pipeline, in first-appearance order."""
    if not reports:
        raise ValueError("aggregate requires at least one report")
    order: list[str] = []
    grouped: dict[str, list[RunReport]] = {}
    for report in reports:
        if report.pipeline not in grouped:
            grouped[report.pipeline] = []
            order.append(report.pipeline)
        grouped[report.pipeline].append(report)
    rows = []
    for name in order:
        group = grouped[name]
        rows.append(AggregateRow(
            pipeline=name,
            runs=len(group),
            mean_recall=sum(r.recall for r in group) / len(group),
            mean_search_steps=sum(r.search_steps for r in group) / len(group),
        ))
    return Aggregate(rows=tuple(rows))
