"""Fine-grained stage: hierarchical hill-climbing on one hypothesis.

Refinement walks an ordered list of abstraction levels. Within a level it
proposes candidate revisions, scores them, keeps strict improvements, and
declares convergence once `patience` consecutive iterations go nowhere.
Finer levels open only after the coarser level converged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from moose.core import (
    DEFAULT_CRITERIA,
    EvaluationScore,
    HypothesisNode,
    IdAllocator,
    ResearchContext,
    SearchTree,
    Stage,
    attach_child,
    render_context,
)
from moose.errors import (
    InvalidScore,
    LevelOutOfRange,
    MooseError,
    ParseFailure,
    RefinementError,
    ScoreUnavailable,
)
from moose.gateway import Gateway, GenerationRequest

DEFAULT_LEVELS = (
    "research direction",
    "methodology",
    "experimental detail",
)


@dataclass(frozen=True)
class RefineConfig:
    levels: tuple[str, ...] = DEFAULT_LEVELS
    proposals_per_step: int = 2
    patience: int = 2
    max_steps_per_level: int = 20
    criteria: tuple[str, ...] = DEFAULT_CRITERIA

    def __post_init__(self):
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if self.proposals_per_step < 1 or self.patience < 1:
            raise ValueError("proposals_per_step and patience must be positive")
        if self.patience > self.max_steps_per_level:
            raise ValueError("patience must not exceed max_steps_per_level")


@dataclass(frozen=True)
class RefineOutcome:
    final_node: str
    steps_used: int
    per_level_trace: tuple[tuple[int, float, int], ...]

    def __post_init__(self):
        if self.steps_used != sum(steps for _, _, steps in self.per_level_trace):
            raise ValueError("steps_used must equal the sum of per-level steps")
        levels = [level for level, _, _ in self.per_level_trace]
        if levels != sorted(set(levels)):
            raise ValueError("per-level trace levels must strictly increase")

    def to_payload(self) -> dict:
        return {
            "final": self.final_node,
            "steps": self.steps_used,
            "per_level": [list(row) for row in self.per_level_trace],
        }


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def score_hypothesis(context: ResearchContext, text: str, gateway: Gateway,
                     criteria: tuple[str, ...] = DEFAULT_CRITERIA) -> EvaluationScore:
    """Ask the scorer for per-criterion values and average them here.

    Missing fields are re-asked through the gateway's repair loop; a value
    outside [0, 10] is rejected outright (the scorer answered, the answer is
    unusable), both surfacing as ScoreUnavailable.
    """
    if not text.strip():
        raise ValueError("cannot score empty hypothesis text")
    request = GenerationRequest(
        template_id="score_hypothesis",
        variables={
            "background": render_context(context),
            "hypothesis": text,
            "criteria": ", ".join(criteria),
        },
    )
    try:
        fields = gateway.complete_structured(request, schema=list(criteria))
    except ParseFailure as exc:
        raise ScoreUnavailable(f"scorer output unparseable: {exc}") from exc
    values: dict[str, float] = {}
    for name in criteria:
        try:
            values[name] = float(fields[name])
        except ValueError as exc:
            raise ScoreUnavailable(f"criterion {name!r} is not a number: "
                                   f"{fields[name]!r}") from exc
    try:
        return EvaluationScore.from_criteria(values)
    except InvalidScore as exc:
        raise ScoreUnavailable(str(exc)) from exc


def propose_refinement(context: ResearchContext, current: HypothesisNode,
                       level: int, cfg: RefineConfig, gateway: Gateway) -> str:
    """One candidate revision of ``current`` targeted at one abstraction level."""
    if not 0 <= level < len(cfg.levels):
        raise LevelOutOfRange(f"level {level} outside 0..{len(cfg.levels) - 1}")
    fields = gateway.complete_structured(
        GenerationRequest(
            template_id="propose_refinement",
            variables={
                "background": render_context(context),
                "hypothesis": current.text,
                "level": cfg.levels[level],
            },
        ),
        schema=["hypothesis"],
    )
    return fields["hypothesis"]


def refine_level(tree: SearchTree, context: ResearchContext, start: str,
                 level: int, cfg: RefineConfig, gateway: Gateway,
                 ids: IdAllocator, *, created_by_event: str = "",
                 rescore_seed: bool = False,
                 log: list[dict] | None = None) -> tuple[SearchTree, str, int, float]:
    """Greedy hill-climb at one abstraction level.

    Each iteration proposes ``proposals_per_step`` candidates; a candidate
    whose average strictly beats the current best is attached as a
    fine-grained child and becomes the new best. The climb stops after
    ``patience`` consecutive iterations without improvement or once
    ``max_steps_per_level`` proposal calls are spent. Returned ``steps``
    counts proposal calls; baseline scoring is not a step. The trailing
    element is the best average seen, which is the (re)scored seed baseline
    when nothing was accepted.
    """
    best = tree.node(start)
    if rescore_seed or best.scores is None:
        baseline = score_hypothesis(context, best.text, gateway, cfg.criteria)
    else:
        baseline = best.scores
    best_average = baseline.average
    steps = 0
    stale = 0
    while steps < cfg.max_steps_per_level and stale < cfg.patience:
        improved = False
        for _ in range(cfg.proposals_per_step):
            if steps >= cfg.max_steps_per_level:
                break
            candidate = propose_refinement(context, best, level, cfg, gateway)
            steps += 1
            score = score_hypothesis(context, candidate, gateway, cfg.criteria)
            accepted = score.average > best_average
            if log is not None:
                log.append({
                    "step": steps,
                    "level": level,
                    "candidate_digest": _digest(candidate),
                    "average": score.average,
                    "accepted": accepted,
                })
            if accepted:
                node = HypothesisNode(
                    id=ids.allocate(),
                    parent=best.id,
                    stage=Stage.FINE_GRAINED,
                    text=candidate,
                    step_index=best.step_index + 1 if best.stage is Stage.FINE_GRAINED else 1,
                    abstraction_level=level,
                    scores=score,
                    created_by_event=created_by_event,
                )
                tree = attach_child(tree, best.id, node)
                best = node
                best_average = score.average
                improved = True
        stale = 0 if improved else stale + 1
    return tree, best.id, steps, best_average


def refine_hierarchical(tree: SearchTree, context: ResearchContext, start: str,
                        cfg: RefineConfig, gateway: Gateway, ids: IdAllocator, *,
                        created_by_event: str = "",
                        log: list[dict] | None = None) -> tuple[SearchTree, RefineOutcome]:
    """Run every abstraction level in coarse-to-fine order.

    Each level seeds from the previous level's best and re-scores that seed
    on entry, so a noisy reward may legitimately rate a finer level below
    its coarser parent; level order is monotone even when reward is not.
    On failure the partial tree and trace ride along on RefinementError.
    """
    tree.node(start)
    trace: list[tuple[int, float, int]] = []
    seed = start
    total = 0
    for level in range(len(cfg.levels)):
        try:
            tree, seed, steps, best_average = refine_level(
                tree, context, seed, level, cfg, gateway, ids,
                created_by_event=created_by_event,
                rescore_seed=True,
                log=log,
            )
        except MooseError as exc:
            partial = RefineOutcome(final_node=seed, steps_used=total,
                                    per_level_trace=tuple(trace))
            raise RefinementError(f"refinement failed at level {level}: {exc}",
                                  tree=tree, outcome=partial) from exc
        total += steps
        trace.append((level, best_average, steps))
    outcome = RefineOutcome(final_node=seed, steps_used=total,
                            per_level_trace=tuple(trace))
    return tree, outcome
