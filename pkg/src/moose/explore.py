"""Exploratory stage: inspiration selection and divergent tree expansion.

One round selects a handful of corpus items and grows one child per item
under the active node. The engine never chains rounds on its own; deciding
what to do next belongs to the interaction protocol.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from moose.core import (
    HypothesisNode,
    IdAllocator,
    Inspiration,
    InspirationCorpus,
    ResearchContext,
    SearchTree,
    Stage,
    attach_child,
    render_context,
)
from moose.errors import (
    EmptyCorpus,
    MalformedEntry,
    ParseFailure,
    SelectionParseFailure,
    StageMismatch,
)
from moose.gateway import Gateway, GenerationRequest, parse_fields

_TOKEN_PATTERN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class ExploreConfig:
    """Knobs for one exploratory round.

    ``beam_width`` children are grown per round from a lexical shortlist of
    ``shortlist_size`` corpus entries; both clamp to the corpus size.
    """

    beam_width: int = 3
    shortlist_size: int = 15
    max_rounds: int = 2

    def __post_init__(self):
        if self.beam_width < 1 or self.shortlist_size < 1 or self.max_rounds < 1:
            raise ValueError("explore config values must be positive")
        if self.beam_width > self.shortlist_size:
            raise ValueError("beam_width must not exceed shortlist_size")


# --- corpus ingestion --------------------------------------------------------


def parse_corpus(text: str, name: str = "corpus") -> InspirationCorpus:
    """Parse the line-delimited corpus format: one {id, title, abstract} per line."""
    entries: list[Inspiration] = []
    seen: set[str] = set()
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedEntry(f"line {line_number}: invalid JSON ({exc.msg})",
                                 line_number) from exc
        if not isinstance(record, dict):
            raise MalformedEntry(f"line {line_number}: expected an object", line_number)
        missing = {"id", "title", "abstract"} - set(record)
        if missing:
            raise MalformedEntry(
                f"line {line_number}: missing fields {sorted(missing)}", line_number
            )
        if record["id"] in seen:
            raise MalformedEntry(f"line {line_number}: duplicate id {record['id']!r}",
                                 line_number)
        seen.add(record["id"])
        try:
            entries.append(Inspiration(id=str(record["id"]), title=str(record["title"]),
                                       abstract=str(record["abstract"])))
        except ValueError as exc:
            raise MalformedEntry(f"line {line_number}: {exc}", line_number) from exc
    if not entries:
        raise EmptyCorpus("corpus contains no entries")
    return InspirationCorpus(entries=tuple(entries), name=name)


def load_corpus(path: str | Path) -> InspirationCorpus:
    path = Path(path)
    return parse_corpus(path.read_text(encoding="utf-8"), name=path.stem)


# --- selection ---------------------------------------------------------------


def _tokens(text: str) -> set[str]:
    return set(_TOKEN_PATTERN.findall(text.lower()))


def shortlist(context: ResearchContext, current: HypothesisNode,
              corpus: InspirationCorpus, size: int) -> list[Inspiration]:
    """Deterministic lexical pre-filter: token overlap, ties by id order."""
    if len(corpus) <= size:
        return sorted(corpus, key=lambda e: e.id)
    query = _tokens(context.question + " " + current.text)
    scored = [
        (len(query & _tokens(entry.title + " " + entry.abstract)), entry)
        for entry in corpus
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return [entry for _, entry in scored[:size]]


def _render_candidates(entries: list[Inspiration]) -> str:
    return "\n".join(f"[{e.id}] {e.title} — {e.abstract}" for e in entries)


def select_inspirations(context: ResearchContext, current: HypothesisNode,
                        corpus: InspirationCorpus, cfg: ExploreConfig,
                        gateway: Gateway) -> list[str]:
    """Pick up to ``beam_width`` distinct inspiration ids for the next round.

    The selector's answer is validated against the corpus; an answer naming
    no known id is re-asked at most twice before SelectionParseFailure.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot select from an empty corpus")
    beam = min(cfg.beam_width, len(corpus))
    candidates = shortlist(context, current, corpus, min(cfg.shortlist_size, len(corpus)))
    if len(candidates) == 1:
        return [candidates[0].id]
    request = GenerationRequest(
        template_id="select_inspiration",
        variables={
            "background": render_context(context),
            "hypothesis": current.text,
            "candidates": _render_candidates(candidates),
            "beam_width": str(beam),
        },
    )
    known = set(corpus.ids())
    suffix = ""
    for _ in range(gateway.MAX_REPAIRS + 1):
        result = gateway.complete(request, _prompt_suffix=suffix)
        suffix = (
            "\n\nYour previous answer named no valid candidate id. Answer again "
            "with ids taken verbatim from the candidate list, wrapped in "
            "«selection»...«/selection»."
        )
        try:
            raw = parse_fields(result.text, ["selection"])["selection"]
        except ParseFailure:
            continue
        chosen: list[str] = []
        for token in re.split(r"[,\s]+", raw):
            token = token.strip("[]")
            if token and token in known and token not in chosen:
                chosen.append(token)
        if chosen:
            return chosen[:beam]
    raise SelectionParseFailure("selector named no valid inspiration id after repairs")


def expand_with_inspiration(context: ResearchContext, parent: HypothesisNode,
                            insp: Inspiration, gateway: Gateway, *,
                            node_id: str, created_by_event: str = "",
                            routed_seed: bool = False) -> HypothesisNode:
    """One hypothesis-update step; returns an unattached child node."""
    if parent.stage is not Stage.EXPLORATORY and not routed_seed:
        raise StageMismatch(
            f"cannot expand under fine-grained node {parent.id!r} without a route"
        )
    fields = gateway.complete_structured(
        GenerationRequest(
            template_id="generate_hypothesis",
            variables={
                "background": render_context(context),
                "hypothesis": parent.text,
                "inspiration_title": insp.title,
                "inspiration_abstract": insp.abstract,
            },
        ),
        schema=["hypothesis"],
    )
    step_index = parent.step_index + 1 if parent.stage is Stage.EXPLORATORY else 1
    return HypothesisNode(
        id=node_id,
        parent=parent.id,
        stage=Stage.EXPLORATORY,
        text=fields["hypothesis"],
        step_index=step_index,
        inspiration_used=insp.id,
        created_by_event=created_by_event,
    )


def explore_round(tree: SearchTree, context: ResearchContext,
                  corpus: InspirationCorpus, cfg: ExploreConfig,
                  gateway: Gateway, ids: IdAllocator, *,
                  created_by_event: str = "",
                  routed: bool = False) -> tuple[SearchTree, list[str]]:
    """Select inspirations and grow one child per selection under the active node.

    Inspirations already used by a child of this parent are skipped instead
    of re-generated. The active node is left unchanged; choosing where to go
    next is the navigator's call.
    """
    parent = tree.node(tree.active)
    if parent.stage is not Stage.EXPLORATORY and not routed:
        raise StageMismatch(
            f"active node {parent.id!r} is fine-grained; route it to exploration first"
        )
    selected = select_inspirations(context, parent, corpus, cfg, gateway)
    already_used = {child.inspiration_used for child in tree.children_of(parent.id)}
    new_ids: list[str] = []
    for inspiration_id in selected:
        if inspiration_id in already_used:
            continue
        insp = corpus.get(inspiration_id)
        assert insp is not None  # select_inspirations validated membership
        child = expand_with_inspiration(
            context, parent, insp, gateway,
            node_id=ids.allocate(),
            created_by_event=created_by_event,
            routed_seed=routed,
        )
        tree = attach_child(tree, parent.id, child)
        new_ids.append(child.id)
        already_used.add(inspiration_id)
    return tree, new_ids
