"""Simulated ideal-expert signals: ranking and directional feedback.

The oracle sees the ground-truth hypothesis but must never hand it over:
every feedback text is screened for shared 8-token spans, regenerated on a
hit, and as a last resort redacted. Ranking defaults to the deterministic
recall-based order; an LLM judge is available behind the oracle_rank
template for non-deterministic studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from moose.errors import LeakUnfixable, ParseFailure
from moose.gateway import Gateway, GenerationRequest, parse_fields
from moose.harness.dataset import GroundTruthEntry
from moose.harness.matching import (
    compute_recall,
    content_tokens,
    match_element,
    normalize_tokens,
)

LEAK_NGRAM = 8

NO_GAPS_TEXT = ("No gaps identified: the hypothesis already covers every "
                "annotated aspect of the target.")

STRENGTH_INSTRUCTIONS = {
    "soft": ("Name one high-level theme the current hypothesis is missing. "
             "Answer in one or two sentences; do not enumerate specifics."),
    "standard": ("List the missing aspects as concrete directions to "
                 "investigate, one short bullet per aspect."),
    "strong": ("For each missing aspect in order, give a pointed directional "
               "critique: what is absent, why it matters, and what line of "
               "inquiry would surface it."),
}


class FeedbackStrength(str, Enum):
    SOFT = "soft"
    STANDARD = "standard"
    STRONG = "strong"


@dataclass(frozen=True)
class LeakReport:
    ok: bool
    span: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _ngrams(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def leak_check(feedback: str, entry: GroundTruthEntry,
               ngram: int = LEAK_NGRAM) -> LeakReport:
    """Fail when feedback shares a normalized n-gram with the ground truth."""
    feedback_tokens = normalize_tokens(feedback)
    if len(feedback_tokens) < ngram:
        return LeakReport(True)
    protected: set[tuple[str, ...]] = set()
    for text in (entry.fine_grained_hypothesis, *entry.elements):
        protected |= _ngrams(normalize_tokens(text), ngram)
    for i in range(len(feedback_tokens) - ngram + 1):
        window = tuple(feedback_tokens[i:i + ngram])
        if window in protected:
            return LeakReport(False, span=" ".join(window))
    return LeakReport(True)


def unmatched_elements(hypothesis: str, entry: GroundTruthEntry) -> list[str]:
    return [element for element in entry.elements
            if not match_element(hypothesis, element)]


def _redact(feedback: str, entry: GroundTruthEntry, ngram: int) -> str | None:
    """Drop every token inside a shared n-gram; None when nothing survives."""
    tokens = normalize_tokens(feedback)
    protected: set[tuple[str, ...]] = set()
    for text in (entry.fine_grained_hypothesis, *entry.elements):
        protected |= _ngrams(normalize_tokens(text), ngram)
    to_drop = [False] * len(tokens)
    for i in range(len(tokens) - ngram + 1):
        if tuple(tokens[i:i + ngram]) in protected:
            for j in range(i, i + ngram):
                to_drop[j] = True
    pieces: list[str] = []
    for token, drop in zip(tokens, to_drop):
        if drop:
            if not pieces or pieces[-1] != "[redacted]":
                pieces.append("[redacted]")
        else:
            pieces.append(token)
    kept = [p for p in pieces if p != "[redacted]"]
    if not kept:
        return None
    return " ".join(pieces)


def oracle_feedback(hypothesis: str, entry: GroundTruthEntry,
                    strength: FeedbackStrength, gateway: Gateway) -> str:
    """Directional critique from the oracle, guaranteed leak-free.

    A response sharing an 8-token span with the target is regenerated at
    most twice, then redacted; if redaction leaves no substance the call
    fails with LeakUnfixable rather than disclosing the answer.
    """
    missing = unmatched_elements(hypothesis, entry)
    if not missing:
        return NO_GAPS_TEXT
    request = GenerationRequest(
        template_id="oracle_feedback",
        variables={
            "hypothesis": hypothesis,
            "ground_truth": entry.fine_grained_hypothesis,
            "missing": "\n".join(f"- {element}" for element in missing),
            "instructions": STRENGTH_INSTRUCTIONS[strength.value],
        },
    )
    last_text = ""
    for _ in range(3):
        fields = gateway.complete_structured(request, schema=["feedback"])
        last_text = fields["feedback"]
        if leak_check(last_text, entry):
            return last_text
    redacted = _redact(last_text, entry, LEAK_NGRAM)
    if redacted is not None and leak_check(redacted, entry):
        return redacted
    raise LeakUnfixable("oracle feedback still discloses the target after retries")


def _longer_element_subset(entry: GroundTruthEntry) -> list[str]:
    ordered = sorted(entry.elements, key=lambda e: (-len(content_tokens(e)), e))
    half = (len(ordered) + 1) // 2
    return ordered[:half]


def oracle_rank(candidates: list[tuple[str, str]], entry: GroundTruthEntry, *,
                mode: str = "deterministic",
                gateway: Gateway | None = None) -> list[str]:
    """Order candidate (id, text) pairs by closeness to the ground truth.

    Deterministic mode sorts by recall, breaking ties by match count over
    the longer half of the elements (the more specific ones), then by id.
    LLM mode defers to the judge template and falls back to the
    deterministic order if the judge's answer is unusable.
    """
    if not candidates:
        raise ValueError("oracle_rank requires at least one candidate")
    if mode == "llm":
        if gateway is None:
            raise ValueError("llm mode requires a gateway")
        rendered = "\n".join(f"[{cid}] {text}" for cid, text in candidates)
        result = gateway.complete(GenerationRequest(
            template_id="oracle_rank",
            variables={"candidates": rendered,
                       "ground_truth": entry.fine_grained_hypothesis},
        ))
        try:
            raw = parse_fields(result.text, ["ranking"])["ranking"]
        except ParseFailure:
            raw = ""
        known = {cid for cid, _ in candidates}
        ordered = []
        for token in raw.replace(",", " ").split():
            token = token.strip("[]")
            if token in known and token not in ordered:
                ordered.append(token)
        if len(ordered) == len(candidates):
            return ordered
        # fall through to the deterministic order for unusable answers
    longer = _longer_element_subset(entry)

    def key(pair: tuple[str, str]):
        cid, text = pair
        recall = compute_recall(text, entry)
        longer_matches = sum(1 for element in longer if match_element(text, element))
        return (-recall, -longer_matches, cid)

    return [cid for cid, _ in sorted(candidates, key=key)]
