"""Deterministic recall metric: token-overlap element matching.

An element counts as recovered when at least 70% of its distinct content
tokens (stopwords removed) appear anywhere in the normalized hypothesis.
An LLM-judge alternative exists for ranking but this matcher is the
default everywhere a number must be reproducible.
"""

from __future__ import annotations

import re

from moose.harness.dataset import GroundTruthEntry

MATCH_THRESHOLD = 0.70

STOPWORDS = frozenset("""
a about above after against all an and any are as at be been before being
below between both but by can could did do does during each few for from
had has have he her his how i if in into is it its may might more most no
nor not of off on once only or other our out over own
same she should so some such than that the their them then there these
they this those through to too under until up very was we were what when
where which while who whom why will with within without would you your
""".split())

_TOKEN_PATTERN = re.compile(r"[a-z0-9]+")


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, collapse whitespace; return token list."""
    return _TOKEN_PATTERN.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    return {token for token in normalize_tokens(text) if token not in STOPWORDS}


def match_element(hypothesis: str, element: str,
                  threshold: float = MATCH_THRESHOLD) -> bool:
    """Whether the hypothesis recovers one ground-truth element."""
    needed = content_tokens(element)
    if not needed:
        return False
    present = set(normalize_tokens(hypothesis))
    return len(needed & present) / len(needed) >= threshold


def compute_recall(hypothesis: str, entry: GroundTruthEntry) -> float:
    """Fraction of the entry's elements recovered by the hypothesis."""
    if not hypothesis.strip():
        return 0.0
    matched = sum(1 for element in entry.elements if match_element(hypothesis, element))
    return matched / len(entry.elements)
