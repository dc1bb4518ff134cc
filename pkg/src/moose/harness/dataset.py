"""Ground-truth dataset loading for the oracle-simulated evaluation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from moose.errors import EmptyDataset, MalformedEntry

_WORD = re.compile(r"[a-z0-9]+")


def _normalized(text: str) -> tuple[str, ...]:
    return tuple(_WORD.findall(text.lower()))


@dataclass(frozen=True)
class GroundTruthEntry:
    """One dataset item: question, survey, target hypothesis, element list."""

    entry_id: str
    question: str
    survey: str
    fine_grained_hypothesis: str
    elements: tuple[str, ...]

    def __post_init__(self):
        if not self.entry_id:
            raise ValueError("entry id must be non-empty")
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if not self.elements:
            raise ValueError("elements must be non-empty")
        seen: set[tuple[str, ...]] = set()
        for element in self.elements:
            key = _normalized(element)
            if not key:
                raise ValueError(f"element normalizes to nothing: {element!r}")
            if key in seen:
                raise ValueError(f"duplicate element after normalization: {element!r}")
            seen.add(key)


def load_dataset(path: str | Path) -> list[GroundTruthEntry]:
    """Parse the line-delimited dataset: one JSON entry per line, stable order."""
    path = Path(path)
    entries: list[GroundTruthEntry] = []
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(),
                                       start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedEntry(f"line {line_number}: invalid JSON ({exc.msg})",
                                 line_number) from exc
        if not isinstance(record, dict):
            raise MalformedEntry(f"line {line_number}: expected an object", line_number)
        missing = {"id", "question", "survey", "fine_grained_hypothesis",
                   "elements"} - set(record)
        if missing:
            raise MalformedEntry(
                f"line {line_number}: missing fields {sorted(missing)}", line_number
            )
        try:
            entries.append(GroundTruthEntry(
                entry_id=str(record["id"]),
                question=str(record["question"]),
                survey=str(record["survey"]),
                fine_grained_hypothesis=str(record["fine_grained_hypothesis"]),
                elements=tuple(str(e) for e in record["elements"]),
            ))
        except ValueError as exc:
            raise MalformedEntry(f"line {line_number}: {exc}", line_number) from exc
    if not entries:
        raise EmptyDataset(f"no entries in {path}")
    return entries
