"""Deterministic script synthesis for offline pipeline runs.

A procedural responder answers every template with well-formed text whose
scores reward hypotheses that cover more ground-truth elements, so refined
branches genuinely climb. Recording one run against it yields a script any
real run can replay through a ScriptedBackend, byte-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

from moose.core import InspirationCorpus
from moose.gateway import Gateway, ScriptEntry
from moose.harness.dataset import GroundTruthEntry
from moose.harness.matching import match_element
from moose.harness.pipelines import PipelineSpec
from moose.harness.runner import RunConfigs


class ProceduralResponder:
    """Deterministic answers for every prompt template.

    Scores derive from how many ground-truth elements the scored text
    already covers (5 + coverage, capped at 10), which makes the reward
    landscape consistent no matter how calls interleave. Each oracle
    critique unlocks one more element for subsequent generations, so
    recall climbs with feedback rounds instead of saturating at once.
    """

    def __init__(self, entry: GroundTruthEntry, corpus: InspirationCorpus,
                 configs: RunConfigs):
        self.entry = entry
        self.corpus_ids = corpus.ids()
        self.beam = min(configs.explore.beam_width, len(self.corpus_ids))
        self.criteria = configs.refine.criteria
        self._select_round = 0
        self._generated = 0
        self._proposed = 0
        self._feedback = 0

    def _coverage(self, text: str) -> int:
        return sum(1 for element in self.entry.elements
                   if match_element(text, element))

    def respond(self, template_id: str, prompt: str) -> str:
        if template_id == "select_inspiration":
            start = self._select_round * self.beam
            self._select_round += 1
            chosen = [self.corpus_ids[(start + j) % len(self.corpus_ids)]
                      for j in range(self.beam)]
            seen: list[str] = []
            for cid in chosen:
                if cid not in seen:
                    seen.append(cid)
            return f"«selection»{', '.join(seen)}«/selection»"
        if template_id == "generate_hypothesis":
            self._generated += 1
            count = min(self._feedback, len(self.entry.elements))
            hint = "; ".join(self.entry.elements[:count])
            tail = f" Incorporate: {hint}." if hint else ""
            return ("«hypothesis»Coarse direction "
                    f"{self._generated}: pair the question with a cross-domain "
                    f"mechanism borrowed from the inspiration.{tail}«/hypothesis»")
        if template_id == "propose_refinement":
            self._proposed += 1
            count = min(1 + self._feedback, len(self.entry.elements))
            body = "; ".join(self.entry.elements[:count])
            return (f"«hypothesis»Refined protocol v{self._proposed}: "
                    f"{body}«/hypothesis»")
        if template_id == "score_hypothesis":
            text = prompt
            marker = "Hypothesis under review:"
            if marker in prompt:
                text = prompt.split(marker, 1)[1]
            value = min(10, 5 + self._coverage(text))
            return "".join(f"«{name}»{value}«/{name}»" for name in self.criteria)
        if template_id == "oracle_feedback":
            self._feedback += 1
            return (f"«feedback»Round {self._feedback}: the overlooked aspects "
                    "deserve concrete treatment; spell out the mechanism and "
                    "justify the measurement choice.«/feedback»")
        if template_id == "oracle_rank":
            return "«ranking»«/ranking»"
        raise ValueError(f"unexpected template {template_id!r}")


class RecordingBackend:
    """Backend that answers via a responder while capturing a replay script."""

    name = "recording"

    def __init__(self, responder: ProceduralResponder):
        self._responder = responder
        self.captured: list[ScriptEntry] = []

    def generate(self, template_id: str, prompt: str, temperature: float,
                 max_tokens: int) -> str:
        text = self._responder.respond(template_id, prompt)
        self.captured.append(ScriptEntry(template_id, text))
        return text


def synthesize_script(spec: PipelineSpec, entry: GroundTruthEntry,
                      corpus: InspirationCorpus,
                      configs: RunConfigs) -> list[ScriptEntry]:
    """Record one procedural run of the pipeline and return its script."""
    from moose.harness.runner import run_pipeline
    from moose.protocol import LogicalClock

    backend = RecordingBackend(ProceduralResponder(entry, corpus, configs))
    run_pipeline(spec, entry, corpus, configs, Gateway(backend),
                 clock=LogicalClock())
    return backend.captured


def save_script(entries: list[ScriptEntry], path: str | Path) -> None:
    lines = [json.dumps({"match": e.matcher, "text": e.text}, ensure_ascii=False)
             for e in entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_script(path: str | Path) -> list[ScriptEntry]:
    entries: list[ScriptEntry] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        entries.append(ScriptEntry(record.get("match", "*"), record["text"]))
    return entries
