from __future__ import annotations

import pytest

from moose.core import Inspiration, InspirationCorpus, ResearchContext
from moose.gateway import Gateway, ScriptedBackend
from moose.harness.dataset import GroundTruthEntry


def make_corpus(n: int = 4, name: str = "corpus") -> InspirationCorpus:
    return InspirationCorpus(
        entries=tuple(
            Inspiration(id=f"i{k}", title=f"Paper {k} on mechanism {k}",
                        abstract=f"Abstract {k} describing technique {k}.")
            for k in range(1, n + 1)
        ),
        name=name,
    )


def scripted_gateway(*texts: str, entries=None, **kwargs) -> Gateway:
    """Gateway over a wildcard script (or explicit (matcher, text) entries)."""
    backend = ScriptedBackend(entries) if entries is not None \
        else ScriptedBackend.from_texts(list(texts))
    kwargs.setdefault("retry_base_delay", 0.0)
    return Gateway(backend, **kwargs)


def score_text(value: float | str, criteria=("plausibility", "novelty",
                                             "specificity", "feasibility")) -> str:
    return "".join(f"«{name}»{value}«/{name}»" for name in criteria)


def hyp_text(body: str) -> str:
    return f"«hypothesis»{body}«/hypothesis»"


def selection_text(*ids: str) -> str:
    return f"«selection»{', '.join(ids)}«/selection»"


def feedback_text(body: str) -> str:
    return f"«feedback»{body}«/feedback»"


@pytest.fixture
def corpus() -> InspirationCorpus:
    return make_corpus()


@pytest.fixture
def context() -> ResearchContext:
    return ResearchContext(question="How can methane be oxidized selectively?")


@pytest.fixture
def entry() -> GroundTruthEntry:
    return GroundTruthEntry(
        entry_id="t1",
        question="How can methane be oxidized selectively?",
        survey="Prior work studied zeolites. Copper sites were implicated.",
        fine_grained_hypothesis=(
            "Copper-exchanged zeolite catalysts enable selective methane "
            "oxidation at stepwise low temperature using in-situ water "
            "extraction of methanol over many cycles"
        ),
        elements=(
            "copper exchanged zeolite catalyst",
            "stepwise low temperature oxidation",
            "in-situ water extraction of methanol",
        ),
    )
