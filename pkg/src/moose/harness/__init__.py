"""Oracle-simulated evaluation: datasets, recall, oracle signals, pipelines."""

from moose.harness.dataset import GroundTruthEntry, load_dataset
from moose.harness.matching import compute_recall, match_element
from moose.harness.oracle import (
    FeedbackStrength,
    LeakReport,
    leak_check,
    oracle_feedback,
    oracle_rank,
)
from moose.harness.pipelines import PipelineSpec, Ranking, TABLE_ROWS, parse_description
from moose.harness.runner import RunConfigs, RunReport, aggregate, run_pipeline

__all__ = [
    "GroundTruthEntry",
    "load_dataset",
    "compute_recall",
    "match_element",
    "FeedbackStrength",
    "LeakReport",
    "leak_check",
    "oracle_feedback",
    "oracle_rank",
    "PipelineSpec",
    "Ranking",
    "TABLE_ROWS",
    "parse_description",
    "RunConfigs",
    "RunReport",
    "aggregate",
    "run_pipeline",
]
