from __future__ import annotations

import json

import pytest

from moose.cli import build_parser, main

DATASET_LINE = {
    "id": "d1",
    "question": "How can methane be oxidized selectively?",
    "survey": "Prior work studied zeolites. Copper sites were implicated.",
    "fine_grained_hypothesis": "Copper-exchanged zeolite catalysts enable "
                               "selective methane oxidation",
    "elements": ["copper exchanged zeolite catalyst",
                 "stepwise low temperature oxidation",
                 "in-situ water extraction of methanol"],
}


@pytest.fixture
def fixtures(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    dataset.write_text(json.dumps(DATASET_LINE) + "\n")
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("".join(
        json.dumps({"id": f"i{k}", "title": f"Paper {k}",
                    "abstract": f"About {k}."}) + "\n"
        for k in range(1, 5)))
    return dataset, corpus


def test_parser_covers_documented_flags():
    parser = build_parser()
    args = parser.parse_args([
        "eval", "--dataset", "d", "--corpus", "c", "--pipeline", "all",
        "--backend", "scripted:auto", "--out", "o", "--workers", "3",
        "--seed", "9",
    ])
    assert args.workers == 3
    assert args.seed == 9


def test_eval_all_pipelines_writes_outputs(tmp_path, fixtures):
    dataset, corpus = fixtures
    out = tmp_path / "out"
    code = main(["eval", "--dataset", str(dataset), "--corpus", str(corpus),
                 "--pipeline", "all", "--backend", "scripted:auto",
                 "--out", str(out), "--workers", "2", "--seed", "1"])
    assert code == 0
    reports = [json.loads(line)
               for line in (out / "reports.jsonl").read_text().splitlines()]
    assert len(reports) == 15
    assert all(not r["incomplete"] for r in reports)
    table = json.loads((out / "aggregate.json").read_text())
    assert len(table["rows"]) == 15
    assert (out / "aggregate.txt").read_text().startswith("Method Name")
    assert len(list((out / "sessions").glob("*.json"))) == 15
    assert len(list((out / "scripts").glob("*.jsonl"))) == 15


def test_eval_single_pipeline_deterministic(tmp_path, fixtures):
    dataset, corpus = fixtures
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["eval", "--dataset", str(dataset), "--corpus", str(corpus),
                     "--pipeline", "MC2_with_feedback_oracle_rank",
                     "--backend", "scripted:auto", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "reports.jsonl").read_text().splitlines()[0])
        digests.append(report["export_digest"])
    assert digests[0] == digests[1]


def test_eval_incomplete_run_exits_nonzero(tmp_path, fixtures, capsys):
    dataset, corpus = fixtures
    script = tmp_path / "short.jsonl"
    script.write_text(json.dumps({"match": "*", "text": "«selection»i1«/selection»"})
                      + "\n")
    out = tmp_path / "out"
    code = main(["eval", "--dataset", str(dataset), "--corpus", str(corpus),
                 "--pipeline", "baseline_MC", "--backend", f"scripted:{script}",
                 "--out", str(out)])
    assert code == 1
    report = json.loads((out / "reports.jsonl").read_text().splitlines()[0])
    assert report["incomplete"]
    assert "incomplete" in capsys.readouterr().err


def test_unknown_backend_rejected(tmp_path, fixtures):
    dataset, corpus = fixtures
    with pytest.raises(SystemExit):
        main(["eval", "--dataset", str(dataset), "--corpus", str(corpus),
              "--pipeline", "all", "--backend", "telepathy",
              "--out", str(tmp_path / "out")])
