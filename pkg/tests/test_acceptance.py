"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

from __future__ import annotations

import json
import random
import time

import pytest

from moose.core import Stage, path_to_root
from moose.errors import (
    CorruptSession,
    EmptyFeedback,
    LeakUnfixable,
    MooseError,
    SameStageRoute,
    StageMismatch,
    UnknownNode,
)
from moose.explore import ExploreConfig
from moose.gateway import Gateway, ScriptedBackend
from moose.harness.dataset import GroundTruthEntry
from moose.harness.matching import STOPWORDS, compute_recall, match_element
from moose.harness.oracle import leak_check, oracle_feedback, FeedbackStrength
from moose.harness.pipelines import TABLE_ROWS, parse_description, pipeline_by_name
from moose.harness.runner import RunConfigs, run_pipeline
from moose.harness.scripts import synthesize_script
from moose.protocol import (
    LogicalClock,
    apply_feedback,
    export_session,
    init_session,
    restore_session,
    route,
    run_explore,
    run_refine,
    self_rank,
    session_document,
    validate_trace,
)
from moose.refine import RefineConfig, refine_hierarchical, refine_level

from conftest import (
    feedback_text,
    hyp_text,
    make_corpus,
    score_text,
    scripted_gateway,
    selection_text,
)


def _pass(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


ENTRY = GroundTruthEntry(
    entry_id="a1",
    question="How can methane be oxidized selectively?",
    survey="Prior work studied zeolites. Copper sites were implicated.",
    fine_grained_hypothesis=(
        "Copper-exchanged zeolite catalysts enable selective methane oxidation "
        "at stepwise low temperature using in-situ water extraction of methanol "
        "over many cycles"
    ),
    elements=(
        "copper exchanged zeolite catalyst",
        "stepwise low temperature oxidation",
        "in-situ water extraction of methanol",
    ),
)

ENTRY_B = GroundTruthEntry(
    entry_id="a2",
    question="How to desalinate seawater cheaply?",
    survey="Membranes dominate. Energy cost is the obstacle.",
    fine_grained_hypothesis=(
        "Graphene oxide laminate membranes with tuned interlayer spacing reject "
        "salt ions at low pressure while sunlight-driven capillary flow removes "
        "the energy bottleneck"
    ),
    elements=(
        "graphene oxide laminate membrane",
        "tuned interlayer spacing for ion rejection",
        "sunlight driven capillary flow",
        "low pressure operation",
    ),
)


class TestProtocolGrammar:
    """1,000 random action sequences; accepted logs always validate."""

    UNIVERSAL = (selection_text("i1", "i2", "i3") + hyp_text("universal direction")
                 + score_text(5))

    def _random_session(self, rng: random.Random):
        corpus = make_corpus(4)
        explore_cfg = ExploreConfig(beam_width=2, shortlist_size=4, max_rounds=1)
        refine_cfg = RefineConfig(levels=("only",), proposals_per_step=1,
                                  patience=1, max_steps_per_level=2)
        session = init_session("Q?", None, None, corpus, clock=LogicalClock())
        gateway = scripted_gateway(*([self.UNIVERSAL] * 40))
        accepted = 0
        for _ in range(rng.randint(1, 8)):
            nodes = sorted(session.tree.nodes)
            node = rng.choice(nodes + ["ghost"])
            op = rng.choice(("explore", "refine", "feedback", "route", "rank"))
            try:
                if op == "explore":
                    session, _ = run_explore(session, corpus, explore_cfg,
                                             gateway, node=node)
                elif op == "refine":
                    session, _ = run_refine(session, refine_cfg, gateway,
                                            node=node, corpus=corpus)
                elif op == "feedback":
                    text = rng.choice(("push further", "  "))
                    session = apply_feedback(session, node, text)
                elif op == "route":
                    target = rng.choice((Stage.EXPLORATORY, Stage.FINE_GRAINED))
                    session = route(session, node, target)
                else:
                    k = rng.randint(1, min(3, len(nodes)))
                    session, _ = self_rank(session, rng.sample(nodes, k), gateway)
                accepted += 1
            except MooseError:
                continue
        return session, accepted

    def test_random_sequences_validate(self):
        started = time.monotonic()
        rng = random.Random(20240811)
        total_accepted = 0
        for _ in range(1000):
            session, accepted = self._random_session(rng)
            report = validate_trace(session.events)
            assert report.ok, f"invalid log emitted: {report}"
            total_accepted += accepted
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"grammar sweep took {elapsed:.1f}s"
        assert total_accepted > 1000  # the sweep exercised real transitions

    def test_hand_crafted_invalid_sequences_rejected(self):
        corpus = make_corpus(4)
        refine_cfg = RefineConfig(levels=("only",), proposals_per_step=1,
                                  patience=1, max_steps_per_level=2)
        session = init_session("Q?", None, None, corpus, clock=LogicalClock())
        with pytest.raises(StageMismatch):   # refine before any route
            run_refine(session, refine_cfg, scripted_gateway(self.UNIVERSAL))
        with pytest.raises(SameStageRoute):  # same-stage route
            route(session, session.tree.root, Stage.EXPLORATORY)
        with pytest.raises(UnknownNode):     # feedback on unknown node
            apply_feedback(session, "ghost", "text")
        with pytest.raises(EmptyFeedback):
            apply_feedback(session, session.tree.root, "   ")
        _pass("protocol grammar (1,000 random sequences + invalid rejections)")


class TestChainProperty:
    """Beam-1 exploration for 5 rounds is exactly the inspiration-labeled chain."""

    def test_linear_chain(self):
        corpus = make_corpus(5)
        cfg = ExploreConfig(beam_width=1, shortlist_size=5, max_rounds=1)
        session = init_session("Q?", None, None, corpus, clock=LogicalClock())
        script = []
        for k in range(1, 6):
            script += [selection_text(f"i{k}"), hyp_text(f"h{k}")]
        gateway = scripted_gateway(*script)
        tip = session.tree.root
        for _ in range(5):
            session, new_ids = run_explore(session, corpus, cfg, gateway, node=tip)
            assert len(new_ids) == 1
            tip = new_ids[0]
        assert len(session.tree.nodes) == 6
        chain = path_to_root(session.tree, tip)
        assert [n.inspiration_used for n in chain] == [None, "i1", "i2", "i3",
                                                       "i4", "i5"]
        assert [n.step_index for n in chain] == [0, 1, 2, 3, 4, 5]
        assert [n.text for n in chain][1:] == ["h1", "h2", "h3", "h4", "h5"]
        for parent, child in zip(chain, chain[1:]):
            assert child.parent == parent.id
        leaves = session.tree.leaves()
        assert [n.id for n in leaves] == [tip]
        _pass("exploration chain property (beam 1 × 5 rounds, exact)")


class TestHierarchicalContract:
    def _climb(self, *averages):
        script = []
        for avg in averages:
            script += [hyp_text(f"cand-{avg}-{len(script)}"), score_text(avg)]
        return script

    def test_scripted_sequence_5_7_7_7(self, context):
        from moose.core import EvaluationScore, IdAllocator, new_tree, ResearchContext
        cfg = RefineConfig(proposals_per_step=1, patience=2, max_steps_per_level=20)
        tree = new_tree(ResearchContext(question="Q"), root_id="n000000")
        seeded = tree.node("n000000").with_scores(
            EvaluationScore.from_criteria({c: 5.0 for c in cfg.criteria}))
        tree = type(tree)(root="n000000", nodes={"n000000": seeded},
                          active="n000000")
        gateway = scripted_gateway(*self._climb(5, 7, 7, 7))
        tree, best, steps, best_avg = refine_level(
            tree, context, "n000000", 0, cfg, gateway, IdAllocator("n", 1))
        assert steps == 4
        assert best_avg == pytest.approx(7.0, abs=1e-9)
        assert tree.node(best).scores.average == pytest.approx(7.0, abs=1e-9)

    def test_level_two_waits_for_level_one_in_200_random_runs(self, context):
        from moose.core import IdAllocator, new_tree, ResearchContext
        rng = random.Random(7)
        cfg = RefineConfig(levels=("a", "b"), proposals_per_step=1, patience=1,
                           max_steps_per_level=3)
        for _ in range(200):
            # every entry answers any call: hypothesis and score fields together
            script = [hyp_text(f"c{k}") + score_text(rng.randint(0, 10))
                      for k in range(40)]
            gateway = scripted_gateway(*script)
            tree = new_tree(ResearchContext(question="Q"), root_id="n000000")
            log: list[dict] = []
            tree, outcome = refine_hierarchical(
                tree, context, "n000000", cfg, gateway, IdAllocator("n", 1),
                log=log)
            levels_in_log = [record["level"] for record in log]
            switch = levels_in_log.index(1) if 1 in levels_in_log else len(log)
            assert levels_in_log[:switch] == [0] * switch
            assert all(level == 1 for level in levels_in_log[switch:])
            # level-0 portion must have genuinely converged by the stated rule
            zero = [record for record in log if record["level"] == 0]
            stale = 0
            steps_simulated = 0
            for record in zero:
                steps_simulated += 1
                stale = 0 if record["accepted"] else stale + 1
                if stale >= cfg.patience or steps_simulated >= cfg.max_steps_per_level:
                    break
            assert steps_simulated == len(zero)
            level_zero_ids = [n.id for n in tree.nodes.values()
                              if n.abstraction_level == 0]
            level_one_ids = [n.id for n in tree.nodes.values()
                             if n.abstraction_level == 1]
            if level_zero_ids and level_one_ids:
                assert max(level_zero_ids) < min(level_one_ids)
        _pass("hierarchical refinement contract ([5,7,7,7] + 200 random runs)")


def oracle_tokens(text):
    out, current = [], []
    for char in text.lower():
        if char.isascii() and char.isalnum():
            current.append(char)
        else:
            if current:
                out.append("".join(current))
                current = []
    if current:
        out.append("".join(current))
    return out


def oracle_match(hypothesis, element, threshold=0.70):
    needed = []
    for token in oracle_tokens(element):
        if token not in STOPWORDS and token not in needed:
            needed.append(token)
    if not needed:
        return False
    present = oracle_tokens(hypothesis)
    return sum(1 for token in needed if token in present) / len(needed) >= threshold


class TestRecallMetric:
    def test_twenty_fixtures_and_boundaries(self):
        from test_harness import MATCH_CASES
        assert len(MATCH_CASES) == 20
        for hypothesis, element, expected in MATCH_CASES:
            assert oracle_match(hypothesis, element) is expected
            assert match_element(hypothesis, element) is expected
        hypothesis = ("a copper exchanged zeolite catalyst with stepwise low "
                      "temperature oxidation")
        oracle_recall = sum(oracle_match(hypothesis, e) for e in ENTRY.elements) / 3
        assert abs(compute_recall(hypothesis, ENTRY) - oracle_recall) <= 1e-9
        assert compute_recall("", ENTRY) == 0.0
        assert compute_recall(" ".join(ENTRY.elements), ENTRY) == 1.0
        _pass("recall metric (20 derived fixtures + boundaries, 1e-9)")


class TestNonDisclosure:
    def test_all_scripted_feedback_is_leak_free(self):
        configs = RunConfigs()
        corpus = make_corpus(4)
        checked = 0
        for spec in TABLE_ROWS:
            if spec.feedback_rounds == 0:
                continue
            for entry in (ENTRY, ENTRY_B):
                script = synthesize_script(spec, entry, corpus, configs)
                gateway = Gateway(ScriptedBackend(script), retry_base_delay=0)
                sessions = []
                run_pipeline(spec, entry, corpus, configs, gateway,
                             clock=LogicalClock(), session_sink=sessions.append)
                document = session_document(sessions[0])
                for event in document["events"]:
                    if event["kind"] == "feedback_applied":
                        assert leak_check(event["payload"]["text"], entry).ok
                        checked += 1
        assert checked >= 20

    def test_deliberate_leak_fixture_rejected(self):
        leak = feedback_text(ENTRY.fine_grained_hypothesis)
        gateway = scripted_gateway(leak, leak, leak)
        with pytest.raises(LeakUnfixable):
            oracle_feedback("hypothesis", ENTRY, FeedbackStrength.STANDARD, gateway)
        _pass("non-disclosure (all scripted feedback leak-free; leak fixture rejected)")


class TestCompositionFidelity:
    def test_all_fifteen_rows_match_reference_interpreter(self):
        started = time.monotonic()
        configs = RunConfigs()
        corpus = make_corpus(4)
        assert len(TABLE_ROWS) == 15
        for spec in TABLE_ROWS:
            script = synthesize_script(spec, ENTRY, corpus, configs)
            gateway = Gateway(ScriptedBackend(script), retry_base_delay=0)
            report = run_pipeline(spec, ENTRY, corpus, configs, gateway,
                                  clock=LogicalClock())
            assert not report.incomplete, spec.name
            expected = parse_description(spec.description,
                                         configs.explore.max_rounds)
            assert list(report.stage_sequence) == expected, spec.name
        elapsed = time.monotonic() - started
        assert elapsed < 60.0
        _pass("composition fidelity (15 rows vs reference interpreter, "
              f"{elapsed:.1f}s)")


class TestStepAccounting:
    def test_steps_equal_gateway_count_for_every_row(self):
        configs = RunConfigs()
        corpus = make_corpus(4)
        for spec in TABLE_ROWS:
            script = synthesize_script(spec, ENTRY_B, corpus, configs)
            gateway = Gateway(ScriptedBackend(script), retry_base_delay=0)
            report = run_pipeline(spec, ENTRY_B, corpus, configs, gateway,
                                  clock=LogicalClock())
            assert report.search_steps == gateway.calls_for("propose_refinement")

    def _explore_prefix(self):
        return [selection_text("i1", "i2"), hyp_text("dir one"),
                hyp_text("dir two")]

    def test_feedback_reduces_remaining_steps_on_script(self):
        configs = RunConfigs(
            explore=ExploreConfig(beam_width=2, shortlist_size=4, max_rounds=1),
            refine=RefineConfig(levels=("coarse",), proposals_per_step=1,
                                patience=1, max_steps_per_level=8),
        )
        corpus = make_corpus(4)
        rich = " ".join(ENTRY.elements)
        partial = " ".join(ENTRY.elements[:2])  # leaves one gap for the critique

        # no feedback: a slow climb burns the whole step budget
        script_a = self._explore_prefix() + [score_text(5)]
        for k in range(8):
            script_a += [hyp_text(f"slow {k} {rich}"), score_text(5.5 + 0.5 * k)]
        spec_a = pipeline_by_name("MC2_with_MC_input_oracle_rank")
        gateway_a = Gateway(ScriptedBackend.from_texts(script_a), retry_base_delay=0)
        report_a = run_pipeline(spec_a, ENTRY, corpus, configs, gateway_a,
                                clock=LogicalClock())
        assert report_a.search_steps == 8

        # one feedback round: the critique is scripted to lift the reward
        # baseline, so both refinements plateau quickly
        script_b = self._explore_prefix()
        script_b += [score_text(5), hyp_text(f"quick {partial}"), score_text(6),
                     hyp_text("quick flat"), score_text(6)]          # refine 1: 2 steps
        script_b += [feedback_text("Quantify the extraction budget explicitly.")]
        script_b += [score_text(9), hyp_text(f"post feedback {rich}"),
                     score_text(9.5), hyp_text("post flat"), score_text(9.5)]
        spec_b = pipeline_by_name("MC2_with_feedback_oracle_rank")
        gateway_b = Gateway(ScriptedBackend.from_texts(script_b), retry_base_delay=0)
        report_b = run_pipeline(spec_b, ENTRY, corpus, configs, gateway_b,
                                clock=LogicalClock())
        assert report_b.search_steps == 4
        assert report_b.search_steps < report_a.search_steps
        _pass("step accounting (gateway identity + feedback reduces steps)")


class TestDeterminismPersistence:
    def test_double_run_and_restore_byte_identical(self, tmp_path):
        configs = RunConfigs()
        corpus = make_corpus(4)
        spec = pipeline_by_name("MC2_with_strong_feedback_x2_oracle_rank")
        exports = []
        for _ in range(2):
            script = synthesize_script(spec, ENTRY, corpus, configs)
            gateway = Gateway(ScriptedBackend(script), retry_base_delay=0)
            sessions = []
            run_pipeline(spec, ENTRY, corpus, configs, gateway,
                         clock=LogicalClock(), session_sink=sessions.append)
            exports.append(export_session(sessions[0]))
        assert exports[0] == exports[1]

        stored = tmp_path / "session.json"
        stored.write_text(exports[0], encoding="utf-8")
        document = json.loads(stored.read_text(encoding="utf-8"))
        restored = restore_session(document)
        assert export_session(restored) == exports[0]

        tampered = json.loads(exports[0])
        tampered["tree"]["nodes"][1]["text"] = "forged"
        with pytest.raises(CorruptSession):
            restore_session(tampered)
        _pass("determinism & persistence (byte-identical runs, verified restore)")


class TestServiceContract:
    def test_contract_and_hammer(self, tmp_path):
        import threading
        from fastapi.testclient import TestClient
        from moose.service.app import create_app
        from test_service import (
            CORPUS_TEXT,
            EXPLORE_CFG,
            REFINE_CFG,
            GateBackend,
            explore_script,
            wait_for_job,
        )

        started = time.monotonic()
        app = create_app(tmp_path / "data", explore_cfg=EXPLORE_CFG,
                         refine_cfg=REFINE_CFG)
        with TestClient(app) as client:
            corpus_id = client.post("/corpora",
                                    content=CORPUS_TEXT.encode()).json()["corpus_id"]
            # 404 / 400 paths
            assert client.post("/sessions", json={"question": "Q",
                                                  "corpus_id": "nope"}).status_code == 404
            assert client.post("/sessions", json={"question": " ",
                                                  "corpus_id": corpus_id}).status_code == 400
            assert client.get("/sessions/ghost/tree").status_code == 404
            # happy path: create → act → tree → ranking
            body = {"question": "Q?", "corpus_id": corpus_id,
                    "llm_config": {"mode": "scripted",
                                   "script": explore_script() + [
                                       {"match": "*", "text": score_text(6)},
                                       {"match": "*", "text": score_text(7)},
                                       {"match": "*", "text": score_text(5)}]}}
            summary = client.post("/sessions", json=body).json()
            session_id = summary["session_id"]
            accepted = client.post(f"/sessions/{session_id}/act",
                                   json={"node": summary["active"],
                                         "next": "explore"})
            assert accepted.status_code == 202
            assert wait_for_job(client, accepted.json()["job_id"])["status"] == "done"
            tree = client.get(f"/sessions/{session_id}/tree").json()
            assert len(tree["nodes"]) == 4
            ranking = client.get(f"/sessions/{session_id}/ranking")
            assert ranking.status_code == 200
            averages = [row["scores"]["average"] for row in ranking.json()["ranking"]]
            assert averages == sorted(averages, reverse=True)

        # concurrent-act hammer: exactly one in-flight job
        backend = GateBackend(explore_script())
        hammer_app = create_app(tmp_path / "hammer", explore_cfg=EXPLORE_CFG,
                                refine_cfg=REFINE_CFG,
                                backend_factory=lambda config: backend)
        with TestClient(hammer_app) as client:
            corpus_id = client.post("/corpora",
                                    content=CORPUS_TEXT.encode()).json()["corpus_id"]
            summary = client.post("/sessions", json={"question": "Q?",
                                                     "corpus_id": corpus_id}).json()
            session_id = summary["session_id"]
            statuses = []
            lock = threading.Lock()

            def fire():
                response = client.post(f"/sessions/{session_id}/act",
                                       json={"node": summary["active"],
                                             "next": "explore"})
                with lock:
                    statuses.append(response.status_code)

            threads = [threading.Thread(target=fire) for _ in range(10)]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()
            assert statuses.count(202) == 1
            assert statuses.count(409) == 9
            backend.gate.set()
            job_id = next(iter(hammer_app.state.runtime.jobs))
            assert wait_for_job(client, job_id)["status"] == "done"
        elapsed = time.monotonic() - started
        assert elapsed < 30.0
        _pass(f"service contract (happy paths, error codes, hammer, {elapsed:.1f}s)")
