from __future__ import annotations

import pytest

from moose.errors import (
    BackendUnavailable,
    ParseFailure,
    ScriptExhausted,
    ScriptMismatch,
    TemplateVariableMissing,
)
from moose.gateway import (
    Gateway,
    GenerationRequest,
    parse_fields,
    template_variables,
)

from conftest import scripted_gateway

REFINE_VARS = {"background": "b", "hypothesis": "h", "level": "methodology"}


def refine_request(**overrides) -> GenerationRequest:
    return GenerationRequest(template_id="propose_refinement",
                             variables=REFINE_VARS, **overrides)


class TestScriptedContract:
    def test_single_response(self):
        gateway = scripted_gateway("A")
        result = gateway.complete(refine_request())
        assert result.text == "A"
        assert result.call_index == 1
        assert result.backend == "scripted"

    def test_exhaustion_is_an_error(self):
        gateway = scripted_gateway("A")
        gateway.complete(refine_request())
        with pytest.raises(ScriptExhausted):
            gateway.complete(refine_request())

    def test_matcher_mismatch(self):
        gateway = scripted_gateway(entries=[("select_inspiration", "X")])
        with pytest.raises(ScriptMismatch):
            gateway.complete(refine_request())

    def test_call_index_strictly_increases(self):
        gateway = scripted_gateway("A", "B", "C")
        indexes = [gateway.complete(refine_request()).call_index for _ in range(3)]
        assert indexes == [1, 2, 3]


class TestTemplates:
    def test_missing_variable_rejected(self):
        with pytest.raises(TemplateVariableMissing):
            GenerationRequest(template_id="propose_refinement",
                              variables={"background": "b", "level": "x"})

    def test_unknown_template_rejected(self):
        with pytest.raises(TemplateVariableMissing):
            GenerationRequest(template_id="nope", variables={})

    def test_every_template_declares_variables(self):
        for template_id in ("select_inspiration", "generate_hypothesis",
                            "propose_refinement", "score_hypothesis",
                            "oracle_feedback", "oracle_rank"):
            assert template_variables(template_id)

    def test_temperature_bounds(self):
        with pytest.raises(ValueError):
            refine_request(temperature=2.5)
        assert refine_request(temperature=None).effective_temperature() == 0.3
        assert GenerationRequest(
            template_id="generate_hypothesis",
            variables={"background": "b", "hypothesis": "h",
                       "inspiration_title": "t", "inspiration_abstract": "a"},
        ).effective_temperature() == 1.0


class TestParseFields:
    def test_extracts_fields(self):
        raw = "«hypothesis»H«/hypothesis»«score»7«/score»"
        assert parse_fields(raw, ["hypothesis", "score"]) == {"hypothesis": "H",
                                                              "score": "7"}

    def test_missing_field(self):
        with pytest.raises(ParseFailure) as err:
            parse_fields("«hypothesis»H«/hypothesis»", ["hypothesis", "score"])
        assert "H" in err.value.raw_text

    def test_order_insensitive(self):
        raw = "«score»7«/score»noise«hypothesis»H«/hypothesis»"
        assert parse_fields(raw, ["hypothesis", "score"]) == {"hypothesis": "H",
                                                              "score": "7"}


class TestRetries:
    class FlakyBackend:
        name = "flaky"

        def __init__(self, failures: int, text: str = "ok"):
            self.failures = failures
            self.text = text
            self.calls = 0

        def generate(self, template_id, prompt, temperature, max_tokens):
            self.calls += 1
            if self.calls <= self.failures:
                raise BackendUnavailable("transport down")
            return self.text

    def test_recovers_within_budget(self):
        backend = self.FlakyBackend(failures=2)
        gateway = Gateway(backend, retry_base_delay=0.0)
        result = gateway.complete(refine_request())
        assert result.text == "ok"
        assert result.call_index == 1  # failed attempts consume no index
        assert backend.calls == 3

    def test_gives_up_after_three_attempts(self):
        backend = self.FlakyBackend(failures=5)
        gateway = Gateway(backend, retry_base_delay=0.0)
        with pytest.raises(BackendUnavailable):
            gateway.complete(refine_request())
        assert backend.calls == 3

    def test_scripted_errors_never_retried(self):
        gateway = scripted_gateway()
        with pytest.raises(ScriptExhausted):
            gateway.complete(refine_request())


class TestHttpBackend:
    def test_requires_configuration(self, monkeypatch):
        from moose.gateway import HttpBackend
        monkeypatch.delenv("MOOSE_API_BASE_URL", raising=False)
        monkeypatch.delenv("MOOSE_MODEL", raising=False)
        with pytest.raises(BackendUnavailable):
            HttpBackend()

    def test_transport_error_maps_to_backend_unavailable(self, monkeypatch):
        import httpx

        from moose.gateway import HttpBackend

        def boom(*args, **kwargs):
            raise httpx.ConnectError("refused")

        monkeypatch.setattr(httpx, "post", boom)
        backend = HttpBackend(api_key="k", base_url="http://api", model="m")
        with pytest.raises(BackendUnavailable):
            backend.generate("propose_refinement", "p", 0.3, 64)

    def test_parses_completion_payload(self, monkeypatch):
        import httpx

        from moose.gateway import HttpBackend

        captured = {}

        def fake_post(url, headers=None, json=None, timeout=None):
            captured["url"] = url
            captured["json"] = json
            return httpx.Response(
                200,
                json={"choices": [{"message": {"content": "generated"}}]},
                request=httpx.Request("POST", url),
            )

        monkeypatch.setattr(httpx, "post", fake_post)
        backend = HttpBackend(api_key="k", base_url="http://api/v1/", model="m")
        text = backend.generate("propose_refinement", "the prompt", 0.3, 64)
        assert text == "generated"
        assert captured["url"] == "http://api/v1/chat/completions"
        assert captured["json"]["model"] == "m"
        assert captured["json"]["messages"][0]["content"] == "the prompt"


class TestStructured:
    def test_repairs_then_succeeds(self):
        gateway = scripted_gateway("garbage", "still garbage",
                                   "«hypothesis»H«/hypothesis»")
        fields = gateway.complete_structured(refine_request(), ["hypothesis"])
        assert fields == {"hypothesis": "H"}
        assert gateway.stats.total_calls == 3

    def test_repairs_capped_at_two(self):
        gateway = scripted_gateway("bad", "bad", "bad", "never reached")
        with pytest.raises(ParseFailure):
            gateway.complete_structured(refine_request(), ["hypothesis"])
        assert gateway.stats.total_calls == 3

    def test_per_template_accounting(self):
        gateway = scripted_gateway("A", "B")
        gateway.complete(refine_request())
        gateway.complete(GenerationRequest(
            template_id="score_hypothesis",
            variables={"background": "b", "hypothesis": "h", "criteria": "c"},
        ))
        assert gateway.calls_for("propose_refinement") == 1
        assert gateway.calls_for("score_hypothesis") == 1
        assert gateway.stats.total_calls == 2
