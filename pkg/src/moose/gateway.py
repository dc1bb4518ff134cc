"""Uniform interface to text-generation backends.

A :class:`Gateway` renders a prompt template, drives one backend with
bounded retries, and keeps the call accounting the engines and the
evaluation harness rely on. The :class:`ScriptedBackend` makes every
pipeline in this repository runnable without network access and
byte-deterministic.
"""

from __future__ import annotations

import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Mapping, Protocol, Sequence

from moose.errors import (
    BackendUnavailable,
    ParseFailure,
    ScriptExhausted,
    ScriptMismatch,
    TemplateVariableMissing,
)

TEMPLATE_IDS = (
    "select_inspiration",
    "generate_hypothesis",
    "propose_refinement",
    "score_hypothesis",
    "oracle_feedback",
    "oracle_rank",
)

#: Divergent templates sample hot, convergent/scoring templates sample cool.
DEFAULT_TEMPERATURES = {
    "select_inspiration": 1.0,
    "generate_hypothesis": 1.0,
    "propose_refinement": 0.3,
    "score_hypothesis": 0.3,
    "oracle_feedback": 0.3,
    "oracle_rank": 0.3,
}

ENV_API_KEY = "MOOSE_API_KEY"
ENV_BASE_URL = "MOOSE_API_BASE_URL"
ENV_MODEL = "MOOSE_MODEL"

_FIELD_PATTERN = re.compile(r"«(\w+)»(.*?)«/\1»", re.DOTALL)

REPAIR_SUFFIX = (
    "\n\nYour previous answer could not be parsed. Answer again using exactly "
    "the wrapped «field»value«/field» format requested above."
)


def _load_template(template_id: str) -> str:
    path = resources.files("moose").joinpath("templates", f"{template_id}.txt")
    return path.read_text(encoding="utf-8")


_TEMPLATE_CACHE: dict[str, str] = {}


def template_text(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise TemplateVariableMissing(f"unknown template id {template_id!r}")
    if template_id not in _TEMPLATE_CACHE:
        _TEMPLATE_CACHE[template_id] = _load_template(template_id)
    return _TEMPLATE_CACHE[template_id]


def template_variables(template_id: str) -> set[str]:
    """Variable names referenced by a template's {placeholders}."""
    names = set()
    for _, name, _, _ in string.Formatter().parse(template_text(template_id)):
        if name:
            names.add(name)
    return names


@dataclass(frozen=True)
class GenerationRequest:
    template_id: str
    variables: Mapping[str, str]
    temperature: float | None = None
    max_tokens: int = 1024

    def __post_init__(self):
        if self.template_id not in TEMPLATE_IDS:
            raise TemplateVariableMissing(f"unknown template id {self.template_id!r}")
        if self.temperature is not None and not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature out of range: {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        missing = template_variables(self.template_id) - set(self.variables)
        if missing:
            raise TemplateVariableMissing(
                f"template {self.template_id!r} missing variables: {sorted(missing)}"
            )

    def render(self) -> str:
        return template_text(self.template_id).format(**self.variables)

    def effective_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return DEFAULT_TEMPERATURES[self.template_id]


@dataclass(frozen=True)
class GenerationResult:
    text: str
    backend: str
    tokens_used: int
    call_index: int


class Backend(Protocol):
    name: str

    def generate(self, template_id: str, prompt: str, temperature: float,
                 max_tokens: int) -> str: ...


WILDCARD = "*"


@dataclass
class ScriptEntry:
    matcher: str
    text: str

    def matches(self, template_id: str) -> bool:
        return self.matcher == WILDCARD or self.matcher == template_id


class ScriptedBackend:
    """Replays a fixed list of responses, strictly in order.

    Each entry is consumed exactly once; running past the end raises
    :class:`ScriptExhausted` rather than silently reusing responses, and a
    head entry whose matcher names a different template raises
    :class:`ScriptMismatch`.
    """

    name = "scripted"

    def __init__(self, responses: Sequence[ScriptEntry | tuple[str, str]]):
        self._responses = [
            entry if isinstance(entry, ScriptEntry) else ScriptEntry(*entry)
            for entry in responses
        ]
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> ScriptedBackend:
        return cls([ScriptEntry(WILDCARD, text) for text in texts])

    @property
    def remaining(self) -> int:
        return len(self._responses) - self._cursor

    def generate(self, template_id: str, prompt: str, temperature: float,
                 max_tokens: int) -> str:
        with self._lock:
            if self._cursor >= len(self._responses):
                raise ScriptExhausted(
                    f"script exhausted after {self._cursor} responses "
                    f"(next request: {template_id})"
                )
            entry = self._responses[self._cursor]
            if not entry.matches(template_id):
                raise ScriptMismatch(
                    f"script entry {self._cursor} expects {entry.matcher!r}, "
                    f"request is {template_id!r}"
                )
            self._cursor += 1
            return entry.text


class HttpBackend:
    """OpenAI-compatible chat-completions backend over HTTP."""

    name = "http"

    def __init__(self, api_key: str | None = None, base_url: str | None = None,
                 model: str | None = None, timeout: float = 120.0):
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL, "")).rstrip("/")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.timeout = timeout
        if not self.base_url:
            raise BackendUnavailable(f"no API base URL configured (set {ENV_BASE_URL})")
        if not self.model:
            raise BackendUnavailable(f"no model configured (set {ENV_MODEL})")

    def generate(self, template_id: str, prompt: str, temperature: float,
                 max_tokens: int) -> str:
        import httpx

        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": temperature,
                    "max_tokens": max_tokens,
                },
                timeout=self.timeout,
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        body = response.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion payload: {body!r}") from exc


def parse_fields(raw: str, schema: Sequence[str]) -> dict[str, str]:
    """Extract «name»value«/name» fields; order-insensitive, extras ignored."""
    found = {name: value.strip() for name, value in _FIELD_PATTERN.findall(raw)}
    missing = [name for name in schema if name not in found]
    if missing:
        raise ParseFailure(f"missing fields {missing} in model output", raw_text=raw)
    return {name: found[name] for name in schema}


@dataclass
class GatewayStats:
    total_calls: int = 0
    total_tokens: int = 0
    calls_by_template: dict[str, int] = field(default_factory=dict)

    def record(self, template_id: str, tokens: int) -> int:
        self.total_calls += 1
        self.total_tokens += tokens
        self.calls_by_template[template_id] = self.calls_by_template.get(template_id, 0) + 1
        return self.total_calls


class Gateway:
    """One backend plus retries, budget accounting, and structured parsing.

    ``call_index`` increases by exactly one per attempt that returns a
    result; transport retries that fail do not consume an index, and a
    scripted response is never replayed by the retry loop (scripted errors
    are not transport errors).
    """

    MAX_ATTEMPTS = 3
    MAX_REPAIRS = 2

    def __init__(self, backend: Backend, *, max_in_flight: int = 4,
                 retry_base_delay: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self._stats = GatewayStats()
        self._lock = threading.Lock()
        self._retry_base_delay = retry_base_delay
        self._sleep = sleep
        self._slots = threading.Semaphore(max_in_flight)

    @property
    def stats(self) -> GatewayStats:
        return self._stats

    def calls_for(self, template_id: str) -> int:
        with self._lock:
            return self._stats.calls_by_template.get(template_id, 0)

    def complete(self, request: GenerationRequest, *, _prompt_suffix: str = "") -> GenerationResult:
        prompt = request.render() + _prompt_suffix
        temperature = request.effective_temperature()
        last_error: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            try:
                with self._slots:
                    text = self.backend.generate(
                        request.template_id, prompt, temperature, request.max_tokens
                    )
            except BackendUnavailable as exc:
                last_error = exc
                if attempt + 1 < self.MAX_ATTEMPTS:
                    self._sleep(self._retry_base_delay * (2 ** attempt))
                continue
            tokens = len(prompt.split()) + len(text.split())
            with self._lock:
                call_index = self._stats.record(request.template_id, tokens)
            return GenerationResult(
                text=text,
                backend=self.backend.name,
                tokens_used=tokens,
                call_index=call_index,
            )
        raise BackendUnavailable(
            f"backend failed after {self.MAX_ATTEMPTS} attempts: {last_error}"
        )

    def complete_parsed(self, request: GenerationRequest,
                        schema: Sequence[str]) -> dict[str, str]:
        result = self.complete(request)
        return parse_fields(result.text, schema)

    def complete_structured(self, request: GenerationRequest,
                            schema: Sequence[str]) -> dict[str, str]:
        """complete_parsed plus up to MAX_REPAIRS re-asks on parse failure."""
        suffix = ""
        last: ParseFailure | None = None
        for _ in range(self.MAX_REPAIRS + 1):
            result = self.complete(request, _prompt_suffix=suffix)
            try:
                return parse_fields(result.text, schema)
            except ParseFailure as exc:
                last = exc
                suffix = REPAIR_SUFFIX
        assert last is not None
        raise last


def gateway_from_env(**kwargs: Any) -> Gateway:
    return Gateway(HttpBackend(), **kwargs)
