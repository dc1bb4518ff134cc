"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel


class ScriptEntryBody(BaseModel):
    match: str = "*"
    text: str


class LlmConfigBody(BaseModel):
    """Per-session backend configuration; held in memory, never persisted."""

    mode: Literal["live", "scripted"] = "live"
    api_key: str | None = None
    base_url: str | None = None
    model: str | None = None
    script: list[ScriptEntryBody] | None = None


class CreateSessionRequest(BaseModel):
    question: str
    survey: str | None = None
    blueprint: str | None = None
    corpus_id: str
    llm_config: LlmConfigBody | None = None


class SessionSummary(BaseModel):
    session_id: str
    question: str
    node_count: int
    active: str
    stage_of_active: str
    created_at: float
    updated_at: float


class ActRequest(BaseModel):
    node: str
    feedback: str | None = None
    next: Literal["explore", "refine"]


class ActAccepted(BaseModel):
    job_id: str


class CorpusCreated(BaseModel):
    corpus_id: str
    entries: int


class RankingEntry(BaseModel):
    node: str
    scores: dict[str, Any] | None


class RankingResponse(BaseModel):
    scope: Literal["leaves", "all"]
    tree_revision: str
    ranking: list[RankingEntry]
