"""In-memory progress event feed, one ordered buffer per session.

Every subscriber reads the same ordered list; a subscription carries its
own cursor, so late subscribers can replay from any point. Emission is
append-only under a condition variable that wakes blocked readers.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Iterator


@dataclass(frozen=True)
class ProgressEvent:
    session_id: str
    seq: int
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"session_id": self.session_id, "seq": self.seq,
                "kind": self.kind, "payload": self.payload}


@dataclass
class _Feed:
    events: list[ProgressEvent] = field(default_factory=list)
    condition: threading.Condition = field(default_factory=threading.Condition)


class EventBus:
    KINDS = ("GenerationStarted", "NodeAdded", "ScoreReady", "RunCompleted", "Error")

    def __init__(self):
        self._feeds: dict[str, _Feed] = {}
        self._lock = threading.Lock()

    def _feed(self, session_id: str) -> _Feed:
        with self._lock:
            if session_id not in self._feeds:
                self._feeds[session_id] = _Feed()
            return self._feeds[session_id]

    def emit(self, session_id: str, kind: str, payload: dict[str, Any]) -> ProgressEvent:
        if kind not in self.KINDS:
            raise ValueError(f"unknown progress event kind {kind!r}")
        feed = self._feed(session_id)
        with feed.condition:
            event = ProgressEvent(session_id=session_id, seq=len(feed.events),
                                  kind=kind, payload=payload)
            feed.events.append(event)
            feed.condition.notify_all()
        return event

    def snapshot(self, session_id: str, after: int = -1) -> list[ProgressEvent]:
        feed = self._feed(session_id)
        with feed.condition:
            return feed.events[after + 1:]

    def stream(self, session_id: str, after: int = -1, *, follow: bool = True,
               poll_seconds: float = 0.5,
               stop: threading.Event | None = None) -> Iterator[ProgressEvent]:
        """Yield events in order from a cursor; block for more when following."""
        cursor = after
        feed = self._feed(session_id)
        while True:
            with feed.condition:
                while len(feed.events) <= cursor + 1:
                    if not follow or (stop is not None and stop.is_set()):
                        return
                    feed.condition.wait(timeout=poll_seconds)
                    if stop is not None and stop.is_set():
                        return
                batch = feed.events[cursor + 1:]
            for event in batch:
                yield event
                cursor = event.seq
