"""Durable session and corpus storage under one data directory.

One canonical export file per session plus one file per corpus, written by
atomic rename. Loading a session replays its event log and refuses
anything that fails verification.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from moose.core import InspirationCorpus
from moose.errors import UnknownCorpus, UnknownSession
from moose.explore import parse_corpus
from moose.protocol import SessionState, export_session, restore_session


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


class Store:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.sessions_dir = self.root / "sessions"
        self.corpora_dir = self.root / "corpora"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.corpora_dir.mkdir(parents=True, exist_ok=True)

    # --- corpora -----------------------------------------------------------

    def save_corpus(self, text: str) -> tuple[str, InspirationCorpus]:
        """Persist under a content-digest id; re-uploading is idempotent."""
        corpus_id = "c" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
        corpus = parse_corpus(text, name=corpus_id)
        path = self.corpora_dir / f"{corpus_id}.jsonl"
        if not path.exists():
            _atomic_write(path, text)
        return corpus_id, corpus

    def load_corpus(self, corpus_id: str) -> InspirationCorpus:
        path = self.corpora_dir / f"{corpus_id}.jsonl"
        if not path.exists():
            raise UnknownCorpus(f"no corpus {corpus_id!r}")
        return parse_corpus(path.read_text(encoding="utf-8"), name=corpus_id)

    def has_corpus(self, corpus_id: str) -> bool:
        return (self.corpora_dir / f"{corpus_id}.jsonl").exists()

    # --- sessions ----------------------------------------------------------

    def save_session(self, session: SessionState) -> None:
        path = self.sessions_dir / f"{session.session_id}.json"
        _atomic_write(path, export_session(session))

    def load_session(self, session_id: str) -> SessionState:
        """Replays the stored log; raises CorruptSession on any mismatch."""
        path = self.sessions_dir / f"{session_id}.json"
        if not path.exists():
            raise UnknownSession(f"no session {session_id!r}")
        document = json.loads(path.read_text(encoding="utf-8"))
        return restore_session(document)

    def list_session_ids(self) -> list[str]:
        return sorted(path.stem for path in self.sessions_dir.glob("*.json"))
