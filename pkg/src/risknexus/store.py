"""File-backed persistence for assessment records.

One JSON file per assessment; writes go to a temp file in the same
directory followed by an atomic rename, so the store never holds a
half-written record.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .assess import RiskProfile


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class AssessmentRecord:
    id: str
    created_at: str
    updated_at: str
    use_case_text: str
    attrs: dict
    questionnaire_id: str
    questionnaire_version: str
    answers: dict = field(default_factory=dict)
    profile: dict | None = None  # RiskProfile.to_dict() snapshot
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "use_case_text": self.use_case_text,
            "attrs": self.attrs,
            "questionnaire_id": self.questionnaire_id,
            "questionnaire_version": self.questionnaire_version,
            "answers": self.answers,
            "profile": self.profile,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AssessmentRecord":
        return cls(**doc)


class RevisionConflict(Exception):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"revision mismatch: expected {actual}, got {expected}")
        self.expected = expected
        self.actual = actual


class AssessmentNotFound(Exception):
    pass


class AssessmentStore:
    """Directory of `<id>.json` assessment records with per-id write locks."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, assessment_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(assessment_id, threading.Lock())

    def _path(self, assessment_id: str) -> Path:
        return self.directory / f"{assessment_id}.json"

    def create(self, use_case_text: str, attrs: dict,
               questionnaire_id: str, questionnaire_version: str) -> AssessmentRecord:
        now = _now_rfc3339()
        record = AssessmentRecord(
            id=uuid.uuid4().hex,
            created_at=now, updated_at=now,
            use_case_text=use_case_text, attrs=dict(attrs),
            questionnaire_id=questionnaire_id,
            questionnaire_version=questionnaire_version)
        self._write(record)
        return record

    def get(self, assessment_id: str) -> AssessmentRecord:
        path = self._path(assessment_id)
        if not path.exists():
            raise AssessmentNotFound(assessment_id)
        return AssessmentRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def mutate(self, assessment_id: str, expected_revision: int, update) -> AssessmentRecord:
        """Apply `update(record)` under the optimistic-concurrency check and
        persist atomically. Bumps revision by exactly 1."""
        with self._lock_for(assessment_id):
            record = self.get(assessment_id)
            if record.revision != expected_revision:
                raise RevisionConflict(expected_revision, record.revision)
            update(record)
            record.revision += 1
            record.updated_at = _now_rfc3339()
            self._write(record)
            return record

    def _write(self, record: AssessmentRecord) -> None:
        path = self._path(record.id)
        tmp = path.with_name(f".{path.name}.{secrets.token_hex(4)}.tmp")
        payload = json.dumps(record.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, path)
