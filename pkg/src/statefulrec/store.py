"""JSONL-backed persistent learner memory.

One JSON object per line, one line per learner, sorted by ``learner_id``
on flush. Parse failures are always reported, never silently reset.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterator

from .errors import CorruptStoreError, InvalidInputError, StaleEventError, StatefulRecError
from .learner import (
    DEFAULT_ALPHA,
    DEFAULT_PERSONA_RULES,
    InteractionRecord,
    LearnerState,
    Lexicons,
    Need,
    NeedVector,
    PersonaRules,
    apply_signal,
    parse_persona,
)

STATE_FIELDS = ("learner_id", "need", "dominant_need", "persona", "interaction_count", "updated_at")


def state_to_json(state: LearnerState) -> dict:
    return {
        "learner_id": state.learner_id,
        "need": state.need.as_dict(),
        "dominant_need": state.dominant_need.value,
        "persona": state.persona,
        "interaction_count": state.interaction_count,
        "updated_at": state.updated_at,
        "created_at": state.created_at,
    }


def _int_or_none(obj: dict, key: str) -> int | None:
    value = obj.get(key)
    if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
        raise InvalidInputError(f"{key} must be an integer")
    return value


def state_from_json(obj: dict, vocabulary: tuple[str, ...] = DEFAULT_PERSONA_RULES.vocabulary) -> LearnerState:
    if not isinstance(obj, dict):
        raise InvalidInputError("state record must be a JSON object")
    missing = [k for k in STATE_FIELDS if k not in obj]
    if missing:
        raise InvalidInputError(f"missing fields {missing}")
    if not isinstance(obj["learner_id"], str) or not obj["learner_id"]:
        raise InvalidInputError("learner_id must be a non-empty string")
    if not isinstance(obj["need"], dict):
        raise InvalidInputError("need must be an object")
    count = obj["interaction_count"]
    if not isinstance(count, int) or isinstance(count, bool):
        raise InvalidInputError("interaction_count must be an integer")
    return LearnerState(
        learner_id=obj["learner_id"],
        need=NeedVector.from_mapping(obj["need"]),
        dominant_need=Need.parse(obj["dominant_need"]),
        persona=parse_persona(obj["persona"], vocabulary),
        interaction_count=count,
        updated_at=_int_or_none(obj, "updated_at"),
        created_at=_int_or_none(obj, "created_at"),
    )


class MemoryStore:
    """Learner states keyed by id, optionally backed by a file.

    A store with ``path=None`` lives only in memory; :meth:`flush` is then a
    no-op apart from clearing ``dirty``.
    """

    def __init__(self, path: str | Path | None = None, states: dict[str, LearnerState] | None = None,
                 rules: PersonaRules = DEFAULT_PERSONA_RULES):
        self.path = Path(path) if path is not None else None
        self.states: dict[str, LearnerState] = dict(states or {})
        self.rules = rules
        self.dirty = False

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, learner_id: str) -> bool:
        return learner_id in self.states

    def __iter__(self) -> Iterator[LearnerState]:
        return iter(self.states[k] for k in sorted(self.states))

    def get_state(self, learner_id: str) -> LearnerState | None:
        return self.states.get(learner_id)

    def apply_interaction(self, record: InteractionRecord, alpha: float = DEFAULT_ALPHA) -> LearnerState:
        prior = self.states.get(record.learner_id) or LearnerState.initial(record.learner_id)
        # Equal timestamps are rejected too, so replaying a record is always caught.
        if prior.updated_at is not None and record.timestamp <= prior.updated_at:
            raise StaleEventError(
                f"event {record.question_id!r} at {record.timestamp} is not after "
                f"learner {record.learner_id!r} state at {prior.updated_at}"
            )
        state = apply_signal(prior, record, alpha, self.rules)
        self.states[record.learner_id] = state
        self.dirty = True
        return state

    def serialize(self) -> str:
        return "".join(
            json.dumps(state_to_json(self.states[k]), ensure_ascii=False) + "\n"
            for k in sorted(self.states)
        )

    def flush(self) -> None:
        if self.path is None:
            self.dirty = False
            return
        directory = self.path.parent
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{self.path.name}.", suffix=".tmp", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.serialize())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.dirty = False


def open_store(path: str | Path, rules: PersonaRules = DEFAULT_PERSONA_RULES) -> MemoryStore:
    path = Path(path)
    store = MemoryStore(path, rules=rules)
    if not path.exists():
        return store
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                state = state_from_json(json.loads(line), rules.vocabulary)
            except json.JSONDecodeError as exc:
                raise CorruptStoreError(f"invalid JSON at column {exc.colno}: {exc.msg}", lineno) from None
            except StatefulRecError as exc:
                raise CorruptStoreError(str(exc), lineno) from None
            if state.learner_id in store.states:
                raise CorruptStoreError(f"duplicate learner_id {state.learner_id!r}", lineno)
            store.states[state.learner_id] = state
    return store


def read_interaction_log(path: str | Path, lexicons: Lexicons | None = None) -> list[tuple[int, InteractionRecord]]:
    """Parse an interaction JSONL file into ``(line_number, record)`` pairs."""
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append((lineno, record_from_json(obj, lexicons)))
            except (json.JSONDecodeError, StatefulRecError, KeyError, TypeError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: bad interaction record: {exc}") from None
    return records


def record_from_json(obj: dict, lexicons: Lexicons | None = None) -> InteractionRecord:
    for key in ("learner_id", "question_id", "question_text"):
        if not isinstance(obj[key], str):
            raise InvalidInputError(f"{key} must be a string")
    return InteractionRecord.from_text(obj["learner_id"], obj["question_id"], obj["question_text"],
                                       obj["timestamp"], lexicons)


def record_to_json(record: InteractionRecord) -> dict:
    return {
        "learner_id": record.learner_id,
        "question_id": record.question_id,
        "question_text": record.question_text,
        "timestamp": record.timestamp,
    }
