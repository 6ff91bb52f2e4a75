"""Learner-state types and the estimators that maintain them.

A learner is summarized by a three-component need vector, the dominant
need derived from it, and a persona label. All types here are immutable;
every estimator is a pure function.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .errors import (
    InsufficientHistoryError,
    InvalidConfigurationError,
    InvalidInputError,
    InvalidParameterError,
)
from .text import data_path, read_wordlist, tokenize

DEFAULT_ALPHA = 0.2
MS_PER_DAY = 86_400_000


class Need(str, Enum):
    # Declaration order is the canonical component order and tie-break order.
    PERFORMANCE = "performance"
    ENGAGEMENT = "engagement"
    SKILL_PROGRESSION = "skill_progression"

    @classmethod
    def parse(cls, name: str) -> "Need":
        try:
            return cls(name)
        except ValueError:
            raise InvalidInputError(f"unknown need {name!r}") from None


@dataclass(frozen=True)
class NeedVector:
    performance: float
    engagement: float
    skill_progression: float

    def __post_init__(self):
        for need, value in zip(Need, self.as_tuple()):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvalidInputError(f"{need.value} must be a number, got {value!r}")
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{need.value}={value!r} outside [0, 1]")

    @classmethod
    def uniform(cls) -> "NeedVector":
        return cls(1 / 3, 1 / 3, 1 / 3)

    @classmethod
    def from_mapping(cls, data: Mapping[str, float]) -> "NeedVector":
        if set(data) != {n.value for n in Need}:
            raise InvalidInputError(f"need vector keys must be exactly {[n.value for n in Need]}")
        return cls(*(data[n.value] for n in Need))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.performance, self.engagement, self.skill_progression)

    def as_dict(self) -> dict[str, float]:
        return {n.value: v for n, v in zip(Need, self.as_tuple())}

    def __getitem__(self, need: Need) -> float:
        return getattr(self, need.value)


DEFAULT_PERSONAS = ("HelpSeekers", "Performers", "Explorers", "Balanced")


def persona_display(label: str) -> str:
    """``"HelpSeekers"`` -> ``"Help Seekers"``."""
    return re.sub(r"(?<=[a-z])(?=[A-Z])", " ", label)


def parse_persona(label: str, vocabulary: tuple[str, ...] = DEFAULT_PERSONAS) -> str:
    if label not in vocabulary:
        raise InvalidInputError(f"persona {label!r} not in vocabulary {list(vocabulary)}")
    return label


@dataclass(frozen=True)
class InteractionRecord:
    learner_id: str
    question_id: str
    question_text: str
    timestamp: int
    signal: NeedVector

    def __post_init__(self):
        if not self.question_text.strip():
            raise InvalidInputError(f"question {self.question_id!r} has empty text")
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool):
            raise InvalidInputError(f"timestamp must be integer milliseconds, got {self.timestamp!r}")

    @classmethod
    def from_text(cls, learner_id: str, question_id: str, question_text: str, timestamp: int,
                  lexicons: "Lexicons | None" = None) -> "InteractionRecord":
        return cls(learner_id, question_id, question_text, timestamp,
                   classify_signal(question_text, lexicons))


@dataclass(frozen=True)
class LearnerState:
    learner_id: str
    need: NeedVector
    dominant_need: Need
    persona: str
    interaction_count: int = 0
    updated_at: int | None = None
    # First applied timestamp; used to derive the questioning rate.
    created_at: int | None = None

    def __post_init__(self):
        if self.dominant_need is not derive_dominant_need(self.need):
            raise InvalidInputError(
                f"dominant_need {self.dominant_need.value} inconsistent with need vector {self.need.as_tuple()}"
            )
        if not isinstance(self.interaction_count, int) or self.interaction_count < 0:
            raise InvalidInputError("interaction_count must be a non-negative integer")

    @classmethod
    def initial(cls, learner_id: str) -> "LearnerState":
        need = NeedVector.uniform()
        return cls(learner_id, need, derive_dominant_need(need), "Balanced")


@dataclass(frozen=True)
class Lexicons:
    words: Mapping[Need, frozenset[str]]

    @classmethod
    def load(cls, directory: str | Path) -> "Lexicons":
        directory = Path(directory)
        words = {}
        for need in Need:
            path = directory / f"{need.value}.lex"
            if not path.exists():
                raise InvalidConfigurationError(f"missing lexicon file {path}")
            words[need] = read_wordlist(path)
        return cls(words)


@lru_cache(maxsize=None)
def default_lexicons() -> Lexicons:
    return Lexicons.load(data_path())


def classify_signal(question_text: str, lexicons: Lexicons | None = None) -> NeedVector:
    """Share of lexicon hits per need; uniform when nothing matches.

    Every token occurrence counts. Shares are computed as exact fractions so
    the components sum to one up to float rounding of each term.
    """
    if not question_text or not question_text.strip():
        raise InvalidInputError("question text is empty")
    lexicons = lexicons or default_lexicons()
    hits = {need: 0 for need in Need}
    for tok in tokenize(question_text):
        for need in Need:
            if tok in lexicons.words[need]:
                hits[need] += 1
    total = sum(hits.values())
    if total == 0:
        return NeedVector.uniform()
    return NeedVector(*(float(Fraction(hits[n], total)) for n in Need))


def update_need_vector(prior: NeedVector, signal: NeedVector, alpha: float = DEFAULT_ALPHA) -> NeedVector:
    """Exponentially weighted update ``(1 - alpha) * prior + alpha * signal``."""
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha <= 1.0):
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    out = []
    for p, s in zip(prior.as_tuple(), signal.as_tuple()):
        v = (1.0 - alpha) * p + alpha * s
        # clamp away float rounding that would step outside the segment
        out.append(min(max(v, min(p, s)), max(p, s)))
    return NeedVector(*out)


def derive_dominant_need(need: NeedVector) -> Need:
    best = Need.PERFORMANCE
    for n in Need:
        if need[n] > need[best]:
            best = n
    return best


@dataclass(frozen=True)
class PersonaRules:
    """Configurable mapping from dominant need and questioning rate to persona.

    Needs listed in ``rate_gated`` only earn their label when the learner
    asks at least ``threshold`` questions per day; otherwise ``fallback``.
    """

    by_need: Mapping[Need, str] = field(default_factory=lambda: {
        Need.PERFORMANCE: "Performers",
        Need.ENGAGEMENT: "HelpSeekers",
        Need.SKILL_PROGRESSION: "Explorers",
    })
    rate_gated: frozenset[Need] = frozenset({Need.ENGAGEMENT})
    threshold: float = 1.0
    fallback: str = "Balanced"
    vocabulary: tuple[str, ...] = DEFAULT_PERSONAS

    def __post_init__(self):
        missing = [n.value for n in Need if n not in self.by_need]
        if missing:
            raise InvalidConfigurationError(f"persona table missing needs {missing}")
        for label in (*self.by_need.values(), self.fallback):
            if label not in self.vocabulary:
                raise InvalidConfigurationError(f"persona {label!r} not in vocabulary")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PersonaRules":
        kwargs = {}
        if "by_need" in data:
            kwargs["by_need"] = {Need.parse(k): v for k, v in data["by_need"].items()}
        if "rate_gated" in data:
            kwargs["rate_gated"] = frozenset(Need.parse(k) for k in data["rate_gated"])
        if "threshold" in data:
            kwargs["threshold"] = float(data["threshold"])
        if "fallback" in data:
            kwargs["fallback"] = data["fallback"]
        if "vocabulary" in data:
            kwargs["vocabulary"] = tuple(data["vocabulary"])
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return {
            "by_need": {n.value: self.by_need[n] for n in Need},
            "rate_gated": sorted(n.value for n in self.rate_gated),
            "threshold": self.threshold,
            "fallback": self.fallback,
            "vocabulary": list(self.vocabulary),
        }


DEFAULT_PERSONA_RULES = PersonaRules()


def questions_per_day(state: LearnerState) -> float:
    """Interactions per day since the first one, over a window of at least a day."""
    if state.created_at is None or state.updated_at is None:
        return 0.0
    days = max((state.updated_at - state.created_at) / MS_PER_DAY, 1.0)
    return state.interaction_count / days


def assign_persona(state: LearnerState, questions_per_day: float,
                   rules: PersonaRules = DEFAULT_PERSONA_RULES) -> str:
    if state.interaction_count < 1:
        raise InsufficientHistoryError(f"learner {state.learner_id!r} has no interactions yet")
    need = state.dominant_need
    if need in rules.rate_gated and questions_per_day < rules.threshold:
        return rules.fallback
    return rules.by_need[need]


def apply_signal(state: LearnerState, record: InteractionRecord, alpha: float = DEFAULT_ALPHA,
                 rules: PersonaRules = DEFAULT_PERSONA_RULES) -> LearnerState:
    """Fold one interaction into ``state``. Ordering checks are the caller's job."""
    need = update_need_vector(state.need, record.signal, alpha)
    updated = replace(
        state,
        need=need,
        dominant_need=derive_dominant_need(need),
        interaction_count=state.interaction_count + 1,
        updated_at=record.timestamp,
        created_at=record.timestamp if state.created_at is None else state.created_at,
    )
    return replace(updated, persona=assign_persona(updated, questions_per_day(updated), rules))
