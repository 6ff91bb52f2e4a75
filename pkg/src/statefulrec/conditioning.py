"""Tactic selection and prompt composition for both conditioning modes."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .errors import ContractViolationError, InvalidConfigurationError
from .learner import LearnerState, Need, NeedVector, persona_display
from .text import data_path


class Tactic(str, Enum):
    FEED_UP = "feed_up"
    FEED_BACK = "feed_back"
    FEED_FORWARD = "feed_forward"

    @property
    def display(self) -> str:
        return _TACTIC_DISPLAY[self]


_TACTIC_DISPLAY = {
    Tactic.FEED_UP: "Feed Up: Goal Clarity",
    Tactic.FEED_BACK: "Feed Back: Mastery Status",
    Tactic.FEED_FORWARD: "Feed Forward: Action Steps",
}


class Condition(str, Enum):
    CONTEXTUAL = "contextual"
    MEMORY_BASED = "memory"


TacticMapping = Mapping[Need, Tactic]


def parse_mapping(data: Mapping[str, str]) -> dict[Need, Tactic]:
    """Validate a need-name -> tactic-name table; it must cover every need."""
    if not isinstance(data, Mapping):
        raise InvalidConfigurationError("tactic mapping must be a JSON object")
    mapping = {}
    for key, value in data.items():
        try:
            mapping[Need(key)] = Tactic(value)
        except ValueError:
            raise InvalidConfigurationError(f"bad mapping entry {key!r}: {value!r}") from None
    missing = [n.value for n in Need if n not in mapping]
    if missing:
        raise InvalidConfigurationError(f"tactic mapping missing needs {missing}")
    return mapping


def load_mapping(path: str | Path | None = None) -> dict[Need, Tactic]:
    path = Path(path) if path is not None else data_path("mapping.json")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigurationError(f"cannot read tactic mapping {path}: {exc}") from None
    return parse_mapping(data)


def mapping_to_json(mapping: TacticMapping) -> dict[str, str]:
    return {n.value: mapping[n].value for n in Need}


@lru_cache(maxsize=None)
def _default_mapping() -> tuple[tuple[Need, Tactic], ...]:
    return tuple(load_mapping().items())


def default_mapping() -> dict[Need, Tactic]:
    return dict(_default_mapping())


def select_tactic(state: LearnerState, mapping: TacticMapping | None = None) -> Tactic:
    mapping = default_mapping() if mapping is None else mapping
    return mapping[state.dominant_need]


_PLACEHOLDER = re.compile(r"\{(\w+)\}")
_ALLOWED = {
    "question_block": {"question"},
    "contextual": {"question"},
    "memory": {"question", "persona", "top_need", "need_vector", "tactic"},
}


def _fill(template: str, values: Mapping[str, str]) -> str:
    # Single pass over the template: substituted text is never rescanned, so
    # braces inside a question stay literal.
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


@dataclass(frozen=True)
class PromptTemplates:
    """Prompt skeletons. ``{question}`` in the outer templates expands to the
    rendered question block, so the memory prompt always embeds the
    contextual question block verbatim."""

    question_block: str
    contextual: str
    memory: str

    def __post_init__(self):
        for name, allowed in _ALLOWED.items():
            used = set(_PLACEHOLDER.findall(getattr(self, name)))
            if not used <= allowed:
                raise InvalidConfigurationError(f"{name} template uses unknown placeholders {sorted(used - allowed)}")
            if "question" not in used:
                raise InvalidConfigurationError(f"{name} template lacks {{question}}")

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptTemplates":
        directory = Path(directory) if directory is not None else data_path("templates")
        parts = {}
        for name in _ALLOWED:
            path = directory / f"{name}.txt"
            try:
                parts[name] = path.read_text(encoding="utf-8").rstrip("\n")
            except OSError as exc:
                raise InvalidConfigurationError(f"cannot read template {path}: {exc}") from None
        return cls(**parts)

    def as_dict(self) -> dict[str, str]:
        return {"question_block": self.question_block, "contextual": self.contextual, "memory": self.memory}


@lru_cache(maxsize=None)
def default_templates() -> PromptTemplates:
    return PromptTemplates.load()


@dataclass(frozen=True)
class LearnerFields:
    persona: str
    dominant_need: Need
    need: NeedVector


def render_need_vector(need: NeedVector) -> str:
    return ", ".join(f"{n.value}={need[n]:.2f}" for n in Need)


@dataclass(frozen=True)
class ConditionedPrompt:
    condition: Condition
    question_text: str
    learner_fields: LearnerFields | None
    tactic: Tactic | None
    rendered: str
    templates: PromptTemplates
    # Bookkeeping carried through to the Recommendation; not part of the rendering.
    question_id: str = ""
    learner_id: str | None = None

    def render(self) -> str:
        return render_prompt(self.condition, self.question_text, self.learner_fields, self.tactic, self.templates)


def render_prompt(condition: Condition, question_text: str, fields: LearnerFields | None,
                  tactic: Tactic | None, templates: PromptTemplates) -> str:
    block = _fill(templates.question_block, {"question": question_text})
    if condition is Condition.CONTEXTUAL:
        return _fill(templates.contextual, {"question": block})
    return _fill(templates.memory, {
        "question": block,
        "persona": persona_display(fields.persona),
        "top_need": fields.dominant_need.value,
        "need_vector": render_need_vector(fields.need),
        "tactic": tactic.display,
    })


def compose_prompt(condition: Condition, question_text: str, state: LearnerState | None = None,
                   tactic: Tactic | None = None, templates: PromptTemplates | None = None,
                   question_id: str = "") -> ConditionedPrompt:
    condition = Condition(condition)
    if not question_text or not question_text.strip():
        raise ContractViolationError("question text is empty")
    if condition is Condition.CONTEXTUAL:
        if state is not None or tactic is not None:
            raise ContractViolationError("contextual prompts take no learner state or tactic")
        fields = None
    else:
        if state is None or tactic is None:
            raise ContractViolationError("memory-based prompts need both a learner state and a tactic")
        fields = LearnerFields(state.persona, state.dominant_need, state.need)
    tactic = Tactic(tactic) if tactic is not None else None
    templates = templates or default_templates()
    return ConditionedPrompt(
        condition=condition,
        question_text=question_text,
        learner_fields=fields,
        tactic=tactic,
        rendered=render_prompt(condition, question_text, fields, tactic, templates),
        templates=templates,
        question_id=question_id,
        learner_id=state.learner_id if state is not None else None,
    )
