"""Recommendation generators: an offline template stub and an HTTP client.

Both satisfy the same contract: ``generate(prompt, config)`` returns a
:class:`Recommendation` for the prompt's condition. The stub reads only the
prompt's structured fields, which are in one-to-one correspondence with its
rendered text, plus the configured seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import httpx

from . import _http
from .conditioning import Condition, ConditionedPrompt, Tactic
from .embedding import fnv1a_64
from .errors import BackendError, InvalidConfigurationError, InvalidInputError
from .learner import persona_display
from .text import content_words, data_path

CONTEXTUAL_WORDS = 12
MEMORY_WORDS = 6


@dataclass(frozen=True)
class GeneratorConfig:
    backend: str = "stub"
    endpoint: str | None = None
    timeout_ms: int = 30_000
    max_parallel: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.backend not in ("stub", "http"):
            raise InvalidConfigurationError(f"unknown generator backend {self.backend!r}")
        if self.backend == "http" and not self.endpoint:
            raise InvalidConfigurationError("http generator requires an endpoint")
        if not isinstance(self.max_parallel, int) or self.max_parallel < 1:
            raise InvalidConfigurationError("max_parallel must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigurationError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Recommendation:
    text: str
    condition: Condition
    question_id: str
    learner_id: str | None
    tactic: Tactic | None
    backend_name: str

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidInputError("recommendation text is empty")
        if (self.condition is Condition.CONTEXTUAL) != (self.tactic is None):
            raise InvalidInputError("tactic must be present exactly for memory-based recommendations")

    def as_dict(self) -> dict:
        return {
            "text": self.text,
            "condition": self.condition.value,
            "question_id": self.question_id,
            "learner_id": self.learner_id,
            "tactic": self.tactic.value if self.tactic else None,
            "backend_name": self.backend_name,
        }


def load_stub_responses(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    path = Path(path) if path is not None else data_path("stub_responses.json")
    raw = json.loads(path.read_text(encoding="utf-8"))
    keys = [Condition.CONTEXTUAL.value, *(t.value for t in Tactic)]
    missing = [k for k in keys if not raw.get(k)]
    if missing:
        raise InvalidConfigurationError(f"stub responses missing {missing}")
    return {k: tuple(raw[k]) for k in keys}


@lru_cache(maxsize=None)
def default_stub_responses() -> Mapping[str, tuple[str, ...]]:
    return load_stub_responses()


def _pick(variants: tuple[str, ...], prompt: ConditionedPrompt, seed: int) -> str:
    if len(variants) == 1:
        return variants[0]
    key = f"{seed}\x00{prompt.rendered}".encode("utf-8")
    return variants[fnv1a_64(key) % len(variants)]


def stub_text(prompt: ConditionedPrompt, seed: int = 0,
              responses: Mapping[str, tuple[str, ...]] | None = None) -> str:
    responses = responses or default_stub_responses()
    if prompt.condition is Condition.CONTEXTUAL:
        words = content_words(prompt.question_text, CONTEXTUAL_WORDS)
        template = _pick(responses[Condition.CONTEXTUAL.value], prompt, seed)
        return template.replace("{words}", " ".join(words) or "their answer")
    fields = prompt.learner_fields
    words = content_words(prompt.question_text, MEMORY_WORDS)
    template = _pick(responses[prompt.tactic.value], prompt, seed)
    values = {
        "{persona}": persona_display(fields.persona),
        "{top_need}": fields.dominant_need.value,
        "{words}": " ".join(words) or "the question",
    }
    for placeholder, value in values.items():
        template = template.replace(placeholder, value)
    return template


def _recommendation(prompt: ConditionedPrompt, text: str, backend: str) -> Recommendation:
    return Recommendation(text, prompt.condition, prompt.question_id, prompt.learner_id, prompt.tactic, backend)


def _http_generate(client: httpx.Client, prompt: ConditionedPrompt, config: GeneratorConfig) -> Recommendation:
    body = _http.post_json(client, config.endpoint, {"prompt": prompt.rendered}, config.timeout_ms)
    text = body.get("text")
    if not isinstance(text, str) or not text.strip():
        raise BackendError("generation response lacks a non-empty 'text' field")
    return _recommendation(prompt, text, "http")


def generate(prompt: ConditionedPrompt, config: GeneratorConfig = GeneratorConfig()) -> Recommendation:
    if config.backend == "stub":
        return _recommendation(prompt, stub_text(prompt, config.seed), "stub")
    with httpx.Client() as client:
        return _http_generate(client, prompt, config)


def generate_batch(prompts: Sequence[ConditionedPrompt],
                   config: GeneratorConfig = GeneratorConfig()) -> list[Recommendation]:
    """Generate for every prompt, preserving input order.

    On partial failure raises :class:`~statefulrec.errors.BatchError` whose
    ``results`` still hold the successful items.
    """
    if not prompts:
        raise InvalidInputError("generate_batch needs at least one prompt")
    if config.backend == "stub":
        return _http.bounded_map(lambda p: generate(p, config), prompts, 1)
    with httpx.Client(limits=httpx.Limits(max_connections=config.max_parallel)) as client:
        return _http.bounded_map(lambda p: _http_generate(client, p, config), prompts, config.max_parallel)
