"""Behavior-level diagnostics comparing contextual and memory-based outputs.

Deviation correlation scores how closely each recommendation's offset from
the sample mean tracks its question's offset from the question mean. The
per-item scores feed the paired tests, so the primary ``rho`` is the mean of
per-item deviation cosines; a pooled Pearson coefficient over all deviation
components is reported alongside as ``flat_pearson``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .conditioning import (
    Condition,
    PromptTemplates,
    Tactic,
    compose_prompt,
    default_mapping,
    default_templates,
    select_tactic,
)
from .embedding import EmbedderConfig, cosine, embed_many, mean_vector
from .errors import DegenerateSampleError, InvalidInputError
from .generation import GeneratorConfig, generate_batch
from .learner import LearnerState, Need
from .stats import (
    EffectSize,
    PairedSample,
    TestResult,
    cohens_dz,
    paired_t_test,
    wilcoxon_signed_rank,
)


@dataclass(frozen=True)
class MatchedItem:
    question_id: str
    question_vec: np.ndarray
    rec_vec_contextual: np.ndarray
    rec_vec_memory: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(self.question_vec), np.shape(self.rec_vec_contextual), np.shape(self.rec_vec_memory)}
        if len(shapes) != 1:
            raise InvalidInputError(f"item {self.question_id!r} mixes vector dimensions {sorted(shapes)}")

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question_vec": [float(x) for x in self.question_vec],
            "rec_vec_contextual": [float(x) for x in self.rec_vec_contextual],
            "rec_vec_memory": [float(x) for x in self.rec_vec_memory],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "MatchedItem":
        try:
            return cls(
                str(obj["question_id"]),
                np.asarray(obj["question_vec"], dtype=float),
                np.asarray(obj["rec_vec_contextual"], dtype=float),
                np.asarray(obj["rec_vec_memory"], dtype=float),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad matched item: {exc}") from None


@dataclass(frozen=True)
class DeviationScores:
    per_item: tuple[float, ...]
    rho: float
    flat_pearson: float


@dataclass(frozen=True)
class DivergenceSummary:
    question_id: str
    learner_ids: tuple[str, str]
    contextual_texts_identical: bool
    memory_texts_identical: bool
    memory_embedding_cosine: float
    tactics: tuple[Tactic, Tactic]
    memory_texts: tuple[str, str] = ("", "")
    contextual_text: str = ""

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "learner_ids": list(self.learner_ids),
            "contextual_texts_identical": self.contextual_texts_identical,
            "memory_texts_identical": self.memory_texts_identical,
            "memory_embedding_cosine": self.memory_embedding_cosine,
            "tactics": [t.value for t in self.tactics],
            "memory_texts": list(self.memory_texts),
            "contextual_text": self.contextual_text,
        }


@dataclass(frozen=True)
class DiagnosticsReport:
    rho_contextual: float
    rho_memory: float
    t_result: TestResult
    wilcoxon_result: TestResult
    effect: EffectSize
    divergence: DivergenceSummary | None
    n_items: int
    config_digest: str
    flat_pearson_contextual: float = 0.0
    flat_pearson_memory: float = 0.0
    question_ids: tuple[str, ...] = ()
    per_item_contextual: tuple[float, ...] = ()
    per_item_memory: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "rho_contextual": self.rho_contextual,
            "rho_memory": self.rho_memory,
            "t_result": self.t_result.as_dict(),
            "wilcoxon_result": self.wilcoxon_result.as_dict(),
            "effect": self.effect.as_dict(),
            "divergence": self.divergence.as_dict() if self.divergence else None,
            "n_items": self.n_items,
            "config_digest": self.config_digest,
            "flat_pearson_contextual": self.flat_pearson_contextual,
            "flat_pearson_memory": self.flat_pearson_memory,
            "question_ids": list(self.question_ids),
            "per_item_contextual": list(self.per_item_contextual),
            "per_item_memory": list(self.per_item_memory),
        }


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    denom = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if denom < 1e-12:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(x, y)) / denom))


def deviation_correlation(questions: Sequence[np.ndarray], recs: Sequence[np.ndarray]) -> DeviationScores:
    if len(questions) != len(recs):
        raise InvalidInputError(f"{len(questions)} questions vs {len(recs)} recommendations")
    if len(questions) < 2:
        raise InvalidInputError("deviation correlation needs at least two items")
    q_mean = mean_vector(questions)
    r_mean = mean_vector(recs)
    if q_mean.shape != r_mean.shape:
        raise InvalidInputError("question and recommendation embeddings differ in dimension")
    q_dev = [np.asarray(q, dtype=float) - q_mean for q in questions]
    r_dev = [np.asarray(r, dtype=float) - r_mean for r in recs]
    per_item = tuple(cosine(q, r) for q, r in zip(q_dev, r_dev))
    rho = math.fsum(per_item) / len(per_item)
    flat = _pearson(np.concatenate(q_dev), np.concatenate(r_dev))
    return DeviationScores(per_item, rho, flat)


def _collapsed(scores: DeviationScores) -> bool:
    return max(scores.per_item) == min(scores.per_item)


def compare_conditions(items: Sequence[MatchedItem], divergence: DivergenceSummary | None = None,
                       config_digest: str = "") -> DiagnosticsReport:
    """Score both conditions over the same items and test the paired difference.

    Items are ordered by ``question_id`` first. Per-item scores are paired
    with the contextual condition as ``a`` and memory-based as ``b``.
    """
    if len(items) < 2:
        raise InvalidInputError("compare_conditions needs at least two items")
    items = sorted(items, key=lambda it: it.question_id)
    ids = [it.question_id for it in items]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate question ids among matched items")
    questions = [it.question_vec for it in items]
    ctx = deviation_correlation(questions, [it.rec_vec_contextual for it in items])
    mem = deviation_correlation(questions, [it.rec_vec_memory for it in items])
    sample = PairedSample(ctx.per_item, mem.per_item)

    try:
        t_result = paired_t_test(sample)
        if all(a == b for a, b in zip(sample.a, sample.b)):
            # null comparison: nothing to rank, no effect
            w_result = TestResult(0.0, 1.0, "wilcoxon_exact", 0)
            effect = EffectSize(0.0)
        else:
            w_result = wilcoxon_signed_rank(sample)
            effect = cohens_dz(sample)
    except DegenerateSampleError as exc:
        collapsed = [name for name, s in (("contextual", ctx), ("memory", mem)) if _collapsed(s)]
        where = f"; constant per-item scores in: {', '.join(collapsed)}" if collapsed else ""
        raise DegenerateSampleError(f"{exc} (contextual - memory differences){where}") from exc

    return DiagnosticsReport(
        rho_contextual=ctx.rho,
        rho_memory=mem.rho,
        t_result=t_result,
        wilcoxon_result=w_result,
        effect=effect,
        divergence=divergence,
        n_items=len(items),
        config_digest=config_digest,
        flat_pearson_contextual=ctx.flat_pearson,
        flat_pearson_memory=mem.flat_pearson,
        question_ids=tuple(ids),
        per_item_contextual=ctx.per_item,
        per_item_memory=mem.per_item,
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that shapes generated text and its embedding."""

    mapping: Mapping[Need, Tactic] = field(default_factory=default_mapping)
    templates: PromptTemplates = field(default_factory=default_templates)
    generator: GeneratorConfig = GeneratorConfig()
    embedder: EmbedderConfig = EmbedderConfig()


def divergence_probe(question_text: str, states: tuple[LearnerState, LearnerState],
                     config: PipelineConfig | None = None, question_id: str = "probe") -> DivergenceSummary:
    """Generate both conditions for two learners on one question and compare."""
    config = config or PipelineConfig()
    first, second = states
    tactics = (select_tactic(first, config.mapping), select_tactic(second, config.mapping))
    prompts = [
        compose_prompt(Condition.CONTEXTUAL, question_text, templates=config.templates, question_id=question_id),
        compose_prompt(Condition.CONTEXTUAL, question_text, templates=config.templates, question_id=question_id),
        compose_prompt(Condition.MEMORY_BASED, question_text, first, tactics[0], config.templates, question_id),
        compose_prompt(Condition.MEMORY_BASED, question_text, second, tactics[1], config.templates, question_id),
    ]
    # The contextual prompt deliberately carries no learner identity.
    ctx_a, ctx_b, mem_a, mem_b = generate_batch(prompts, config.generator)
    vec_a, vec_b = embed_many([mem_a.text, mem_b.text], config.embedder)
    return DivergenceSummary(
        question_id=question_id,
        learner_ids=(first.learner_id, second.learner_id),
        contextual_texts_identical=ctx_a.text == ctx_b.text,
        memory_texts_identical=mem_a.text == mem_b.text,
        memory_embedding_cosine=cosine(vec_a, vec_b),
        tactics=tactics,
        memory_texts=(mem_a.text, mem_b.text),
        contextual_text=ctx_a.text,
    )
