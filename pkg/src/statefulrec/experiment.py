"""End-to-end two-condition experiment over a synthetic or provided corpus."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Any, Mapping

from .conditioning import (
    Condition,
    PromptTemplates,
    compose_prompt,
    load_mapping,
    mapping_to_json,
    select_tactic,
)
from .diagnostics import (
    DiagnosticsReport,
    MatchedItem,
    PipelineConfig,
    compare_conditions,
    divergence_probe,
)
from .embedding import EmbedderConfig, embed_many
from .errors import InvalidConfigurationError, StatefulRecError
from .generation import GeneratorConfig, default_stub_responses, generate_batch
from .learner import DEFAULT_ALPHA, InteractionRecord, LearnerState, default_lexicons
from .store import MemoryStore, read_interaction_log, record_from_json
from .synth import Xoshiro256StarStar, default_bank, synthesize
from .text import default_stopwords


class StageError(StatefulRecError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: StatefulRecError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 42
    n_questions: int = 50
    n_learners: int = 20
    alpha: float = DEFAULT_ALPHA
    mapping_path: str | None = None
    template_dir: str | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    # None means the stub generator follows ``seed``
    generator: GeneratorConfig | None = None
    output_path: str = "report.json"
    log_path: str | None = None
    store_path: str | None = None

    def __post_init__(self):
        if self.generator is None:
            object.__setattr__(self, "generator", GeneratorConfig(seed=self.seed & (2**64 - 1)))
        if self.n_questions < 2:
            raise InvalidConfigurationError("n_questions must be at least 2")
        if self.n_learners < 1:
            raise InvalidConfigurationError("n_learners must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigurationError("seed must fit in 64 unsigned bits")
        for name in ("mapping_path", "template_dir", "log_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise InvalidConfigurationError(f"{name} {value!r} does not exist")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigurationError(f"unknown config keys {sorted(unknown)}")
        kwargs = dict(data)
        try:
            if isinstance(kwargs.get("embedder"), Mapping):
                kwargs["embedder"] = EmbedderConfig(**kwargs["embedder"])
            if isinstance(kwargs.get("generator"), Mapping):
                kwargs["generator"] = GeneratorConfig(**kwargs["generator"])
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfigurationError(str(exc)) from None

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            mapping=load_mapping(self.mapping_path),
            templates=PromptTemplates.load(self.template_dir),
            generator=self.generator,
            embedder=self.embedder,
        )


def config_digest(config: ExperimentConfig, pipeline: PipelineConfig) -> str:
    """SHA-256 over every input that shapes the report's numbers."""
    log_digest = None
    if config.log_path is not None:
        log_digest = hashlib.sha256(Path(config.log_path).read_bytes()).hexdigest()
    payload = {
        "seed": config.seed,
        "n_questions": config.n_questions,
        "n_learners": config.n_learners,
        "alpha": config.alpha,
        "log_sha256": log_digest,
        "mapping": mapping_to_json(pipeline.mapping),
        "templates": pipeline.templates.as_dict(),
        "generator": {"backend": config.generator.backend, "endpoint": config.generator.endpoint,
                      "seed": config.generator.seed},
        "embedder": {"backend": config.embedder.backend, "endpoint": config.embedder.endpoint,
                     "dimension": config.embedder.dimension},
        "stub_responses": {k: list(v) for k, v in default_stub_responses().items()},
        "lexicons": {n.value: sorted(w) for n, w in default_lexicons().words.items()},
        "stopwords": sorted(default_stopwords()),
        "question_bank": {"templates": {n.value: list(t) for n, t in default_bank().templates.items()},
                          "topics": list(default_bank().topics)},
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class ExperimentResult:
    report: DiagnosticsReport
    items: list[MatchedItem]
    store: MemoryStore
    sample: list[InteractionRecord]


def _load_corpus(config: ExperimentConfig) -> list[InteractionRecord]:
    if config.log_path is not None:
        records = [r for _, r in read_interaction_log(config.log_path)]
    else:
        records = [record_from_json(obj) for obj in synthesize(config.seed, config.n_questions, config.n_learners)]
    return records


def _sample(records: list[InteractionRecord], config: ExperimentConfig) -> set[str]:
    """Question ids to analyze: all of them, or a seeded uniform subset."""
    ids = [r.question_id for r in records]
    if len(ids) != len(set(ids)):
        raise InvalidConfigurationError("interaction log repeats question ids")
    if len(ids) <= config.n_questions:
        return set(ids)
    # partial Fisher-Yates on a stream independent of the corpus synthesizer
    rng = Xoshiro256StarStar(config.seed ^ 0x5A5A5A5A5A5A5A5A)
    pool = list(ids)
    for i in range(config.n_questions):
        j = i + rng.randbelow(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    return set(pool[: config.n_questions])


def _distinctness(a: LearnerState, b: LearnerState, config: PipelineConfig) -> tuple:
    l1 = sum(abs(x - y) for x, y in zip(a.need.as_tuple(), b.need.as_tuple()))
    return (
        a.dominant_need is not b.dominant_need,
        select_tactic(a, config.mapping) is not select_tactic(b, config.mapping),
        a.persona != b.persona,
        round(l1, 12),
    )


def _pick_probe(snapshots: list[tuple[InteractionRecord, dict[str, LearnerState]]],
                pipeline: PipelineConfig) -> tuple[InteractionRecord, tuple[LearnerState, LearnerState]] | None:
    best = None
    for record, states in snapshots:
        known = [states[k] for k in sorted(states) if states[k].interaction_count > 0]
        for a, b in combinations(known, 2):
            key = _distinctness(a, b, pipeline)
            if best is None or key > best[0]:
                best = (key, record, (a, b))
    return None if best is None else (best[1], best[2])


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except StatefulRecError as exc:
        raise StageError(name, exc) from exc


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Replay the corpus, generate both conditions for each sampled question,
    embed, and compare.

    The memory-based prompt for a question uses the learner's state as it
    stood before that question; the question is folded into memory after.
    A learner with no history is conditioned on the initial state.
    """
    pipeline = _stage("config", config.pipeline)
    digest = _stage("config", config_digest, config, pipeline)
    records = _stage("corpus", _load_corpus, config)
    chosen = _stage("corpus", _sample, records, config)

    store = MemoryStore(config.store_path)
    sample: list[InteractionRecord] = []
    prompts_ctx, prompts_mem = [], []
    snapshots = []

    def replay():
        for record in records:
            if record.question_id in chosen:
                state = store.get_state(record.learner_id) or LearnerState.initial(record.learner_id)
                tactic = select_tactic(state, pipeline.mapping)
                sample.append(record)
                snapshots.append((record, dict(store.states)))
                prompts_ctx.append(compose_prompt(Condition.CONTEXTUAL, record.question_text,
                                                  templates=pipeline.templates, question_id=record.question_id))
                prompts_mem.append(compose_prompt(Condition.MEMORY_BASED, record.question_text, state, tactic,
                                                  pipeline.templates, record.question_id))
            store.apply_interaction(record, config.alpha)

    _stage("ingest", replay)
    recs_ctx = _stage("generate", generate_batch, prompts_ctx, pipeline.generator)
    recs_mem = _stage("generate", generate_batch, prompts_mem, pipeline.generator)
    vecs = _stage("embed", embed_many,
                  [r.question_text for r in sample] + [r.text for r in recs_ctx] + [r.text for r in recs_mem],
                  pipeline.embedder)
    n = len(sample)
    items = [MatchedItem(sample[i].question_id, vecs[i], vecs[n + i], vecs[2 * n + i]) for i in range(n)]

    divergence = None
    probe = _pick_probe(snapshots, pipeline)
    if probe is not None:
        record, pair = probe
        divergence = _stage("divergence", divergence_probe, record.question_text, pair, pipeline,
                            record.question_id)
    report = _stage("diagnostics", compare_conditions, items, divergence, digest)
    items.sort(key=lambda it: it.question_id)
    return ExperimentResult(report, items, store, sample)


def report_json(report: DiagnosticsReport) -> str:
    return json.dumps(report.as_dict(), indent=2, ensure_ascii=False) + "\n"


def items_jsonl(items: list[MatchedItem]) -> str:
    return "".join(json.dumps(it.as_dict()) + "\n" for it in items)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def items_path_for(report_path: str | Path) -> Path:
    report_path = Path(report_path)
    return report_path.with_name(report_path.stem + ".items.jsonl")


def summarize(report: DiagnosticsReport) -> str:
    t, w, e = report.t_result, report.wilcoxon_result, report.effect
    lines = [
        f"items analyzed        : {report.n_items}",
        f"rho contextual        : {report.rho_contextual:.4f}  (pooled pearson {report.flat_pearson_contextual:.4f})",
        f"rho memory-based      : {report.rho_memory:.4f}  (pooled pearson {report.flat_pearson_memory:.4f})",
        f"paired t              : t = {t.statistic:.4f}, p = {t.p_value:.3g} (n = {t.n_effective})",
        f"wilcoxon signed-rank  : W = {w.statistic:g}, p = {w.p_value:.3g} ({w.method}, n = {w.n_effective})",
        f"cohen's d_z           : {e.cohens_dz:.4f}",
    ]
    d = report.divergence
    if d is not None:
        lines += [
            f"divergence probe      : question {d.question_id}, learners {d.learner_ids[0]} vs {d.learner_ids[1]}",
            f"  tactics             : {d.tactics[0].value} vs {d.tactics[1].value}",
            f"  contextual identical: {d.contextual_texts_identical}",
            f"  memory identical    : {d.memory_texts_identical} (embedding cosine {d.memory_embedding_cosine:.4f})",
        ]
    lines.append(f"config digest         : {report.config_digest}")
    return "\n".join(lines)
