"""Contextual vs. memory-based recommendation conditioning, with
behavior-level diagnostics that tell the two apart."""

from .conditioning import Condition, ConditionedPrompt, Tactic, compose_prompt, select_tactic
from .diagnostics import (
    DiagnosticsReport,
    DivergenceSummary,
    MatchedItem,
    PipelineConfig,
    compare_conditions,
    deviation_correlation,
    divergence_probe,
)
from .embedding import EmbedderConfig, cosine, embed, mean_vector
from .generation import GeneratorConfig, Recommendation, generate, generate_batch
from .learner import (
    InteractionRecord,
    LearnerState,
    Need,
    NeedVector,
    assign_persona,
    classify_signal,
    derive_dominant_need,
    update_need_vector,
)
from .stats import (
    PairedSample,
    cohens_dz,
    paired_t_test,
    regularized_incomplete_beta,
    wilcoxon_signed_rank,
)
from .store import MemoryStore, open_store

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "ConditionedPrompt",
    "Tactic",
    "compose_prompt",
    "select_tactic",
    "DiagnosticsReport",
    "DivergenceSummary",
    "MatchedItem",
    "PipelineConfig",
    "compare_conditions",
    "deviation_correlation",
    "divergence_probe",
    "EmbedderConfig",
    "cosine",
    "embed",
    "mean_vector",
    "GeneratorConfig",
    "Recommendation",
    "generate",
    "generate_batch",
    "InteractionRecord",
    "LearnerState",
    "Need",
    "NeedVector",
    "assign_persona",
    "classify_signal",
    "derive_dominant_need",
    "update_need_vector",
    "PairedSample",
    "cohens_dz",
    "paired_t_test",
    "regularized_incomplete_beta",
    "wilcoxon_signed_rank",
    "MemoryStore",
    "open_store",
]
