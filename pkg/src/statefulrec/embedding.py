"""Text embeddings and the vector primitives the diagnostics rely on.

The stub backend is signed feature hashing over FNV-1a 64-bit token hashes,
which makes every vector bit-reproducible without a model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import httpx
import numpy as np

from . import _http
from .errors import InvalidConfigurationError, InvalidInputError, BackendError
from .text import tokenize

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1
DEGENERATE_NORM = 1e-12


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = "stub"
    dimension: int = 64
    endpoint: str | None = None
    timeout_ms: int = 30_000
    max_parallel: int = 4

    def __post_init__(self):
        if self.backend not in ("stub", "http"):
            raise InvalidConfigurationError(f"unknown embedder backend {self.backend!r}")
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise InvalidConfigurationError(f"dimension must be a positive integer, got {self.dimension!r}")
        if self.backend == "http" and not self.endpoint:
            raise InvalidConfigurationError("http embedder requires an endpoint")
        if self.max_parallel < 1:
            raise InvalidConfigurationError("max_parallel must be positive")


def _stub_embed(text: str, dimension: int) -> np.ndarray:
    vec = np.zeros(dimension)
    for tok in tokenize(text):
        h = fnv1a_64(tok.encode("utf-8"))
        vec[h % dimension] += -1.0 if h >> 63 else 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def _http_embed(client: httpx.Client, text: str, config: EmbedderConfig) -> np.ndarray:
    body = _http.post_json(client, config.endpoint, {"text": text}, config.timeout_ms)
    values = body.get("values")
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise BackendError("embedding response lacks a numeric 'values' list")
    if len(values) != config.dimension:
        raise BackendError(f"embedding has dimension {len(values)}, expected {config.dimension}")
    vec = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise BackendError("embedding contains non-finite values")
    return vec


def embed(text: str, config: EmbedderConfig = EmbedderConfig()) -> np.ndarray:
    if not text or not text.strip():
        raise InvalidInputError("cannot embed empty text")
    if config.backend == "stub":
        return _stub_embed(text, config.dimension)
    with httpx.Client() as client:
        return _http_embed(client, text, config)


def embed_many(texts: Sequence[str], config: EmbedderConfig = EmbedderConfig()) -> list[np.ndarray]:
    """Embed in input order; http calls run with bounded parallelism."""
    for text in texts:
        if not text or not text.strip():
            raise InvalidInputError("cannot embed empty text")
    if config.backend == "stub":
        return [_stub_embed(t, config.dimension) for t in texts]
    with httpx.Client() as client:
        return _http.bounded_map(lambda t: _http_embed(client, t, config), texts, config.max_parallel)


def _check_dims(vectors: Sequence[np.ndarray]) -> int:
    dims = {np.shape(v) for v in vectors}
    if len(dims) != 1:
        raise InvalidInputError(f"vectors have mixed shapes {sorted(dims)}")
    (shape,) = dims
    if len(shape) != 1:
        raise InvalidInputError("embedding vectors must be one-dimensional")
    return shape[0]


def mean_vector(vectors: Sequence[np.ndarray]) -> np.ndarray:
    if len(vectors) == 0:
        raise InvalidInputError("mean of an empty set of vectors")
    _check_dims(vectors)
    return np.mean(np.asarray(vectors, dtype=float), axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector has (near-)zero norm."""
    _check_dims([a, b])
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        return 0.0
    c = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, c))
