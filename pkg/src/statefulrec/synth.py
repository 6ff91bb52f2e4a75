"""Seeded synthetic interaction corpus.

Random numbers come from xoshiro256** (Blackman & Vigna) whose 256-bit
state is filled by four successive splitmix64 outputs of the seed. The
generator is implemented here, rather than taken from ``random`` or numpy,
so the byte stream is pinned independently of interpreter and library
versions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .errors import InvalidParameterError
from .learner import Need
from .text import data_path

MASK64 = (1 << 64) - 1
BASE_TIMESTAMP_MS = 1_700_000_000_000
SLOT_MS = 3_600_000


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    def __init__(self, seed: int):
        sm = seed & MASK64
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def weighted_index(self, weights: Sequence[float]) -> int:
        total = sum(weights)
        if total <= 0:
            return self.randbelow(len(weights))
        u = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1


@dataclass(frozen=True)
class QuestionBank:
    templates: dict[Need, tuple[str, ...]]
    topics: tuple[str, ...]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "QuestionBank":
        path = Path(path) if path is not None else data_path("question_bank.json")
        raw = json.loads(path.read_text(encoding="utf-8"))
        return cls({n: tuple(raw[n.value]) for n in Need}, tuple(raw["topics"]))


@lru_cache(maxsize=None)
def default_bank() -> QuestionBank:
    return QuestionBank.load()


def synthesize(seed: int, n_questions: int = 50, n_learners: int = 20,
               bank: QuestionBank | None = None) -> list[dict]:
    """Build ``n_questions`` interaction records as JSON-ready dicts.

    Each learner gets a need tendency per component drawn uniformly from
    [0, 1). Questions go to learners round-robin, shifted by a random jitter
    of 0-2 slots, and each question's need category is drawn in proportion
    to its learner's tendencies. Timestamps are strictly increasing.
    """
    if n_questions < 1 or n_learners < 1:
        raise InvalidParameterError("n_questions and n_learners must be positive")
    bank = bank or default_bank()
    rng = Xoshiro256StarStar(seed)
    width = max(3, len(str(n_learners)))
    learners = [f"L{i + 1:0{width}d}" for i in range(n_learners)]
    tendencies = [[rng.random() for _ in Need] for _ in learners]
    needs = list(Need)
    qwidth = max(4, len(str(n_questions)))
    records = []
    for i in range(n_questions):
        who = (i + rng.randbelow(3)) % n_learners
        need = needs[rng.weighted_index(tendencies[who])]
        options = bank.templates[need]
        template = options[rng.randbelow(len(options))]
        topic = bank.topics[rng.randbelow(len(bank.topics))]
        records.append({
            "learner_id": learners[who],
            "question_id": f"q{i + 1:0{qwidth}d}",
            "question_text": template.replace("{topic}", topic),
            "timestamp": BASE_TIMESTAMP_MS + i * SLOT_MS + rng.randbelow(SLOT_MS // 2),
        })
    return records


def dumps_jsonl(records: Sequence[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
