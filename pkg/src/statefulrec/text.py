"""Tokenization and packaged word-list helpers."""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


_DATA_DIR = Path(__file__).resolve().parent / "data"


def data_path(*parts: str) -> Path:
    return _DATA_DIR.joinpath(*parts)


def read_wordlist(path: str | Path) -> frozenset[str]:
    """One token per line; blank lines and ``#`` comments are ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return read_wordlist(data_path("stopwords.txt"))


def content_words(text: str, limit: int, stopwords: frozenset[str] | None = None) -> list[str]:
    """First ``limit`` distinct non-stopword tokens of ``text``, in order."""
    if stopwords is None:
        stopwords = default_stopwords()
    out: list[str] = []
    for tok in tokenize(text):
        if tok in stopwords or tok in out:
            continue
        out.append(tok)
        if len(out) == limit:
            break
    return out
