"""Shared string normalization for answer and passage-title matching."""

from __future__ import annotations

import re
import string
from functools import lru_cache

_PUNCT_TABLE = {ord(c): None for c in string.punctuation}
_ARTICLES = re.compile(r"\b(?:a|an|the)\b")


# Gold answers and titles repeat heavily during batch scoring; memoizing
# keeps the scorer inside its throughput budget.
@lru_cache(maxsize=1 << 16)
def normalize_answer(text: str) -> str:
    """Normalize an answer string for token-level comparison.

    Lowercase, strip punctuation, drop the articles a/an/the as whole
    words, and collapse whitespace runs to single spaces.
    """
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


@lru_cache(maxsize=1 << 16)
def normalize_title(title: str) -> str:
    """Normalize a passage title used as a citation key.

    Titles keep their punctuation (many contain commas); matching is
    whitespace-collapsed and case-insensitive.
    """
    return " ".join(title.split()).lower()
