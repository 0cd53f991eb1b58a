"""Tokenization and n-gram counting kernels."""

from __future__ import annotations

import unicodedata
from collections import Counter
from typing import Sequence, Tuple

Ngram = Tuple[str, ...]


def normalize_text(text: str, form: str | None = "NFC", lowercase: bool = False) -> str:
    """Apply Unicode normalization and optional case folding."""
    if form:
        text = unicodedata.normalize(form, text)
    if lowercase:
        text = text.lower()
    return text


def split_tokens(text: str) -> tuple[str, ...]:
    """Split on Unicode whitespace, collapsing runs and dropping empties."""
    return tuple(text.split())


def ngram_counts(
    tokens: Sequence[str], max_order: int, min_order: int = 1
) -> Counter[Ngram]:
    """Count every contiguous n-gram of order min_order..max_order.

    Keys are inserted order by order, left to right, so iteration order is
    a pure function of the token sequence.
    """
    counts: Counter[Ngram] = Counter()
    length = len(tokens)
    for n in range(min_order, min(max_order, length) + 1):
        for i in range(length - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return counts


def char_ngram_counts(text: str, n: int) -> Counter[str]:
    """Count character n-grams of a single order."""
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def ngram_occurrences(length: int, max_order: int) -> int:
    """Closed-form number of n-gram occurrences in a sentence of `length` tokens."""
    return sum(length - n + 1 for n in range(1, min(max_order, length) + 1))
