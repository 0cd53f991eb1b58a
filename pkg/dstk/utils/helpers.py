"""Shared utility helpers for dstk."""

from __future__ import annotations

import hashlib
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, TypeVar

T = TypeVar("T")


def file_digest(path: str | Path, chunk_size: int = 1 << 20) -> str:
    """Return the hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def batched(items: Iterable[T], size: int) -> Iterator[list[T]]:
    """Yield consecutive lists of at most `size` items."""
    if size < 1:
        raise ValueError("batch size must be >= 1")
    iterator = iter(items)
    while True:
        batch = list(islice(iterator, size))
        if not batch:
            return
        yield batch


def format_score(value: float, places: int = 4) -> str:
    """Format a metric score with a fixed number of decimal places.

    Negative zero is printed as zero so reports stay byte-stable.
    """
    text = f"{value:.{places}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text
