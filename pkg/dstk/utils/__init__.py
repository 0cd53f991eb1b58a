"""dstk utilities."""

from dstk.utils.helpers import batched, file_digest, format_score
from dstk.utils.tokenizer import Ngram, ngram_counts, normalize_text, split_tokens

__all__ = [
    "Ngram",
    "batched",
    "file_digest",
    "format_score",
    "ngram_counts",
    "normalize_text",
    "split_tokens",
]
