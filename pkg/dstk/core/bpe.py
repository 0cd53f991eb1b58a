"""Byte-pair-encoding subword segmentation: learn, apply, decode."""

from __future__ import annotations

import heapq
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from dstk.core.corpus import Monotext, Sentence, read_lines, write_lines
from dstk.core.errors import BpeFormatError, ConfigError, CorpusError

logger = logging.getLogger(__name__)

END_OF_WORD = "</w>"
CONTINUATION = "@@"
MODEL_VERSION = "1.0"
MIN_PAIR_FREQUENCY = 2
DEFAULT_NUM_MERGES = 30_000
PROGRESS_EVERY = 1000

Pair = tuple[str, str]


@dataclass(frozen=True)
class BpeModel:
    """Ordered merge rules plus the marker conventions they were learned with."""

    merges: tuple[Pair, ...] = ()
    end_of_word_marker: str = END_OF_WORD
    continuation_marker: str = CONTINUATION
    frequencies: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.end_of_word_marker or not self.continuation_marker:
            raise ConfigError("BPE markers must be non-empty")
        markers = {self.end_of_word_marker, self.continuation_marker}
        for left, right in self.merges:
            if not left or not right:
                raise BpeFormatError(f"empty symbol in merge rule ({left!r}, {right!r})")
            if left + right in markers:
                raise BpeFormatError(
                    f"merge rule ({left}, {right}) produces a marker symbol"
                )

    def __len__(self) -> int:
        return len(self.merges)

    @property
    def ranks(self) -> dict[Pair, int]:
        return {pair: rank for rank, pair in enumerate(self.merges)}


# =============================================================================
# Learning
# =============================================================================


def _initial_symbols(word: str, eow: str) -> list[str]:
    return list(word[:-1]) + [word[-1] + eow]


def _pair_counts(symbols: list[str]) -> Counter[Pair]:
    return Counter(zip(symbols, symbols[1:]))


def _merge_symbols(symbols: list[str], pair: Pair) -> list[str]:
    """Merge every non-overlapping occurrence of `pair`, left to right."""
    left, right = pair
    merged: list[str] = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == left and symbols[i + 1] == right:
            merged.append(left + right)
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return merged


def word_frequencies(corpus: Monotext) -> Counter[str]:
    frequencies: Counter[str] = Counter()
    for sentence in corpus:
        frequencies.update(sentence.tokens)
    return frequencies


def learn_bpe(
    corpus: Monotext | Counter[str],
    num_merges: int,
    min_frequency: int = MIN_PAIR_FREQUENCY,
    end_of_word_marker: str = END_OF_WORD,
    continuation_marker: str = CONTINUATION,
) -> BpeModel:
    """Learn up to `num_merges` merge rules from a corpus or a word-frequency table.

    Each step merges the most frequent adjacent symbol pair, lexicographically
    smallest pair first on ties. Learning stops early once no pair reaches
    `min_frequency`.
    """
    if num_merges < 0:
        raise ConfigError(f"num_merges must be >= 0, got {num_merges}")
    table = corpus if isinstance(corpus, Counter) else word_frequencies(corpus)
    if not table:
        raise CorpusError("cannot learn BPE from an empty corpus")

    words = sorted(table)
    vocab = [_initial_symbols(word, end_of_word_marker) for word in words]
    freqs = [table[word] for word in words]

    stats: Counter[Pair] = Counter()
    index: dict[Pair, set[int]] = defaultdict(set)
    for wi, symbols in enumerate(vocab):
        for pair, count in _pair_counts(symbols).items():
            stats[pair] += count * freqs[wi]
            index[pair].add(wi)

    # Lazy heap: an entry is live only while its frequency matches `stats`.
    heap = [(-freq, pair) for pair, freq in stats.items()]
    heapq.heapify(heap)

    merges: list[Pair] = []
    recorded: list[int] = []
    while len(merges) < num_merges and heap:
        neg_freq, pair = heapq.heappop(heap)
        if stats.get(pair, 0) != -neg_freq:
            continue
        if -neg_freq < min_frequency:
            break
        merges.append(pair)
        recorded.append(-neg_freq)

        changed: set[Pair] = set()
        for wi in index.pop(pair, ()):
            symbols = vocab[wi]
            old = _pair_counts(symbols)
            if pair not in old:
                continue
            new_symbols = _merge_symbols(symbols, pair)
            for p, count in old.items():
                stats[p] -= count * freqs[wi]
                changed.add(p)
            for p, count in _pair_counts(new_symbols).items():
                stats[p] += count * freqs[wi]
                index[p].add(wi)
                changed.add(p)
            vocab[wi] = new_symbols
        for p in changed:
            if stats[p] > 0:
                heapq.heappush(heap, (-stats[p], p))
            else:
                del stats[p]

        if len(merges) % PROGRESS_EVERY == 0:
            logger.info("learned %d/%d merges", len(merges), num_merges)

    logger.info("learned %d merge rules from %d word types", len(merges), len(table))
    return BpeModel(
        tuple(merges), end_of_word_marker, continuation_marker, tuple(recorded)
    )


# =============================================================================
# Applying and decoding
# =============================================================================


class BpeSegmenter:
    """Applies a model to words, caching each word's segmentation."""

    def __init__(self, model: BpeModel):
        self.model = model
        self._ranks = model.ranks
        self._cache: dict[str, tuple[str, ...]] = {}

    def segment_word(self, word: str) -> tuple[str, ...]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        eow = self.model.end_of_word_marker
        cont = self.model.continuation_marker
        symbols = _initial_symbols(word, eow)
        while len(symbols) > 1:
            candidates = [
                (self._ranks[pair], pair)
                for pair in zip(symbols, symbols[1:])
                if pair in self._ranks
            ]
            if not candidates:
                break
            symbols = _merge_symbols(symbols, min(candidates)[1])
        last = symbols[-1][: -len(eow)]
        pieces = tuple(s + cont for s in symbols[:-1]) + (last,)
        self._cache[word] = pieces
        return pieces

    def segment(self, sentence: Sentence) -> Sentence:
        pieces: list[str] = []
        for token in sentence.tokens:
            pieces.extend(self.segment_word(token))
        return Sentence.from_tokens(pieces)


def apply_bpe(sentence: Sentence, model: BpeModel) -> Sentence:
    """Split every token into subwords; all but a word's last piece end in the continuation marker."""
    return BpeSegmenter(model).segment(sentence)


def apply_bpe_monotext(monotext: Monotext, model: BpeModel) -> Monotext:
    segmenter = BpeSegmenter(model)
    return Monotext(tuple(segmenter.segment(s) for s in monotext))


def decode_bpe(sentence: Sentence, model: BpeModel) -> Sentence:
    """Join continuation-marked subwords back into words."""
    cont = model.continuation_marker
    words: list[str] = []
    pending: str | None = None
    for piece in sentence.tokens:
        if piece.endswith(cont):
            pending = (pending or "") + piece[: -len(cont)]
            continue
        words.append((pending or "") + piece)
        pending = None
    if pending is not None:
        raise BpeFormatError(
            f"dangling continuation marker at end of sentence: {sentence.raw!r}"
        )
    return Sentence.from_tokens(words)


def decode_bpe_monotext(monotext: Monotext, model: BpeModel) -> Monotext:
    return Monotext(tuple(decode_bpe(s, model) for s in monotext))


# =============================================================================
# Model files
# =============================================================================


def save_bpe_model(model: BpeModel, path: str | Path) -> None:
    header = (
        f"#version: {MODEL_VERSION} "
        f"eow={model.end_of_word_marker} cont={model.continuation_marker}"
    )
    write_lines([header] + [f"{left} {right}" for left, right in model.merges], path)


def load_bpe_model(path: str | Path) -> BpeModel:
    lines = read_lines(path)
    if not lines or not lines[0].startswith("#version:"):
        raise BpeFormatError(f"{path}: missing '#version:' header")
    fields = lines[0].split()
    if len(fields) < 2 or fields[1] != MODEL_VERSION:
        raise BpeFormatError(f"{path}: unsupported model version in {lines[0]!r}")
    options = dict(f.split("=", 1) for f in fields[2:] if "=" in f)

    merges: list[Pair] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise BpeFormatError(f"{path}:{lineno}: expected 'left right', got {line!r}")
        merges.append((parts[0], parts[1]))
    return BpeModel(
        tuple(merges),
        options.get("eow", END_OF_WORD),
        options.get("cont", CONTINUATION),
    )
