"""Feature Decay Algorithm data selection.

A candidate's score is the sum, over its n-gram occurrences that also
occur in the seed, of ``decay_base ** C_L(ngram)`` divided by its token
count, where ``C_L`` counts the n-gram across the sentences already
selected. The highest-scoring candidate is selected, ``C_L`` grows, and
the loop repeats.

Scores only ever go down as ``C_L`` grows, so selection uses a lazy max
heap: a popped entry is rescored and accepted if it still beats the best
stale key left in the heap, otherwise it goes back in with its new score.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from dstk.core.corpus import Monotext, Sentence, extract_ngrams
from dstk.core.errors import ConfigError, SelectionError
from dstk.utils.tokenizer import Ngram

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 3
DEFAULT_DECAY_BASE = 0.5
DEFAULT_SELECTION_SIZE = 50_000
PROGRESS_EVERY = 10_000


@dataclass(frozen=True)
class FdaConfig:
    max_order: int = DEFAULT_MAX_ORDER
    decay_base: float = DEFAULT_DECAY_BASE
    selection_size: int = DEFAULT_SELECTION_SIZE

    def __post_init__(self) -> None:
        if self.max_order < 1:
            raise ConfigError(f"max_order must be >= 1, got {self.max_order}")
        if not 0.0 < self.decay_base < 1.0:
            raise ConfigError(
                f"decay_base must be strictly between 0 and 1, got {self.decay_base}"
            )
        if self.selection_size < 1:
            raise ConfigError(
                f"selection_size must be >= 1, got {self.selection_size}"
            )


@dataclass(frozen=True)
class SeedProfile:
    """The n-gram features of the seed text."""

    features: frozenset[Ngram]
    max_order: int

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, ngram: object) -> bool:
        return ngram in self.features


@dataclass
class SelectionState:
    """The selected pool L and the feature counts C_L."""

    selected: list[int] = field(default_factory=list)
    feature_counts: dict[Ngram, int] = field(default_factory=dict)

    def add(self, index: int, hits: Iterable[tuple[Ngram, int]]) -> None:
        self.selected.append(index)
        counts = self.feature_counts
        for ngram, count in hits:
            counts[ngram] = counts.get(ngram, 0) + count


@dataclass
class SelectionResult:
    indices: list[int]
    state: SelectionState
    truncated: bool = False
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        # Unpacks as (indices, state).
        return iter((self.indices, self.state))


def build_seed_profile(seed: Monotext, config: FdaConfig) -> SeedProfile:
    """Collect the set of seed n-grams of order 1..max_order."""
    features: set[Ngram] = set()
    for sentence in seed:
        features.update(extract_ngrams(sentence, config.max_order))
    if not features:
        raise SelectionError("seed has no tokens; selection would be vacuous")
    logger.info(
        "seed profile: %d features from %d sentences", len(features), len(seed)
    )
    return SeedProfile(frozenset(features), config.max_order)


def seed_hits(sentence: Sentence, profile: SeedProfile) -> list[tuple[Ngram, int]]:
    """The sentence's seed n-grams with their occurrence counts, in extraction order."""
    return [
        (ngram, count)
        for ngram, count in extract_ngrams(sentence, profile.max_order).items()
        if ngram in profile.features
    ]


def _decayed_score(
    keys: Sequence,
    occurrences: Sequence[int],
    feature_counts: Sequence[int] | Mapping,
    decay_base: float,
    length: int,
) -> float:
    # Shared by score_sentence and select: both must yield identical floats
    # for the same counts, term order included.
    if length == 0:
        return 0.0
    total = 0.0
    if isinstance(feature_counts, Mapping):
        for key, count in zip(keys, occurrences):
            total += count * decay_base ** feature_counts.get(key, 0)
    else:
        for key, count in zip(keys, occurrences):
            total += count * decay_base ** feature_counts[key]
    return total / length


def score_sentence(
    sentence: Sentence,
    profile: SeedProfile,
    state: SelectionState,
    config: FdaConfig,
) -> float:
    """Score one sentence against the seed given the current selection."""
    hits = seed_hits(sentence, profile)
    keys = [ngram for ngram, _ in hits]
    occurrences = [count for _, count in hits]
    return _decayed_score(
        keys, occurrences, state.feature_counts, config.decay_base, len(sentence)
    )


def select(
    candidates: Monotext, profile: SeedProfile, config: FdaConfig
) -> SelectionResult:
    """Greedily select `config.selection_size` candidates.

    Ties go to the lower candidate index. Asking for more sentences than
    there are candidates selects them all and flags the result as truncated.
    """
    size = config.selection_size
    result = SelectionResult(indices=[], state=SelectionState())
    if size > len(candidates):
        message = (
            f"requested {size} sentences but the pool has only {len(candidates)}; "
            "selecting every candidate"
        )
        logger.warning(message)
        result.truncated = True
        result.warnings.append(message)
        size = len(candidates)

    # Intern seed features as integer ids so C_L is a flat list.
    feature_ids: dict[Ngram, int] = {}
    hit_ids: list[tuple[int, ...]] = []
    hit_counts: list[tuple[int, ...]] = []
    lengths: list[int] = []
    for sentence in candidates:
        hits = seed_hits(sentence, profile)
        hit_ids.append(
            tuple(feature_ids.setdefault(ngram, len(feature_ids)) for ngram, _ in hits)
        )
        hit_counts.append(tuple(count for _, count in hits))
        lengths.append(len(sentence))
    id_to_ngram = list(feature_ids)
    counts = [0] * len(feature_ids)
    decay = config.decay_base

    heap = [
        (-_decayed_score(hit_ids[i], hit_counts[i], counts, decay, lengths[i]), i)
        for i in range(len(candidates))
    ]
    heapq.heapify(heap)
    logger.info("scored %d candidates; selecting %d", len(heap), size)

    selected = result.indices
    while heap and len(selected) < size:
        stale, index = heapq.heappop(heap)
        current = _decayed_score(
            hit_ids[index], hit_counts[index], counts, decay, lengths[index]
        )
        key = (-current, index)
        if -current != stale and heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        selected.append(index)
        for fid, count in zip(hit_ids[index], hit_counts[index]):
            counts[fid] += count
        if len(selected) % PROGRESS_EVERY == 0:
            logger.info("selected %d/%d", len(selected), size)

    result.state.selected = list(selected)
    result.state.feature_counts = {
        id_to_ngram[fid]: count for fid, count in enumerate(counts) if count
    }
    return result
