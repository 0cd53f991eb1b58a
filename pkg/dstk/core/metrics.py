"""Corpus-level MT evaluation: BLEU, NIST, TER and chrF.

Each metric is split into per-segment sufficient statistics and a corpus
score computed from their (weighted) sum, so the bootstrap in
``significance`` can resample segments without rescoring them.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from dstk.core.corpus import Monotext, Sentence
from dstk.core.errors import AlignmentError, ConfigError, MetricError
from dstk.utils.tokenizer import Ngram, char_ngram_counts, ngram_counts

BLEU_ORDER = 4
NIST_ORDER = 5
CHRF_ORDER = 6
TER_MAX_SHIFT_SIZE = 10
# exp(beta * log(2/3)^2) == 0.5
NIST_BP_BETA = math.log(0.5) / math.log(2.0 / 3.0) ** 2


class Metric(str, Enum):
    BLEU = "bleu"
    NIST = "nist"
    TER = "ter"
    CHRF3 = "chrf3"
    CHRF1 = "chrf1"

    @property
    def higher_is_better(self) -> bool:
        return self is not Metric.TER


@dataclass(frozen=True)
class EvalPair:
    hypothesis: Sentence
    reference: Sentence


@dataclass(frozen=True)
class EvalReport:
    """Corpus scores on the usual reporting scales (BLEU 0-1, chrF 0-100)."""

    bleu: float
    nist: float
    ter: float
    chrf3: float
    chrf1: float
    segment_count: int

    def score(self, metric: Metric) -> float:
        return float(getattr(self, metric.value))


def make_eval_pairs(hypotheses: Monotext, references: Monotext) -> list[EvalPair]:
    if len(hypotheses) != len(references):
        raise AlignmentError(len(hypotheses), len(references), "hypothesis/reference")
    return [EvalPair(h, r) for h, r in zip(hypotheses, references)]


def _require_pairs(pairs: Sequence[EvalPair]) -> None:
    if not pairs:
        raise MetricError("cannot score an empty corpus")


# =============================================================================
# BLEU
# =============================================================================


def bleu_segment_stats(pair: EvalPair) -> list[int]:
    """[matches_1..4, totals_1..4, hyp_len, ref_len] with clipped matches."""
    hyp = pair.hypothesis.tokens
    ref_counts = ngram_counts(pair.reference.tokens, BLEU_ORDER)
    matches = [0] * BLEU_ORDER
    totals = [0] * BLEU_ORDER
    for ngram, count in ngram_counts(hyp, BLEU_ORDER).items():
        n = len(ngram) - 1
        totals[n] += count
        matches[n] += min(count, ref_counts.get(ngram, 0))
    return matches + totals + [len(hyp), len(pair.reference.tokens)]


def bleu_from_stats(totals: Sequence[float]) -> float:
    matches = totals[:BLEU_ORDER]
    counts = totals[BLEU_ORDER : 2 * BLEU_ORDER]
    hyp_len, ref_len = totals[2 * BLEU_ORDER], totals[2 * BLEU_ORDER + 1]
    if hyp_len == 0 or any(m == 0 for m in matches) or any(c == 0 for c in counts):
        return 0.0
    log_precision = sum(math.log(m / c) for m, c in zip(matches, counts)) / BLEU_ORDER
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_precision)


def bleu(pairs: Sequence[EvalPair]) -> float:
    """Corpus BLEU (0-1), n = 1..4, no smoothing."""
    _require_pairs(pairs)
    return bleu_from_stats(_column_sums(bleu_segment_stats(p) for p in pairs))


# =============================================================================
# NIST
# =============================================================================


@dataclass(frozen=True)
class NistSegmentStats:
    hyp_len: int
    ref_len: int
    hyp_totals: tuple[int, ...]
    matches: Counter[Ngram]
    reference_ngrams: Counter[Ngram]


def nist_segment_stats(pair: EvalPair) -> NistSegmentStats:
    hyp_counts = ngram_counts(pair.hypothesis.tokens, NIST_ORDER)
    ref_counts = ngram_counts(pair.reference.tokens, NIST_ORDER)
    totals = [0] * NIST_ORDER
    for ngram, count in hyp_counts.items():
        totals[len(ngram) - 1] += count
    return NistSegmentStats(
        hyp_len=len(pair.hypothesis),
        ref_len=len(pair.reference),
        hyp_totals=tuple(totals),
        matches=hyp_counts & ref_counts,
        reference_ngrams=ref_counts,
    )


def nist_from_stats(
    segments: Sequence[NistSegmentStats], weights: Sequence[int] | None = None
) -> float:
    if weights is None:
        weights = [1] * len(segments)
    reference: Counter[Ngram] = Counter()
    matched: Counter[Ngram] = Counter()
    hyp_totals = [0] * NIST_ORDER
    hyp_len = ref_len = 0
    for stats, weight in zip(segments, weights):
        if not weight:
            continue
        for ngram, count in stats.reference_ngrams.items():
            reference[ngram] += count * weight
        for ngram, count in stats.matches.items():
            matched[ngram] += count * weight
        for n in range(NIST_ORDER):
            hyp_totals[n] += stats.hyp_totals[n] * weight
        hyp_len += stats.hyp_len * weight
        ref_len += stats.ref_len * weight

    unigram_total = sum(c for g, c in reference.items() if len(g) == 1)
    gained = [0.0] * NIST_ORDER
    for ngram, count in matched.items():
        context = reference[ngram[:-1]] if len(ngram) > 1 else unigram_total
        gained[len(ngram) - 1] += count * math.log2(context / reference[ngram])
    score = sum(g / t for g, t in zip(gained, hyp_totals) if t)

    if ref_len == 0:
        return score
    ratio = min(hyp_len / ref_len, 1.0)
    if ratio <= 0:
        return 0.0
    return score * math.exp(NIST_BP_BETA * math.log(ratio) ** 2)


def nist(pairs: Sequence[EvalPair]) -> float:
    """Corpus NIST, n = 1..5, information weights from the reference side."""
    _require_pairs(pairs)
    return nist_from_stats([nist_segment_stats(p) for p in pairs])


# =============================================================================
# TER
# =============================================================================


def edit_distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Levenshtein distance over tokens (unit costs)."""
    previous = list(range(len(ref) + 1))
    for i, word in enumerate(hyp, start=1):
        current = [i] + [0] * len(ref)
        for j, ref_word in enumerate(ref, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (word != ref_word),
            )
        previous = current
    return previous[-1]


def _shift_candidates(hyp: list[str], ref: Sequence[str]):
    """Yield (start, length, target) for blocks of hyp that match ref exactly elsewhere."""
    for i in range(len(hyp)):
        for j in range(len(ref)):
            if i == j or hyp[i] != ref[j]:
                continue
            length = 0
            while (
                length < TER_MAX_SHIFT_SIZE
                and i + length < len(hyp)
                and j + length < len(ref)
                and hyp[i + length] == ref[j + length]
            ):
                length += 1
                yield i, length, j


def _apply_shift(hyp: list[str], start: int, length: int, target: int) -> list[str]:
    block = hyp[start : start + length]
    rest = hyp[:start] + hyp[start + length :]
    return rest[:target] + block + rest[target:]


def ter_edits(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, int]:
    """Return (shifts, edit distance after shifting) for one segment.

    Shifts are taken greedily, best first, while one lowers the edit
    distance by more than the shift itself costs.
    """
    current = list(hyp)
    distance = edit_distance(current, ref)
    shifts = 0
    while distance > 0:
        best: tuple[int, list[str]] | None = None
        for start, length, target in _shift_candidates(current, ref):
            shifted = _apply_shift(current, start, length, target)
            if shifted == current:
                continue
            new_distance = edit_distance(shifted, ref)
            if best is None or new_distance < best[0]:
                best = (new_distance, shifted)
        if best is None or distance - best[0] <= 1:
            break
        distance, current = best
        shifts += 1
    return shifts, distance


def ter_segment_stats(pair: EvalPair) -> list[int]:
    """[edits, ref_len] for one segment."""
    shifts, distance = ter_edits(pair.hypothesis.tokens, pair.reference.tokens)
    return [shifts + distance, len(pair.reference)]


def ter_from_stats(totals: Sequence[float]) -> float:
    edits, ref_len = totals
    if ref_len == 0:
        raise MetricError("TER is undefined for an empty reference corpus")
    return edits / ref_len


def ter(pairs: Sequence[EvalPair]) -> float:
    """Corpus TER: total edits over total reference tokens."""
    _require_pairs(pairs)
    return ter_from_stats(_column_sums(ter_segment_stats(p) for p in pairs))


# =============================================================================
# chrF
# =============================================================================


def chrf_segment_stats(pair: EvalPair) -> list[int]:
    """[hyp_n, ref_n, common_n] for n = 1..6, whitespace removed."""
    hyp = "".join(pair.hypothesis.tokens)
    ref = "".join(pair.reference.tokens)
    stats: list[int] = []
    for n in range(1, CHRF_ORDER + 1):
        hyp_counts = char_ngram_counts(hyp, n)
        ref_counts = char_ngram_counts(ref, n)
        stats.extend(
            [
                sum(hyp_counts.values()),
                sum(ref_counts.values()),
                sum((hyp_counts & ref_counts).values()),
            ]
        )
    return stats


def chrf_precision_recall(totals: Sequence[float]) -> tuple[float, float]:
    """Average precision and recall over character n-gram orders.

    An order where only one side has n-grams counts as zero; an order where
    neither side has any is left out of the average.
    """
    precision = recall = 0.0
    orders = 0
    for n in range(CHRF_ORDER):
        hyp_n, ref_n, common = totals[3 * n : 3 * n + 3]
        if hyp_n == 0 and ref_n == 0:
            continue
        orders += 1
        if hyp_n:
            precision += common / hyp_n
        if ref_n:
            recall += common / ref_n
    if orders == 0:
        return 0.0, 0.0
    return precision / orders, recall / orders


def f_beta(precision: float, recall: float, beta: float) -> float:
    if precision + recall == 0:
        return 0.0
    beta2 = beta * beta
    return (1 + beta2) * precision * recall / (beta2 * precision + recall)


def chrf_from_stats(totals: Sequence[float], beta: float) -> float:
    precision, recall = chrf_precision_recall(totals)
    return 100.0 * f_beta(precision, recall, beta)


def chrf_statistics(pairs: Sequence[EvalPair]) -> tuple[float, float]:
    """Corpus-averaged (precision, recall) that chrF combines."""
    _require_pairs(pairs)
    return chrf_precision_recall(_column_sums(chrf_segment_stats(p) for p in pairs))


def chrf(pairs: Sequence[EvalPair], beta: float) -> float:
    """Corpus chrF on a 0-100 scale."""
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    _require_pairs(pairs)
    return chrf_from_stats(_column_sums(chrf_segment_stats(p) for p in pairs), beta)


# =============================================================================
# Battery
# =============================================================================


def _column_sums(rows: Iterable[Sequence[int]]) -> list[int]:
    totals: list[int] = []
    for row in rows:
        if not totals:
            totals = [0] * len(row)
        for k, value in enumerate(row):
            totals[k] += value
    return totals


class MetricStats:
    """Per-segment statistics of one metric, reusable across resamples."""

    def __init__(self, metric: Metric, pairs: Sequence[EvalPair]):
        _require_pairs(pairs)
        self.metric = metric
        self.size = len(pairs)
        if metric is Metric.NIST:
            self._segments = [nist_segment_stats(p) for p in pairs]
        else:
            rows = [self._segment_row(p) for p in pairs]
            self._matrix = np.asarray(rows, dtype=np.int64)

    def _segment_row(self, pair: EvalPair) -> list[int]:
        if self.metric is Metric.BLEU:
            return bleu_segment_stats(pair)
        if self.metric is Metric.TER:
            return ter_segment_stats(pair)
        return chrf_segment_stats(pair)

    def score(self, weights: np.ndarray | None = None) -> float:
        """Corpus score with each segment counted `weights[i]` times."""
        if self.metric is Metric.NIST:
            return nist_from_stats(
                self._segments, None if weights is None else weights.tolist()
            )
        if weights is None:
            totals = self._matrix.sum(axis=0)
        else:
            totals = weights.astype(np.int64) @ self._matrix
        totals = totals.tolist()
        if self.metric is Metric.BLEU:
            return bleu_from_stats(totals)
        if self.metric is Metric.TER:
            return ter_from_stats(totals)
        return chrf_from_stats(totals, 3.0 if self.metric is Metric.CHRF3 else 1.0)


def lowercase_pairs(pairs: Sequence[EvalPair]) -> list[EvalPair]:
    def lower(sentence: Sentence) -> Sentence:
        return Sentence(sentence.raw.lower(), tuple(t.lower() for t in sentence.tokens))

    return [EvalPair(lower(p.hypothesis), lower(p.reference)) for p in pairs]


def evaluate(pairs: Sequence[EvalPair], lowercase: bool = False) -> EvalReport:
    """Score a corpus with the full metric battery."""
    _require_pairs(pairs)
    if lowercase:
        pairs = lowercase_pairs(pairs)
    chrf_totals = _column_sums(chrf_segment_stats(p) for p in pairs)
    return EvalReport(
        bleu=bleu(pairs),
        nist=nist(pairs),
        ter=ter(pairs),
        chrf3=chrf_from_stats(chrf_totals, 3.0),
        chrf1=chrf_from_stats(chrf_totals, 1.0),
        segment_count=len(pairs),
    )
