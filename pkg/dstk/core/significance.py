"""Paired bootstrap resampling and multi-system comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from dstk.core.errors import AlignmentError, ConfigError
from dstk.core.metrics import (
    EvalPair,
    EvalReport,
    Metric,
    MetricStats,
    evaluate,
    lowercase_pairs,
)

logger = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 1000
DEFAULT_SEED = 12345
DEFAULT_ALPHA = 0.01
DEFAULT_TESTED_METRICS = (Metric.BLEU, Metric.TER)


@dataclass(frozen=True)
class SignificanceResult:
    metric: Metric
    baseline_score: float
    system_score: float
    delta: float
    p_value: float
    resamples: int

    def is_significant(self, alpha: float = DEFAULT_ALPHA) -> bool:
        return self.p_value < alpha


def _resample_weights(size: int, resamples: int, seed: int) -> Iterator[np.ndarray]:
    """Per-segment multiplicities of each resample, drawn with replacement."""
    rng = np.random.default_rng(seed)
    for _ in range(resamples):
        yield np.bincount(rng.integers(0, size, size=size), minlength=size)


def bootstrap_significance(
    baseline_pairs: Sequence[EvalPair],
    system_pairs: Sequence[EvalPair],
    metric: Metric,
    resamples: int = DEFAULT_RESAMPLES,
    rng_seed: int = DEFAULT_SEED,
) -> SignificanceResult:
    """Paired bootstrap test of system against baseline on one metric.

    The p-value is the fraction of resamples in which the sign of
    (system - baseline) differs from its sign on the full corpus. Identical
    full-corpus scores have no sign to preserve, giving p = 1.
    """
    if len(baseline_pairs) != len(system_pairs):
        raise AlignmentError(len(baseline_pairs), len(system_pairs), "baseline/system")
    if resamples < 1:
        raise ConfigError(f"resamples must be >= 1, got {resamples}")
    metric = Metric(metric)

    baseline = MetricStats(metric, baseline_pairs)
    system = MetricStats(metric, system_pairs)
    baseline_score = baseline.score()
    system_score = system.score()
    observed = np.sign(system_score - baseline_score)

    flipped = 0
    for weights in _resample_weights(len(baseline_pairs), resamples, rng_seed):
        delta = system.score(weights) - baseline.score(weights)
        if observed == 0 or np.sign(delta) != observed:
            flipped += 1

    result = SignificanceResult(
        metric=metric,
        baseline_score=baseline_score,
        system_score=system_score,
        delta=system_score - baseline_score,
        p_value=flipped / resamples,
        resamples=resamples,
    )
    logger.info(
        "%s: delta=%.4f p=%.4f over %d resamples",
        metric.value,
        result.delta,
        result.p_value,
        resamples,
    )
    return result


# =============================================================================
# Multi-system comparison
# =============================================================================


@dataclass
class SystemRow:
    name: str
    report: EvalReport
    better: dict[Metric, bool] = field(default_factory=dict)
    tests: dict[str, dict[Metric, SignificanceResult]] = field(default_factory=dict)

    def significant(self, metric: Metric, alpha: float) -> list[str]:
        """Names of the baselines this system significantly differs from on `metric`."""
        return [
            baseline
            for baseline, results in self.tests.items()
            if metric in results and results[metric].is_significant(alpha)
        ]


@dataclass
class ComparisonReport:
    baseline: str
    rows: list[SystemRow]
    metrics: tuple[Metric, ...]
    alpha: float


def compare_systems(
    systems: Mapping[str, Sequence[EvalPair]],
    tested_metrics: Sequence[Metric] = DEFAULT_TESTED_METRICS,
    resamples: int = DEFAULT_RESAMPLES,
    rng_seed: int = DEFAULT_SEED,
    alpha: float = DEFAULT_ALPHA,
    second_baseline: str | None = None,
    lowercase: bool = False,
) -> ComparisonReport:
    """Score several systems on one reference and test each against the first.

    With `second_baseline`, systems listed after it are also tested against
    it, so a result can be significant against both.
    """
    if not systems:
        raise ConfigError("no systems to compare")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    names = list(systems)
    if second_baseline is not None and second_baseline not in names[1:]:
        raise ConfigError(f"second baseline {second_baseline!r} is not a compared system")

    pairs = {
        name: lowercase_pairs(p) if lowercase else list(p)
        for name, p in systems.items()
    }
    baseline = names[0]
    rows = [SystemRow(name, evaluate(pairs[name])) for name in names]
    base_report = rows[0].report
    for position, row in enumerate(rows[1:], start=1):
        for metric in Metric:
            ours, theirs = row.report.score(metric), base_report.score(metric)
            row.better[metric] = ours > theirs if metric.higher_is_better else ours < theirs
        references = [baseline]
        if second_baseline and names.index(second_baseline) < position:
            references.append(second_baseline)
        for reference in references:
            row.tests[reference] = {
                metric: bootstrap_significance(
                    pairs[reference], pairs[row.name], metric, resamples, rng_seed
                )
                for metric in tested_metrics
            }
    return ComparisonReport(baseline, rows, tuple(tested_metrics), alpha)
