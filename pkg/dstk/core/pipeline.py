"""Hybrid corpus construction and test-set adaptation workflows."""

from __future__ import annotations

import logging
import shlex
import subprocess
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from dstk.core.corpus import (
    DEFAULT_TOKENIZER,
    Bitext,
    Monotext,
    Origin,
    SentencePair,
    TokenizerConfig,
)
from dstk.core.errors import (
    ConfigError,
    CorpusError,
    DstkError,
    ExternalCommandError,
    PipelineError,
    TranslatorTimeoutError,
)
from dstk.core.fda import (
    DEFAULT_SELECTION_SIZE,
    FdaConfig,
    SelectionResult,
    build_seed_profile,
    select,
)
from dstk.core.translators import TranslatorSpec, translate

logger = logging.getLogger(__name__)

DEFAULT_LOWER_RATIO = 0.5
DEFAULT_UPPER_RATIO = 1.5


# =============================================================================
# Length-ratio filter
# =============================================================================


@dataclass(frozen=True)
class RatioFilterConfig:
    """Keep a pair iff lower < len(source)/len(target) < upper, in tokens."""

    lower: float = DEFAULT_LOWER_RATIO
    upper: float = DEFAULT_UPPER_RATIO

    def __post_init__(self) -> None:
        if not 0.0 < self.lower < self.upper:
            raise ConfigError(
                f"ratio bounds must satisfy 0 < lower < upper, got {self.lower}, {self.upper}"
            )

    def keeps(self, pair: SentencePair) -> bool:
        target_len = len(pair.target)
        if target_len == 0:
            return False
        return self.lower < len(pair.source) / target_len < self.upper


@dataclass(frozen=True)
class RatioFilterStats:
    kept: int
    removed: int
    removed_empty_target: int


def ratio_filter(
    bitext: Bitext, config: RatioFilterConfig = RatioFilterConfig()
) -> tuple[Bitext, RatioFilterStats]:
    """Drop pairs whose source/target length ratio is out of bounds."""
    kept = tuple(pair for pair in bitext if config.keeps(pair))
    empty = sum(1 for pair in bitext if len(pair.target) == 0)
    stats = RatioFilterStats(
        kept=len(kept), removed=len(bitext) - len(kept), removed_empty_target=empty
    )
    logger.info(
        "ratio filter: kept %d, removed %d (%d empty targets)",
        stats.kept,
        stats.removed,
        stats.removed_empty_target,
    )
    return Bitext(kept), stats


# =============================================================================
# Hybrid corpus
# =============================================================================


class HybridMode(str, Enum):
    HYBRID = "hybrid"
    SYNTHETIC_ONLY = "synthetic-only"


@dataclass(frozen=True)
class HybridBuildReport:
    authentic_in: int
    synthetic_in: int
    authentic_removed: int
    synthetic_removed: int
    total_out: int

    def as_dict(self) -> dict[str, int]:
        return {
            "authentic_in": self.authentic_in,
            "synthetic_in": self.synthetic_in,
            "authentic_removed": self.authentic_removed,
            "synthetic_removed": self.synthetic_removed,
            "total_out": self.total_out,
        }


def back_translate(
    targets: Monotext,
    back_translator: TranslatorSpec,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    threads: int = 1,
) -> Bitext:
    """Pair each target sentence with its back-translation, tagged synthetic."""
    sources = translate(targets, back_translator, config, threads)
    return Bitext.from_sides(sources, targets, Origin.SYNTHETIC)


def build_hybrid(
    authentic: Bitext,
    back_translator: TranslatorSpec,
    filter_config: RatioFilterConfig = RatioFilterConfig(),
    mode: HybridMode = HybridMode.HYBRID,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    threads: int = 1,
) -> tuple[Bitext, HybridBuildReport]:
    """Back-translate the target side, filter both sets, concatenate.

    Target sentences appear twice in the hybrid output, once per origin.
    """
    if not len(authentic):
        raise CorpusError("cannot build a hybrid corpus from an empty bitext")
    synthetic = back_translate(authentic.targets(), back_translator, config, threads)
    synthetic_kept, synthetic_stats = ratio_filter(synthetic, filter_config)

    if mode is HybridMode.SYNTHETIC_ONLY:
        output = synthetic_kept
        authentic_in = authentic_removed = 0
    else:
        authentic_kept, authentic_stats = ratio_filter(authentic, filter_config)
        output = authentic_kept.concat(synthetic_kept)
        authentic_in, authentic_removed = len(authentic), authentic_stats.removed

    report = HybridBuildReport(
        authentic_in=authentic_in,
        synthetic_in=len(synthetic),
        authentic_removed=authentic_removed,
        synthetic_removed=synthetic_stats.removed,
        total_out=len(output),
    )
    logger.info("hybrid corpus: %s", report)
    return output, report


# =============================================================================
# Test-set adaptation
# =============================================================================


@dataclass(frozen=True)
class AdaptationPlan:
    test_source: Monotext
    mono_pool: Monotext
    forward_translator: TranslatorSpec
    back_translator: TranslatorSpec
    selection_size: int = DEFAULT_SELECTION_SIZE
    fda_config: FdaConfig = FdaConfig()

    def __post_init__(self) -> None:
        if self.selection_size < 1:
            raise ConfigError(f"selection_size must be >= 1, got {self.selection_size}")

    @property
    def selection_config(self) -> FdaConfig:
        return replace(self.fda_config, selection_size=self.selection_size)


@dataclass
class AdaptationResult:
    corpus: Bitext
    seed: Monotext
    selection: SelectionResult
    warnings: list[str] = field(default_factory=list)


def _phase(name: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except DstkError as e:
        raise PipelineError(name, e) from e


def adapt_to_test(
    plan: AdaptationPlan,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    threads: int = 1,
) -> AdaptationResult:
    """Build the synthetic fine-tuning corpus for one test set.

    1. pre-translate the test set to get a target-language seed;
    2. select the pool sentences closest to the seed with FDA;
    3. back-translate the selection into synthetic pairs.
    Fine-tuning itself is left to an external trainer.
    """
    seed = _phase(
        "pre-translation",
        translate,
        plan.test_source,
        plan.forward_translator,
        config,
        threads,
    )
    fda_config = plan.selection_config
    profile = _phase("data-selection", build_seed_profile, seed, fda_config)
    selection = _phase("data-selection", select, plan.mono_pool, profile, fda_config)
    selected = Monotext(tuple(plan.mono_pool[i] for i in selection.indices))
    corpus = _phase(
        "back-translation", back_translate, selected, plan.back_translator, config, threads
    )
    logger.info("fine-tuning corpus: %d pairs", len(corpus))
    return AdaptationResult(corpus, seed, selection, list(selection.warnings))


def run_finetune_hook(
    template: str,
    source_path: str | Path,
    target_path: str | Path,
    timeout: float | None = None,
) -> None:
    """Hand the emitted corpus to an external trainer command."""
    command = template.replace("{source}", shlex.quote(str(source_path))).replace(
        "{target}", shlex.quote(str(target_path))
    )
    logger.info("running fine-tune hook: %s", command)
    try:
        result = subprocess.run(  # noqa: S602 - user-supplied trainer command
            command, shell=True, capture_output=True, text=True, timeout=timeout
        )
    except subprocess.TimeoutExpired as e:
        raise PipelineError("fine-tune", TranslatorTimeoutError(template, timeout or 0)) from e
    if result.returncode != 0:
        raise PipelineError(
            "fine-tune", ExternalCommandError(template, result.returncode, result.stderr)
        )
