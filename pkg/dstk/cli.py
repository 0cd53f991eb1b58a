"""dstk CLI commands."""

from __future__ import annotations

import logging
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import __version__
from .core import bpe, fda, pipeline, significance, translators
from .core.config import get_config
from .core.corpus import (
    STDIO,
    Monotext,
    TokenizerConfig,
    load_bitext,
    load_monotext,
    save_bitext,
    save_monotext,
    save_origins,
    write_lines,
)
from .core.errors import ConfigError, DstkError
from .core.history import RunHistory, get_history
from .core.manifest import RunManifest, default_manifest_path
from .core.metrics import (
    EvalPair,
    EvalReport,
    Metric,
    evaluate,
    lowercase_pairs,
    make_eval_pairs,
)
from .utils.helpers import format_score

logger = logging.getLogger(__name__)

# Machine-readable reports go to stdout; everything meant for people goes here.
err_console = Console(stderr=True)
console = Console()

CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"], "show_default": True}

# Subcommands that inspect dstk itself and are not recorded in the run history.
UNRECORDED = {"history", "config"}

METRIC_CHOICE = click.Choice([m.value for m in Metric])


@dataclass
class RunContext:
    """Global flags plus what the running subcommand reports back."""

    lowercase: bool = False
    seed: int = significance.DEFAULT_SEED
    threads: int = 1
    manifest_path: str | None = None
    lines_in: int = 0
    lines_out: int = 0
    manifest_written: str | None = None

    @property
    def tokenizer(self) -> TokenizerConfig:
        return TokenizerConfig(lowercase=self.lowercase)


class DstkGroup(click.Group):
    """Group that turns dstk errors into exit codes and records each run."""

    def invoke(self, ctx: click.Context) -> Any:
        start = time.monotonic()
        exit_code = 0
        try:
            return super().invoke(ctx)
        except DstkError as e:
            exit_code = e.exit_code
            err_console.print(
                f"[red]error:[/red] {escape(str(e))}", highlight=False, soft_wrap=True
            )
            ctx.exit(exit_code)
        except click.exceptions.Exit as e:
            exit_code = e.exit_code
            raise
        except click.ClickException as e:
            exit_code = e.exit_code
            raise
        finally:
            _record_run(ctx, exit_code, start)


def _record_run(ctx: click.Context, exit_code: int, start: float) -> None:
    subcommand = ctx.invoked_subcommand
    if not subcommand or subcommand in UNRECORDED:
        return
    run = ctx.obj if isinstance(ctx.obj, RunContext) else RunContext()
    try:
        if not get_config().history_enabled:
            return
        get_history().record(
            subcommand=subcommand,
            exit_code=exit_code,
            elapsed_ms=int((time.monotonic() - start) * 1000),
            manifest_path=run.manifest_written,
            lines_in=run.lines_in,
            lines_out=run.lines_out,
        )
    except (sqlite3.Error, OSError, DstkError) as e:
        logger.debug("run history not recorded: %s", e)


def _setup_logging(verbose: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    handler = RichHandler(console=err_console, show_time=False, show_path=False)
    package_logger = logging.getLogger("dstk")
    package_logger.handlers[:] = [handler]
    package_logger.setLevel(level)


@click.group(cls=DstkGroup, context_settings=CONTEXT_SETTINGS)
@click.version_option(__version__, "--version", prog_name="dstk")
@click.option(
    "--lowercase",
    is_flag=True,
    help="Case-fold text before tokenizing, for selection, BPE and metrics alike.",
)
@click.option(
    "--seed",
    type=int,
    default=significance.DEFAULT_SEED,
    show_default=True,
    help="Random seed for bootstrap resampling.",
)
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Parallel external-translator batches.",
)
@click.option(
    "--manifest-path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Where to write the run manifest [default: <output>.manifest.yaml].",
)
@click.option("--verbose", "-v", is_flag=True, help="Log progress (INFO).")
@click.option("--debug", is_flag=True, help="Log everything (DEBUG).")
@click.pass_context
def cli(
    ctx: click.Context,
    lowercase: bool,
    seed: int,
    threads: int,
    manifest_path: str | None,
    verbose: bool,
    debug: bool,
):
    """dstk - data selection toolkit for low-resource MT.

    Feature Decay Algorithm selection, length-ratio filtering, hybrid
    back-translated corpora, BPE, and MT metrics with significance tests.
    """
    _setup_logging(verbose, debug)
    try:
        color = bool(get_config().get("display.color", True))
    except DstkError as e:
        logger.warning("%s", e)
        color = True
    err_console.no_color = console.no_color = not color
    ctx.obj = RunContext(
        lowercase=lowercase, seed=seed, threads=threads, manifest_path=manifest_path
    )


# ==================== Helpers ====================


def _path_option(*names: str, required: bool = True, help: str) -> Any:
    return click.option(
        *names,
        type=click.Path(dir_okay=False, allow_dash=True),
        required=required,
        help=help,
    )


def _single_stdio(*paths: str | None) -> None:
    """At most one input and at most one output may be "-"."""
    if sum(1 for p in paths if p == STDIO) > 1:
        raise ConfigError("only one of the given files can be '-'")


def _emit(values: Mapping[str, Any], to_stderr: bool = False) -> None:
    """Print a key=value report, one pair per line."""
    for key, value in values.items():
        click.echo(f"{key}={value}", err=to_stderr)


def _finish(run: RunContext, manifest: RunManifest, primary_output: str | None) -> None:
    if run.manifest_path:
        path = Path(run.manifest_path)
    elif primary_output is not None:
        path = default_manifest_path(primary_output)
    else:
        path = None
    if path is not None:
        manifest.write(path)
        run.manifest_written = str(path)


def _manifest(subcommand: str, run: RunContext) -> RunManifest:
    manifest = RunManifest(subcommand)
    manifest.add_config("tokenizer", run.tokenizer)
    return manifest


def _format_metric(metric: Metric, value: float) -> str:
    places = 2 if metric in (Metric.CHRF3, Metric.CHRF1) else 4
    return format_score(value, places)


def _translator_options(func):
    func = click.option(
        "--timeout",
        type=float,
        default=translators.DEFAULT_TIMEOUT,
        show_default=True,
        help="Seconds allowed per external-command batch.",
    )(func)
    func = click.option(
        "--batch-size",
        type=int,
        default=translators.DEFAULT_BATCH_SIZE,
        show_default=True,
        help="Lines per external-command batch.",
    )(func)
    return func


def _fda_options(func):
    func = click.option(
        "--decay-base",
        type=float,
        default=fda.DEFAULT_DECAY_BASE,
        show_default=True,
        help="Feature value multiplier per prior occurrence, in (0, 1).",
    )(func)
    func = click.option(
        "--max-order",
        type=int,
        default=fda.DEFAULT_MAX_ORDER,
        show_default=True,
        help="Longest n-gram used as a feature.",
    )(func)
    func = click.option(
        "--size",
        type=int,
        default=fda.DEFAULT_SELECTION_SIZE,
        show_default=True,
        help="Number of sentences to select.",
    )(func)
    return func


def _ratio_options(func):
    func = click.option(
        "--upper",
        type=float,
        default=pipeline.DEFAULT_UPPER_RATIO,
        show_default=True,
        help="Exclusive upper bound on source/target token ratio.",
    )(func)
    func = click.option(
        "--lower",
        type=float,
        default=pipeline.DEFAULT_LOWER_RATIO,
        show_default=True,
        help="Exclusive lower bound on source/target token ratio.",
    )(func)
    return func


# ==================== Data selection ====================


@cli.command("fda-select")
@_path_option("--seed", "seed_path", help="Seed text whose n-grams define relevance.")
@_path_option("--pool", "pool_path", help="Candidate sentences, one per line.")
@_fda_options
@_path_option("--out", "out_path", help="Selected sentences, in selection order.")
@_path_option(
    "--indices", "indices_path", required=False, help="Also write 0-based pool indices."
)
@click.pass_obj
def fda_select_command(
    run: RunContext,
    seed_path: str,
    pool_path: str,
    size: int,
    max_order: int,
    decay_base: float,
    out_path: str,
    indices_path: str | None,
):
    """Select pool sentences that cover the seed's n-grams (FDA)."""
    config = fda.FdaConfig(max_order, decay_base, size)
    _single_stdio(seed_path, pool_path)
    _single_stdio(out_path, indices_path)

    seed = load_monotext(seed_path, run.tokenizer)
    pool = load_monotext(pool_path, run.tokenizer)
    profile = fda.build_seed_profile(seed, config)
    result = fda.select(pool, profile, config)

    write_lines((pool[i].raw for i in result.indices), out_path)
    if indices_path:
        write_lines((str(i) for i in result.indices), indices_path)
    run.lines_in, run.lines_out = len(pool), len(result.indices)

    manifest = _manifest("fda-select", run)
    manifest.add_config("fda", config)
    manifest.add_input("seed", seed_path)
    manifest.add_input("pool", pool_path)
    manifest.add_output(out_path)
    if indices_path:
        manifest.add_output(indices_path)
    manifest.add_counts(
        {
            "seed_sentences": len(seed),
            "seed_features": len(profile),
            "pool": len(pool),
            "selected": len(result.indices),
        }
    )
    manifest.warnings.extend(result.warnings)
    _finish(run, manifest, out_path)
    _emit(
        {"selected": len(result.indices), "truncated": int(result.truncated)},
        to_stderr=STDIO in (out_path, indices_path),
    )


# ==================== Corpus building ====================


@cli.command("filter-ratio")
@_path_option("--src", "src_path", help="Source side of the bitext.")
@_path_option("--tgt", "tgt_path", help="Target side of the bitext.")
@_path_option("--out-src", "out_src", help="Surviving source lines.")
@_path_option("--out-tgt", "out_tgt", help="Surviving target lines.")
@_ratio_options
@click.pass_obj
def filter_ratio_command(
    run: RunContext,
    src_path: str,
    tgt_path: str,
    out_src: str,
    out_tgt: str,
    lower: float,
    upper: float,
):
    """Drop pairs whose source/target length ratio is out of bounds."""
    config = pipeline.RatioFilterConfig(lower, upper)
    _single_stdio(out_src, out_tgt)

    bitext = load_bitext(src_path, tgt_path, run.tokenizer)
    kept, stats = pipeline.ratio_filter(bitext, config)
    save_bitext(kept, out_src, out_tgt)
    run.lines_in, run.lines_out = len(bitext), len(kept)

    manifest = _manifest("filter-ratio", run)
    manifest.add_config("ratio_filter", config)
    manifest.add_input("source", src_path)
    manifest.add_input("target", tgt_path)
    manifest.add_output(out_src)
    manifest.add_output(out_tgt)
    manifest.add_counts(stats)
    _finish(run, manifest, out_tgt if out_src == STDIO else out_src)
    _emit(
        {
            "kept": stats.kept,
            "removed": stats.removed,
            "removed_empty_target": stats.removed_empty_target,
        },
        to_stderr=STDIO in (out_src, out_tgt),
    )


@cli.command("build-hybrid")
@_path_option("--src", "src_path", help="Source side of the authentic bitext.")
@_path_option("--tgt", "tgt_path", help="Target side of the authentic bitext.")
@click.option(
    "--back-translator",
    required=True,
    help="Target-to-source translator: identity, dict:PATH, file:PATH or cmd:TEMPLATE.",
)
@_path_option("--out-src", "out_src", help="Hybrid corpus, source side.")
@_path_option("--out-tgt", "out_tgt", help="Hybrid corpus, target side.")
@_path_option(
    "--origins",
    "origins_path",
    required=False,
    help="Write one origin tag per output pair.",
)
@click.option(
    "--synthetic-only",
    is_flag=True,
    help="Emit only the filtered back-translated pairs.",
)
@_ratio_options
@_translator_options
@click.pass_obj
def build_hybrid_command(
    run: RunContext,
    src_path: str,
    tgt_path: str,
    back_translator: str,
    out_src: str,
    out_tgt: str,
    origins_path: str | None,
    synthetic_only: bool,
    lower: float,
    upper: float,
    batch_size: int,
    timeout: float,
):
    """Back-translate the target side and build an authentic + synthetic corpus."""
    config = pipeline.RatioFilterConfig(lower, upper)
    spec = translators.parse_translator_spec(back_translator, timeout, batch_size)
    mode = pipeline.HybridMode.HYBRID
    if synthetic_only:
        mode = pipeline.HybridMode.SYNTHETIC_ONLY
    _single_stdio(out_src, out_tgt, origins_path)

    authentic = load_bitext(src_path, tgt_path, run.tokenizer)
    hybrid, report = pipeline.build_hybrid(
        authentic, spec, config, mode, run.tokenizer, run.threads
    )
    save_bitext(hybrid, out_src, out_tgt)
    if origins_path:
        save_origins(hybrid, origins_path)
    run.lines_in, run.lines_out = len(authentic), len(hybrid)

    manifest = _manifest("build-hybrid", run)
    manifest.add_config("ratio_filter", config)
    manifest.add_config("back_translator", spec)
    manifest.add_config("mode", mode)
    manifest.add_input("source", src_path)
    manifest.add_input("target", tgt_path)
    for path in (out_src, out_tgt, origins_path):
        if path:
            manifest.add_output(path)
    manifest.add_counts(report.as_dict())
    _finish(run, manifest, out_tgt if out_src == STDIO else out_src)
    _emit(report.as_dict(), to_stderr=STDIO in (out_src, out_tgt, origins_path))


# ==================== BPE ====================


@cli.command("bpe-learn")
@click.option(
    "--corpus",
    "corpus_paths",
    multiple=True,
    required=True,
    type=click.Path(dir_okay=False, allow_dash=True),
    help="Training text; repeat with --joint to learn on several files.",
)
@click.option(
    "--merges",
    type=int,
    default=bpe.DEFAULT_NUM_MERGES,
    show_default=True,
    help="Maximum number of merge rules.",
)
@click.option(
    "--min-frequency",
    type=int,
    default=bpe.MIN_PAIR_FREQUENCY,
    show_default=True,
    help="Stop once no pair occurs this often.",
)
@click.option(
    "--joint", is_flag=True, help="Learn one model on all corpora concatenated."
)
@click.option(
    "--eow-marker",
    default=bpe.END_OF_WORD,
    show_default=True,
    help="End-of-word marker.",
)
@click.option(
    "--continuation-marker",
    default=bpe.CONTINUATION,
    show_default=True,
    help="Marker on every non-final subword.",
)
@_path_option("--model", "model_path", help="Model file to write.")
@click.pass_obj
def bpe_learn_command(
    run: RunContext,
    corpus_paths: tuple[str, ...],
    merges: int,
    min_frequency: int,
    joint: bool,
    eow_marker: str,
    continuation_marker: str,
    model_path: str,
):
    """Learn BPE merge rules."""
    if len(corpus_paths) > 1 and not joint:
        raise ConfigError(
            "several corpora given; pass --joint to learn one model on all of them"
        )
    _single_stdio(*corpus_paths)

    sentences: list = []
    for path in corpus_paths:
        sentences.extend(load_monotext(path, run.tokenizer))
    corpus = Monotext(tuple(sentences))
    model = bpe.learn_bpe(
        corpus, merges, min_frequency, eow_marker, continuation_marker
    )
    bpe.save_bpe_model(model, model_path)
    run.lines_in, run.lines_out = len(corpus), len(model)

    manifest = _manifest("bpe-learn", run)
    manifest.add_config(
        "bpe",
        {
            "num_merges": merges,
            "min_frequency": min_frequency,
            "joint": joint,
            "end_of_word_marker": eow_marker,
            "continuation_marker": continuation_marker,
        },
    )
    for i, path in enumerate(corpus_paths):
        manifest.add_input(f"corpus_{i}", path)
    manifest.add_output(model_path)
    manifest.add_counts({"sentences": len(corpus), "merges_learned": len(model)})
    _finish(run, manifest, model_path)
    _emit({"merges": len(model)}, to_stderr=model_path == STDIO)


def _bpe_transform(
    run: RunContext,
    name: str,
    model_path: str,
    input_path: str,
    out_path: str,
    func: Callable[[Monotext, bpe.BpeModel], Monotext],
) -> None:
    _single_stdio(model_path, input_path)
    model = bpe.load_bpe_model(model_path)
    text = load_monotext(input_path, run.tokenizer)
    output = func(text, model)
    save_monotext(output, out_path)
    run.lines_in = run.lines_out = len(text)

    manifest = _manifest(name, run)
    manifest.add_input("model", model_path)
    manifest.add_input("input", input_path)
    manifest.add_output(out_path)
    manifest.add_counts({"lines": len(text)})
    _finish(run, manifest, out_path)


@cli.command("bpe-apply")
@_path_option("--model", "model_path", help="Model file from bpe-learn.")
@_path_option("--input", "input_path", help="Text to segment.")
@_path_option("--out", "out_path", help="Segmented text.")
@click.pass_obj
def bpe_apply_command(
    run: RunContext, model_path: str, input_path: str, out_path: str
):
    """Segment text into subwords."""
    _bpe_transform(
        run, "bpe-apply", model_path, input_path, out_path, bpe.apply_bpe_monotext
    )


@cli.command("bpe-decode")
@_path_option("--model", "model_path", help="Model file whose markers the text uses.")
@_path_option("--input", "input_path", help="Segmented text.")
@_path_option("--out", "out_path", help="Restored text.")
@click.pass_obj
def bpe_decode_command(
    run: RunContext, model_path: str, input_path: str, out_path: str
):
    """Join subwords back into words."""
    _bpe_transform(
        run, "bpe-decode", model_path, input_path, out_path, bpe.decode_bpe_monotext
    )


# ==================== Evaluation ====================


def _load_pairs(run: RunContext, hyp_path: str, ref_path: str) -> list[EvalPair]:
    hypotheses = load_monotext(hyp_path, run.tokenizer)
    return make_eval_pairs(hypotheses, load_monotext(ref_path, run.tokenizer))


def _report_table(
    rows: list[tuple[str, EvalReport]],
    marks: Mapping[str, Mapping[Metric, str]] | None = None,
) -> Table:
    table = Table(show_header=True, header_style="bold")
    table.add_column("System")
    for metric in Metric:
        table.add_column(metric.value.upper(), justify="right")
    for name, report in rows:
        cells = []
        for metric in Metric:
            mark = (marks or {}).get(name, {}).get(metric, "")
            cells.append(_format_metric(metric, report.score(metric)) + mark)
        table.add_row(escape(name), *cells)
    return table


@cli.command("evaluate")
@_path_option("--hyp", "hyp_path", help="System output.")
@_path_option("--ref", "ref_path", help="Reference translation.")
@click.pass_obj
def evaluate_command(run: RunContext, hyp_path: str, ref_path: str):
    """Score a system output with BLEU, NIST, TER and chrF."""
    _single_stdio(hyp_path, ref_path)
    pairs = _load_pairs(run, hyp_path, ref_path)
    report = evaluate(pairs, lowercase=run.lowercase)
    run.lines_in = len(pairs)

    _emit({m.value: _format_metric(m, report.score(m)) for m in Metric})
    err_console.print(_report_table([(hyp_path, report)]))

    manifest = _manifest("evaluate", run)
    manifest.add_input("hypothesis", hyp_path)
    manifest.add_input("reference", ref_path)
    manifest.add_counts({"segments": report.segment_count})
    manifest.add_counts({m.value: report.score(m) for m in Metric})
    _finish(run, manifest, None)


@cli.command("significance")
@_path_option("--baseline", "baseline_path", help="Baseline system output.")
@_path_option("--system", "system_path", help="Compared system output.")
@_path_option("--ref", "ref_path", help="Reference translation.")
@click.option(
    "--metric",
    "metrics",
    type=METRIC_CHOICE,
    multiple=True,
    default=[m.value for m in significance.DEFAULT_TESTED_METRICS],
    show_default=True,
    help="Metric to test; repeatable.",
)
@click.option(
    "--resamples",
    type=int,
    default=significance.DEFAULT_RESAMPLES,
    show_default=True,
    help="Bootstrap resamples.",
)
@click.pass_obj
def significance_command(
    run: RunContext,
    baseline_path: str,
    system_path: str,
    ref_path: str,
    metrics: tuple[str, ...],
    resamples: int,
):
    """Paired bootstrap test of a system against a baseline."""
    _single_stdio(baseline_path, system_path, ref_path)
    references = load_monotext(ref_path, run.tokenizer)
    baseline = make_eval_pairs(load_monotext(baseline_path, run.tokenizer), references)
    system = make_eval_pairs(load_monotext(system_path, run.tokenizer), references)
    if run.lowercase:
        baseline, system = lowercase_pairs(baseline), lowercase_pairs(system)
    run.lines_in = len(references)

    manifest = _manifest("significance", run)
    manifest.add_config("bootstrap", {"resamples": resamples, "seed": run.seed})
    manifest.add_input("baseline", baseline_path)
    manifest.add_input("system", system_path)
    manifest.add_input("reference", ref_path)

    table = Table(show_header=True, header_style="bold")
    for column in ("Metric", "Baseline", "System", "Delta", "p"):
        table.add_column(column, justify="left" if column == "Metric" else "right")
    for name in metrics:
        metric = Metric(name)
        result = significance.bootstrap_significance(
            baseline, system, metric, resamples, run.seed
        )
        values = {
            f"{name}_baseline": _format_metric(metric, result.baseline_score),
            f"{name}_system": _format_metric(metric, result.system_score),
            f"{name}_delta": _format_metric(metric, result.delta),
            f"{name}_p": format_score(result.p_value),
        }
        _emit(values)
        table.add_row(name, *values.values())
        manifest.add_counts(
            {f"{name}_p_value": result.p_value, f"{name}_delta": result.delta}
        )
    err_console.print(table)
    _finish(run, manifest, None)


@cli.command("compare")
@_path_option("--ref", "ref_path", help="Reference translation.")
@click.option(
    "--system",
    "system_paths",
    multiple=True,
    required=True,
    type=click.Path(dir_okay=False),
    help="System output; repeat. The first one is the baseline.",
)
@click.option(
    "--second-baseline",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also test later systems against this one.",
)
@click.option(
    "--metric",
    "metrics",
    type=METRIC_CHOICE,
    multiple=True,
    default=[m.value for m in significance.DEFAULT_TESTED_METRICS],
    show_default=True,
    help="Metric to test for significance; repeatable.",
)
@click.option(
    "--alpha",
    type=float,
    default=significance.DEFAULT_ALPHA,
    show_default=True,
    help="Significance level.",
)
@click.option(
    "--resamples",
    type=int,
    default=significance.DEFAULT_RESAMPLES,
    show_default=True,
    help="Bootstrap resamples.",
)
@click.pass_obj
def compare_command(
    run: RunContext,
    ref_path: str,
    system_paths: tuple[str, ...],
    second_baseline: str | None,
    metrics: tuple[str, ...],
    alpha: float,
    resamples: int,
):
    """Score several systems and test each against the first.

    In the table, '*' marks a score better than the baseline at the given
    significance level; '+' marks the same against the second baseline.
    """
    if len(system_paths) < 2:
        raise ConfigError("compare needs at least two --system files")
    if len(set(system_paths)) != len(system_paths):
        raise ConfigError("each --system file may be given only once")
    references = load_monotext(ref_path, run.tokenizer)
    systems = {
        path: make_eval_pairs(load_monotext(path, run.tokenizer), references)
        for path in system_paths
    }
    tested = tuple(Metric(m) for m in metrics)
    report = significance.compare_systems(
        systems,
        tested_metrics=tested,
        resamples=resamples,
        rng_seed=run.seed,
        alpha=alpha,
        second_baseline=second_baseline,
        lowercase=run.lowercase,
    )
    run.lines_in = len(references) * len(system_paths)

    manifest = _manifest("compare", run)
    manifest.add_config(
        "comparison",
        {
            "alpha": alpha,
            "resamples": resamples,
            "seed": run.seed,
            "metrics": list(metrics),
        },
    )
    manifest.add_input("reference", ref_path)

    marks: dict[str, dict[Metric, str]] = {}
    for i, row in enumerate(report.rows):
        key = f"system{i}"
        manifest.add_input(key, row.name)
        values: dict[str, Any] = {f"{key}.name": row.name}
        values.update(
            {f"{key}.{m.value}": _format_metric(m, row.report.score(m)) for m in Metric}
        )
        marks[row.name] = {}
        for metric in tested:
            if report.baseline not in row.tests:
                continue
            result = row.tests[report.baseline][metric]
            significant = row.better[metric] and result.is_significant(alpha)
            values[f"{key}.{metric.value}_p"] = format_score(result.p_value)
            values[f"{key}.{metric.value}_significant"] = int(significant)
            mark = "*" if significant else ""
            if second_baseline and second_baseline in row.tests:
                second = row.tests[second_baseline][metric]
                values[f"{key}.{metric.value}_p_second"] = format_score(second.p_value)
                if significant and second.is_significant(alpha):
                    mark += "+"
            marks[row.name][metric] = mark
        _emit(values)
    err_console.print(
        _report_table([(row.name, row.report) for row in report.rows], marks)
    )
    _finish(run, manifest, None)


# ==================== Adaptation ====================


@cli.command("adapt")
@_path_option("--test", "test_path", help="Source-language test set.")
@_path_option("--pool", "pool_path", help="Target-language monolingual pool.")
@click.option(
    "--forward",
    required=True,
    help="Source-to-target translator for the test set.",
)
@click.option(
    "--backward",
    required=True,
    help="Target-to-source translator for the selected sentences.",
)
@_fda_options
@_path_option("--out-src", "out_src", help="Fine-tuning corpus, source side.")
@_path_option("--out-tgt", "out_tgt", help="Fine-tuning corpus, target side.")
@_path_option(
    "--seed-out",
    "seed_out",
    required=False,
    help="Also save the pre-translated test set.",
)
@click.option(
    "--finetune-cmd",
    default=None,
    help="Trainer command run on the corpus; {source} and {target} become its paths.",
)
@_translator_options
@click.pass_obj
def adapt_command(
    run: RunContext,
    test_path: str,
    pool_path: str,
    forward: str,
    backward: str,
    size: int,
    max_order: int,
    decay_base: float,
    out_src: str,
    out_tgt: str,
    seed_out: str | None,
    finetune_cmd: str | None,
    batch_size: int,
    timeout: float,
):
    """Build a fine-tuning corpus adapted to one test set.

    Pre-translates the test set, selects the closest pool sentences with
    FDA and back-translates them.
    """
    plan_config = fda.FdaConfig(max_order, decay_base, size)
    forward_spec = translators.parse_translator_spec(forward, timeout, batch_size)
    backward_spec = translators.parse_translator_spec(backward, timeout, batch_size)
    _single_stdio(test_path, pool_path)
    _single_stdio(out_src, out_tgt, seed_out)
    if finetune_cmd and STDIO in (out_src, out_tgt):
        raise ConfigError("--finetune-cmd needs the corpus written to files, not '-'")

    plan = pipeline.AdaptationPlan(
        test_source=load_monotext(test_path, run.tokenizer),
        mono_pool=load_monotext(pool_path, run.tokenizer),
        forward_translator=forward_spec,
        back_translator=backward_spec,
        selection_size=size,
        fda_config=plan_config,
    )
    result = pipeline.adapt_to_test(plan, run.tokenizer, run.threads)
    save_bitext(result.corpus, out_src, out_tgt)
    if seed_out:
        save_monotext(result.seed, seed_out)
    run.lines_in, run.lines_out = len(plan.mono_pool), len(result.corpus)

    manifest = _manifest("adapt", run)
    manifest.add_config("fda", plan.selection_config)
    manifest.add_config("forward_translator", forward_spec)
    manifest.add_config("back_translator", backward_spec)
    manifest.add_input("test", test_path)
    manifest.add_input("pool", pool_path)
    for path in (out_src, out_tgt, seed_out):
        if path:
            manifest.add_output(path)
    manifest.add_counts(
        {
            "test_sentences": len(plan.test_source),
            "pool": len(plan.mono_pool),
            "selected": len(result.selection.indices),
            "pairs_out": len(result.corpus),
        }
    )
    manifest.warnings.extend(result.warnings)
    if finetune_cmd:
        manifest.add_config("finetune_cmd", finetune_cmd)
    _finish(run, manifest, out_tgt if out_src == STDIO else out_src)

    if finetune_cmd:
        pipeline.run_finetune_hook(finetune_cmd, out_src, out_tgt, timeout)
    _emit(
        {"pairs": len(result.corpus), "truncated": int(result.selection.truncated)},
        to_stderr=STDIO in (out_src, out_tgt, seed_out),
    )


# ==================== Meta commands ====================


@cli.command("history")
@click.option(
    "--days",
    type=int,
    default=0,
    show_default=True,
    help="Only the last N days (0 = all).",
)
@click.option(
    "--limit", "-n", type=int, default=20, show_default=True, help="Runs to list."
)
@click.option(
    "--export", type=click.Choice(["json", "csv"]), default=None, help="Export runs."
)
@click.option(
    "--output", "-o", type=click.Path(dir_okay=False), default=None, help="Export file."
)
@click.option("--clear", is_flag=True, help="Delete all recorded runs.")
def history_command(
    days: int, limit: int, export: str | None, output: str | None, clear: bool
):
    """Show recorded dstk runs."""
    history = get_history()

    if clear:
        removed = history.clear()
        console.print(f"[green]Removed {removed} runs[/green]")
        return

    if export:
        data = history.export(
            format=export, output_path=Path(output) if output else None
        )
        if output:
            console.print(f"[green]Exported to {output}[/green]")
        else:
            click.echo(data)
        return

    _show_summary(history, days)
    _show_runs(history, limit)


def _show_summary(history: RunHistory, days: int) -> None:
    summary = history.get_summary(days=days)
    period = "all time" if days == 0 else f"last {days} day{'s' if days > 1 else ''}"
    console.print(f"[bold]Runs ({period})[/bold]")
    console.print(f"  Total: {summary['total_runs']:,}")
    console.print(f"  Failed: {summary['failed']:,}")
    console.print(f"  Lines in/out: {summary['lines_in']:,} / {summary['lines_out']:,}")

    by_subcommand = history.get_by_subcommand(days=days)
    if by_subcommand:
        table = Table(show_header=True, header_style="bold")
        table.add_column("Subcommand")
        table.add_column("Runs", justify="right")
        table.add_column("Failures", justify="right")
        table.add_column("Avg ms", justify="right")
        table.add_column("Lines out", justify="right")
        for name, stats in by_subcommand.items():
            table.add_row(
                name,
                str(stats["runs"]),
                str(stats["failures"]),
                f"{stats['avg_ms']:,}",
                f"{stats['lines_out']:,}",
            )
        console.print(table)


def _show_runs(history: RunHistory, limit: int) -> None:
    runs = history.get_history(limit=limit)
    if not runs:
        console.print("[yellow]No runs recorded[/yellow]")
        return
    table = Table(show_header=True, header_style="bold")
    table.add_column("Time")
    table.add_column("Subcommand")
    table.add_column("Exit", justify="right")
    table.add_column("ms", justify="right")
    table.add_column("Manifest")
    for entry in runs:
        code = entry["exit_code"]
        table.add_row(
            (entry["timestamp"] or "")[:19],
            entry["subcommand"],
            f"[green]{code}[/green]" if code == 0 else f"[red]{code}[/red]",
            str(entry["elapsed_ms"]),
            escape(entry["manifest_path"] or ""),
        )
    console.print(table)


@cli.command("config")
@click.option("--show", is_flag=True, help="Print the effective configuration.")
@click.option("--init", is_flag=True, help="Write the configuration file.")
def config_command(show: bool, init: bool):
    """Manage the dstk user configuration."""
    config = get_config()

    if init:
        config.save()
        console.print(f"[green]Configuration saved to {config.config_path}[/green]")
        return

    console.print(f"[bold]Configuration file:[/bold] {config.config_path}")
    console.print(f"[bold]History database:[/bold] {config.database_path}")
    console.print(f"[bold]History enabled:[/bold] {config.history_enabled}")
    if show:
        click.echo(
            yaml.safe_dump(config.as_dict(), sort_keys=True, default_flow_style=False)
        )
