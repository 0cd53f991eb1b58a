"""Tests for ratio filtering, hybrid corpora and test-set adaptation."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dstk.core.corpus import Bitext, Monotext, Origin
from dstk.core.errors import ConfigError, CorpusError, PipelineError
from dstk.core.fda import FdaConfig, build_seed_profile, select
from dstk.core.pipeline import (
    AdaptationPlan,
    HybridMode,
    RatioFilterConfig,
    adapt_to_test,
    back_translate,
    build_hybrid,
    ratio_filter,
    run_finetune_hook,
)
from dstk.core.translators import (
    TranslatorKind,
    TranslatorSpec,
    parse_translator_spec,
    translate,
)

IDENTITY = TranslatorSpec(TranslatorKind.IDENTITY_MOCK)


def bitext(sources, targets):
    return Bitext.from_sides(Monotext.from_lines(sources), Monotext.from_lines(targets))


def words(n, word="w"):
    return " ".join([word] * n)


class TestRatioFilter:
    """Tests for the length-ratio filter."""

    @pytest.mark.parametrize(
        "source_len, target_len, kept",
        [(10, 10, True), (9, 20, False), (3, 2, False), (2, 3, True), (1, 2, False)],
    )
    def test_examples(self, source_len, target_len, kept):
        """Should keep a pair only inside the strict ratio bounds."""
        pairs = bitext([words(source_len)], [words(target_len)])
        result, stats = ratio_filter(pairs)
        assert (len(result) == 1) is kept
        assert stats.kept + stats.removed == 1

    def test_empty_target(self):
        """Should remove and count a pair with an empty target."""
        result, stats = ratio_filter(bitext(["a b", ""], ["x y", ""]))
        assert len(result) == 1
        assert stats.removed == 1
        assert stats.removed_empty_target == 1

    def test_outliers_removed(self):
        """Should remove exactly the planted outliers."""
        rng = random.Random(0)
        sources, targets = [], []
        for i in range(10_000):
            n = rng.randint(3, 20)
            sources.append(words(3 * n if i % 10 == 0 else n, "s"))
            targets.append(words(n, "t"))
        result, stats = ratio_filter(bitext(sources, targets))
        assert stats.removed == 1000
        assert stats.kept == 9000
        assert all(0.5 < len(p.source) / len(p.target) < 1.5 for p in result)

    def test_keeps_order_and_origin(self):
        """Should keep surviving pairs in order with their origin."""
        pairs = Bitext.from_sides(
            Monotext.from_lines(["a", "b b b b", "c"]),
            Monotext.from_lines(["x", "y", "z"]),
            Origin.SYNTHETIC,
        )
        result, _ = ratio_filter(pairs)
        assert result.sources().lines == ["a", "c"]
        assert result.origins() == [Origin.SYNTHETIC, Origin.SYNTHETIC]

    @pytest.mark.parametrize("lower, upper", [(0.0, 1.5), (1.5, 0.5), (1.0, 1.0)])
    def test_invalid_bounds(self, lower, upper):
        """Should reject bounds that do not form an interval."""
        with pytest.raises(ConfigError):
            RatioFilterConfig(lower, upper)

    def test_custom_bounds(self):
        """Should honour custom bounds."""
        result, _ = ratio_filter(bitext([words(3)], [words(2)]), RatioFilterConfig(0.5, 2.0))
        assert len(result) == 1

    @given(
        st.lists(
            st.tuples(st.integers(0, 12), st.integers(0, 12)), min_size=1, max_size=30
        )
    )
    def test_idempotent(self, lengths):
        """Should remove nothing on a second pass."""
        pairs = bitext([words(s, "s") for s, _ in lengths], [words(t) for _, t in lengths])
        once, _ = ratio_filter(pairs)
        twice, stats = ratio_filter(once)
        assert twice == once
        assert stats.removed == 0


class TestHybrid:
    """Tests for build_hybrid and back_translate."""

    @pytest.fixture
    def lexicon(self, tmp_path):
        path = tmp_path / "lexicon.tsv"
        path.write_text("boom\tb b b b b\n")
        return parse_translator_spec(f"dict:{path}")

    @pytest.fixture
    def authentic(self):
        sources, targets = [], []
        for i in range(100):
            if i % 10 == 0:
                sources.append("s s")
                targets.append("boom boom")
            elif i % 10 == 1:
                sources.append(words(12, "s"))
                targets.append(words(4))
            else:
                sources.append(words(4, "s"))
                targets.append(words(4))
        return bitext(sources, targets)

    def test_back_translate(self):
        """Should pair the translation with the original target."""
        targets = Monotext.from_lines(["a b", "c"])
        result = back_translate(targets, IDENTITY)
        assert result.sources() == targets
        assert result.targets() == targets
        assert set(result.origins()) == {Origin.SYNTHETIC}

    def test_size_without_outliers(self):
        """Should double the corpus when nothing is filtered."""
        pairs = bitext([words(4, "s")] * 50, [words(4)] * 50)
        result, report = build_hybrid(pairs, IDENTITY)
        assert len(result) == 100
        assert report.total_out == 100
        assert result.origins() == [Origin.AUTHENTIC] * 50 + [Origin.SYNTHETIC] * 50

    def test_targets_appear_twice(self):
        """Should keep each target once per origin."""
        pairs = bitext(["s1 s2", "s3"], ["t1 t2", "t3"])
        result, _ = build_hybrid(pairs, IDENTITY)
        assert result.targets().lines == ["t1 t2", "t3", "t1 t2", "t3"]
        assert result.sources().lines == ["s1 s2", "s3", "t1 t2", "t3"]

    def test_each_side_filtered(self, authentic, lexicon):
        """Should filter the authentic and synthetic sets separately."""
        result, report = build_hybrid(authentic, lexicon)
        assert report.as_dict() == {
            "authentic_in": 100,
            "synthetic_in": 100,
            "authentic_removed": 10,
            "synthetic_removed": 10,
            "total_out": 180,
        }
        assert len(result) == 180
        assert result.origins().count(Origin.SYNTHETIC) == 90

    def test_synthetic_only(self, authentic, lexicon):
        """Should drop the authentic set in synthetic-only mode."""
        result, report = build_hybrid(authentic, lexicon, mode=HybridMode.SYNTHETIC_ONLY)
        assert report.authentic_in == 0
        assert report.authentic_removed == 0
        assert report.synthetic_removed == 10
        assert len(result) == 90
        assert set(result.origins()) == {Origin.SYNTHETIC}

    def test_empty_input(self):
        """Should reject an empty bitext as a data error."""
        with pytest.raises(CorpusError) as excinfo:
            build_hybrid(Bitext(), IDENTITY)
        assert excinfo.value.exit_code == 3


class TestAdaptation:
    """Tests for adapt_to_test."""

    @pytest.fixture
    def forward(self, tmp_path):
        path = tmp_path / "forward.tsv"
        path.write_text("".join(f"s{i}\tt{i}\n" for i in range(12)))
        return parse_translator_spec(f"dict:{path}")

    @pytest.fixture
    def backward(self, tmp_path):
        path = tmp_path / "backward.tsv"
        path.write_text("".join(f"t{i}\ts{i}\n" for i in range(12)))
        return parse_translator_spec(f"dict:{path}")

    @pytest.fixture
    def plan(self, forward, backward):
        rng = random.Random(21)
        test = Monotext.from_lines(
            " ".join(f"s{rng.randrange(6)}" for _ in range(rng.randint(3, 8)))
            for _ in range(10)
        )
        pool = Monotext.from_lines(
            " ".join(f"t{rng.randrange(12)}" for _ in range(rng.randint(1, 12)))
            for _ in range(1000)
        )
        return AdaptationPlan(test, pool, forward, backward, selection_size=50)

    def test_composition(self, plan):
        """Pre-translate, select, back-translate; nothing else."""
        result = adapt_to_test(plan)

        seed = translate(plan.test_source, plan.forward_translator)
        config = FdaConfig(selection_size=50)
        indices, _ = select(plan.mono_pool, build_seed_profile(seed, config), config)
        selected = Monotext(tuple(plan.mono_pool[i] for i in indices))
        expected = back_translate(selected, plan.back_translator)

        assert result.seed == seed
        assert result.selection.indices == indices
        assert result.corpus == expected
        assert len(result.corpus) == 50
        assert set(result.corpus.origins()) == {Origin.SYNTHETIC}
        assert result.warnings == []

    def test_truncation_warning(self, plan, forward, backward):
        """Should carry the truncation warning from selection."""
        small = AdaptationPlan(
            plan.test_source,
            Monotext(plan.mono_pool.sentences[:20]),
            forward,
            backward,
            selection_size=50,
        )
        result = adapt_to_test(small)
        assert len(result.corpus) == 20
        assert result.selection.truncated
        assert result.warnings

    def test_selection_config(self, plan):
        """Should build the selection config from the plan."""
        custom = AdaptationPlan(
            plan.test_source,
            plan.mono_pool,
            plan.forward_translator,
            plan.back_translator,
            selection_size=7,
            fda_config=FdaConfig(max_order=2, decay_base=0.25),
        )
        assert custom.selection_config == FdaConfig(2, 0.25, 7)

    def test_invalid_selection_size(self, plan):
        """Should reject a selection size below one."""
        with pytest.raises(ConfigError):
            AdaptationPlan(plan.test_source, plan.mono_pool, IDENTITY, IDENTITY, 0)

    def test_pre_translation_failure(self, plan, tmp_path):
        """Should name the pre-translation phase on failure."""
        short = tmp_path / "short.txt"
        short.write_text("t1\n")
        broken = AdaptationPlan(
            plan.test_source,
            plan.mono_pool,
            parse_translator_spec(f"file:{short}"),
            plan.back_translator,
        )
        with pytest.raises(PipelineError) as excinfo:
            adapt_to_test(broken)
        assert excinfo.value.phase == "pre-translation"
        assert excinfo.value.exit_code == 3

    def test_empty_seed(self, plan, tmp_path):
        """Should name the data-selection phase for an empty seed."""
        blank = tmp_path / "blank.txt"
        blank.write_text("\n" * len(plan.test_source))
        broken = AdaptationPlan(
            plan.test_source,
            plan.mono_pool,
            parse_translator_spec(f"file:{blank}"),
            plan.back_translator,
        )
        with pytest.raises(PipelineError) as excinfo:
            adapt_to_test(broken)
        assert excinfo.value.phase == "data-selection"

    def test_back_translation_failure(self, plan):
        """Should name the back-translation phase on failure."""
        broken = AdaptationPlan(
            plan.test_source,
            plan.mono_pool,
            plan.forward_translator,
            parse_translator_spec("cmd:exit 9 # {input} {output}"),
            selection_size=5,
        )
        with pytest.raises(PipelineError) as excinfo:
            adapt_to_test(broken)
        assert excinfo.value.phase == "back-translation"
        assert excinfo.value.exit_code == 4


class TestFinetuneHook:
    """Tests for run_finetune_hook."""

    def test_paths_substituted(self, tmp_path):
        """Should substitute quoted corpus paths."""
        source = tmp_path / "train src.txt"
        target = tmp_path / "train.tgt"
        source.write_text("a\n")
        target.write_text("b\n")
        out = tmp_path / "joined.txt"
        run_finetune_hook(f"cat {{source}} {{target}} > {out}", source, target)
        assert out.read_text() == "a\nb\n"

    def test_literal_braces_in_template(self, tmp_path):
        """Should substitute only {source} and {target}."""
        source = tmp_path / "train.src"
        target = tmp_path / "train.tgt"
        source.write_text("a\n")
        target.write_text("b\n")
        out = tmp_path / "counted.txt"
        run_finetune_hook(
            f"awk 'END {{ print NR }}' {{source}} {{target}} > {out}", source, target
        )
        assert out.read_text() == "2\n"

    def test_failure(self, tmp_path):
        """Should wrap a failing trainer in a pipeline error."""
        with pytest.raises(PipelineError) as excinfo:
            run_finetune_hook("exit 3", tmp_path / "a", tmp_path / "b")
        assert excinfo.value.phase == "fine-tune"
        assert excinfo.value.cause.returncode == 3

    def test_timeout(self, tmp_path):
        """Should wrap a trainer timeout in a pipeline error."""
        with pytest.raises(PipelineError) as excinfo:
            run_finetune_hook("sleep 5", tmp_path / "a", tmp_path / "b", timeout=0.3)
        assert excinfo.value.phase == "fine-tune"
