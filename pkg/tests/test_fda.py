"""Tests for Feature Decay Algorithm selection."""

import logging
import random
import time
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dstk.core.corpus import Monotext, Sentence, extract_ngrams, tokenize
from dstk.core.errors import ConfigError, SelectionError
from dstk.core.fda import (
    FdaConfig,
    SelectionState,
    build_seed_profile,
    score_sentence,
    seed_hits,
    select,
)
from tests.conftest import slow_enabled

VOCAB = ["a", "b", "c", "d", "e", "f", "g", "h"]


def _text(*lines):
    return Monotext.from_lines(lines)


def _random_corpus(rng, size, max_tokens=15, vocab=VOCAB):
    return Monotext.from_lines(
        " ".join(rng.choice(vocab) for _ in range(rng.randint(0, max_tokens)))
        for _ in range(size)
    )


def brute_force_select(candidates, profile, config):
    """Full-rescan greedy selection: rescore every remaining candidate each step."""
    hits = [
        [
            (ngram, count)
            for ngram, count in extract_ngrams(s, config.max_order).items()
            if ngram in profile.features
        ]
        for s in candidates
    ]
    counts = Counter()
    remaining = list(range(len(candidates)))
    selected = []

    def score(i):
        if len(candidates[i]) == 0:
            return 0.0
        total = 0.0
        for ngram, count in hits[i]:
            total += count * config.decay_base ** counts[ngram]
        return total / len(candidates[i])

    while remaining and len(selected) < config.selection_size:
        best = max(remaining, key=lambda i: (score(i), -i))
        selected.append(best)
        remaining.remove(best)
        for ngram, count in hits[best]:
            counts[ngram] += count
    return selected, counts


class TestFdaConfig:
    """Tests for FdaConfig validation."""

    def test_defaults(self):
        """Should default to trigrams, halving decay and 50,000 sentences."""
        config = FdaConfig()
        assert config.max_order == 3
        assert config.decay_base == 0.5
        assert config.selection_size == 50_000

    @pytest.mark.parametrize("base", [0.0, 1.0, -0.5, 1.5])
    def test_decay_base_out_of_range(self, base):
        """Should reject a decay base outside (0, 1)."""
        with pytest.raises(ConfigError):
            FdaConfig(decay_base=base)

    def test_invalid_order(self):
        """Should reject an order below one."""
        with pytest.raises(ConfigError):
            FdaConfig(max_order=0)

    def test_invalid_size(self):
        """Should reject a selection size below one."""
        with pytest.raises(ConfigError):
            FdaConfig(selection_size=0)


class TestSeedProfile:
    """Tests for build_seed_profile."""

    def test_enumeration(self):
        """Should hold every seed n-gram up to the order."""
        profile = build_seed_profile(_text("the cat"), FdaConfig())
        assert profile.features == {("the",), ("cat",), ("the", "cat")}

    def test_duplicate_sentences(self):
        """Should ignore how often a seed n-gram occurs."""
        once = build_seed_profile(_text("a b c"), FdaConfig())
        twice = build_seed_profile(_text("a b c", "a b c"), FdaConfig())
        assert once == twice

    def test_empty_seed(self):
        """Should reject a seed without n-grams."""
        with pytest.raises(SelectionError):
            build_seed_profile(_text(""), FdaConfig())

    def test_orders_bounded(self):
        """Should stop at the configured order."""
        profile = build_seed_profile(_text("a b c d e"), FdaConfig(max_order=2))
        assert max(len(g) for g in profile.features) == 2
        assert ("a", "b") in profile


class TestScoreSentence:
    """Tests for score_sentence."""

    @pytest.fixture
    def profile(self):
        return build_seed_profile(_text("the cat"), FdaConfig())

    def test_fresh_score(self, profile):
        """Should score seed n-grams over sentence length."""
        sentence = tokenize("the cat")
        assert score_sentence(sentence, profile, SelectionState(), FdaConfig()) == 1.5

    def test_after_selection(self, profile):
        """Should decay features already selected once."""
        sentence = tokenize("the cat")
        state = SelectionState()
        state.add(0, seed_hits(sentence, profile))
        assert score_sentence(sentence, profile, state, FdaConfig()) == 0.75

    def test_no_shared_ngrams(self, profile):
        """Should score zero without shared n-grams."""
        sentence = tokenize("a dog")
        assert score_sentence(sentence, profile, SelectionState(), FdaConfig()) == 0.0

    def test_empty_sentence(self, profile):
        """Should score an empty sentence as zero."""
        assert score_sentence(tokenize(""), profile, SelectionState(), FdaConfig()) == 0.0

    def test_repeated_occurrences(self, profile):
        """Should count repeated seed n-grams every time."""
        # "the the": two unigram terms, "the the" bigram is not a seed feature
        sentence = tokenize("the the")
        assert score_sentence(sentence, profile, SelectionState(), FdaConfig()) == 1.0
        state = SelectionState()
        state.add(0, seed_hits(sentence, profile))
        assert state.feature_counts[("the",)] == 2

    def test_decay_halving(self):
        """One occurrence of g in a selected sentence halves g's contribution."""
        profile = build_seed_profile(_text("g x"), FdaConfig())
        candidate = tokenize("g")
        selected = tokenize("g y z")
        state = SelectionState()
        before = score_sentence(candidate, profile, state, FdaConfig())
        state.add(0, seed_hits(selected, profile))
        after = score_sentence(candidate, profile, state, FdaConfig())
        assert before == 1.0
        assert after == 0.5
        assert after == before * 0.5

    @pytest.mark.parametrize("base", [0.25, 0.5, 0.9])
    def test_decay_factor_per_occurrence(self, base):
        """Should multiply by the decay base per earlier occurrence."""
        config = FdaConfig(decay_base=base)
        profile = build_seed_profile(_text("g"), config)
        candidate = tokenize("g")
        state = SelectionState()
        for k in range(4):
            assert score_sentence(candidate, profile, state, config) == base**k
            state.add(k, [(("g",), 1)])

    @given(
        st.lists(st.sampled_from(VOCAB[:4]), min_size=1, max_size=12),
        st.lists(st.sampled_from(VOCAB[:4]), min_size=1, max_size=12),
        st.integers(min_value=1, max_value=4),
    )
    def test_bounds(self, seed_tokens, tokens, max_order):
        """Should stay between zero and the occurrence count over length."""
        config = FdaConfig(max_order=max_order)
        profile = build_seed_profile(Monotext((Sentence.from_tokens(seed_tokens),)), config)
        sentence = Sentence.from_tokens(tokens)
        score = score_sentence(sentence, profile, SelectionState(), config)
        occurrences = sum(extract_ngrams(sentence, max_order).values())
        assert 0.0 <= score <= occurrences / len(sentence) <= max_order

    @given(
        st.lists(st.sampled_from(VOCAB[:4]), min_size=1, max_size=10),
        st.lists(
            st.tuples(st.sampled_from(VOCAB[:4]), st.integers(min_value=1, max_value=3)),
            max_size=6,
        ),
    )
    def test_monotone_decay(self, tokens, increments):
        """Score never increases as feature counts grow."""
        config = FdaConfig()
        sentence = Sentence.from_tokens(tokens)
        profile = build_seed_profile(Monotext((sentence,)), config)
        state = SelectionState()
        previous = score_sentence(sentence, profile, state, config)
        for token, count in increments:
            state.add(0, [((token,), count)])
            current = score_sentence(sentence, profile, state, config)
            assert current <= previous
            previous = current


class TestSelect:
    """Tests for the lazy-heap greedy selection."""

    def test_self_seed_saturation(self):
        """Should select the whole seed when it is the pool."""
        seed = _text("a b", "c d", "e f g")
        result = select(seed, build_seed_profile(seed, FdaConfig()), FdaConfig(selection_size=3))
        assert sorted(result.indices) == [0, 1, 2]
        assert not result.truncated

    def test_exact_size(self):
        """Should select exactly the requested number of distinct sentences."""
        rng = random.Random(7)
        pool = _random_corpus(rng, 300)
        seed = _random_corpus(rng, 5)
        config = FdaConfig(selection_size=120)
        result = select(pool, build_seed_profile(seed, config), config)
        assert len(result.indices) == 120
        assert len(set(result.indices)) == 120

    def test_tie_breaks_to_lower_index(self):
        """Should prefer the lower index on equal scores."""
        pool = _text("x", "a", "a", "a")
        config = FdaConfig(selection_size=2)
        result = select(pool, build_seed_profile(_text("a"), config), config)
        assert result.indices == [1, 2]

    def test_zero_score_sentences_last_in_index_order(self):
        """Should append zero-score sentences in pool order."""
        pool = _text("z", "", "a", "y")
        config = FdaConfig(selection_size=4)
        result = select(pool, build_seed_profile(_text("a"), config), config)
        assert result.indices == [2, 0, 1, 3]

    def test_truncation_warning(self, caplog):
        """Should warn and truncate when the pool is too small."""
        pool = _text("a", "b")
        config = FdaConfig(selection_size=5)
        with caplog.at_level(logging.WARNING, logger="dstk"):
            result = select(pool, build_seed_profile(_text("a"), config), config)
        assert result.indices == [0, 1]
        assert result.truncated
        assert result.warnings
        assert "only 2" in caplog.text

    def test_unpacks_as_indices_and_state(self):
        """Should unpack into indices and the final state."""
        pool = _text("a b", "a")
        config = FdaConfig(selection_size=1)
        indices, state = select(pool, build_seed_profile(_text("a b"), config), config)
        assert indices == [0]
        assert state.selected == [0]
        assert state.feature_counts == {("a",): 1, ("b",): 1, ("a", "b"): 1}

    def test_feature_counts_match_selection(self):
        """Should count seed features over the selected sentences."""
        rng = random.Random(3)
        pool = _random_corpus(rng, 60)
        seed = _random_corpus(rng, 4)
        config = FdaConfig(selection_size=25)
        profile = build_seed_profile(seed, config)
        result = select(pool, profile, config)
        expected = Counter()
        for i in result.indices:
            expected.update(dict(seed_hits(pool[i], profile)))
        assert result.state.feature_counts == dict(expected)

    def test_oracle_equivalence(self):
        """Lazy-heap selection equals the full-rescan oracle on 200 random corpora."""
        start = time.monotonic()
        for corpus_seed in range(200):
            rng = random.Random(corpus_seed)
            vocab = VOCAB[: rng.randint(2, len(VOCAB))]
            pool = _random_corpus(rng, rng.randint(1, 200), vocab=vocab)
            seed = _random_corpus(rng, rng.randint(1, 5), vocab=vocab)
            seed = Monotext(seed.sentences + (Sentence.from_tokens([vocab[0]]),))
            config = FdaConfig(
                max_order=rng.randint(1, 4),
                decay_base=rng.choice([0.5, 0.3, 0.75]),
                selection_size=rng.randint(1, min(len(pool) + 5, 40)),
            )
            profile = build_seed_profile(seed, config)
            result = select(pool, profile, config)
            expected, counts = brute_force_select(pool, profile, config)
            assert result.indices == expected, f"corpus seed {corpus_seed}"
            assert result.state.feature_counts == {g: c for g, c in counts.items() if c}
        assert time.monotonic() - start < 30

    def test_score_and_select_agree(self):
        """The first pick has the maximal score_sentence value."""
        rng = random.Random(11)
        pool = _random_corpus(rng, 80)
        config = FdaConfig(selection_size=1)
        profile = build_seed_profile(_random_corpus(rng, 3), config)
        result = select(pool, profile, config)
        scores = [score_sentence(s, profile, SelectionState(), config) for s in pool]
        assert scores[result.indices[0]] == max(scores)
        assert result.indices[0] == scores.index(max(scores))

    @pytest.mark.slow
    @pytest.mark.skipif(not slow_enabled(), reason="set DSTK_RUN_SLOW=1")
    def test_desk_scale(self):
        """50,000 picks from a 1,000,000-sentence pool in under five minutes."""
        rng = random.Random(2024)
        vocab = [f"w{i}" for i in range(20_000)]
        pool = Monotext.from_lines(
            " ".join(rng.choice(vocab) for _ in range(15)) for _ in range(1_000_000)
        )
        seed = Monotext.from_lines(
            " ".join(rng.choice(vocab) for _ in range(15)) for _ in range(1_000)
        )
        config = FdaConfig(selection_size=50_000)
        start = time.monotonic()
        result = select(pool, build_seed_profile(seed, config), config)
        assert len(result.indices) == 50_000
        assert time.monotonic() - start < 300
