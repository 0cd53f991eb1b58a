"""Sentences, bitexts and line-oriented corpus I/O."""

from __future__ import annotations

import logging
import sys
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from dstk.core.errors import AlignmentError, ConfigError, CorpusDecodeError, CorpusError
from dstk.utils.tokenizer import Ngram, ngram_counts, normalize_text, split_tokens

logger = logging.getLogger(__name__)

STDIO = "-"


class Normalization(str, Enum):
    """Unicode normalization applied before splitting."""

    NONE = "none"
    NFC = "canonical-composed"


class Origin(str, Enum):
    """Where a sentence pair came from."""

    AUTHENTIC = "authentic"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenizer settings. Same config and input always give the same tokens."""

    lowercase: bool = False
    normalization: Normalization = Normalization.NFC

    def __post_init__(self) -> None:
        if not isinstance(self.normalization, Normalization):
            try:
                object.__setattr__(
                    self, "normalization", Normalization(self.normalization)
                )
            except ValueError as e:
                raise ConfigError(f"unknown normalization: {self.normalization}") from e


DEFAULT_TOKENIZER = TokenizerConfig()


@dataclass(frozen=True)
class Sentence:
    """One line of text and its tokens."""

    raw: str
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> Sentence:
        tokens = tuple(tokens)
        return cls(" ".join(tokens), tokens)


@dataclass(frozen=True)
class SentencePair:
    source: Sentence
    target: Sentence
    origin: Origin = Origin.AUTHENTIC


@dataclass(frozen=True)
class Monotext:
    """An ordered list of sentences."""

    sentences: tuple[Sentence, ...] = ()

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, index: int) -> Sentence:
        return self.sentences[index]

    @property
    def lines(self) -> list[str]:
        return [s.raw for s in self.sentences]

    @classmethod
    def from_lines(
        cls, lines: Iterable[str], config: TokenizerConfig = DEFAULT_TOKENIZER
    ) -> Monotext:
        return cls(tuple(tokenize(line, config) for line in lines))


@dataclass(frozen=True)
class Bitext:
    """An ordered list of aligned sentence pairs."""

    pairs: tuple[SentencePair, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)

    def sources(self) -> Monotext:
        return Monotext(tuple(p.source for p in self.pairs))

    def targets(self) -> Monotext:
        return Monotext(tuple(p.target for p in self.pairs))

    def origins(self) -> list[Origin]:
        return [p.origin for p in self.pairs]

    def concat(self, other: Bitext) -> Bitext:
        return Bitext(self.pairs + other.pairs)

    @classmethod
    def from_sides(
        cls,
        sources: Monotext,
        targets: Monotext,
        origin: Origin = Origin.AUTHENTIC,
    ) -> Bitext:
        if len(sources) != len(targets):
            raise AlignmentError(len(sources), len(targets))
        return cls(
            tuple(SentencePair(s, t, origin) for s, t in zip(sources, targets))
        )


# =============================================================================
# Tokenization
# =============================================================================


def tokenize(text: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> Sentence:
    """Normalize and whitespace-split one line.

    `raw` keeps the text exactly as given so files round-trip; `tokens`
    reflect normalization and case folding.
    """
    if "\n" in text:
        raise CorpusError("sentence text must not contain a newline")
    form = "NFC" if config.normalization is Normalization.NFC else None
    return Sentence(text, split_tokens(normalize_text(text, form, config.lowercase)))


def extract_ngrams(sentence: Sentence | Sequence[str], max_order: int) -> Counter[Ngram]:
    """Return every n-gram of order 1..max_order with its occurrence count."""
    if max_order < 1:
        raise ConfigError("max_order must be >= 1")
    tokens = sentence.tokens if isinstance(sentence, Sentence) else sentence
    return ngram_counts(tokens, max_order)


# =============================================================================
# I/O
# =============================================================================


def read_lines(path: str | Path) -> list[str]:
    """Read a UTF-8 file (or stdin for "-") as a list of lines without newlines."""
    name = str(path)
    if name == STDIO:
        data = sys.stdin.buffer.read()
    else:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise CorpusError(f"{name}: {e.strerror or e}") from e
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CorpusDecodeError(name, e.start, e.reason) from e
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return lines


def write_lines(lines: Iterable[str], path: str | Path) -> None:
    """Write one line per item, each terminated by LF."""
    payload = "".join(f"{line}\n" for line in lines).encode("utf-8")
    if str(path) == STDIO:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
        return
    try:
        Path(path).write_bytes(payload)
    except OSError as e:
        raise CorpusError(f"{path}: {e.strerror or e}") from e


def load_monotext(
    path: str | Path, config: TokenizerConfig = DEFAULT_TOKENIZER
) -> Monotext:
    return Monotext.from_lines(read_lines(path), config)


def save_monotext(monotext: Monotext, path: str | Path) -> None:
    write_lines(monotext.lines, path)


def load_bitext(
    source_path: str | Path,
    target_path: str | Path,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> Bitext:
    """Load two parallel files; line i of each forms pair i."""
    if str(source_path) == STDIO and str(target_path) == STDIO:
        raise CorpusError("only one side of a bitext can be read from stdin")
    sources = read_lines(source_path)
    targets = read_lines(target_path)
    if len(sources) != len(targets):
        raise AlignmentError(len(sources), len(targets))
    bitext = Bitext.from_sides(
        Monotext.from_lines(sources, config), Monotext.from_lines(targets, config)
    )
    logger.info("loaded %d pairs from %s / %s", len(bitext), source_path, target_path)
    return bitext


def save_bitext(
    bitext: Bitext, source_path: str | Path, target_path: str | Path
) -> None:
    write_lines((p.source.raw for p in bitext), source_path)
    write_lines((p.target.raw for p in bitext), target_path)


def save_origins(bitext: Bitext, path: str | Path) -> None:
    """Write the origin sidecar: one tag per pair."""
    write_lines((p.origin.value for p in bitext), path)


def load_origins(path: str | Path) -> list[Origin]:
    try:
        return [Origin(line) for line in read_lines(path)]
    except ValueError as e:
        raise CorpusError(f"{path}: {e}") from e
