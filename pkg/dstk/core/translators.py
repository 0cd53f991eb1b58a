"""Translator backends behind one contract: N lines in, N lines out, same order.

The toolkit never trains or runs a neural model itself; every translation
arrow in a workflow goes through one of these backends.
"""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from dstk.core.corpus import (
    DEFAULT_TOKENIZER,
    Monotext,
    TokenizerConfig,
    read_lines,
    tokenize,
    write_lines,
)
from dstk.core.errors import (
    ConfigError,
    ContractViolationError,
    CorpusError,
    ExternalCommandError,
    TranslatorTimeoutError,
)
from dstk.utils.helpers import batched

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 10_000
DEFAULT_TIMEOUT = 3600.0


class TranslatorKind(str, Enum):
    EXTERNAL_COMMAND = "cmd"
    PRETRANSLATED_FILE = "file"
    IDENTITY_MOCK = "identity"
    DICTIONARY_MOCK = "dict"


@dataclass(frozen=True)
class TranslatorSpec:
    """How to translate a Monotext.

    `command_template` must contain `{input}` and `{output}`; they are
    replaced by quoted paths of a batch's input and output files.
    """

    kind: TranslatorKind
    command_template: str | None = None
    file_path: str | None = None
    dictionary_path: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self) -> None:
        if self.kind is TranslatorKind.EXTERNAL_COMMAND:
            template = self.command_template or ""
            if "{input}" not in template or "{output}" not in template:
                raise ConfigError(
                    "command template needs {input} and {output} placeholders"
                )
        if self.kind is TranslatorKind.PRETRANSLATED_FILE and not self.file_path:
            raise ConfigError("pretranslated_file translator needs a file path")
        if self.kind is TranslatorKind.DICTIONARY_MOCK and not self.dictionary_path:
            raise ConfigError("dictionary_mock translator needs a dictionary path")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")

    def describe(self) -> str:
        detail = self.command_template or self.file_path or self.dictionary_path
        return f"{self.kind.value}:{detail}" if detail else self.kind.value


def parse_translator_spec(
    text: str, timeout: float = DEFAULT_TIMEOUT, batch_size: int = DEFAULT_BATCH_SIZE
) -> TranslatorSpec:
    """Parse `identity`, `dict:PATH`, `file:PATH` or `cmd:TEMPLATE`."""
    head, _, rest = text.partition(":")
    try:
        kind = TranslatorKind(head)
    except ValueError as e:
        raise ConfigError(
            f"unknown translator {text!r}; expected identity, dict:PATH, file:PATH or cmd:TEMPLATE"
        ) from e
    if kind is TranslatorKind.IDENTITY_MOCK:
        return TranslatorSpec(kind, timeout=timeout, batch_size=batch_size)
    field_name = {
        TranslatorKind.EXTERNAL_COMMAND: "command_template",
        TranslatorKind.PRETRANSLATED_FILE: "file_path",
        TranslatorKind.DICTIONARY_MOCK: "dictionary_path",
    }[kind]
    return TranslatorSpec(
        kind, timeout=timeout, batch_size=batch_size, **{field_name: rest or None}
    )


def load_dictionary(path: str | Path) -> dict[str, str]:
    """Read a `source<TAB>target` lexicon."""
    lexicon: dict[str, str] = {}
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        source, sep, target = line.partition("\t")
        if not sep:
            raise CorpusError(f"{path}:{lineno}: expected 'source<TAB>target'")
        lexicon[source] = target
    return lexicon


def _check_count(expected: int, lines: list[str], source: str) -> None:
    if len(lines) != expected:
        raise ContractViolationError(expected, len(lines), source)


def _run_command_batch(
    template: str, lines: list[str], timeout: float, batch_index: int
) -> list[str]:
    with tempfile.TemporaryDirectory(prefix="dstk-translate-") as tmp:
        input_path = Path(tmp) / "input.txt"
        output_path = Path(tmp) / "output.txt"
        write_lines(lines, input_path)
        command = template.replace("{input}", shlex.quote(str(input_path))).replace(
            "{output}", shlex.quote(str(output_path))
        )
        logger.info("batch %d: translating %d lines", batch_index, len(lines))
        try:
            result = subprocess.run(  # noqa: S602 - user-supplied translator command
                command,
                shell=True,
                capture_output=True,
                text=True,
                timeout=timeout,
                env=os.environ.copy(),
            )
        except subprocess.TimeoutExpired as e:
            raise TranslatorTimeoutError(template, timeout) from e
        if result.returncode != 0:
            raise ExternalCommandError(template, result.returncode, result.stderr)
        if not output_path.exists():
            raise ContractViolationError(len(lines), 0, f"command (no output file): {template}")
        output = read_lines(output_path)
    _check_count(len(lines), output, f"command batch {batch_index}")
    return output


def _translate_external(lines: list[str], spec: TranslatorSpec, threads: int) -> list[str]:
    batches = list(batched(lines, spec.batch_size))
    template = spec.command_template or ""
    if threads <= 1 or len(batches) <= 1:
        results = [
            _run_command_batch(template, batch, spec.timeout, i)
            for i, batch in enumerate(batches)
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_run_command_batch, template, batch, spec.timeout, i)
                for i, batch in enumerate(batches)
            ]
            # Results are collected in batch order regardless of completion order.
            results = [future.result() for future in futures]
    return [line for batch in results for line in batch]


def translate(
    monotext: Monotext,
    spec: TranslatorSpec,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    threads: int = 1,
) -> Monotext:
    """Translate every line; output line i is the translation of input line i."""
    lines = monotext.lines
    if spec.kind is TranslatorKind.IDENTITY_MOCK:
        return monotext
    if spec.kind is TranslatorKind.PRETRANSLATED_FILE:
        output = read_lines(spec.file_path or "")
        _check_count(len(lines), output, f"pretranslated file {spec.file_path}")
    elif spec.kind is TranslatorKind.DICTIONARY_MOCK:
        lexicon = load_dictionary(spec.dictionary_path or "")
        output = [
            " ".join(lexicon.get(token, token) for token in sentence.tokens)
            for sentence in monotext
        ]
    else:
        output = _translate_external(lines, spec, threads)
    return Monotext(tuple(tokenize(line, config) for line in output))
