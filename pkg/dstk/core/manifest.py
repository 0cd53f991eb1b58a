"""Run manifests: what a run read, how it was configured and what it produced.

Two runs with the same inputs and flags write the same manifest except
for ``created_at``.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import yaml

from dstk import __version__
from dstk.core.corpus import STDIO
from dstk.core.errors import CorpusError
from dstk.utils.helpers import file_digest

logger = logging.getLogger(__name__)

TOOL_NAME = "dstk"
MANIFEST_SUFFIX = ".manifest.yaml"


def _plain(value: Any) -> Any:
    """Convert configs and reports into YAML-safe builtins."""
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class RunManifest:
    subcommand: str
    configs: dict[str, Any] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    counts: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    tool: str = TOOL_NAME
    version: str = __version__
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def add_config(self, name: str, value: Any) -> None:
        self.configs[name] = _plain(value)

    def add_input(self, name: str, path: str | Path) -> None:
        """Record an input file by its SHA-256 digest."""
        if str(path) == STDIO:
            self.inputs[name] = "stdin"
        else:
            self.inputs[name] = f"sha256:{file_digest(path)}"

    def add_output(self, path: str | Path) -> None:
        self.outputs.append(str(path))

    def add_counts(self, counts: Mapping[str, Any] | Any) -> None:
        self.counts.update(_plain(counts))

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": self.tool,
            "version": self.version,
            "subcommand": self.subcommand,
            "configs": self.configs,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "counts": self.counts,
            "warnings": self.warnings,
            "created_at": self.created_at,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.write_text(self.dump(), encoding="utf-8")
        except OSError as e:
            raise CorpusError(f"{path}: {e.strerror or e}") from e
        logger.info("wrote manifest %s", path)
        return path


def load_manifest(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def default_manifest_path(primary_output: str | Path) -> Path | None:
    """`<output>.manifest.yaml` beside the primary output; None for stdout."""
    if str(primary_output) == STDIO:
        return None
    return Path(f"{primary_output}{MANIFEST_SUFFIX}")
