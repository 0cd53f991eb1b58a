"""User configuration for dstk."""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import yaml

from dstk.core.errors import ConfigError

DEFAULT_CONFIG = {
    "version": 1,
    "history": {
        "enabled": True,
        "database": None,  # defaults to <data dir>/history.db
    },
    "display": {
        "color": True,
    },
}


class Config:
    """Cross-run settings stored in ~/.config/dstk/config.yaml."""

    def __init__(self, config_path: Path | None = None):
        self.config_dir = Path.home() / ".config" / "dstk"
        self.config_path = config_path or (self.config_dir / "config.yaml")
        self._config: dict[str, Any] = {}
        self.load()

    @property
    def data_dir(self) -> Path:
        return Path.home() / ".local" / "share" / "dstk"

    @property
    def database_path(self) -> Path:
        """Path of the run-history database."""
        db_path = self.get("history.database")
        if db_path:
            return Path(db_path).expanduser()
        return self.data_dir / "history.db"

    @property
    def history_enabled(self) -> bool:
        return bool(self.get("history.enabled", True))

    def load(self) -> dict[str, Any]:
        if self.config_path.exists():
            try:
                with open(self.config_path, encoding="utf-8") as f:
                    loaded = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"{self.config_path}: invalid YAML: {e}") from e
            if not isinstance(loaded, dict):
                raise ConfigError(f"{self.config_path}: expected a mapping at top level")
        else:
            loaded = {}
        self._config = self._merge(copy.deepcopy(DEFAULT_CONFIG), loaded)
        return self._config

    def save(self) -> None:
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self._config, f, default_flow_style=False, sort_keys=True)

    def as_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self._config)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a value by dot-notation key, e.g. ``history.enabled``."""
        value: Any = self._config
        for k in key.split("."):
            if not isinstance(value, dict):
                return default
            value = value.get(k)
        return value if value is not None else default

    def set(self, key: str, value: Any) -> None:
        keys = key.split(".")
        node = self._config
        for k in keys[:-1]:
            child = node.setdefault(k, {})
            if not isinstance(child, dict):
                raise ConfigError(f"cannot set {key}: {k} is not a section")
            node = child
        node[keys[-1]] = value

    def _merge(self, base: dict, override: dict) -> dict:
        result = dict(base)
        for key, value in override.items():
            if isinstance(result.get(key), dict) and isinstance(value, dict):
                result[key] = self._merge(result[key], value)
            else:
                result[key] = value
        return result


_config: Config | None = None


def get_config() -> Config:
    """Get the global configuration instance."""
    global _config
    if _config is None:
        _config = Config()
    return _config


def reset_config() -> None:
    global _config
    _config = None
