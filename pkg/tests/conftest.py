"""Shared fixtures for the dstk test suite."""

import os

import pytest
from hypothesis import HealthCheck, settings

from dstk.core import config as config_module
from dstk.core import history as history_module

# isolated_home is autouse, so every @given test sees a function-scoped fixture.
settings.register_profile(
    "dstk", suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None
)
settings.load_profile("dstk")


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep config and run history out of the real home directory."""
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    config_module.reset_config()
    history_module.reset_history()
    yield home
    config_module.reset_config()
    history_module.reset_history()


def slow_enabled() -> bool:
    return os.environ.get("DSTK_RUN_SLOW") == "1"
