"""Pytest configuration and fixtures for CLI tests."""

from __future__ import annotations

import pytest

from tests.cli.runner import CliRunner


# =============================================================================
# PYTEST HOOKS
# =============================================================================


@pytest.hookimpl(tryfirst=True)
def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    """Mark everything under tests/cli so ``-m "not cli"`` skips the subprocess runs."""
    for item in items:
        if "tests/cli/" in item.nodeid:
            item.add_marker(pytest.mark.cli)


# =============================================================================
# FIXTURES
# =============================================================================


@pytest.fixture(scope="session")
def cli() -> CliRunner:
    return CliRunner()
