from __future__ import annotations

from pathlib import Path

import pytest

from locmt.backend import BackendConfig

from testutil import FIXTURES


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def mock_endpoint() -> str:
    return f"mock:{FIXTURES / 'mockbackend'}"


@pytest.fixture(scope="session")
def mock_config(mock_endpoint) -> BackendConfig:
    return BackendConfig(endpoint=mock_endpoint)
