from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from modelserv.service import create_app

from serviceutil import TestClientTransport


@pytest.fixture()
def service_client():
    app = create_app()
    with TestClient(app, base_url="http://testserver", raise_server_exceptions=False) as client:
        yield client


@pytest.fixture()
def service_backend(service_client):
    from locmt.backend import BackendConfig, HttpBackend

    config = BackendConfig(
        endpoint="http://testserver", timeout=30.0, retry_count=2, backoff_base=0.0
    )
    return HttpBackend(config, TestClientTransport(service_client))
