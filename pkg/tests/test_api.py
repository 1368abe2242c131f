import math

import pytest
from fastapi.testclient import TestClient

import main


@pytest.fixture
def client():
    return TestClient(main.app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["config_valid"] is True


def test_expand(client):
    response = client.post("/expand", json={"i": 1, "j": 1, "order": 6})
    assert response.status_code == 200
    body = response.json()
    assert body["indices"] == [1, 1]
    assert body["psi"]["alpha"] == pytest.approx(-1.0 / math.pi)


def test_expand_validates_indices(client):
    assert client.post("/expand", json={"i": 5}).status_code == 422


def test_unknown_suite_is_bad_request(client):
    response = client.post("/verify", json={"suite": "nope"})
    assert response.status_code == 400
    assert "InvalidParameterError" in response.json()["detail"]


def test_unknown_check_is_bad_request(client):
    assert client.post("/bounded", json={"check": "nope"}).status_code == 400


def test_unexpected_failure_is_server_error(client, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(main, "run_bounded", boom)
    response = client.post("/bounded", json={"check": "hormander"})
    assert response.status_code == 500
    assert response.json()["detail"] == "boom"


def test_report_payload(client):
    response = client.post("/verify", json={"suite": "metric", "seed": 0})
    assert response.status_code == 200
    body = response.json()
    assert body["id"] == "verify-metric"
    assert body["passed"] is True
    assert body["exit_code"] == 0
