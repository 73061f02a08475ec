"""
Tests for the HTTP API.
"""
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from api import app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def client():
    return TestClient(app)


def _upload(name):
    return {"file": (name, (FIXTURES / name).read_bytes(), "text/csv")}


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_config(client):
    settings = client.get("/config").json()
    assert settings["grid_points"] >= 2
    assert 1 <= settings["nmax"] <= 16


def test_moments(client):
    response = client.post("/moments", files=_upload("two_tick.csv"))
    assert response.status_code == 200
    report = response.json()
    assert report["config"]["input"] == "two_tick.csv"
    assert report["records"][0]["p"][0] == 2.5


def test_compare(client):
    response = client.post("/compare", files=_upload("two_tick.csv"))
    assert response.status_code == 200
    assert response.json()["summary"]["max_abs_gap"] == 0.5


def test_density(client):
    response = client.post("/density", params={"k": 2, "grid_points": 101}, files=_upload("two_tick.csv"))
    assert response.status_code == 200
    record = response.json()["records"][0]
    assert len(record["price"]) == 101


def test_zero_variance_is_unprocessable(client):
    response = client.post("/density", files=_upload("constant_price.csv"))
    assert response.status_code == 422
    assert response.json()["error"] == "ZeroVariance"


def test_bad_tape_is_client_error(client):
    files = {"file": ("bad.csv", b"ts,price\n1,2\n", "text/csv")}
    response = client.post("/moments", files=files)
    assert response.status_code == 400
    assert response.json()["error"] == "ParseError"


def test_unsupported_order_is_client_error(client):
    response = client.post("/density", params={"k": 4}, files=_upload("two_tick.csv"))
    assert response.status_code == 400


def test_unsupported_suffix(client):
    files = {"file": ("tape.pdf", b"%PDF", "application/pdf")}
    assert client.post("/moments", files=files).status_code == 400


def test_zero_grid_points_is_client_error(client):
    response = client.post("/density", params={"grid_points": 0}, files=_upload("two_tick.csv"))
    assert response.status_code == 400
    assert response.json()["error"] == "UsageError"
