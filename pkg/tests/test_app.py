import json

import pytest

from app import app
from radloc.presets import get_preset
from radloc.scenario import scenario_to_dict


@pytest.fixture
def client():
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


def localize(client, payload):
    return client.post("/localize", data=json.dumps(payload), content_type="application/json")


def test_root_lists_presets(client):
    response = client.get("/")
    assert response.status_code == 200
    body = response.get_json()
    assert body["status"] == "running"
    assert "lsi_a04" in body["presets"]["names"]
    assert "/localize" in body["endpoints"]


def test_localize_preset(client):
    response = localize(client, {"scenario": "lsi_a04", "overrides": {"n_particles": 50, "frames": 3}})
    assert response.status_code == 200
    body = response.get_json()
    assert body["success"] is True
    assert body["frames"] == 3
    assert len(body["r_series"]) == 3
    assert body["final_error"] >= 0.0
    assert body["processing_time"] >= 0.0


def test_localize_is_reproducible(client):
    payload = {"scenario": "lsi_c01", "overrides": {"n_particles": 40, "frames": 2, "seed": 5}}
    a = localize(client, payload).get_json()
    b = localize(client, payload).get_json()
    assert a["final"] == b["final"]
    assert a["r_series"] == b["r_series"]


def test_localize_inline_scenario(client):
    data = scenario_to_dict(get_preset("lsi_c01"))
    data["name"] = "inline"
    data["filter"]["n_particles"] = 40
    data["filter"]["n_frames"] = 2
    response = localize(client, {"scenario": data})
    assert response.status_code == 200
    assert response.get_json()["scenario"] == "inline"


def test_localize_body_with_surrounding_text(client):
    body = 'payload: {"scenario": "lsi_a04", "overrides": {"n_particles": 30, "frames": 1}} end'
    response = client.post("/localize", data=body, content_type="text/plain")
    assert response.status_code == 200


@pytest.mark.parametrize("payload", [
    {"scenario": "lsi_a04", "overrides": {"particles": 10}},
    {"scenario": "lsi_a04", "overrides": {"n_particles": "many"}},
    {"overrides": {"n_particles": 10}},
    {"scenario": 42},
    {"scenario": "case9"},
])
def test_localize_bad_requests(client, payload):
    response = localize(client, payload)
    assert response.status_code == 400
    body = response.get_json()
    assert body["success"] is False
    assert body["category"] == "config"


def test_localize_bad_resample_fraction(client):
    data = scenario_to_dict(get_preset("lsi_c01"))
    data["filter"]["resample_fraction"] = 0.0
    response = localize(client, {"scenario": data})
    assert response.status_code == 400
    assert "resample_fraction" in response.get_json()["error"]


def test_run_logs(client):
    localize(client, {"scenario": "lsi_a04", "overrides": {"n_particles": 30, "frames": 1}})
    response = client.get("/run_logs")
    assert response.status_code == 200
    body = response.get_json()
    assert len(body["logs"]) == 1
    assert body["logs"][0]["verb"] == "localize"
    assert body["stats"]["total_logs"] == 1
    assert body["stats"]["successful_runs"] == 1

    response = client.delete("/run_logs")
    assert response.status_code == 200
    assert response.get_json()["success"] is True
    assert client.get("/run_logs").get_json()["logs"] == []


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.get_json()
    assert body["status"] == "healthy"
    assert body["manager_ready"] is True
    assert body["process"]["rss_mb"] > 0


def test_health_reports_manager_runs(client):
    localize(client, {"scenario": "lsi_a04", "overrides": {"n_particles": 50, "frames": 2}})
    manager = client.get("/health").get_json()["manager"]
    assert manager["initialized"] is True
    assert manager["runs"] >= 1
    assert manager["last_run"]["scenario"] == "lsi_a04"
