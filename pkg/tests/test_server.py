import json
import time

import pytest
from fastapi.testclient import TestClient

from permesh.scenario import bundled_scenario_path
from permesh.server import ControlSession, create_app

from conftest import install_legacy_internet


@pytest.fixture
def session():
    return ControlSession()


@pytest.fixture
def client(session):
    return TestClient(create_app(session))


def seed_pending(session):
    sim = session.sim
    sim.dns.records["tracker.evil.com"] = "6.6.6.6"
    pkg = install_legacy_internet(sim)
    sim.set_slice_policy(pkg, [], default_action="prompt")
    sim.http_request(pkg, "GET", "http://tracker.evil.com/x")
    return sim.firewall.unresolved()[0]


def test_state_snapshot(client):
    data = client.get("/v1/state").json()
    assert data["scenarioRunning"] is False
    assert data["pendingCount"] == 0
    assert "apps" in data and "simTime" in data


def test_pending_and_decide_roundtrip(client, session):
    pending = seed_pending(session)
    listed = client.get("/v1/pending").json()
    assert [p["id"] for p in listed] == [pending.id]
    assert listed[0]["host"] == "tracker.evil.com"

    resp = client.post("/v1/decide", json={"id": pending.id, "action": "allow"})
    assert resp.status_code == 200
    assert client.get("/v1/pending").json() == []


def test_decide_unknown_404(client):
    assert client.post("/v1/decide", json={"id": 999, "action": "allow"}).status_code == 404


def test_decide_twice_409(client, session):
    pending = seed_pending(session)
    client.post("/v1/decide", json={"id": pending.id, "action": "block"})
    resp = client.post("/v1/decide", json={"id": pending.id, "action": "allow"})
    assert resp.status_code == 409


def test_decide_bad_action_422(client, session):
    pending = seed_pending(session)
    assert client.post("/v1/decide", json={"id": pending.id, "action": "smite"}).status_code == 422


def test_policy_non_legacy_422(client):
    resp = client.post("/v1/policy", json={"app": "com.ghost", "allowedDomains": []})
    assert resp.status_code == 422


def test_policy_applies(client, session):
    pkg = install_legacy_internet(session.sim)
    resp = client.post("/v1/policy", json={
        "app": pkg, "allowedDomains": ["*.bbc.co.uk"], "defaultAction": "block",
    })
    assert resp.status_code == 200
    assert session.sim.firewall.policy_for(pkg).default_action.value == "block"


def test_user_action_unknown_session_404(client):
    resp = client.post("/v1/user-action", json={"sessionId": "call-999"})
    assert resp.status_code == 404


def test_network_toggle(client, session):
    client.post("/v1/network", json={"connected": True})
    assert session.sim.network.connected is True


def test_events_replay_matches_log(client, session):
    seed_pending(session)
    body = client.get("/v1/events").text
    lines = [json.loads(line) for line in body.splitlines()]
    assert [e["seq"] for e in lines] == [e.seq for e in session.sim.log.entries()]
    types = {e["action"]: e["type"] for e in lines}
    assert types["firewall-prompt"] == "pending"
    assert types["set-policy"] == "state-change"

    since = lines[-1]["seq"]
    assert client.get(f"/v1/events?since={since}").text == ""


def test_scenario_start_and_conflict(client, session):
    path = bundled_scenario_path("interactive-slicing")
    assert client.post("/v1/scenario/start", json={"path": path}).status_code == 200
    assert client.post("/v1/scenario/start", json={"path": path}).status_code == 409

    # drive the run to completion by answering every prompt
    deadline = time.monotonic() + 10
    while session.running and time.monotonic() < deadline:
        for p in client.get("/v1/pending").json():
            client.post("/v1/decide", json={"id": p["id"], "action": "allow"})
        time.sleep(0.02)
    assert not session.running
    assert session.report is not None and session.report.passed

    state = client.get("/v1/state").json()
    assert state["scenarioPassed"] is True


def test_scenario_start_bad_path_422(client):
    resp = client.post("/v1/scenario/start", json={"path": "/nope.json"})
    assert resp.status_code == 422


def test_token_required_when_configured(session):
    client = TestClient(create_app(session, token="s3cret"))
    assert client.get("/v1/state").status_code == 401
    assert client.get("/v1/state", headers={"X-Permesh-Token": "wrong"}).status_code == 401
    assert client.get("/v1/state", headers={"X-Permesh-Token": "s3cret"}).status_code == 200
