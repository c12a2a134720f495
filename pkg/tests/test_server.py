import json

import pytest
from fastapi.testclient import TestClient

from ppdm.documents import body_to_document
from ppdm.fixtures import make_fixture
from ppdm.server import create_app


@pytest.fixture
def client():
    return TestClient(create_app())


def load_fixture(client, name, params=None):
    doc = body_to_document(make_fixture(name, params))
    r = client.post("/load", json={"document": doc})
    assert r.status_code == 200, r.text
    return r.json()


def test_load_preview_commit_undo(client):
    meta = load_fixture(client, "box")["model_meta"]
    assert meta["volume"] == pytest.approx(1.0)

    r = client.post("/select", json={"tags": ["top"]})
    assert r.status_code == 200

    before = client.get("/mesh").json()["mesh"]
    r = client.post("/preview", json={"motion": {"translate": [0, 0, 0.5]}, "t": 1.0})
    assert r.status_code == 200
    assert r.json()["mesh"]["volume"] == pytest.approx(1.5)

    # preview is pure: the session model is untouched
    after = client.get("/mesh").json()["mesh"]
    assert json.dumps(after, sort_keys=True) == json.dumps(before, sort_keys=True)

    r = client.post("/commit", json={"motion": {"translate": [0, 0, 0.5]}})
    assert r.json()["model_meta"]["volume"] == pytest.approx(1.5)

    r = client.post("/undo")
    assert r.json()["model_meta"]["volume"] == pytest.approx(1.0)
    restored = client.get("/mesh").json()["mesh"]
    assert json.dumps(restored, sort_keys=True) == json.dumps(before, sort_keys=True)


def test_preview_partial_t(client):
    load_fixture(client, "box")
    client.post("/select", json={"tags": ["top"]})
    r = client.post("/preview", json={"motion": {"translate": [0, 0, 1.0]}, "t": 0.25})
    assert r.json()["mesh"]["volume"] == pytest.approx(1.25)


def test_preview_trace_has_tcps(client):
    load_fixture(client, "slotted_block")
    client.post("/select", json={"tags": ["top"]})
    r = client.post("/preview", json={"motion": {"translate": [0, 0, -4]}, "t": 1.0})
    events = r.json()["trace"]["events"]
    assert [round(e["t"], 6) for e in events] == [0.5, 0.75]


def test_unknown_tag_leaves_session_alive(client):
    load_fixture(client, "box")
    r = client.post("/select", json={"tags": ["nope"]})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "UnknownFaceError"
    assert client.get("/list_faces").status_code == 200


def test_malformed_motion(client):
    load_fixture(client, "box")
    client.post("/select", json={"tags": ["top"]})
    r = client.post("/preview", json={"motion": {"rotate": {"axis_point": [0, 0, 0]}}})
    assert r.status_code == 400
    assert client.get("/list_faces").status_code == 200


def test_undo_depth(client):
    load_fixture(client, "box", {"h": 40.0})
    client.post("/select", json={"tags": ["top"]})
    for _ in range(18):
        client.post("/commit", json={"motion": {"translate": [0, 0, -1.0]}})
    meta = client.get("/list_faces")
    undone = 0
    while True:
        r = client.post("/undo")
        if r.status_code != 200:
            break
        undone += 1
    assert undone == 16


def test_rotation_motion_roundtrip(client):
    load_fixture(client, "rot_wedge_base")
    client.post("/select", json={"tags": ["top"]})
    r = client.post("/preview", json={
        "motion": {"rotate": {"axis_point": [2, 0, 1], "axis_dir": [0, 1, 0],
                               "angle_deg": 20.0}},
        "t": 1.0,
    })
    assert r.status_code == 200
    assert r.json()["mesh"]["volume"] == pytest.approx(8.0, abs=1e-9)


def test_export_endpoint(client):
    load_fixture(client, "box")
    r = client.get("/export_mesh?format=obj")
    assert r.status_code == 200
    assert r.content.startswith(b"# ppdm mesh")
