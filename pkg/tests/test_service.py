"""The discussion service API: sessions, rounds, SSE, knowledge bases."""

import json
import shutil

import pytest
from fastapi.testclient import TestClient

from gardenlens.forum import ScriptedChatBackend
from gardenlens.service import create_app

GOLDEN_QUERY = ("Please review nodes/waterfront-architecture/histogram and the "
                "vision keywords for that scene.")


@pytest.fixture()
def client(tmp_path, golden_dir, fixtures_dir):
    kb_dir = tmp_path / "kb"
    kb_dir.mkdir()
    shutil.copy(golden_dir / "report.json", kb_dir / "report.json")
    backend = ScriptedChatBackend.from_file(fixtures_dir / "chat" / "fixtures.json")
    app = create_app(kb_dir=kb_dir, chat_backend=backend)
    with TestClient(app) as client:
        yield client


def test_kb_listing_and_fetch(client, golden_dir):
    assert client.get("/kb").json() == {"kbs": ["report"]}
    data = client.get("/kb/report").json()
    assert data == json.loads((golden_dir / "report.json").read_text())
    assert client.get("/kb/nope").status_code == 404


def test_kb_query_endpoint(client):
    out = client.get("/kb/report/query", params={"path": "meta/schema"}).json()
    assert out == {"path": "meta/schema", "value": "scene-opinion-report/1"}
    missing = client.get("/kb/report/query", params={"path": "nodes/none"}).json()
    assert missing["value"] is None


def test_create_session_and_unknown_kb(client):
    view = client.post("/sessions", json={"kb": "report"}).json()
    assert view["state"] == "open"
    assert view["n_messages"] == 0
    assert view["kb"] == "report"
    assert client.post("/sessions", json={"kb": "missing"}).status_code == 404


def test_two_sessions_are_independent(client):
    a = client.post("/sessions", json={"kb": "report"}).json()["id"]
    b = client.post("/sessions", json={"kb": "report"}).json()["id"]
    assert a != b
    client.post(f"/sessions/{a}/messages", json={"content": GOLDEN_QUERY})
    assert client.get(f"/sessions/{b}").json()["messages"] == []


def test_round_matches_golden_and_transcript_export(client, golden_dir):
    sid = client.post("/sessions", json={"kb": "report"}).json()["id"]
    reply = client.post(f"/sessions/{sid}/messages", json={"content": GOLDEN_QUERY})
    assert reply.status_code == 200
    golden = (golden_dir / "session.jsonl").read_text()
    exported = client.get(f"/sessions/{sid}/transcript").text
    assert exported == golden


def test_tool_entry_lookup(client):
    sid = client.post("/sessions", json={"kb": "report"}).json()["id"]
    client.post(f"/sessions/{sid}/messages", json={"content": GOLDEN_QUERY})
    messages = client.get(f"/sessions/{sid}").json()["messages"]
    digests = [tc["digest"] for m in messages for tc in m["tool_calls"]]
    assert digests
    entry = client.get(f"/sessions/{sid}/tools/{digests[0]}").json()
    assert entry["digest"] == digests[0]
    assert "result" in entry
    assert client.get(f"/sessions/{sid}/tools/ffffffff").status_code == 404


def test_post_to_terminated_session_conflicts(client):
    sid = client.post("/sessions", json={"kb": "report"}).json()["id"]
    client.post(f"/sessions/{sid}/terminate")
    resp = client.post(f"/sessions/{sid}/messages", json={"content": "hello"})
    assert resp.status_code == 409


def test_event_stream_replays_messages_from_since(client):
    sid = client.post("/sessions", json={"kb": "report"}).json()["id"]
    client.post(f"/sessions/{sid}/messages", json={"content": GOLDEN_QUERY})
    client.post(f"/sessions/{sid}/terminate")

    events = []
    with client.stream("GET", f"/sessions/{sid}/events", params={"since": 2}) as stream:
        event = {}
        for line in stream.iter_lines():
            if line.startswith("id: "):
                event["id"] = int(line[4:])
            elif line.startswith("event: "):
                event["event"] = line[7:]
            elif line.startswith("data: "):
                event["data"] = line[6:]
            elif line == "" and event:
                events.append(event)
                if event.get("event") == "end":
                    break
                event = {}

    message_events = [e for e in events if e.get("event") == "message"]
    transcript = client.get(f"/sessions/{sid}").json()["messages"]
    assert [e["id"] for e in message_events] == [m["seq"] for m in transcript[2:]]
    assert [json.loads(e["data"]) for e in message_events] == transcript[2:]
    assert events[-1]["event"] == "end"
