"""Discussion sessions: policy, grounding, tools, and byte-exact replay."""

import json
import random

import pytest

from gardenlens import forum
from gardenlens.errors import (BackendUnavailable, GroundingError, InvalidRoleSet,
                               KbLoadError, MalformedPath, MalformedQuery,
                               SessionTerminated)
from gardenlens.forum import (AgentRole, CannedChatBackend, Message, MockWebSearch,
                              ScriptedChatBackend, kb_query, open_session, post,
                              replay_transcript, roles_from_preset, verify_grounding,
                              web_search)
from gardenlens.jsonutil import digest

GOLDEN_QUERY = ("Please review nodes/waterfront-architecture/histogram and the "
                "vision keywords for that scene.")


def default_roles():
    return roles_from_preset("default")


@pytest.fixture()
def scripted(golden_dir, fixtures_dir):
    return ScriptedChatBackend.from_file(fixtures_dir / "chat" / "fixtures.json")


# --- open_session -------------------------------------------------------------

def test_default_preset_opens(golden_report):
    session = open_session(default_roles(), golden_report)
    assert session.state == "open"
    assert [r.kind for r in session.roles].count("analyst") == 2


def test_zero_analysts_rejected(golden_report):
    roles = [r for r in default_roles() if r.kind != "analyst"]
    with pytest.raises(InvalidRoleSet):
        open_session(roles, golden_report)


def test_two_managers_rejected(golden_report):
    roles = default_roles() + [AgentRole(name="manager-2", kind="group_chat_manager")]
    with pytest.raises(InvalidRoleSet):
        open_session(roles, golden_report)


def test_kb_with_histogram_mass_violation_rejected(tmp_path, golden_dir):
    data = json.loads((golden_dir / "report.json").read_text())
    node = next(iter(data["nodes"]))
    data["nodes"][node]["n"] += 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    with pytest.raises(KbLoadError):
        open_session(default_roles(), bad)


# --- kb_query -----------------------------------------------------------------

def test_kb_query_direct_addressing(golden_report):
    fragment = kb_query(golden_report, "nodes/waterfront-architecture/histogram")
    assert fragment == golden_report.data["nodes"]["waterfront-architecture"]["histogram"]


def test_kb_query_missing_path_is_empty(golden_report):
    assert kb_query(golden_report, "nodes/does-not-exist") is None
    assert kb_query(golden_report, "meta/schema/next") is None


def test_kb_query_malformed_path(golden_report):
    with pytest.raises(MalformedPath):
        kb_query(golden_report, "")
    with pytest.raises(MalformedPath):
        kb_query(golden_report, "nodes//histogram")


def test_kb_query_matches_traversal_oracle(golden_report):
    rng = random.Random(404)

    def walk_paths(node, prefix, out):
        if isinstance(node, dict):
            for key, value in node.items():
                walk_paths(value, prefix + [str(key)], out)
        elif isinstance(node, list):
            for index, value in enumerate(node):
                walk_paths(value, prefix + [str(index)], out)
        elif prefix:
            out.append(prefix)

    paths: list[list[str]] = []
    walk_paths(golden_report.data, [], paths)
    for path in rng.sample(paths, 50):
        node = golden_report.data
        for segment in path:
            node = node[segment] if isinstance(node, dict) else node[int(segment)]
        assert kb_query(golden_report, "/".join(path)) == node


# --- web_search ------------------------------------------------------------------

def test_mock_search_fixture_hit():
    results = MockWebSearch()("Chinese garden leaky window")
    assert len(results) == 3
    assert all({"title", "snippet", "url"} <= set(r) for r in results)


def test_empty_query_rejected():
    with pytest.raises(MalformedQuery):
        web_search("   ", {})


def test_mock_search_is_pure():
    search = MockWebSearch()
    q = "Chinese garden leaky window"
    assert search(q) == search(q)
    assert search("unheard of query") == []


# --- rounds ------------------------------------------------------------------------

def test_scripted_round_matches_golden_transcript(golden_report, golden_dir, scripted):
    session = open_session(default_roles(), golden_report, session_id="golden")
    post(session, GOLDEN_QUERY, scripted)
    golden_lines = (golden_dir / "session.jsonl").read_text().splitlines()
    assert session.transcript_lines() == golden_lines


def test_post_after_terminate_raises(golden_report, scripted):
    session = open_session(default_roles(), golden_report)
    session.terminate()
    with pytest.raises(SessionTerminated):
        post(session, "hello", scripted)


def test_round_appends_gap_free_increasing_seq(golden_report):
    session = open_session(default_roles(), golden_report)
    post(session, GOLDEN_QUERY, CannedChatBackend())
    post(session, "Now look at nodes/closed-window/histogram please.", CannedChatBackend())
    seqs = [m.seq for m in session.transcript]
    assert seqs == list(range(1, len(seqs) + 1))
    verify_grounding(session.transcript, session.tool_log)


def test_tool_digest_recomputable_from_kb_slice(golden_report):
    session = open_session(default_roles(), golden_report)
    post(session, GOLDEN_QUERY, CannedChatBackend())
    analyst_msgs = [m for m in session.transcript if m.speaker == "analyst-1"]
    assert analyst_msgs and analyst_msgs[0].tool_calls
    call = analyst_msgs[0].tool_calls[0]
    fragment = kb_query(golden_report, call.args["path"])
    assert call.digest == digest(fragment)
    assert session.tool_log[call.digest]["result"] == fragment
    assert f"[kb:{call.digest}]" in analyst_msgs[0].content


def test_termination_guaranteed_without_terminate_token(golden_report):
    class ChattyBackend:
        def complete(self, request):
            return {"content": "more thoughts, never done", "tool_calls": []}

    session = open_session(default_roles(), golden_report, max_turns=9)
    new = post(session, "talk forever", ChattyBackend())
    # researcher message plus at most max_turns agent messages
    assert len(new) == 1 + 9
    assert session.state == "open"


def test_backend_failure_aborts_round_cleanly(golden_report):
    class FlakyBackend:
        def __init__(self):
            self.calls = 0

        def complete(self, request):
            self.calls += 1
            if self.calls >= 3:
                raise BackendUnavailable("socket dropped")
            return {"content": "fine", "tool_calls": []}

    session = open_session(default_roles(), golden_report)
    with pytest.raises(BackendUnavailable):
        post(session, "query", FlakyBackend())
    seqs = [m.seq for m in session.transcript]
    assert seqs == list(range(1, len(seqs) + 1))
    verify_grounding(session.transcript, session.tool_log)
    # session still usable for the next round
    post(session, "retry", CannedChatBackend())


# --- replay and grounding --------------------------------------------------------------

def test_replay_reproduces_transcript_byte_identically(golden_dir, scripted):
    recorded = forum.load_transcript(golden_dir / "session.jsonl")
    replayed = replay_transcript(recorded, default_roles(), golden_dir / "report.json",
                                 scripted, session_id="golden")
    got = [forum.dumps_line(m.to_json_dict()) for m in replayed.transcript]
    want = (golden_dir / "session.jsonl").read_text().splitlines()
    assert got == want


def test_grounding_rejects_corrupted_citation(golden_dir):
    recorded = forum.load_transcript(golden_dir / "session.jsonl")
    tool_log = forum.load_tool_log(golden_dir / "session_tools.json")
    verify_grounding(recorded, tool_log)  # pristine transcript passes

    import re

    corrupted = []
    for message in recorded:
        content = re.sub(r"\[kb:[0-9a-f]+\]", "[kb:deadbeefdeadbeef]", message.content)
        corrupted.append(Message(seq=message.seq, speaker=message.speaker, content=content,
                                 tool_calls=message.tool_calls, ts=message.ts))
    with pytest.raises(GroundingError):
        verify_grounding(corrupted, tool_log)


def test_grounding_rejects_seq_gap(golden_dir):
    recorded = forum.load_transcript(golden_dir / "session.jsonl")
    tool_log = forum.load_tool_log(golden_dir / "session_tools.json")
    with pytest.raises(GroundingError):
        verify_grounding(recorded[:1] + recorded[2:], tool_log)


def test_transcript_file_round_trip(tmp_path, golden_dir):
    recorded = forum.load_transcript(golden_dir / "session.jsonl")
    forum.dump_transcript(recorded, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == \
        (golden_dir / "session.jsonl").read_bytes()


def test_live_round_rejects_fabricated_citation(golden_report):
    class FabricatingBackend:
        def complete(self, request):
            return {"content": "Trust me: [kb:1234deadbeef1234]", "tool_calls": []}

    session = open_session(default_roles(), golden_report)
    with pytest.raises(GroundingError):
        post(session, "query", FabricatingBackend())
    # the offending message was never appended; seq stays contiguous
    assert [m.seq for m in session.transcript] == list(range(1, len(session.transcript) + 1))
