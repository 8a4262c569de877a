#!/usr/bin/env python3
"""Regenerate golden outputs under fixtures/golden/ and fixtures/chat/.

Runs the real CLI over the fixture corpus with the in-process stub
backend (filter -> enrich -> assign -> score -> report), then records
one discussion session against the canned chat backend to produce the
golden transcript, its tool log, and the scripted-backend fixtures.

Goldens are compared byte-for-byte by the test suite; regenerate them
only when an intentional behavior change is being made, and review the
diff. Run from the repo root: python tools/refresh_goldens.py
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gardenlens import cli, forum  # noqa: E402
from gardenlens.jsonutil import dumps_pretty  # noqa: E402

FIXTURES = REPO / "fixtures"
CORPUS = FIXTURES / "corpus"
GOLDEN = FIXTURES / "golden"
CHAT = FIXTURES / "chat"

GOLDEN_QUERY = ("Please review nodes/waterfront-architecture/histogram and the "
                "vision keywords for that scene.")


def run(args: list[str]) -> None:
    rc = cli.main(args)
    assert rc == 0, f"command failed ({rc}): {args}"


def main() -> int:
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    GOLDEN.mkdir(parents=True)

    filtered = GOLDEN / "filtered"
    run(["filter", "--store", str(CORPUS), "--out", str(filtered)])
    run(["enrich", "--store", str(filtered), "--backend", "stub",
         "--out", str(GOLDEN / "enriched.jsonl")])
    run(["assign", "--enriched", str(GOLDEN / "enriched.jsonl"),
         "--out", str(GOLDEN / "assignments.jsonl")])
    run(["score", "--store", str(filtered), "--backend", "stub",
         "--out", str(GOLDEN / "scores.jsonl")])
    run(["report", "--enriched", str(GOLDEN / "enriched.jsonl"),
         "--assignments", str(GOLDEN / "assignments.jsonl"),
         "--scores", str(GOLDEN / "scores.jsonl"),
         "--out", str(GOLDEN / "report.json")])

    # record the golden discussion session and the scripted-backend fixtures
    CHAT.mkdir(parents=True, exist_ok=True)
    recorder = forum.RecordingChatBackend(forum.CannedChatBackend())
    session = forum.open_session(forum.roles_from_preset("default"),
                                 GOLDEN / "report.json", session_id="golden")
    forum.post(session, GOLDEN_QUERY, recorder)
    forum.dump_transcript(session.transcript, GOLDEN / "session.jsonl")
    forum.dump_tool_log(session.tool_log, GOLDEN / "session_tools.json")
    (CHAT / "fixtures.json").write_text(dumps_pretty(recorder.fixtures), encoding="utf-8")

    # replay sanity: the scripted backend must reproduce the transcript exactly
    scripted = forum.ScriptedChatBackend(recorder.fixtures)
    replayed = forum.replay_transcript(session.transcript, forum.roles_from_preset("default"),
                                       GOLDEN / "report.json", scripted, session_id="golden")
    assert replayed.transcript_lines() == session.transcript_lines(), "scripted replay diverged"
    forum.verify_grounding(session.transcript, session.tool_log)

    print(f"golden outputs written under {GOLDEN}")
    print(f"transcript: {len(session.transcript)} messages, "
          f"{len(session.tool_log)} tool entries, {len(recorder.fixtures)} scripted replies")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
