"""Role-based discussion community grounded in an analysis report.

A session holds a researcher, an optional user proxy, one or more
analysts, and a group chat manager. Posting a researcher message runs
one round: the proxy relays, analysts take turns (tool calls against
the knowledge base or web search, then a completion), and the manager
closes each cycle, ending the round with a literal TERMINATE line or
when the turn budget runs out.

Determinism is load-bearing: timestamps come from a logical clock,
speaker order is a pure function of the transcript, and the scripted
backend maps a SHA-256 of each completion request to a fixed reply, so
replaying a recorded session reproduces it byte for byte.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .analytics import AnalysisReport, load_report
from .errors import (GroundingError, InvalidRoleSet, MalformedPath,
                     MalformedQuery, SessionTerminated)
from .jsonutil import digest as content_digest
from .jsonutil import dumps_line, sha256_hex

ROLE_KINDS = ("researcher", "user_proxy", "analyst", "group_chat_manager")
TOOL_NAMES = ("kb_query", "web_search")
TERMINATE_TOKEN = "TERMINATE"
DEFAULT_MAX_TURNS = 24
MAX_TOOL_CALLS_PER_TURN = 4
DEFAULT_CLOCK0 = dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc)

_CITATION_RE = re.compile(r"\[(?:kb|web):([0-9a-f]{8,64})\]")
_PATH_RE = re.compile(r"nodes/[A-Za-z0-9_.-]+(?:/[A-Za-z0-9_.-]+)*")


@dataclass(frozen=True)
class AgentRole:
    name: str
    kind: str
    system_prompt: str = ""
    tools: tuple[str, ...] = ()


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: dict
    digest: str

    def to_json_dict(self) -> dict:
        return {"tool": self.tool, "args": self.args, "digest": self.digest}


@dataclass(frozen=True)
class Message:
    seq: int
    speaker: str
    content: str
    tool_calls: tuple[ToolCall, ...] = ()
    ts: str = ""

    def to_json_dict(self) -> dict:
        return {
            "seq": self.seq,
            "speaker": self.speaker,
            "content": self.content,
            "tool_calls": [tc.to_json_dict() for tc in self.tool_calls],
            "ts": self.ts,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Message":
        return cls(
            seq=int(d["seq"]),
            speaker=d["speaker"],
            content=d["content"],
            tool_calls=tuple(ToolCall(tc["tool"], tc["args"], tc["digest"])
                             for tc in d.get("tool_calls", [])),
            ts=d.get("ts", ""),
        )


class ChatBackend(Protocol):
    def complete(self, request: dict) -> dict:
        """request {system, messages, tools} -> {content, tool_calls}."""
        ...


# --- knowledge-base and web tools -----------------------------------------------

def kb_query(kb: AnalysisReport | dict, path: str):
    """Address a report fragment with a slash-delimited path.

    Missing paths yield None rather than an error; agents must handle
    absence. Dict segments are keys, list segments are integer indexes.
    """
    if not isinstance(path, str) or not path:
        raise MalformedPath("path must be a non-empty string")
    segments = path.split("/")
    if any(seg == "" for seg in segments):
        raise MalformedPath(f"empty segment in path {path!r}")
    node = kb.data if isinstance(kb, AnalysisReport) else kb
    for segment in segments:
        if isinstance(node, dict):
            if segment not in node:
                return None
            node = node[segment]
        elif isinstance(node, list):
            try:
                index = int(segment)
            except ValueError:
                return None
            if not 0 <= index < len(node):
                return None
            node = node[index]
        else:
            return None
    return node


class MockWebSearch:
    """Deterministic search results from a fixture file keyed by query."""

    def __init__(self, fixtures: dict[str, list[dict]] | None = None, k: int = 5):
        if fixtures is None:
            text = resources.files("gardenlens").joinpath(
                "data").joinpath("web_search_fixtures.json").read_text(encoding="utf-8")
            fixtures = json.loads(text)
        self.fixtures = fixtures
        self.k = k

    def __call__(self, query: str) -> list[dict]:
        return web_search(query, self.fixtures, self.k)


def web_search(query: str, fixtures: dict[str, list[dict]], k: int = 5) -> list[dict]:
    if not isinstance(query, str) or not query.strip():
        raise MalformedQuery("empty query")
    return [dict(r) for r in fixtures.get(query, [])[:k]]


# --- session -------------------------------------------------------------------

@dataclass
class Session:
    id: str
    roles: list[AgentRole]
    kb: AnalysisReport
    max_turns: int = DEFAULT_MAX_TURNS
    clock0: dt.datetime = DEFAULT_CLOCK0
    web_search_backend: Callable[[str], list[dict]] | None = None
    transcript: list[Message] = field(default_factory=list)
    tool_log: dict[str, dict] = field(default_factory=dict)
    state: str = "open"

    def role_named(self, name: str) -> AgentRole:
        for role in self.roles:
            if role.name == name:
                return role
        raise KeyError(name)

    def roles_of_kind(self, kind: str) -> list[AgentRole]:
        return [role for role in self.roles if role.kind == kind]

    def next_seq(self) -> int:
        return len(self.transcript) + 1

    def _timestamp(self, seq: int) -> str:
        moment = self.clock0 + dt.timedelta(seconds=seq)
        return moment.isoformat().replace("+00:00", "Z")

    def append(self, speaker: str, content: str,
               tool_calls: tuple[ToolCall, ...] = ()) -> Message:
        if self.state != "open":
            raise SessionTerminated(f"session {self.id} is {self.state}")
        seq = self.next_seq()
        message = Message(seq=seq, speaker=speaker, content=content,
                          tool_calls=tool_calls, ts=self._timestamp(seq))
        self.transcript.append(message)
        return message

    def terminate(self) -> None:
        self.state = "terminated"

    def transcript_lines(self) -> list[str]:
        return [dumps_line(m.to_json_dict()) for m in self.transcript]

    def view(self) -> dict:
        return {
            "id": self.id,
            "roles": [{"name": r.name, "kind": r.kind, "tools": list(r.tools)} for r in self.roles],
            "state": self.state,
            "max_turns": self.max_turns,
            "n_messages": len(self.transcript),
        }


def _validate_roles(roles: Sequence[AgentRole]) -> None:
    names = [role.name for role in roles]
    if len(set(names)) != len(names):
        raise InvalidRoleSet("role names must be unique")
    for role in roles:
        if role.kind not in ROLE_KINDS:
            raise InvalidRoleSet(f"unknown role kind {role.kind!r}")
        unknown_tools = set(role.tools) - set(TOOL_NAMES)
        if unknown_tools:
            raise InvalidRoleSet(f"role {role.name!r} has unknown tools {sorted(unknown_tools)}")
    kinds = [role.kind for role in roles]
    if kinds.count("researcher") != 1:
        raise InvalidRoleSet("exactly one researcher required")
    if kinds.count("group_chat_manager") != 1:
        raise InvalidRoleSet("exactly one group chat manager required")
    if kinds.count("analyst") < 1:
        raise InvalidRoleSet("at least one analyst required")
    if kinds.count("user_proxy") > 1:
        raise InvalidRoleSet("at most one user proxy allowed")


def open_session(
    roles: Sequence[AgentRole],
    kb: AnalysisReport | str | Path,
    max_turns: int = DEFAULT_MAX_TURNS,
    session_id: str = "local",
    clock0: dt.datetime = DEFAULT_CLOCK0,
    web_search_backend: Callable[[str], list[dict]] | None = None,
) -> Session:
    _validate_roles(roles)
    if not isinstance(kb, AnalysisReport):
        kb = load_report(kb)
    else:
        kb.validate()
    if max_turns < 1:
        raise InvalidRoleSet("max_turns must be >= 1")
    return Session(id=session_id, roles=list(roles), kb=kb, max_turns=max_turns,
                   clock0=clock0, web_search_backend=web_search_backend)


def _speaker_order(session: Session) -> Iterable[AgentRole]:
    for proxy in session.roles_of_kind("user_proxy"):
        yield proxy
    analysts = session.roles_of_kind("analyst")
    manager = session.roles_of_kind("group_chat_manager")[0]
    while True:
        for analyst in analysts:
            yield analyst
        yield manager


def _execute_tool(session: Session, role: AgentRole, call: dict) -> tuple[ToolCall, dict]:
    tool = str(call.get("tool", ""))
    args = call.get("args") or {}
    if tool not in role.tools:
        result = {"error": f"tool not available to {role.name}: {tool}"}
    elif tool == "kb_query":
        result = kb_query(session.kb, str(args.get("path", "")))
    else:
        backend = session.web_search_backend or MockWebSearch()
        result = backend(str(args.get("query", "")))
    dig = content_digest(result)
    entry = {"tool": tool, "args": args, "result": result}
    session.tool_log[dig] = entry
    return ToolCall(tool=tool, args=args, digest=dig), entry


def _request_messages(session: Session) -> list[dict]:
    return [{"speaker": m.speaker, "content": m.content} for m in session.transcript]


def _agent_turn(session: Session, role: AgentRole, backend: ChatBackend) -> Message:
    request = {
        "system": role.system_prompt,
        "messages": _request_messages(session),
        "tools": sorted(role.tools),
    }
    reply = backend.complete(request)
    content = str(reply.get("content", ""))
    raw_calls = list(reply.get("tool_calls") or [])[:MAX_TOOL_CALLS_PER_TURN]
    tool_calls: list[ToolCall] = []
    if raw_calls:
        followup_messages = _request_messages(session)
        if content:
            followup_messages.append({"speaker": role.name, "content": content})
        for raw_call in raw_calls:
            tool_call, entry = _execute_tool(session, role, raw_call)
            tool_calls.append(tool_call)
            followup_messages.append({
                "speaker": "tool",
                "content": dumps_line({"digest": tool_call.digest, **entry}),
            })
        followup = {
            "system": role.system_prompt,
            "messages": followup_messages,
            "tools": sorted(role.tools),
        }
        content = str(backend.complete(followup).get("content", ""))
    for cited in _CITATION_RE.findall(content):
        if cited not in session.tool_log:
            raise GroundingError(
                f"{role.name} cited digest {cited} absent from the tool log")
    return session.append(role.name, content, tuple(tool_calls))


def is_terminate(content: str) -> bool:
    lines = [line.strip() for line in content.strip().splitlines() if line.strip()]
    return bool(lines) and lines[-1] == TERMINATE_TOKEN


def post(session: Session, researcher_message: str, backend: ChatBackend) -> list[Message]:
    """Run one discussion round; returns every message it appended."""
    if session.state != "open":
        raise SessionTerminated(f"session {session.id} is {session.state}")
    researcher = session.roles_of_kind("researcher")[0]
    new_messages = [session.append(researcher.name, researcher_message)]
    agent_turns = 0
    for role in _speaker_order(session):
        if agent_turns >= session.max_turns:
            break
        message = _agent_turn(session, role, backend)
        new_messages.append(message)
        agent_turns += 1
        if role.kind == "group_chat_manager" and is_terminate(message.content):
            break
    return new_messages


# --- grounding and replay ---------------------------------------------------------

def verify_grounding(messages: Sequence[Message], tool_log: dict[str, dict]) -> None:
    """Reject transcripts citing digests missing from the tool log."""
    expected_seq = 1
    for message in messages:
        if message.seq != expected_seq:
            raise GroundingError(f"seq {message.seq} where {expected_seq} was expected")
        expected_seq += 1
        for tool_call in message.tool_calls:
            if tool_call.digest not in tool_log:
                raise GroundingError(
                    f"message {message.seq} records tool digest {tool_call.digest} "
                    "absent from the tool log")
        for cited in _CITATION_RE.findall(message.content):
            if cited not in tool_log:
                raise GroundingError(
                    f"message {message.seq} cites digest {cited} absent from the tool log")


def replay_transcript(
    recorded: Sequence[Message],
    roles: Sequence[AgentRole],
    kb: AnalysisReport | str | Path,
    backend: ChatBackend,
    max_turns: int = DEFAULT_MAX_TURNS,
    session_id: str = "local",
    clock0: dt.datetime = DEFAULT_CLOCK0,
    web_search_backend: Callable[[str], list[dict]] | None = None,
) -> Session:
    """Re-run the researcher inputs of a recorded session."""
    session = open_session(roles, kb, max_turns=max_turns, session_id=session_id,
                           clock0=clock0, web_search_backend=web_search_backend)
    researcher = session.roles_of_kind("researcher")[0]
    for message in recorded:
        if message.speaker == researcher.name:
            post(session, message.content, backend)
    return session


def dump_transcript(messages: Sequence[Message], path: Path | str) -> None:
    lines = [dumps_line(m.to_json_dict()) for m in messages]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_transcript(path: Path | str) -> list[Message]:
    messages = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            messages.append(Message.from_json_dict(json.loads(line)))
    return messages


def dump_tool_log(tool_log: dict[str, dict], path: Path | str) -> None:
    from .jsonutil import dumps_pretty

    Path(path).write_text(dumps_pretty(tool_log), encoding="utf-8")


def load_tool_log(path: Path | str) -> dict[str, dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- chat backends -----------------------------------------------------------------

def request_fingerprint(request: dict) -> str:
    return sha256_hex(dumps_line(request))


class ScriptedChatBackend:
    """Maps the SHA-256 of each completion request to a fixture reply."""

    def __init__(self, fixtures: dict[str, dict]):
        self.fixtures = fixtures

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedChatBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, request: dict) -> dict:
        reply = self.fixtures.get(request_fingerprint(request))
        if reply is None:
            return {"content": "[no scripted reply for this request]", "tool_calls": []}
        return {"content": reply.get("content", ""), "tool_calls": list(reply.get("tool_calls", []))}


class RecordingChatBackend:
    """Wraps a backend and records request fingerprint -> reply fixtures."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.fixtures: dict[str, dict] = {}

    def complete(self, request: dict) -> dict:
        reply = self.inner.complete(request)
        self.fixtures[request_fingerprint(request)] = {
            "content": reply.get("content", ""),
            "tool_calls": list(reply.get("tool_calls", [])),
        }
        return reply


class CannedChatBackend:
    """Rule-driven replies for offline use; a pure function of the request.

    Role behavior is inferred from the system prompt ("You are <name>"
    plus kind markers), so shipped presets drive it without any model.
    """

    def complete(self, request: dict) -> dict:
        system = request.get("system", "")
        messages = request.get("messages", [])
        tools = request.get("tools", [])
        name_match = re.match(r"You are ([A-Za-z0-9_-]+)", system)
        name = name_match.group(1) if name_match else "agent"

        if "relay" in system:
            last = messages[-1]["content"] if messages else ""
            return {"content": f"Relaying to the analysis team: {last}", "tool_calls": []}
        if "moderator" in system:
            return {"content": self._manager_summary(), "tool_calls": []}
        if "analyst" in system:
            if messages and messages[-1].get("speaker") == "tool":
                return {"content": self._analyst_summary(name, messages), "tool_calls": []}
            return {"content": "", "tool_calls": self._analyst_tools(name, messages, tools)}
        return {"content": "Noted.", "tool_calls": []}

    @staticmethod
    def _find_path(messages: list[dict]) -> str | None:
        for message in reversed(messages):
            match = _PATH_RE.search(message.get("content", ""))
            if match:
                return match.group(0)
        return None

    def _analyst_tools(self, name: str, messages: list[dict], tools: list[str]) -> list[dict]:
        path = self._find_path(messages) or "meta"
        calls = []
        if name.endswith("2"):
            parts = path.split("/")
            node = parts[1] if len(parts) > 1 else "meta"
            if "kb_query" in tools:
                calls.append({"tool": "kb_query", "args": {"path": f"nodes/{node}/keywords"}})
            if "web_search" in tools:
                calls.append({"tool": "web_search",
                              "args": {"query": f"chinese garden {node.replace('-', ' ')}"}})
        elif "kb_query" in tools:
            calls.append({"tool": "kb_query", "args": {"path": path}})
        return calls

    @staticmethod
    def _tail_tool_entries(messages: list[dict]) -> list[dict]:
        entries = []
        for message in reversed(messages):
            if message.get("speaker") != "tool":
                break
            entries.append(json.loads(message["content"]))
        entries.reverse()
        return entries

    def _analyst_summary(self, name: str, messages: list[dict]) -> str:
        parts = []
        for entry in self._tail_tool_entries(messages):
            dig, tool, result = entry["digest"], entry["tool"], entry["result"]
            if tool == "kb_query":
                path = entry["args"].get("path", "")
                if isinstance(result, dict) and "counts" in result:
                    counts = result["counts"]
                    mode = max(range(len(counts)), key=lambda k: (counts[k], -k))
                    parts.append(
                        f"The sentiment histogram at {path} has {result.get('n', 0)} scores "
                        f"with mode bin {mode}; counts are {counts}. [kb:{dig}]")
                elif result is None:
                    parts.append(f"The knowledge base has no entry at {path}. [kb:{dig}]")
                else:
                    parts.append(f"Knowledge base fragment {path}: {dumps_line(result)} [kb:{dig}]")
            elif tool == "web_search":
                if result:
                    top = result[0]
                    parts.append(
                        f"Web search surfaced {len(result)} results; the top one is "
                        f"\"{top.get('title', '')}\". [web:{dig}]")
                else:
                    parts.append(f"Web search returned no results. [web:{dig}]")
        if not parts:
            return f"{name} has nothing further to add."
        return " ".join(parts)

    @staticmethod
    def _manager_summary() -> str:
        return ("The analysts have reported on this query; their findings are grounded "
                f"in the cited knowledge-base fragments above.\n{TERMINATE_TOKEN}")


# --- role presets ------------------------------------------------------------------

def load_role_presets() -> dict:
    text = resources.files("gardenlens").joinpath(
        "data").joinpath("role_presets.json").read_text(encoding="utf-8")
    return json.loads(text)


def roles_from_preset(preset: str = "default") -> list[AgentRole]:
    presets = load_role_presets()
    if preset not in presets:
        raise InvalidRoleSet(f"unknown role preset {preset!r}")
    return [
        AgentRole(name=r["name"], kind=r["kind"], system_prompt=r.get("system_prompt", ""),
                  tools=tuple(r.get("tools", ())))
        for r in presets[preset]["roles"]
    ]
