"""Inference backends: the deterministic stub and wire-protocol clients.

The wire protocol is line-delimited JSON over stdio or HTTP POST
/v1/infer (see docs/protocol.md). The stub backend answers the same
three ops without any model: every output is a pure function of the
request id, derived from SHA-256 byte streams, with an optional hint
grammar embedded in the id for authoring fixtures.

The stub derivation here is the reference; the out-of-process sidecar
reimplements it and must stay byte-compatible. Keep docs/protocol.md in
sync with any change.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Protocol

from .errors import BackendProtocolError, BackendUnavailable
from .jsonutil import dumps_line

N_ELEMENT_CLASSES = 150
N_SCENE_LABELS = 365


# --- reference data -----------------------------------------------------------

def _data_text(name: str) -> str:
    return resources.files("gardenlens").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def _load_lines(name: str) -> tuple[str, ...]:
    lines = [ln.strip() for ln in _data_text(name).splitlines()]
    return tuple(ln for ln in lines if ln and not ln.startswith("#"))


@lru_cache(maxsize=None)
def element_classes() -> tuple[str, ...]:
    """Names of the 150 segmentation element classes, indexed by class id."""
    names = _load_lines("element_classes.txt")
    if len(names) != N_ELEMENT_CLASSES:
        raise RuntimeError(f"element class table has {len(names)} entries, expected {N_ELEMENT_CLASSES}")
    return names


@lru_cache(maxsize=None)
def scene_labels() -> tuple[str, ...]:
    """The 365 scene labels the classifier draws from."""
    names = _load_lines("scene_labels.txt")
    if len(names) != N_SCENE_LABELS:
        raise RuntimeError(f"scene label table has {len(names)} entries, expected {N_SCENE_LABELS}")
    return names


@lru_cache(maxsize=None)
def scene_attributes() -> tuple[str, ...]:
    """Vocabulary of scene attribute keywords the classifier may emit."""
    return _load_lines("scene_attributes.txt")


# --- deterministic stub ---------------------------------------------------------
# Everything below is derived from SHA-256 streams keyed on (op, request id)
# so restarts, processes and reimplementations agree bit for bit.

def _byte_stream(op: str, ident: str) -> Iterator[int]:
    counter = 0
    while True:
        block = hashlib.sha256(f"{op}:{ident}:{counter}".encode("utf-8")).digest()
        yield from block
        counter += 1


def _parse_hints(ident: str) -> dict[str, str]:
    hints: dict[str, str] = {}
    for part in ident.split("~")[1:]:
        if "=" in part:
            key, value = part.split("=", 1)
            hints[key] = value
    return hints


def _grid_for(total: int) -> tuple[int, int]:
    # widest grid no wider than sqrt(total); guarantees w * h == total
    w = int(math.isqrt(total))
    while total % w:
        w -= 1
    return w, total // w


def stub_segment(ident: str) -> dict:
    """Segmentation answer for a request id: {"rle": [[class, run], ...], "w": W, "h": H}."""
    hint = _parse_hints(ident).get("seg")
    if hint is not None:
        runs = []
        for pair in hint.split(","):
            class_id, run = pair.split(":")
            runs.append([int(class_id), int(run)])
        total = sum(run for _, run in runs)
        w, h = _grid_for(total)
        return {"rle": runs, "w": w, "h": h}

    stream = _byte_stream("segment", ident)
    w = 16 + next(stream) % 33
    h = 16 + next(stream) % 33
    n_palette = 3 + next(stream) % 4
    palette = [((next(stream) << 8 | next(stream)) % N_ELEMENT_CLASSES) for _ in range(n_palette)]
    runs = []
    remaining = w * h
    while remaining > 0:
        class_id = palette[next(stream) % n_palette]
        run = min(1 + next(stream) % 31, remaining)
        if runs and runs[-1][0] == class_id:
            runs[-1][1] += run
        else:
            runs.append([class_id, run])
        remaining -= run
    return {"rle": runs, "w": w, "h": h}


def stub_classify(ident: str) -> dict:
    """Classification answer: {"labels": [[label, weight], ...], "keywords": [...]}."""
    hints = _parse_hints(ident)
    stream = _byte_stream("classify", ident)

    if "lbl" in hints:
        labels = []
        for pair in hints["lbl"].split(","):
            label, weight = pair.rsplit(":", 1)
            labels.append([label, float(weight)])
    else:
        label_set = scene_labels()
        indices: list[int] = []
        while len(indices) < 4:
            idx = (next(stream) << 8 | next(stream)) % N_SCENE_LABELS
            if idx not in indices:
                indices.append(idx)
        mass = (70 + next(stream) % 30) / 100
        units = [1 + next(stream) for _ in range(4)]
        total = sum(units)
        pairs = [[label_set[i], round(u * mass / total, 6)] for i, u in zip(indices, units)]
        labels = sorted(pairs, key=lambda lw: (-lw[1], lw[0]))

    if "kw" in hints:
        keywords = [part.replace("_", " ") for part in hints["kw"].split("+") if part]
    else:
        vocab = scene_attributes()
        n_keywords = 2 + next(stream) % 3
        chosen: list[int] = []
        while len(chosen) < n_keywords:
            idx = next(stream) % len(vocab)
            if idx not in chosen:
                chosen.append(idx)
        keywords = [vocab[i] for i in chosen]
    return {"labels": labels, "keywords": keywords}


def stub_sentiment(ident: str) -> float:
    """Model polarity in [0, 1] derived from the request id."""
    hint = _parse_hints(ident).get("sent")
    if hint is not None:
        return float(hint)
    stream = _byte_stream("sentiment", ident)
    value = next(stream) << 24 | next(stream) << 16 | next(stream) << 8 | next(stream)
    return round(value / 2**32, 6)


def stub_handle(request: dict) -> dict:
    """Answer one wire-protocol request dict; never raises."""
    request_id = request.get("id")
    base = {"id": request_id} if isinstance(request_id, str) else {}

    def fail(message: str) -> dict:
        return {**base, "ok": False, "error": message}

    if not isinstance(request_id, str) or not request_id:
        return fail("missing field: id")
    op = request.get("op")
    try:
        if op == "segment":
            if "image" not in request:
                return fail("missing field: image")
            return {"id": request_id, "ok": True, "seg": stub_segment(request_id)}
        if op == "classify":
            if "image" not in request:
                return fail("missing field: image")
            return {"id": request_id, "ok": True, **stub_classify(request_id)}
        if op == "sentiment":
            if "text" not in request:
                return fail("missing field: text")
            return {"id": request_id, "ok": True, "score": stub_sentiment(request_id)}
    except (ValueError, KeyError) as exc:
        return fail(f"bad request: {exc}")
    return fail(f"unknown op: {op!r}")


# --- backend interface ------------------------------------------------------------

@dataclass(frozen=True)
class SegResult:
    rle: tuple[tuple[int, int], ...]
    width: int
    height: int


class InferenceBackend(Protocol):
    def segment(self, request_id: str, image: str) -> SegResult: ...

    def classify(self, request_id: str, image: str) -> tuple[list[tuple[str, float]], list[str]]: ...

    def sentiment(self, request_id: str, text: str) -> float: ...


def _seg_result(seg: dict) -> SegResult:
    return SegResult(
        rle=tuple((int(c), int(n)) for c, n in seg["rle"]),
        width=int(seg["w"]),
        height=int(seg["h"]),
    )


class StubBackend:
    """In-process deterministic backend; no models, no processes."""

    def segment(self, request_id: str, image: str) -> SegResult:
        return _seg_result(stub_segment(request_id))

    def classify(self, request_id: str, image: str) -> tuple[list[tuple[str, float]], list[str]]:
        answer = stub_classify(request_id)
        return [(label, weight) for label, weight in answer["labels"]], list(answer["keywords"])

    def sentiment(self, request_id: str, text: str) -> float:
        return stub_sentiment(request_id)


class _WireBackend:
    """Shared request plumbing for out-of-process backends."""

    def _call(self, payload: dict) -> dict:
        raise NotImplementedError

    def _roundtrip(self, payload: dict) -> dict:
        response = self._call(payload)
        if not isinstance(response, dict):
            raise BackendProtocolError("response is not a JSON object")
        if response.get("id") != payload["id"]:
            raise BackendProtocolError(
                f"response id {response.get('id')!r} does not echo request id {payload['id']!r}")
        if not response.get("ok"):
            raise BackendProtocolError(str(response.get("error", "backend reported failure")))
        return response

    def segment(self, request_id: str, image: str) -> SegResult:
        response = self._roundtrip({"op": "segment", "id": request_id, "image": image})
        try:
            return _seg_result(response["seg"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"bad segment payload: {exc}")

    def classify(self, request_id: str, image: str) -> tuple[list[tuple[str, float]], list[str]]:
        response = self._roundtrip({"op": "classify", "id": request_id, "image": image})
        try:
            labels = [(str(l), float(w)) for l, w in response["labels"]]
            keywords = [str(k) for k in response.get("keywords", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"bad classify payload: {exc}")
        return labels, keywords

    def sentiment(self, request_id: str, text: str) -> float:
        response = self._roundtrip({"op": "sentiment", "id": request_id, "text": text})
        try:
            return float(response["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"bad sentiment payload: {exc}")


class StdioWireBackend(_WireBackend):
    """Speaks the protocol to a child process over stdin/stdout."""

    def __init__(self, command: list[str]):
        self.command = command
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        except OSError as exc:
            raise BackendUnavailable(f"cannot start backend {command!r}: {exc}")

    def _call(self, payload: dict) -> dict:
        with self._lock:
            if self._proc.poll() is not None:
                raise BackendUnavailable(f"backend process exited with {self._proc.returncode}")
            try:
                self._proc.stdin.write(dumps_line(payload) + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailable(f"backend pipe failed: {exc}")
        if not line:
            raise BackendUnavailable("backend closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendProtocolError(f"backend sent invalid JSON: {exc}")

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


class HttpWireBackend(_WireBackend):
    """POSTs one request line to <base>/v1/infer and reads one response line."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.url = base_url.rstrip("/") + "/v1/infer"
        self.timeout = timeout

    def _call(self, payload: dict) -> dict:
        body = (dumps_line(payload) + "\n").encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/x-ndjson"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                line = resp.readline().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise BackendUnavailable(f"cannot reach {self.url}: {exc}")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendProtocolError(f"backend sent invalid JSON: {exc}")


def make_backend(spec: str) -> InferenceBackend:
    """Build a backend from a CLI-style spec: stub, http(s) URL, or stdio:<cmd>."""
    if spec == "stub":
        return StubBackend()
    if spec.startswith(("http://", "https://")):
        return HttpWireBackend(spec)
    if spec.startswith("stdio:"):
        return StdioWireBackend(shlex.split(spec[len("stdio:"):]))
    raise ValueError(f"unknown backend spec {spec!r}")
