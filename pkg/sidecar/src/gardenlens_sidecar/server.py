"""Protocol server: request dispatch plus the stdio and HTTP transports.

One JSON request per line, one response line per request, in order.
Malformed lines and unknown ops answer ok:false and never take the
server down. Responses are canonical JSON (sorted keys, compact
separators, UTF-8), which is what the stub bit-compatibility contract
compares.
"""

from __future__ import annotations

import http.server
import json
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path

VALID_MODES = ("stub", "model")
VALID_TRANSPORTS = ("stdio", "http")


@dataclass
class SidecarConfig:
    mode: str = "stub"
    transport: str = "stdio"
    port: int = 8900
    segmentation_model: str | None = None
    classification_model: str | None = None
    sentiment_model: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in VALID_MODES:
            raise ValueError(f"mode must be one of {VALID_MODES}, got {self.mode!r}")
        if self.transport not in VALID_TRANSPORTS:
            raise ValueError(f"transport must be one of {VALID_TRANSPORTS}, got {self.transport!r}")
        if self.mode == "model":
            missing = [name for name, path in (
                ("segmentation", self.segmentation_model),
                ("classification", self.classification_model),
                ("sentiment", self.sentiment_model)) if not path]
            if missing:
                raise ValueError(f"model mode requires model paths: missing {missing}")
            for path in (self.segmentation_model, self.classification_model,
                         self.sentiment_model):
                if not Path(path).exists():
                    raise ValueError(f"model path does not exist: {path}")


def build_engine(config: SidecarConfig):
    config.validate()
    if config.mode == "stub":
        from .stub import StubEngine

        return StubEngine()
    from .adapters import ModelEngine

    return ModelEngine(config)


def encode(response: dict) -> str:
    return json.dumps(response, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def handle_request(request, engine) -> dict:
    """Answer one decoded request; guards never raise."""
    if not isinstance(request, dict):
        return {"ok": False, "error": "request is not a JSON object"}
    ident = request.get("id")
    base = {"id": ident} if isinstance(ident, str) else {}
    if not isinstance(ident, str) or not ident:
        return {**base, "ok": False, "error": "missing field: id"}
    op = request.get("op")
    try:
        if op == "segment":
            if "image" not in request:
                return {**base, "ok": False, "error": "missing field: image"}
            return {"id": ident, "ok": True, "seg": engine.segment(ident, request["image"])}
        if op == "classify":
            if "image" not in request:
                return {**base, "ok": False, "error": "missing field: image"}
            return {"id": ident, "ok": True, **engine.classify(ident, request["image"])}
        if op == "sentiment":
            if "text" not in request:
                return {**base, "ok": False, "error": "missing field: text"}
            return {"id": ident, "ok": True, "score": engine.sentiment(ident, request["text"])}
    except Exception as exc:  # engine failure must not kill the transport
        return {**base, "ok": False, "error": f"backend failure: {exc}"}
    return {**base, "ok": False, "error": f"unknown op: {op!r}"}


def handle_line(line: str, engine) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"ok": False, "error": f"invalid json: {exc}"}
    return handle_request(request, engine)


def serve_stdio(engine, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(encode(handle_line(line, engine)) + "\n")
        stdout.flush()


class _Handler(http.server.BaseHTTPRequestHandler):
    engine = None  # set by make_http_server

    def do_POST(self):
        if self.path != "/v1/infer":
            self.send_error(404, "unknown endpoint")
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length).decode("utf-8")
        lines = [encode(handle_line(line, self.engine))
                 for line in body.splitlines() if line.strip()]
        payload = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


def make_http_server(engine, port: int, host: str = "127.0.0.1"):
    handler = type("BoundHandler", (_Handler,), {"engine": engine})
    return http.server.ThreadingHTTPServer((host, port), handler)


def serve_http(engine, port: int, host: str = "127.0.0.1") -> None:
    server = make_http_server(engine, port, host)
    print(f"listening on http://{host}:{server.server_address[1]}/v1/infer",
          file=sys.stderr, flush=True)
    thread = threading.Thread(target=server.serve_forever)
    thread.start()
    try:
        thread.join()
    except KeyboardInterrupt:
        server.shutdown()
        thread.join()
