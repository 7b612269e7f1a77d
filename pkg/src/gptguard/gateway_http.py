"""HTTP surface for the action gateway.

Proxy envelope: POST /v1/proxy with the call document; control plane:
GET /v1/pending, POST /v1/pending/{call_id}/decision, GET /v1/events?since=N.
When a console directory is configured its static files are served under
/console. Control-plane requests require a bearer token when one is set
(flag or GATEWAY_TOKEN env).
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .gateway import (
    AlreadyDecided,
    ApprovalState,
    GatewayService,
    Outcome,
    UnknownCallId,
    UpstreamUnreachable,
)
from .model import MalformedTranscript, _parse_api_call
from .report import finding_to_dict

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def _outcome_to_dict(outcome: Outcome) -> dict:
    doc: dict = {"outcome": outcome.kind, "findings": [finding_to_dict(f) for f in outcome.findings]}
    if outcome.call_id is not None:
        doc["call_id"] = outcome.call_id
    if outcome.upstream_status is not None:
        doc["upstream_status"] = outcome.upstream_status
        doc["upstream_body"] = outcome.upstream_body
    if outcome.reason is not None:
        doc["reason"] = outcome.reason
    return doc


def _pending_to_dict(service: GatewayService, entry) -> dict:
    age = service.age_of(entry)
    return {
        "call_id": entry.call_id,
        "state": entry.state.value,
        "age_secs": round(age, 3),
        "expires_in_secs": (
            round(max(service.policy.approval_timeout - age, 0.0), 3)
            if entry.state is ApprovalState.PENDING
            else 0.0
        ),
        "call": {
            "action_name": entry.call.action_name,
            "endpoint": entry.call.endpoint,
            "method": entry.call.method,
            "payload": [{"key": k, "value": v} for k, v in entry.call.payload],
            "consent": entry.call.consent.value,
        },
        "findings": [finding_to_dict(f) for f in entry.findings],
        "pii_spans": [
            {"key": s.key, "kind": s.kind, "span": list(s.span)} for s in entry.pii_spans
        ],
        "decided_by": entry.decided_by,
    }


def make_handler(service: GatewayService, token: str | None, console_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # keep the test output quiet
            pass

        # -- plumbing -------------------------------------------------------

        def _send_json(self, status: int, doc: dict) -> None:
            body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> object:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            return json.loads(raw.decode("utf-8"))

        def _authorized(self) -> bool:
            if not token:
                return True
            header = self.headers.get("Authorization", "")
            return header == f"Bearer {token}"

        def _deny_unauthorized(self) -> None:
            self._send_json(401, {"error": "missing or invalid bearer token"})

        # -- routes ---------------------------------------------------------

        def do_POST(self) -> None:
            parsed = urlparse(self.path)
            if parsed.path == "/v1/proxy":
                self._handle_proxy()
                return
            if parsed.path.startswith("/v1/pending/") and parsed.path.endswith("/decision"):
                if not self._authorized():
                    self._deny_unauthorized()
                    return
                call_id = parsed.path[len("/v1/pending/") : -len("/decision")]
                self._handle_decision(call_id)
                return
            self._send_json(404, {"error": "unknown endpoint"})

        def do_GET(self) -> None:
            parsed = urlparse(self.path)
            if parsed.path == "/v1/pending":
                if not self._authorized():
                    self._deny_unauthorized()
                    return
                entries = sorted(service.pending(), key=lambda e: e.created_at)
                self._send_json(200, {"pending": [_pending_to_dict(service, e) for e in entries]})
                return
            if parsed.path == "/v1/events":
                if not self._authorized():
                    self._deny_unauthorized()
                    return
                query = parse_qs(parsed.query)
                try:
                    since = int(query.get("since", ["0"])[0])
                except ValueError:
                    self._send_json(400, {"error": "since must be an integer"})
                    return
                events = service.log.events(since)
                self._send_json(
                    200,
                    {
                        "events": [e.to_dict() for e in events],
                        "next": events[-1].seq if events else since,
                    },
                )
                return
            if parsed.path == "/console" or parsed.path.startswith("/console/"):
                self._handle_console(parsed.path)
                return
            self._send_json(404, {"error": "unknown endpoint"})

        def _handle_proxy(self) -> None:
            try:
                doc = self._read_json()
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._send_json(400, {"error": f"invalid JSON body: {exc}"})
                return
            try:
                call = _parse_api_call(doc, "proxy body")
            except MalformedTranscript as exc:
                self._send_json(400, {"error": str(exc)})
                return
            try:
                outcome = service.intercept(call)
            except UpstreamUnreachable as exc:
                self._send_json(502, {"outcome": "error", "error": f"upstream_unreachable: {exc}"})
                return
            status = {"forwarded": 200, "held": 202, "rejected": 403}[outcome.kind]
            self._send_json(status, _outcome_to_dict(outcome))

        def _handle_decision(self, call_id: str) -> None:
            try:
                doc = self._read_json()
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._send_json(400, {"error": f"invalid JSON body: {exc}"})
                return
            if not isinstance(doc, dict) or doc.get("decision") not in ("allow", "deny"):
                self._send_json(400, {"error": 'expected {"decision": "allow"|"deny", "decider": string}'})
                return
            decider = doc.get("decider") or "unknown"
            try:
                outcome = service.decide(call_id, doc["decision"] == "allow", decider)
            except UnknownCallId:
                self._send_json(404, {"error": "unknown call_id"})
                return
            except AlreadyDecided as exc:
                self._send_json(409, {"error": "already_decided", "state": exc.state.value})
                return
            except UpstreamUnreachable as exc:
                self._send_json(502, {"outcome": "error", "error": f"upstream_unreachable: {exc}"})
                return
            self._send_json(200, _outcome_to_dict(outcome))

        def _handle_console(self, path: str) -> None:
            if console_dir is None:
                self._send_json(404, {"error": "console not configured"})
                return
            rel = path[len("/console") :].lstrip("/") or "index.html"
            root = console_dir.resolve()
            target = (root / rel).resolve()
            if not target.is_relative_to(root) or not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
            body = target.read_bytes()
            self.send_response(200)
            self.send_header(
                "Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            )
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


class GatewayHTTPServer:
    """Threaded HTTP server wrapper with an ephemeral-port-friendly API."""

    def __init__(
        self,
        service: GatewayService,
        host: str = "127.0.0.1",
        port: int = 0,
        token: str | None = None,
        console_dir: str | Path | None = None,
    ):
        handler = make_handler(service, token, Path(console_dir) if console_dir else None)
        self.service = service
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[0], self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
