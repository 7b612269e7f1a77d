"""Intercepting forward service for GPT action API calls.

Outgoing payloads are scanned for PII and undeclared destinations before any
byte reaches the upstream host; suspicious calls are held for human approval
or rejected outright, and every outcome lands in an append-only, totally
ordered event log. Payload values are redacted (PII spans replaced with kind
tags) in the log; full values exist only in the pending record shown to the
approver.

This module is the pure core; the HTTP surface lives in gateway_http.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from urllib.parse import urlencode, urlparse

from .knowledge import KnowledgeBundle
from .links import host_on_list
from .model import (
    ApiCallRecord,
    Finding,
    LocusKind,
    Severity,
    ThreatLeaf,
    char_to_byte_span,
    make_finding,
)
from .pii import detect_pii


class GatewayMode(str, Enum):
    MONITOR = "monitor"
    ENFORCE = "enforce"


class PolicyAction(str, Enum):
    ALERT = "alert"
    REQUIRE_APPROVAL = "require_approval"
    DENY = "deny"


class DecisionKind(str, Enum):
    ALLOW = "allow"
    REQUIRE_APPROVAL = "require_approval"
    DENY = "deny"


class ApprovalState(str, Enum):
    PENDING = "Pending"
    ALLOWED = "Allowed"
    DENIED = "Denied"
    EXPIRED = "Expired"


class PolicyError(ValueError):
    pass


class UnknownCallId(KeyError):
    pass


class AlreadyDecided(RuntimeError):
    def __init__(self, call_id: str, state: ApprovalState):
        self.call_id = call_id
        self.state = state
        super().__init__(f"call {call_id} already in terminal state {state.value}")


class UpstreamUnreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class GatewayPolicy:
    mode: GatewayMode = GatewayMode.ENFORCE
    pii_action: PolicyAction = PolicyAction.REQUIRE_APPROVAL
    undeclared_host_action: PolicyAction = PolicyAction.REQUIRE_APPROVAL
    declared_hosts: frozenset[str] = frozenset()
    max_pending: int = 16
    approval_timeout: float = 300.0

    def __post_init__(self) -> None:
        if self.max_pending < 1:
            raise PolicyError("max_pending: must be >= 1")
        if self.approval_timeout <= 0:
            raise PolicyError("approval_timeout: must be > 0")


def policy_from_dict(doc: object) -> GatewayPolicy:
    """Build a policy from its file form, reporting the offending field path."""
    if not isinstance(doc, dict):
        raise PolicyError("top-level: expected an object")

    def enum_field(name: str, enum_cls, default):
        raw = doc.get(name, default.value)
        try:
            return enum_cls(raw)
        except ValueError:
            raise PolicyError(f"{name}: unknown value {raw!r}") from None

    hosts_raw = doc.get("declared_hosts", [])
    if not isinstance(hosts_raw, list) or not all(isinstance(h, str) for h in hosts_raw):
        raise PolicyError("declared_hosts: expected a list of host strings")
    max_pending = doc.get("max_pending", 16)
    if not isinstance(max_pending, int):
        raise PolicyError("max_pending: expected an integer")
    timeout = doc.get("approval_timeout_secs", 300)
    if not isinstance(timeout, (int, float)):
        raise PolicyError("approval_timeout_secs: expected a number")
    try:
        return GatewayPolicy(
            mode=enum_field("mode", GatewayMode, GatewayMode.ENFORCE),
            pii_action=enum_field("pii_action", PolicyAction, PolicyAction.REQUIRE_APPROVAL),
            undeclared_host_action=enum_field(
                "undeclared_host_action", PolicyAction, PolicyAction.REQUIRE_APPROVAL
            ),
            declared_hosts=frozenset(h.lower() for h in hosts_raw),
            max_pending=max_pending,
            approval_timeout=float(timeout),
        )
    except PolicyError:
        raise


def load_policy(path: str | Path) -> GatewayPolicy:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise PolicyError(f"policy file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"policy file: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return policy_from_dict(doc)


@dataclass(frozen=True)
class PiiSpan:
    key: str
    kind: str
    span: tuple[int, int]  # byte span within the payload value


@dataclass(frozen=True)
class PolicyDecision:
    decision: DecisionKind
    findings: tuple[Finding, ...] = ()
    pii_spans: tuple[PiiSpan, ...] = ()


_STRICTNESS = {PolicyAction.DENY: 2, PolicyAction.REQUIRE_APPROVAL: 1, PolicyAction.ALERT: 0}


def evaluate_call(call: ApiCallRecord, policy: GatewayPolicy, kb: KnowledgeBundle) -> PolicyDecision:
    """Scan a call and map triggered rules through the policy table.

    Decision = strictest triggered action (Deny > RequireApproval >
    Alert/Allow); Monitor mode downgrades blocking decisions to
    Allow-with-findings.
    """
    findings: list[Finding] = []
    pii_spans: list[PiiSpan] = []
    triggered: list[PolicyAction] = []

    host = (urlparse(call.endpoint).hostname or "").lower()
    if not host_on_list(host, policy.declared_hosts):
        idx = max(call.endpoint.find(host), 0)
        findings.append(
            make_finding(
                leaf=ThreatLeaf.DIRECT_PHISHING,
                severity=Severity.CRITICAL,
                detector="exfiltration-action",
                confidence=0.9,
                remediation=(
                    f"endpoint host {host!r} is not among the declared action servers; "
                    f"consent state was {call.consent.value!r}"
                ),
                kind=LocusKind.API_PAYLOAD,
                path="endpoint",
                text=call.endpoint,
                start=idx,
                end=idx + len(host),
            )
        )
        triggered.append(policy.undeclared_host_action)

    found_pii = False
    for key, value in call.payload:
        for match in detect_pii(value, kb.pii_patterns):
            found_pii = True
            pii_spans.append(
                PiiSpan(key=key, kind=match.kind, span=char_to_byte_span(value, match.start, match.end))
            )
            findings.append(
                make_finding(
                    leaf=ThreatLeaf.DIRECT_PHISHING,
                    severity=Severity.HIGH,
                    detector="payload-pii",
                    confidence=0.85,
                    remediation=f"payload field {key!r} carries {match.kind} PII",
                    kind=LocusKind.API_PAYLOAD,
                    path=f"payload.{key}",
                    text=value,
                    start=match.start,
                    end=match.end,
                )
            )
    if found_pii:
        triggered.append(policy.pii_action)

    decision = DecisionKind.ALLOW
    if triggered:
        strictest = max(triggered, key=lambda a: _STRICTNESS[a])
        if strictest is PolicyAction.DENY:
            decision = DecisionKind.DENY
        elif strictest is PolicyAction.REQUIRE_APPROVAL:
            decision = DecisionKind.REQUIRE_APPROVAL
    if policy.mode is GatewayMode.MONITOR and decision is not DecisionKind.ALLOW:
        decision = DecisionKind.ALLOW
    return PolicyDecision(decision=decision, findings=tuple(findings), pii_spans=tuple(pii_spans))


@dataclass
class PendingApproval:
    call_id: str
    call: ApiCallRecord
    findings: tuple[Finding, ...]
    pii_spans: tuple[PiiSpan, ...]
    created_at: float
    state: ApprovalState = ApprovalState.PENDING
    decided_by: str | None = None


@dataclass(frozen=True)
class GatewayEvent:
    seq: int
    ts: float
    kind: str
    call_id: str | None
    data: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "call_id": self.call_id, "data": self.data}


class EventLog:
    """Append-only, totally ordered event log with an optional JSONL sink."""

    def __init__(self, path: str | Path | None = None):
        self._events: list[GatewayEvent] = []
        self._lock = threading.Lock()
        self._seq = 0
        self._file = open(path, "a", encoding="utf-8") if path else None

    def append(self, kind: str, call_id: str | None = None, **data) -> GatewayEvent:
        with self._lock:
            self._seq += 1
            event = GatewayEvent(seq=self._seq, ts=time.time(), kind=kind, call_id=call_id, data=data)
            self._events.append(event)
            if self._file is not None:
                self._file.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
                self._file.flush()
            return event

    def events(self, since: int = 0) -> list[GatewayEvent]:
        with self._lock:
            return [e for e in self._events if e.seq > since]

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


def replay_pending_states(events: list[GatewayEvent]) -> dict[str, ApprovalState]:
    """Reconstruct the pending-queue state from the event log."""
    states: dict[str, ApprovalState] = {}
    for event in events:
        if event.call_id is None:
            continue
        if event.kind == "call_held":
            states[event.call_id] = ApprovalState.PENDING
        elif event.kind == "decision":
            states[event.call_id] = (
                ApprovalState.ALLOWED if event.data.get("decision") == "allowed" else ApprovalState.DENIED
            )
        elif event.kind == "call_expired":
            states[event.call_id] = ApprovalState.EXPIRED
    return states


def redacted_payload(call: ApiCallRecord, pii_spans: tuple[PiiSpan, ...]) -> list[dict[str, str]]:
    """Payload with PII spans replaced by kind tags, for the event log."""
    by_key: dict[str, list[PiiSpan]] = {}
    for span in pii_spans:
        by_key.setdefault(span.key, []).append(span)
    out = []
    for key, value in call.payload:
        raw = value.encode("utf-8")
        for span in sorted(by_key.get(key, []), key=lambda s: s.span[0], reverse=True):
            raw = raw[: span.span[0]] + f"<{span.kind}>".encode("utf-8") + raw[span.span[1] :]
        out.append({"key": key, "value": raw.decode("utf-8")})
    return out


def http_upstream(method: str, url: str, payload: tuple[tuple[str, str], ...], timeout: float = 10.0):
    """Default upstream connector: forwards the payload verbatim as a JSON
    object (query string for GET/HEAD)."""
    import urllib.error
    import urllib.request

    method = method.upper()
    data = None
    if method in ("GET", "HEAD"):
        if payload:
            sep = "&" if urlparse(url).query else "?"
            url = url + sep + urlencode(list(payload))
    else:
        data = json.dumps({k: v for k, v in payload}, ensure_ascii=False).encode("utf-8")
    request = urllib.request.Request(
        url, data=data, method=method, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.getcode(), response.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", errors="replace")
    except (urllib.error.URLError, OSError) as exc:
        raise UpstreamUnreachable(str(exc)) from exc


@dataclass(frozen=True)
class Outcome:
    kind: str  # "forwarded" | "held" | "rejected"
    findings: tuple[Finding, ...] = ()
    call_id: str | None = None
    upstream_status: int | None = None
    upstream_body: str | None = None
    reason: str | None = None


class GatewayService:
    """Policy enforcement, pending queue, and event logging.

    The queue and log are internally synchronized; decide/intercept on
    different calls never block each other (upstream forwarding happens
    outside the lock), and decide on one call_id is linearized so no call
    ever reaches two terminal states.
    """

    def __init__(
        self,
        policy: GatewayPolicy,
        kb: KnowledgeBundle,
        upstream=None,
        event_log: EventLog | None = None,
        time_fn=time.monotonic,
    ):
        self.policy = policy
        self.kb = kb
        self.upstream = upstream if upstream is not None else http_upstream
        self.log = event_log if event_log is not None else EventLog()
        self._time = time_fn
        self._lock = threading.RLock()
        self._pending: dict[str, PendingApproval] = {}

    # -- internal -----------------------------------------------------------

    def _finding_summaries(self, findings) -> list[dict]:
        return [
            {"detector": f.detector, "leaf": f.leaf.value, "severity": f.severity.value}
            for f in findings
        ]

    def _expire_stale_locked(self) -> None:
        now = self._time()
        for entry in self._pending.values():
            if entry.state is ApprovalState.PENDING and now - entry.created_at > self.policy.approval_timeout:
                entry.state = ApprovalState.EXPIRED
                self.log.append("call_expired", call_id=entry.call_id, reason="approval_timeout")

    def _forward(self, call: ApiCallRecord, findings, call_id=None) -> Outcome:
        try:
            status, body = self.upstream(call.method, call.endpoint, call.payload)
        except UpstreamUnreachable as exc:
            self.log.append("upstream_error", call_id=call_id, endpoint=call.endpoint, error=str(exc))
            raise
        self.log.append("call_forwarded", call_id=call_id, endpoint=call.endpoint, upstream_status=status)
        return Outcome(
            kind="forwarded",
            findings=tuple(findings),
            call_id=call_id,
            upstream_status=status,
            upstream_body=body,
        )

    # -- public -------------------------------------------------------------

    def intercept(self, call: ApiCallRecord) -> Outcome:
        """Evaluate and either forward, hold for approval, or reject. The
        upstream sees nothing unless the decision is Allow (or a later human
        approval)."""
        decision = evaluate_call(call, self.policy, self.kb)
        findings = decision.findings

        if decision.decision is DecisionKind.ALLOW:
            self.log.append(
                "call_allowed",
                endpoint=call.endpoint,
                action_name=call.action_name,
                findings=self._finding_summaries(findings),
                payload=redacted_payload(call, decision.pii_spans),
            )
            return self._forward(call, findings)

        if decision.decision is DecisionKind.REQUIRE_APPROVAL:
            with self._lock:
                self._expire_stale_locked()
                pending_count = sum(
                    1 for e in self._pending.values() if e.state is ApprovalState.PENDING
                )
                if pending_count >= self.policy.max_pending:
                    self.log.append(
                        "call_rejected",
                        endpoint=call.endpoint,
                        action_name=call.action_name,
                        reason="queue_full",
                        findings=self._finding_summaries(findings),
                    )
                    return Outcome(kind="rejected", findings=tuple(findings), reason="queue_full")
                call_id = f"c-{uuid.uuid4().hex[:12]}"
                entry = PendingApproval(
                    call_id=call_id,
                    call=call,
                    findings=tuple(findings),
                    pii_spans=decision.pii_spans,
                    created_at=self._time(),
                )
                self._pending[call_id] = entry
                self.log.append(
                    "call_held",
                    call_id=call_id,
                    endpoint=call.endpoint,
                    action_name=call.action_name,
                    findings=self._finding_summaries(findings),
                    payload=redacted_payload(call, decision.pii_spans),
                )
            return Outcome(kind="held", findings=tuple(findings), call_id=call_id)

        self.log.append(
            "call_rejected",
            endpoint=call.endpoint,
            action_name=call.action_name,
            reason="policy_deny",
            findings=self._finding_summaries(findings),
        )
        return Outcome(kind="rejected", findings=tuple(findings), reason="policy_deny")

    def decide(self, call_id: str, allow: bool, decider: str) -> Outcome:
        """Resolve a pending call. Allowed forwards now; Denied drops it.
        Expired entries are treated as already decided (denied)."""
        with self._lock:
            self._expire_stale_locked()
            entry = self._pending.get(call_id)
            if entry is None:
                raise UnknownCallId(call_id)
            if entry.state is not ApprovalState.PENDING:
                raise AlreadyDecided(call_id, entry.state)
            entry.state = ApprovalState.ALLOWED if allow else ApprovalState.DENIED
            entry.decided_by = decider
            self.log.append(
                "decision",
                call_id=call_id,
                decision="allowed" if allow else "denied",
                decider=decider,
            )
            call = entry.call
            findings = entry.findings
        if allow:
            return self._forward(call, findings, call_id=call_id)
        return Outcome(kind="rejected", findings=tuple(findings), call_id=call_id, reason="denied")

    def pending(self) -> list[PendingApproval]:
        """Snapshot of the queue (stale entries expired first)."""
        with self._lock:
            self._expire_stale_locked()
            return [replace(entry) for entry in self._pending.values()]

    def age_of(self, entry: PendingApproval) -> float:
        return max(self._time() - entry.created_at, 0.0)

    def drain(self) -> None:
        """Terminal shutdown: every still-pending entry becomes Expired."""
        with self._lock:
            for entry in self._pending.values():
                if entry.state is ApprovalState.PENDING:
                    entry.state = ApprovalState.EXPIRED
                    self.log.append("call_expired", call_id=entry.call_id, reason="drain")
