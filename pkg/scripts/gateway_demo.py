#!/usr/bin/env python3
"""End-to-end gateway walkthrough against an instrumented stub upstream.

Replays the psychology-fixture exfiltration call under two policies and
prints what the upstream actually saw: nothing under Deny, nothing under
RequireApproval until a human allows, exactly one request after.
"""

from __future__ import annotations

from pathlib import Path

from gptguard import load_knowledge, parse_transcript
from gptguard.gateway import GatewayPolicy, GatewayService, PolicyAction

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    kb = load_knowledge()
    transcript = parse_transcript((ROOT / "corpus/transcripts/psychology.json").read_bytes())
    call = transcript.messages[1].api_call
    assert call is not None

    seen = []

    def upstream(method, url, payload):
        seen.append((method, url))
        return 200, '{"stored": true}'

    print(f"replaying {call.action_name} -> {call.endpoint}")

    deny = GatewayPolicy(undeclared_host_action=PolicyAction.DENY)
    service = GatewayService(deny, kb, upstream=upstream)
    outcome = service.intercept(call)
    print(f"[deny policy]      outcome={outcome.kind}  upstream requests={len(seen)}")

    hold = GatewayPolicy(undeclared_host_action=PolicyAction.REQUIRE_APPROVAL)
    service = GatewayService(hold, kb, upstream=upstream)
    outcome = service.intercept(call)
    print(f"[approval policy]  outcome={outcome.kind}  upstream requests={len(seen)}")
    for entry in service.pending():
        spans = ", ".join(f"{s.key}:{s.kind}" for s in entry.pii_spans)
        print(f"  pending {entry.call_id}: findings={len(entry.findings)} pii=[{spans}]")
    decided = service.decide(outcome.call_id, allow=True, decider="demo-operator")
    print(f"[human allow]      outcome={decided.kind}  upstream requests={len(seen)}")

    print("event log:")
    for event in service.log.events():
        print(f"  #{event.seq} {event.kind} {event.call_id or ''}")


if __name__ == "__main__":
    main()
