"""Static, pre-deployment audit of a GPT configuration.

The rule-based half of configuration verification: exfiltration-capable
actions, steering instructions, and every transcript rule family replayed
over instructions and knowledge documents as if they were assistant text.
Pure except for the optional judge round-trip, whose failure never
suppresses rule findings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import urlparse

from .distance import damerau_levenshtein
from .judge import JudgeVerdict, judge_config
from .knowledge import KnowledgeBundle
from .links import host_on_list, registrable_domain
from .model import (
    Finding,
    GptConfiguration,
    LocusKind,
    Severity,
    ThreatLeaf,
    extract_code_blocks,
    make_finding,
)
from .scanner import (
    ECOSYSTEM_BY_HINT,
    Hit,
    destructive_hits,
    buffer_overflow_hits,
    jndi_hits,
    link_hits,
    package_mention_hits,
    sql_injection_hits,
    typosquat_hits,
    version_downgrade_hits,
)


@dataclass(frozen=True)
class AuditReport:
    findings: tuple[Finding, ...]
    judge_verdict: JudgeVerdict | None = None
    judge_error: str | None = None


def _steering_hits(text: str, phrases: tuple[str, ...]) -> list[Hit]:
    hits: list[Hit] = []
    for phrase in phrases:
        pattern = re.compile(r"\b" + re.escape(phrase).replace(r"\ ", r"\s+") + r"\b", re.IGNORECASE)
        for m in pattern.finditer(text):
            hits.append(
                Hit(
                    detector="covert-steering",
                    leaf=ThreatLeaf.DIRECT_PHISHING,
                    severity=Severity.MEDIUM,
                    confidence=0.4,
                    start=m.start(),
                    end=m.end(),
                    remediation=f"instruction phrase {phrase!r} conceals behavior from the user",
                )
            )
    return hits


def _config_findings(hits: list[Hit], text: str, path: str, base: int = 0) -> list[Finding]:
    return [
        make_finding(
            leaf=hit.leaf,
            severity=hit.severity,
            detector=hit.detector,
            confidence=hit.confidence,
            remediation=hit.remediation,
            kind=LocusKind.CONFIG_FIELD,
            path=path,
            text=text,
            start=base + hit.start,
            end=base + hit.end,
        )
        for hit in hits
    ]


def audit_actions(config: GptConfiguration, kb: KnowledgeBundle) -> list[Finding]:
    """Flag exfiltration-capable actions: free-text parameters pointed at
    hosts outside the trusted-domain allowlist, plain-http servers, and
    lookalike server domains. An empty allowlist flags every free-text
    action (deny by default)."""
    trusted = kb.domains.domains()
    findings: list[Finding] = []
    for i, action in enumerate(config.actions):
        path = f"actions[{i}].server_url"
        url = action.server_url
        parsed = urlparse(url)
        host = (parsed.hostname or "").lower()
        host_start = url.find(host) if host else -1

        free_params = [
            p.name for op in action.operations for p in op.params if p.kind.value == "free_text"
        ]
        if free_params and not host_on_list(host, trusted):
            findings.append(
                make_finding(
                    leaf=ThreatLeaf.DIRECT_PHISHING,
                    severity=Severity.HIGH,
                    detector="exfiltration-channel",
                    confidence=0.8,
                    remediation=(
                        f"action {action.action_name!r} accepts free-text parameter(s) "
                        f"{', '.join(sorted(set(free_params)))} and sends them to the untrusted host "
                        f"{host!r}: a conversation-capable exfiltration channel"
                    ),
                    kind=LocusKind.CONFIG_FIELD,
                    path=path,
                    text=url,
                    start=max(host_start, 0),
                    end=max(host_start, 0) + len(host),
                )
            )
        if parsed.scheme == "http":
            findings.append(
                make_finding(
                    leaf=ThreatLeaf.DIRECT_PHISHING,
                    severity=Severity.MEDIUM,
                    detector="plain-http",
                    confidence=0.9,
                    remediation=f"action {action.action_name!r} uses plain http; payloads travel unencrypted",
                    kind=LocusKind.CONFIG_FIELD,
                    path=path,
                    text=url,
                    start=0,
                    end=len("http"),
                )
            )
        if host:
            domain = registrable_domain(host)
            if domain not in trusted:
                for candidate in sorted(trusted):
                    d = damerau_levenshtein(domain, candidate)
                    if 0 < d <= kb.scanner.lookalike_distance:
                        findings.append(
                            make_finding(
                                leaf=ThreatLeaf.DIRECT_PHISHING,
                                severity=Severity.HIGH,
                                detector="lookalike-domain",
                                confidence=0.85,
                                remediation=(
                                    f"action server domain {domain!r} imitates {candidate!r} "
                                    f"(edit distance {d})"
                                ),
                                kind=LocusKind.CONFIG_FIELD,
                                path=path,
                                text=url,
                                start=max(host_start, 0),
                                end=max(host_start, 0) + len(host),
                            )
                        )
                        break
    return findings


def _text_fields(config: GptConfiguration) -> list[tuple[str, str]]:
    fields = [("instructions", config.instructions)]
    fields.extend(
        (f"knowledge_docs[{i}].content", doc.content) for i, doc in enumerate(config.knowledge_docs)
    )
    return fields


def audit_instructions(config: GptConfiguration, kb: KnowledgeBundle) -> list[Finding]:
    """Run the transcript rule families over instructions and knowledge
    docs as if they were assistant text, plus covert-steering phrases."""
    findings: list[Finding] = []
    for path, text in _text_fields(config):
        if not text:
            continue
        hits: list[Hit] = []
        hits += version_downgrade_hits(text, kb)
        hits += jndi_hits(text)
        hits += sql_injection_hits(text)
        hits += buffer_overflow_hits(text)
        hits += destructive_hits(text, kb.scanner)
        hits += link_hits(text, kb)
        hits += _steering_hits(text, kb.scanner.steering_phrases)
        for snapshot in kb.registries:
            hits += package_mention_hits(text, snapshot.ecosystem, kb)
        findings.extend(_config_findings(hits, text, path))

        blocks, _warnings = extract_code_blocks(text)
        for block in blocks:
            ecosystem = ECOSYSTEM_BY_HINT.get(block.language_hint.lower())
            if ecosystem is None:
                continue
            region = text.encode("utf-8")[block.span[0] : block.span[1]].decode("utf-8")
            body_rel = region.find("\n" + block.body)
            if block.body and body_rel >= 0:
                base = len(text.encode("utf-8")[: block.span[0]].decode("utf-8")) + body_rel + 1
                findings.extend(
                    _config_findings(typosquat_hits(block.body, ecosystem, kb), text, path, base=base)
                )
    return _dedupe_config(findings)


def _dedupe_config(findings: list[Finding]) -> list[Finding]:
    seen = set()
    out = []
    for f in findings:
        key = (f.detector, f.leaf.value, f.locus.path, f.locus.span)
        if key in seen:
            continue
        seen.add(key)
        out.append(f)
    return out


def audit_configuration(
    config: GptConfiguration,
    kb: KnowledgeBundle,
    judge=None,
) -> AuditReport:
    """Union of the action and instruction audits, plus an optional judge
    verdict. Rule findings never depend on judge availability."""
    findings = audit_actions(config, kb) + audit_instructions(config, kb)
    findings = _dedupe_config(findings)
    findings.sort(key=lambda f: (f.locus.path, f.locus.span[0], f.detector))
    verdict = None
    judge_error = None
    if judge is not None:
        try:
            verdict = judge_config(config, judge)
        except Exception as exc:  # judge failure is recorded, never fatal
            judge_error = f"{type(exc).__name__}: {exc}"
    return AuditReport(findings=tuple(findings), judge_verdict=verdict, judge_error=judge_error)
