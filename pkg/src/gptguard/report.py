"""Finding/report serialization shared by the CLI and the gateway control
plane, plus the human one-line format."""

from __future__ import annotations

import json

from .judge import JudgeVerdict
from .model import (
    Finding,
    Locus,
    LocusKind,
    Severity,
    ThreatLeaf,
    parent_category,
)

REPORT_VERSION = 1

EVIDENCE_LIMIT = 80  # characters per human-format line


def finding_to_dict(finding: Finding) -> dict:
    return {
        "id": finding.id,
        "leaf": finding.leaf.value,
        "category": parent_category(finding.leaf).value,
        "severity": finding.severity.value,
        "detector": finding.detector,
        "confidence": finding.confidence,
        "locus": {
            "kind": finding.locus.kind.value,
            "path": finding.locus.path,
            "span": list(finding.locus.span),
        },
        "evidence": finding.evidence,
        "remediation": finding.remediation,
    }


def finding_from_dict(doc: dict) -> Finding:
    locus = doc["locus"]
    return Finding(
        id=doc["id"],
        leaf=ThreatLeaf(doc["leaf"]),
        severity=Severity(doc["severity"]),
        locus=Locus(kind=LocusKind(locus["kind"]), path=locus["path"], span=tuple(locus["span"])),
        evidence=doc["evidence"],
        detector=doc["detector"],
        confidence=doc["confidence"],
        remediation=doc["remediation"],
    )


def verdict_to_dict(verdict: JudgeVerdict) -> dict:
    return {
        "flagged": verdict.flagged,
        "leaves": sorted(leaf.value for leaf in verdict.leaves),
        "explanation": verdict.explanation,
        "pointer": (
            {
                "kind": verdict.pointer.kind.value,
                "path": verdict.pointer.path,
                "span": list(verdict.pointer.span),
            }
            if verdict.pointer is not None
            else None
        ),
        "raw_response": verdict.raw_response,
        "warnings": list(verdict.warnings),
    }


def verdict_from_dict(doc: dict) -> JudgeVerdict:
    pointer = None
    if doc.get("pointer"):
        p = doc["pointer"]
        pointer = Locus(kind=LocusKind(p["kind"]), path=p["path"], span=tuple(p["span"]))
    return JudgeVerdict(
        flagged=doc["flagged"],
        leaves=frozenset(ThreatLeaf(v) for v in doc["leaves"]),
        explanation=doc["explanation"],
        raw_response=doc["raw_response"],
        pointer=pointer,
        warnings=tuple(doc.get("warnings", ())),
    )


def build_report(
    input_path: str,
    findings,
    judge_verdict: JudgeVerdict | None = None,
    judge_error: str | None = None,
) -> dict:
    report: dict = {
        "version": REPORT_VERSION,
        "input": input_path,
        "findings": [finding_to_dict(f) for f in findings],
    }
    if judge_verdict is not None:
        report["judge"] = verdict_to_dict(judge_verdict)
    if judge_error is not None:
        report["judge_error"] = judge_error
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, indent=2) + "\n"


def report_from_json(text: str) -> dict:
    return json.loads(text)


def _excerpt(evidence: str) -> str:
    flat = evidence.replace("\n", "\\n")
    if len(flat) > EVIDENCE_LIMIT:
        # character truncation always lands on a UTF-8 boundary
        flat = flat[: EVIDENCE_LIMIT - 1] + "…"
    return flat


def human_lines(findings) -> list[str]:
    """One line per finding: severity, leaf, locus, evidence excerpt."""
    lines = []
    for f in findings:
        locus = f"{f.locus.kind.value}:{f.locus.path}[{f.locus.span[0]}:{f.locus.span[1]}]"
        lines.append(f"{f.severity.value:<8} {f.leaf.value:<20} {f.detector:<20} {locus}  {_excerpt(f.evidence)}")
    return lines
