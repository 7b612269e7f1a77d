"""Corpus evaluation harness: scores the detectors against labeled fixtures.

A corpus directory holds a manifest.json listing transcript and config
fixtures with labels and expected taxonomy leaves. A malicious fixture
counts as a hit when every expected leaf shows up in its findings; benign
fixtures must produce zero findings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .audit import audit_configuration
from .knowledge import KnowledgeBundle
from .model import (
    MalformedConfiguration,
    MalformedTranscript,
    ThreatLeaf,
    parse_configuration,
    parse_transcript,
)
from .scanner import scan_transcript

MANIFEST_NAME = "manifest.json"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    fixture: str
    kind: str  # "transcript" | "config"
    label: str  # "malicious" | "benign"
    expected_leaves: tuple[ThreatLeaf, ...] = ()


@dataclass(frozen=True)
class FixtureResult:
    entry: ManifestEntry
    found_leaves: tuple[str, ...]
    finding_count: int
    hit: bool


@dataclass(frozen=True)
class EvalResult:
    rows: tuple[FixtureResult, ...]
    malicious_total: int
    malicious_hits: int
    false_positives: int
    per_leaf: dict[str, tuple[int, int]]  # leaf -> (expected_in, detected_in)

    @property
    def recall(self) -> float:
        if self.malicious_total == 0:
            return 1.0
        return self.malicious_hits / self.malicious_total

    @property
    def passed(self) -> bool:
        return self.recall >= 1.0 and self.false_positives == 0


def load_manifest(corpus_dir: str | Path) -> list[ManifestEntry]:
    root = Path(corpus_dir)
    manifest_path = root / MANIFEST_NAME
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    if not manifest_path.is_file():
        raise CorpusError(f"{manifest_path} is missing")
    try:
        doc = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{manifest_path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, list) or not doc:
        raise CorpusError(f"{manifest_path}: expected a nonempty list of fixtures")
    entries: list[ManifestEntry] = []
    for i, raw in enumerate(doc):
        where = f"{MANIFEST_NAME}[{i}]"
        if not isinstance(raw, dict):
            raise CorpusError(f"{where}: expected an object")
        fixture = raw.get("fixture")
        kind = raw.get("kind")
        label = raw.get("label")
        if not isinstance(fixture, str):
            raise CorpusError(f"{where}: missing fixture path")
        if kind not in ("transcript", "config"):
            raise CorpusError(f"{where}: kind must be 'transcript' or 'config'")
        if label not in ("malicious", "benign"):
            raise CorpusError(f"{where}: label must be 'malicious' or 'benign'")
        if not (root / fixture).is_file():
            raise CorpusError(f"{where}: fixture file {fixture!r} not found")
        leaves_raw = raw.get("expected_leaves", [])
        try:
            leaves = tuple(ThreatLeaf(v) for v in leaves_raw)
        except ValueError as exc:
            raise CorpusError(f"{where}: {exc}") from None
        if label == "malicious" and not leaves:
            raise CorpusError(f"{where}: malicious fixtures need expected_leaves")
        entries.append(ManifestEntry(fixture=fixture, kind=kind, label=label, expected_leaves=leaves))
    return entries


def evaluate_corpus(corpus_dir: str | Path, kb: KnowledgeBundle) -> EvalResult:
    root = Path(corpus_dir)
    entries = load_manifest(root)
    rows: list[FixtureResult] = []
    per_leaf: dict[str, list[int]] = {}
    malicious_total = 0
    malicious_hits = 0
    false_positives = 0

    for entry in sorted(entries, key=lambda e: e.fixture):
        data = (root / entry.fixture).read_bytes()
        try:
            if entry.kind == "transcript":
                findings = scan_transcript(parse_transcript(data), kb)
            else:
                findings = list(audit_configuration(parse_configuration(data), kb).findings)
        except (MalformedTranscript, MalformedConfiguration) as exc:
            raise CorpusError(f"{entry.fixture}: {exc}") from None
        found = tuple(sorted({f.leaf.value for f in findings}))
        if entry.label == "malicious":
            malicious_total += 1
            hit = all(leaf.value in found for leaf in entry.expected_leaves)
            malicious_hits += int(hit)
            for leaf in entry.expected_leaves:
                slot = per_leaf.setdefault(leaf.value, [0, 0])
                slot[0] += 1
                slot[1] += int(leaf.value in found)
        else:
            hit = not findings
            false_positives += len(findings)
        rows.append(
            FixtureResult(entry=entry, found_leaves=found, finding_count=len(findings), hit=hit)
        )

    return EvalResult(
        rows=tuple(rows),
        malicious_total=malicious_total,
        malicious_hits=malicious_hits,
        false_positives=false_positives,
        per_leaf={k: (v[0], v[1]) for k, v in sorted(per_leaf.items())},
    )


def result_to_dict(result: EvalResult) -> dict:
    return {
        "fixtures": [
            {
                "fixture": row.entry.fixture,
                "kind": row.entry.kind,
                "label": row.entry.label,
                "expected_leaves": [l.value for l in row.entry.expected_leaves],
                "found_leaves": list(row.found_leaves),
                "finding_count": row.finding_count,
                "hit": row.hit,
            }
            for row in result.rows
        ],
        "malicious_total": result.malicious_total,
        "malicious_hits": result.malicious_hits,
        "recall": result.recall,
        "false_positives": result.false_positives,
        "per_leaf": {
            leaf: {"expected_in": counts[0], "detected_in": counts[1]}
            for leaf, counts in result.per_leaf.items()
        },
        "passed": result.passed,
    }


def result_to_table(result: EvalResult) -> list[str]:
    lines = []
    width = max((len(r.entry.fixture) for r in result.rows), default=10)
    header = f"{'fixture':<{width}}  {'label':<9} {'kind':<10} {'findings':>8}  result"
    lines.append(header)
    lines.append("-" * len(header))
    for row in result.rows:
        if row.entry.label == "malicious":
            status = "hit" if row.hit else "MISS"
            detail = ",".join(l.value for l in row.entry.expected_leaves)
        else:
            status = "clean" if row.hit else "FALSE-POSITIVE"
            detail = ""
        lines.append(
            f"{row.entry.fixture:<{width}}  {row.entry.label:<9} {row.entry.kind:<10} "
            f"{row.finding_count:>8}  {status} {detail}".rstrip()
        )
    lines.append("-" * len(header))
    lines.append(
        f"recall {result.malicious_hits}/{result.malicious_total}"
        f" = {result.recall:.3f}; benign false positives: {result.false_positives}"
    )
    for leaf, (expected, detected) in result.per_leaf.items():
        lines.append(f"  {leaf:<22} {detected}/{expected}")
    return lines
