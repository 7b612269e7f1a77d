"""Reference data the detectors consult: vulnerability records, package
registry snapshots, trusted-domain lists, PII patterns, and scanner config.

Knowledge files are JSON documents in a directory selected by
``--knowledge-dir``; missing files fall back to the fixtures embedded under
``gptguard/data``. The loaded bundle is immutable and shareable across
threads. Validation collects every violation before failing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .model import Severity
from .pii import PiiPattern

CVE_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")

VULNS_FILE = "vulns.json"
DOMAINS_FILE = "domains.json"
PII_FILE = "pii_patterns.json"
SCANNER_FILE = "scanner_config.json"
REGISTRY_GLOB = "registry_*.json"


class KnowledgeValidationError(ValueError):
    """Carries every violation found while loading a knowledge bundle."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(errors))


class VersionParseError(ValueError):
    pass


@dataclass(frozen=True)
class Version:
    """Dotted-numeric version. Suffixes like "-rc1" are rejected at parse;
    ordering pre-releases is out of scope."""

    components: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise VersionParseError("version needs at least one component")
        if any(c < 0 for c in self.components):
            raise VersionParseError("version components must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "Version":
        parts = text.strip().split(".")
        if any(not p.isdigit() for p in parts):
            raise VersionParseError(f"not a dotted-numeric version: {text!r}")
        return cls(components=tuple(int(p) for p in parts))

    def __str__(self) -> str:
        return ".".join(str(c) for c in self.components)


def compare_versions(a: Version, b: Version) -> int:
    """Component-wise numeric comparison; missing trailing components count
    as 0. Returns -1 (less), 0 (equal), or 1 (greater)."""
    n = max(len(a.components), len(b.components))
    for i in range(n):
        ca = a.components[i] if i < len(a.components) else 0
        cb = b.components[i] if i < len(b.components) else 0
        if ca != cb:
            return -1 if ca < cb else 1
    return 0


@dataclass(frozen=True)
class VulnRecord:
    cve_id: str
    ecosystem: str
    package: str
    fixed_version: Version
    severity: Severity
    qualifier: str | None = None

    def __post_init__(self) -> None:
        if not CVE_RE.match(self.cve_id):
            raise ValueError(f"malformed CVE id {self.cve_id!r}")


def is_vulnerable(
    ecosystem: str,
    package: str,
    version: Version,
    qualifier: str | None,
    records: tuple[VulnRecord, ...],
) -> list[VulnRecord]:
    """Every record matching ecosystem+package whose fix the version
    predates. A record without a qualifier matches any call; a call without
    a qualifier matches every record (reports any downgrade below the
    maximum fixed version)."""
    eco = ecosystem.lower()
    pkg = package.lower()
    qual = qualifier.lower() if qualifier else None
    hits = []
    for record in records:
        if record.ecosystem.lower() != eco or record.package.lower() != pkg:
            continue
        rqual = record.qualifier.lower() if record.qualifier else None
        if rqual is not None and qual is not None and rqual != qual:
            continue
        if compare_versions(version, record.fixed_version) < 0:
            hits.append(record)
    return hits


@dataclass(frozen=True)
class PackageRegistrySnapshot:
    ecosystem: str
    entries: tuple[tuple[str, int], ...]  # (package name, popularity rank)

    def names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.entries)


@dataclass(frozen=True)
class DomainEntry:
    brand: str
    domain: str


@dataclass(frozen=True)
class DomainList:
    entries: tuple[DomainEntry, ...] = ()

    def domains(self) -> frozenset[str]:
        return frozenset(e.domain for e in self.entries)


@dataclass(frozen=True)
class TyposquatThresholds:
    distance: int = 1
    long_name_distance: int = 2
    long_name_min_length: int = 8


@dataclass(frozen=True)
class ScannerConfig:
    protected_paths: tuple[str, ...] = ()
    steering_phrases: tuple[str, ...] = ()
    typosquat: TyposquatThresholds = field(default_factory=TyposquatThresholds)
    lookalike_distance: int = 2


@dataclass(frozen=True)
class KnowledgeBundle:
    vulns: tuple[VulnRecord, ...]
    registries: tuple[PackageRegistrySnapshot, ...]
    domains: DomainList
    pii_patterns: tuple[PiiPattern, ...]
    scanner: ScannerConfig

    def registry_for(self, ecosystem: str) -> PackageRegistrySnapshot | None:
        for snapshot in self.registries:
            if snapshot.ecosystem.lower() == ecosystem.lower():
                return snapshot
        return None


def _read_embedded(name: str) -> str:
    return resources.files("gptguard.data").joinpath(name).read_text("utf-8")


def _load_json(raw: str, name: str, errors: list[str]) -> object | None:
    if not raw.strip():
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        errors.append(f"{name}: invalid JSON at line {exc.lineno}: {exc.msg}")
        return None


def _parse_vulns(doc: object, errors: list[str]) -> tuple[VulnRecord, ...]:
    if doc is None:
        return ()
    if not isinstance(doc, list):
        errors.append(f"{VULNS_FILE}: expected a list")
        return ()
    records: list[VulnRecord] = []
    seen: set[tuple[str, str, str, str | None]] = set()
    for i, raw in enumerate(doc):
        where = f"{VULNS_FILE}[{i}]"
        if not isinstance(raw, dict):
            errors.append(f"{where}: expected an object")
            continue
        try:
            severity = Severity(raw.get("severity", "High"))
        except ValueError:
            errors.append(f"{where}: unknown severity {raw.get('severity')!r}")
            continue
        try:
            fixed = Version.parse(str(raw.get("fixed_version", "")))
        except VersionParseError as exc:
            errors.append(f"{where}: {exc}")
            continue
        try:
            record = VulnRecord(
                cve_id=str(raw.get("cve_id", "")),
                ecosystem=str(raw.get("ecosystem", "")),
                package=str(raw.get("package", "")),
                qualifier=raw.get("qualifier"),
                fixed_version=fixed,
                severity=severity,
            )
        except ValueError as exc:
            errors.append(f"{where}: {exc}")
            continue
        key = (record.cve_id, record.ecosystem, record.package, record.qualifier)
        if key in seen:
            errors.append(f"{where}: duplicate record for {key}")
            continue
        seen.add(key)
        records.append(record)
    return tuple(records)


def _parse_registry(doc: object, name: str, errors: list[str]) -> PackageRegistrySnapshot | None:
    if doc is None:
        return None
    if not isinstance(doc, dict) or not isinstance(doc.get("ecosystem"), str):
        errors.append(f"{name}: expected an object with an ecosystem")
        return None
    entries: list[tuple[str, int]] = []
    seen: set[str] = set()
    for i, raw in enumerate(doc.get("packages", [])):
        where = f"{name}.packages[{i}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("name"), str):
            errors.append(f"{where}: expected a package name")
            continue
        rank = raw.get("rank")
        if not isinstance(rank, int) or rank < 1:
            errors.append(f"{where}: rank must be a positive integer")
            continue
        pkg = raw["name"].lower()
        if pkg in seen:
            errors.append(f"{where}: duplicate package {pkg!r}")
            continue
        seen.add(pkg)
        entries.append((pkg, rank))
    return PackageRegistrySnapshot(ecosystem=doc["ecosystem"].lower(), entries=tuple(entries))


def _parse_domains(doc: object, errors: list[str]) -> DomainList:
    if doc is None:
        return DomainList()
    if not isinstance(doc, list):
        errors.append(f"{DOMAINS_FILE}: expected a list")
        return DomainList()
    entries: list[DomainEntry] = []
    seen: set[str] = set()
    for i, raw in enumerate(doc):
        where = f"{DOMAINS_FILE}[{i}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("brand"), str) or not isinstance(raw.get("domain"), str):
            errors.append(f'{where}: expected {{"brand", "domain"}}')
            continue
        domain = raw["domain"]
        if "." not in domain:
            errors.append(f"{where}: domain {domain!r} has no dot")
            continue
        if domain != domain.lower():
            errors.append(f"{where}: domain {domain!r} must be lowercase")
            continue
        if domain in seen:
            errors.append(f"{where}: duplicate domain {domain!r}")
            continue
        seen.add(domain)
        entries.append(DomainEntry(brand=raw["brand"].lower(), domain=domain))
    return DomainList(entries=tuple(entries))


def _parse_pii(doc: object, errors: list[str]) -> tuple[PiiPattern, ...]:
    if doc is None:
        return ()
    if not isinstance(doc, list):
        errors.append(f"{PII_FILE}: expected a list")
        return ()
    patterns: list[PiiPattern] = []
    for i, raw in enumerate(doc):
        where = f"{PII_FILE}[{i}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("kind"), str) or not isinstance(raw.get("pattern"), str):
            errors.append(f'{where}: expected {{"kind", "pattern"}}')
            continue
        kind = raw["kind"]
        description = raw.get("description", "")
        if kind == "custom" and not description:
            errors.append(f"{where}: custom patterns need a nonempty description")
            continue
        try:
            patterns.append(PiiPattern(kind=kind, pattern=raw["pattern"], description=description))
        except re.error as exc:
            errors.append(f"{where}: pattern does not compile: {exc}")
    return tuple(patterns)


def _parse_scanner(doc: object, errors: list[str]) -> ScannerConfig:
    if doc is None:
        return ScannerConfig()
    if not isinstance(doc, dict):
        errors.append(f"{SCANNER_FILE}: expected an object")
        return ScannerConfig()
    squat_raw = doc.get("typosquat", {})
    thresholds = TyposquatThresholds(
        distance=int(squat_raw.get("distance", 1)),
        long_name_distance=int(squat_raw.get("long_name_distance", 2)),
        long_name_min_length=int(squat_raw.get("long_name_min_length", 8)),
    )
    return ScannerConfig(
        protected_paths=tuple(doc.get("protected_paths", [])),
        steering_phrases=tuple(doc.get("steering_phrases", [])),
        typosquat=thresholds,
        lookalike_distance=int(doc.get("lookalike_distance", 2)),
    )


def load_knowledge(knowledge_dir: str | Path | None = None) -> KnowledgeBundle:
    """Load and validate a knowledge bundle.

    With no directory the embedded fixtures are used. With a directory, each
    known file is read from it when present, falling back to the embedded
    default otherwise (an empty file yields an empty section).
    """
    errors: list[str] = []

    def read(name: str) -> str:
        if knowledge_dir is not None:
            path = Path(knowledge_dir) / name
            if path.exists():
                return path.read_text("utf-8")
        return _read_embedded(name)

    vulns = _parse_vulns(_load_json(read(VULNS_FILE), VULNS_FILE, errors), errors)
    domains = _parse_domains(_load_json(read(DOMAINS_FILE), DOMAINS_FILE, errors), errors)
    pii_patterns = _parse_pii(_load_json(read(PII_FILE), PII_FILE, errors), errors)
    scanner = _parse_scanner(_load_json(read(SCANNER_FILE), SCANNER_FILE, errors), errors)

    if knowledge_dir is not None and sorted(Path(knowledge_dir).glob(REGISTRY_GLOB)):
        registry_sources = [
            (p.name, p.read_text("utf-8")) for p in sorted(Path(knowledge_dir).glob(REGISTRY_GLOB))
        ]
    else:
        registry_sources = [
            (entry.name, entry.read_text("utf-8"))
            for entry in sorted(
                resources.files("gptguard.data").iterdir(), key=lambda e: e.name
            )
            if entry.name.startswith("registry_") and entry.name.endswith(".json")
        ]
    registries: list[PackageRegistrySnapshot] = []
    seen_ecosystems: set[str] = set()
    for name, raw in registry_sources:
        snapshot = _parse_registry(_load_json(raw, name, errors), name, errors)
        if snapshot is None:
            continue
        if snapshot.ecosystem in seen_ecosystems:
            errors.append(f"{name}: duplicate registry for ecosystem {snapshot.ecosystem!r}")
            continue
        seen_ecosystems.add(snapshot.ecosystem)
        registries.append(snapshot)

    if errors:
        raise KnowledgeValidationError(errors)
    return KnowledgeBundle(
        vulns=vulns,
        registries=tuple(registries),
        domains=domains,
        pii_patterns=pii_patterns,
        scanner=scanner,
    )
