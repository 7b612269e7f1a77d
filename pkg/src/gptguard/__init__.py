"""gptguard: guardrails against malicious custom-GPT behavior.

Audits GPT configurations, scans conversation transcripts and code
suggestions, unmasks phishing links, and intercepts action API calls for
PII exfiltration with human approval.
"""

from .model import (
    ApiCallRecord,
    Finding,
    GptConfiguration,
    Locus,
    LocusKind,
    Message,
    Severity,
    ThreatCategory,
    ThreatLeaf,
    Transcript,
    parent_category,
    parse_configuration,
    parse_transcript,
    serialize_configuration,
    serialize_transcript,
)
from .knowledge import KnowledgeBundle, Version, compare_versions, is_vulnerable, load_knowledge
from .scanner import scan_transcript
from .audit import AuditReport, audit_configuration
from .gateway import GatewayPolicy, GatewayService, evaluate_call
from .links import unmask_links
from .pii import detect_pii

__version__ = "0.1.0"

__all__ = [
    "ApiCallRecord",
    "AuditReport",
    "Finding",
    "GatewayPolicy",
    "GatewayService",
    "GptConfiguration",
    "KnowledgeBundle",
    "Locus",
    "LocusKind",
    "Message",
    "Severity",
    "ThreatCategory",
    "ThreatLeaf",
    "Transcript",
    "Version",
    "audit_configuration",
    "compare_versions",
    "detect_pii",
    "evaluate_call",
    "is_vulnerable",
    "load_knowledge",
    "parent_category",
    "parse_configuration",
    "parse_transcript",
    "scan_transcript",
    "serialize_configuration",
    "serialize_transcript",
    "unmask_links",
    "__version__",
]
