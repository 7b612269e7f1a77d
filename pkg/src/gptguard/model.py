"""Shared data model: threat taxonomy, findings, configurations, and transcripts.

Every other module depends on this one; it depends on nothing else in the
package. All types are immutable after construction and safe to share across
concurrent scanners. Spans are byte offsets into the UTF-8 encoding of the
addressed text, half-open [start, end).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import urlparse


class ThreatCategory(str, Enum):
    VULNERABILITY_STEERING = "VulnerabilitySteering"
    MALICIOUS_INJECTION = "MaliciousInjection"
    INFORMATION_THEFT = "InformationTheft"


class ThreatLeaf(str, Enum):
    N_DAY_EXPLOIT = "NDayExploit"
    INSECURE_PRACTICE = "InsecurePractice"
    MALICIOUS_CODE_SNIPPET = "MaliciousCodeSnippet"
    MALICIOUS_LIBRARY = "MaliciousLibrary"
    DIRECT_PHISHING = "DirectPhishing"
    THIRD_PARTY_PHISHING = "ThirdPartyPhishing"


_PARENT: dict[ThreatLeaf, ThreatCategory] = {
    ThreatLeaf.N_DAY_EXPLOIT: ThreatCategory.VULNERABILITY_STEERING,
    ThreatLeaf.INSECURE_PRACTICE: ThreatCategory.VULNERABILITY_STEERING,
    ThreatLeaf.MALICIOUS_CODE_SNIPPET: ThreatCategory.MALICIOUS_INJECTION,
    ThreatLeaf.MALICIOUS_LIBRARY: ThreatCategory.MALICIOUS_INJECTION,
    ThreatLeaf.DIRECT_PHISHING: ThreatCategory.INFORMATION_THEFT,
    ThreatLeaf.THIRD_PARTY_PHISHING: ThreatCategory.INFORMATION_THEFT,
}


def parent_category(leaf: ThreatLeaf) -> ThreatCategory:
    """Map a taxonomy leaf to its unique parent category. Total function."""
    return _PARENT[leaf]


class Severity(str, Enum):
    INFO = "Info"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"


SEVERITY_ORDER: dict[Severity, int] = {
    Severity.INFO: 0,
    Severity.LOW: 1,
    Severity.MEDIUM: 2,
    Severity.HIGH: 3,
    Severity.CRITICAL: 4,
}

# Only these detector ids may emit Critical findings.
CRITICAL_CAPABLE_DETECTORS = frozenset(
    {"destructive-command", "exfiltration-action", "jndi-lookup"}
)


class LocusKind(str, Enum):
    CONFIG_FIELD = "ConfigField"
    TRANSCRIPT_MESSAGE = "TranscriptMessage"
    API_PAYLOAD = "ApiPayload"


def char_to_byte_span(text: str, start: int, end: int) -> tuple[int, int]:
    """Convert a character range in `text` to a UTF-8 byte span."""
    if not (0 <= start <= end <= len(text)):
        raise ValueError(f"character range [{start}, {end}) outside text of length {len(text)}")
    prefix = len(text[:start].encode("utf-8"))
    return prefix, prefix + len(text[start:end].encode("utf-8"))


def byte_slice(text: str, span: tuple[int, int]) -> str:
    """Slice `text` by a UTF-8 byte span."""
    raw = text.encode("utf-8")
    return raw[span[0] : span[1]].decode("utf-8")


def byte_length(text: str) -> int:
    return len(text.encode("utf-8"))


@dataclass(frozen=True)
class Locus:
    """Where a finding points: which text, and which byte span inside it."""

    kind: LocusKind
    path: str
    span: tuple[int, int]

    def __post_init__(self) -> None:
        start, end = self.span
        if start < 0 or start > end:
            raise ValueError(f"invalid span {self.span}")


@dataclass(frozen=True)
class Finding:
    """One detected threat instance.

    `evidence` is always the verbatim byte-span slice of the text addressed
    by `locus`; factories enforce this, tests verify it for every finding.
    """

    id: str
    leaf: ThreatLeaf
    severity: Severity
    locus: Locus
    evidence: str
    detector: str
    confidence: float
    remediation: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.severity is Severity.CRITICAL and self.detector not in CRITICAL_CAPABLE_DETECTORS:
            raise ValueError(f"detector {self.detector!r} is not Critical-capable")


def make_finding(
    *,
    leaf: ThreatLeaf,
    severity: Severity,
    detector: str,
    confidence: float,
    remediation: str,
    kind: LocusKind,
    path: str,
    text: str,
    start: int,
    end: int,
) -> Finding:
    """Build a Finding from a character range in the addressed text.

    Computes the byte span, slices the evidence verbatim, and derives a
    deterministic id so that equal scans yield equal findings.
    """
    span = char_to_byte_span(text, start, end)
    digest = hashlib.sha256(
        f"{detector}|{leaf.value}|{kind.value}|{path}|{span[0]}|{span[1]}".encode()
    ).hexdigest()
    return Finding(
        id=f"f-{digest[:12]}",
        leaf=leaf,
        severity=severity,
        locus=Locus(kind=kind, path=path, span=span),
        evidence=text[start:end],
        detector=detector,
        confidence=confidence,
        remediation=remediation,
    )


# ---------------------------------------------------------------------------
# Transcripts
# ---------------------------------------------------------------------------


class Role(str, Enum):
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


class Consent(str, Enum):
    NOT_REQUESTED = "not_requested"
    REQUESTED = "requested"
    GRANTED = "granted"
    DENIED = "denied"


class MalformedTranscript(ValueError):
    """Raised when a transcript document violates the wire format."""


class MalformedConfiguration(ValueError):
    """Raised when a configuration document violates the wire format."""


@dataclass(frozen=True)
class CodeBlock:
    """A fenced code region extracted from message content.

    `span` is the byte range of the whole fenced region including the fence
    lines; `body` is the region minus those fence lines.
    """

    language_hint: str
    body: str
    span: tuple[int, int]


@dataclass(frozen=True)
class ApiCallRecord:
    action_name: str
    endpoint: str
    method: str
    payload: tuple[tuple[str, str], ...]
    consent: Consent = Consent.NOT_REQUESTED

    def __post_init__(self) -> None:
        host = urlparse(self.endpoint).hostname
        if not host:
            raise ValueError(f"endpoint {self.endpoint!r} has no host")
        keys = [k for k, _ in self.payload]
        if len(keys) != len(set(keys)):
            raise ValueError("payload keys must be unique")

    def payload_value(self, key: str) -> str:
        for k, v in self.payload:
            if k == key:
                return v
        raise KeyError(key)


@dataclass(frozen=True)
class Message:
    role: Role
    content: str
    code_blocks: tuple[CodeBlock, ...] = ()
    api_call: ApiCallRecord | None = None

    def __post_init__(self) -> None:
        if self.api_call is not None and self.role is Role.USER:
            raise ValueError("api_call is only valid on assistant or tool messages")


@dataclass(frozen=True)
class Transcript:
    gpt_name: str
    messages: tuple[Message, ...]
    warnings: tuple[str, ...] = ()


_FENCE = "```"


def extract_code_blocks(content: str) -> tuple[tuple[CodeBlock, ...], tuple[str, ...]]:
    """Extract fenced code blocks (three-backtick fences, optional language
    hint on the opening fence) with byte spans over the fenced region.

    An unclosed fence at end of content becomes a block extending to the end,
    reported as a warning rather than an error.
    """
    blocks: list[CodeBlock] = []
    warnings: list[str] = []
    lines = content.split("\n")
    # Character offset of the start of each line.
    offsets: list[int] = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1

    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith(_FENCE):
            hint = line[len(_FENCE) :].strip()
            open_start = offsets[i]
            j = i + 1
            close_idx = None
            while j < len(lines):
                if lines[j].startswith(_FENCE) and lines[j].strip().strip("`") == "":
                    close_idx = j
                    break
                j += 1
            if close_idx is None:
                body = "\n".join(lines[i + 1 :])
                span_end = len(content)
                blocks.append(
                    CodeBlock(
                        language_hint=hint,
                        body=body,
                        span=char_to_byte_span(content, open_start, span_end),
                    )
                )
                warnings.append(
                    f"unclosed code fence opened at byte offset "
                    f"{char_to_byte_span(content, open_start, open_start)[0]}"
                )
                break
            body = "\n".join(lines[i + 1 : close_idx])
            span_end = offsets[close_idx] + len(lines[close_idx])
            blocks.append(
                CodeBlock(
                    language_hint=hint,
                    body=body,
                    span=char_to_byte_span(content, open_start, span_end),
                )
            )
            i = close_idx + 1
        else:
            i += 1
    return tuple(blocks), tuple(warnings)


def block_body_char_range(content: str, block: CodeBlock) -> tuple[int, int]:
    """Character range of a block's body within the message content."""
    raw = content.encode("utf-8")
    region_start = len(raw[: block.span[0]].decode("utf-8"))
    region = byte_slice(content, block.span)
    if not block.body:
        # Empty body: position right after the opening fence line.
        nl = region.find("\n")
        off = region_start + (nl + 1 if nl >= 0 else len(region))
        return off, off
    body_rel = region.find("\n" + block.body)
    start = region_start + body_rel + 1
    return start, start + len(block.body)


def _require(cond: bool, where: str, problem: str) -> None:
    if not cond:
        raise MalformedTranscript(f"{where}: {problem}")


def _parse_api_call(obj: object, where: str) -> ApiCallRecord:
    _require(isinstance(obj, dict), where, "api_call must be an object")
    assert isinstance(obj, dict)
    for key in ("action_name", "endpoint", "method"):
        _require(isinstance(obj.get(key), str) and obj[key], where, f"missing or empty {key!r}")
    payload_raw = obj.get("payload", [])
    _require(isinstance(payload_raw, list), where, "payload must be a list")
    pairs: list[tuple[str, str]] = []
    for n, item in enumerate(payload_raw):
        _require(
            isinstance(item, dict)
            and isinstance(item.get("key"), str)
            and isinstance(item.get("value"), str),
            f"{where}.payload[{n}]",
            'expected {"key": string, "value": string}',
        )
        pairs.append((item["key"], item["value"]))
    consent_raw = obj.get("consent", Consent.NOT_REQUESTED.value)
    try:
        consent = Consent(consent_raw)
    except ValueError:
        raise MalformedTranscript(f"{where}: unknown consent state {consent_raw!r}") from None
    try:
        return ApiCallRecord(
            action_name=obj["action_name"],
            endpoint=obj["endpoint"],
            method=obj["method"],
            payload=tuple(pairs),
            consent=consent,
        )
    except ValueError as exc:
        raise MalformedTranscript(f"{where}: {exc}") from None


def parse_transcript(data: bytes | str) -> Transcript:
    """Parse the transcript wire format into an immutable Transcript.

    Code blocks are extracted once at parse time so every detector consumes
    the same block inventory. Raises MalformedTranscript with a path or
    line/offset diagnostic on bad input.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedTranscript(f"not valid UTF-8: {exc}") from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedTranscript(
            f"invalid document at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None

    _require(isinstance(doc, dict), "top-level", "expected an object")
    _require(isinstance(doc.get("gpt_name"), str), "gpt_name", "expected a string")
    _require(isinstance(doc.get("messages"), list), "messages", "expected a list")

    messages: list[Message] = []
    warnings: list[str] = []
    saw_explicit_index = False
    for i, raw in enumerate(doc["messages"]):
        where = f"messages[{i}]"
        _require(isinstance(raw, dict), where, "expected an object")
        role_raw = raw.get("role")
        try:
            role = Role(role_raw)
        except ValueError:
            raise MalformedTranscript(f"{where}: unknown role {role_raw!r}") from None
        _require(isinstance(raw.get("content"), str), where, "content must be a string")
        if "index" in raw:
            saw_explicit_index = True
            _require(
                raw["index"] == i,
                where,
                f"non-dense index {raw['index']!r} (expected {i})",
            )
        elif saw_explicit_index:
            raise MalformedTranscript(f"{where}: missing index while earlier messages carry one")
        api_call = None
        if raw.get("api_call") is not None:
            api_call = _parse_api_call(raw["api_call"], where)
            _require(role is not Role.USER, where, "api_call is only valid on assistant or tool messages")
        blocks, block_warnings = extract_code_blocks(raw["content"])
        warnings.extend(f"{where}: {w}" for w in block_warnings)
        messages.append(
            Message(role=role, content=raw["content"], code_blocks=blocks, api_call=api_call)
        )
    return Transcript(gpt_name=doc["gpt_name"], messages=tuple(messages), warnings=tuple(warnings))


def serialize_transcript(transcript: Transcript) -> bytes:
    """Serialize a Transcript back to the wire format (code blocks and
    warnings are derived at parse time and not written)."""
    doc: dict[str, object] = {
        "gpt_name": transcript.gpt_name,
        "messages": [
            _message_to_dict(message) for message in transcript.messages
        ],
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def _message_to_dict(message: Message) -> dict[str, object]:
    out: dict[str, object] = {"role": message.role.value, "content": message.content}
    if message.api_call is not None:
        call = message.api_call
        out["api_call"] = {
            "action_name": call.action_name,
            "endpoint": call.endpoint,
            "method": call.method,
            "payload": [{"key": k, "value": v} for k, v in call.payload],
            "consent": call.consent.value,
        }
    return out


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


class ParamKind(str, Enum):
    FREE_TEXT = "free_text"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class ActionParam:
    name: str
    kind: ParamKind


@dataclass(frozen=True)
class ActionOperation:
    method: str
    path: str
    params: tuple[ActionParam, ...] = ()


@dataclass(frozen=True)
class ActionDescriptor:
    action_name: str
    server_url: str
    operations: tuple[ActionOperation, ...] = ()

    def __post_init__(self) -> None:
        parsed = urlparse(self.server_url)
        if not parsed.scheme or not parsed.hostname:
            raise ValueError(f"server_url {self.server_url!r} is not an absolute URL with a host")


@dataclass(frozen=True)
class Capabilities:
    web_browsing: bool = False
    image_generation: bool = False
    code_interpretation: bool = False


@dataclass(frozen=True)
class KnowledgeDoc:
    doc_name: str
    content: str


@dataclass(frozen=True)
class GptConfiguration:
    name: str
    description: str = ""
    conversation_starters: tuple[str, ...] = ()
    instructions: str = ""
    knowledge_docs: tuple[KnowledgeDoc, ...] = ()
    capabilities: Capabilities = field(default_factory=Capabilities)
    actions: tuple[ActionDescriptor, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("configuration name must be nonempty")


def _cfg_require(cond: bool, where: str, problem: str) -> None:
    if not cond:
        raise MalformedConfiguration(f"{where}: {problem}")


def parse_configuration(data: bytes | str) -> GptConfiguration:
    """Parse the configuration wire format (mirrors GptConfiguration)."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedConfiguration(f"not valid UTF-8: {exc}") from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedConfiguration(
            f"invalid document at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None

    _cfg_require(isinstance(doc, dict), "top-level", "expected an object")
    _cfg_require(isinstance(doc.get("name"), str) and doc["name"] != "", "name", "expected a nonempty string")

    starters = doc.get("conversation_starters", [])
    _cfg_require(
        isinstance(starters, list) and all(isinstance(s, str) for s in starters),
        "conversation_starters",
        "expected a list of strings",
    )

    docs: list[KnowledgeDoc] = []
    for i, raw in enumerate(doc.get("knowledge_docs", [])):
        where = f"knowledge_docs[{i}]"
        _cfg_require(
            isinstance(raw, dict)
            and isinstance(raw.get("doc_name"), str)
            and isinstance(raw.get("content"), str),
            where,
            'expected {"doc_name": string, "content": string}',
        )
        docs.append(KnowledgeDoc(doc_name=raw["doc_name"], content=raw["content"]))

    caps_raw = doc.get("capabilities", {})
    _cfg_require(isinstance(caps_raw, dict), "capabilities", "expected an object")
    for key, value in caps_raw.items():
        _cfg_require(
            key in ("web_browsing", "image_generation", "code_interpretation"),
            f"capabilities.{key}",
            "unknown capability flag",
        )
        _cfg_require(isinstance(value, bool), f"capabilities.{key}", "expected a boolean")

    actions: list[ActionDescriptor] = []
    for i, raw in enumerate(doc.get("actions", [])):
        where = f"actions[{i}]"
        _cfg_require(isinstance(raw, dict), where, "expected an object")
        _cfg_require(isinstance(raw.get("action_name"), str) and raw["action_name"], where, "missing action_name")
        _cfg_require(isinstance(raw.get("server_url"), str), where, "missing server_url")
        ops: list[ActionOperation] = []
        for j, op_raw in enumerate(raw.get("operations", [])):
            op_where = f"{where}.operations[{j}]"
            _cfg_require(
                isinstance(op_raw, dict)
                and isinstance(op_raw.get("method"), str)
                and isinstance(op_raw.get("path"), str),
                op_where,
                "expected method and path strings",
            )
            params: list[ActionParam] = []
            for k, p_raw in enumerate(op_raw.get("params", [])):
                p_where = f"{op_where}.params[{k}]"
                _cfg_require(
                    isinstance(p_raw, dict) and isinstance(p_raw.get("name"), str),
                    p_where,
                    "expected a param name",
                )
                try:
                    kind = ParamKind(p_raw.get("kind"))
                except ValueError:
                    raise MalformedConfiguration(
                        f"{p_where}: unknown param kind {p_raw.get('kind')!r}"
                    ) from None
                params.append(ActionParam(name=p_raw["name"], kind=kind))
            ops.append(ActionOperation(method=op_raw["method"], path=op_raw["path"], params=tuple(params)))
        try:
            actions.append(
                ActionDescriptor(
                    action_name=raw["action_name"],
                    server_url=raw["server_url"],
                    operations=tuple(ops),
                )
            )
        except ValueError as exc:
            raise MalformedConfiguration(f"{where}: {exc}") from None

    return GptConfiguration(
        name=doc["name"],
        description=doc.get("description", ""),
        conversation_starters=tuple(starters),
        instructions=doc.get("instructions", ""),
        knowledge_docs=tuple(docs),
        capabilities=Capabilities(**caps_raw),
        actions=tuple(actions),
    )


def serialize_configuration(config: GptConfiguration) -> bytes:
    doc = {
        "name": config.name,
        "description": config.description,
        "conversation_starters": list(config.conversation_starters),
        "instructions": config.instructions,
        "knowledge_docs": [
            {"doc_name": d.doc_name, "content": d.content} for d in config.knowledge_docs
        ],
        "capabilities": {
            "web_browsing": config.capabilities.web_browsing,
            "image_generation": config.capabilities.image_generation,
            "code_interpretation": config.capabilities.code_interpretation,
        },
        "actions": [
            {
                "action_name": a.action_name,
                "server_url": a.server_url,
                "operations": [
                    {
                        "method": op.method,
                        "path": op.path,
                        "params": [{"name": p.name, "kind": p.kind.value} for p in op.params],
                    }
                    for op in a.operations
                ],
            }
            for a in config.actions
        ],
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Locus resolution (used by reporting and by tests that verify evidence)
# ---------------------------------------------------------------------------


def resolve_locus(
    locus: Locus,
    *,
    transcript: Transcript | None = None,
    configuration: GptConfiguration | None = None,
    call: ApiCallRecord | None = None,
) -> str:
    """Return the text a locus addresses, for evidence verification."""
    if locus.kind is LocusKind.TRANSCRIPT_MESSAGE:
        if transcript is None:
            raise ValueError("transcript required to resolve a TranscriptMessage locus")
        return transcript.messages[int(locus.path)].content
    if locus.kind is LocusKind.API_PAYLOAD:
        target = call
        parts = locus.path.split(".")
        if parts[0].isdigit():
            if transcript is None:
                raise ValueError("transcript required to resolve this ApiPayload locus")
            target = transcript.messages[int(parts[0])].api_call
            parts = parts[1:]
            if parts and parts[0] == "api_call":
                parts = parts[1:]
        if target is None:
            raise ValueError(f"no api call available for locus path {locus.path!r}")
        if parts == ["endpoint"]:
            return target.endpoint
        if len(parts) == 2 and parts[0] == "payload":
            return target.payload_value(parts[1])
        raise ValueError(f"unresolvable ApiPayload path {locus.path!r}")
    # ConfigField
    if configuration is None:
        raise ValueError("configuration required to resolve a ConfigField locus")
    path = locus.path
    if path == "instructions":
        return configuration.instructions
    if path == "name":
        return configuration.name
    if path == "description":
        return configuration.description
    if path.startswith("knowledge_docs[") and path.endswith("].content"):
        idx = int(path[len("knowledge_docs[") : path.index("]")])
        return configuration.knowledge_docs[idx].content
    if path.startswith("actions[") and path.endswith("].server_url"):
        idx = int(path[len("actions[") : path.index("]")])
        return configuration.actions[idx].server_url
    raise ValueError(f"unresolvable ConfigField path {path!r}")
