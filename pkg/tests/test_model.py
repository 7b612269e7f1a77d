import json

import pytest
from hypothesis import given, strategies as st

from gptguard.model import (
    ApiCallRecord,
    Finding,
    Locus,
    LocusKind,
    MalformedTranscript,
    Role,
    Severity,
    ThreatCategory,
    ThreatLeaf,
    block_body_char_range,
    byte_slice,
    char_to_byte_span,
    extract_code_blocks,
    make_finding,
    parent_category,
    parse_configuration,
    parse_transcript,
    resolve_locus,
    serialize_configuration,
    serialize_transcript,
)

# ---------------------------------------------------------------------------
# taxonomy
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "leaf, category",
    [
        (ThreatLeaf.N_DAY_EXPLOIT, ThreatCategory.VULNERABILITY_STEERING),
        (ThreatLeaf.INSECURE_PRACTICE, ThreatCategory.VULNERABILITY_STEERING),
        (ThreatLeaf.MALICIOUS_CODE_SNIPPET, ThreatCategory.MALICIOUS_INJECTION),
        (ThreatLeaf.MALICIOUS_LIBRARY, ThreatCategory.MALICIOUS_INJECTION),
        (ThreatLeaf.DIRECT_PHISHING, ThreatCategory.INFORMATION_THEFT),
        (ThreatLeaf.THIRD_PARTY_PHISHING, ThreatCategory.INFORMATION_THEFT),
    ],
)
def test_parent_category(leaf, category):
    assert parent_category(leaf) is category


def test_parent_category_total():
    for leaf in ThreatLeaf:
        assert isinstance(parent_category(leaf), ThreatCategory)


# ---------------------------------------------------------------------------
# findings and loci
# ---------------------------------------------------------------------------


def test_finding_confidence_bounds():
    with pytest.raises(ValueError):
        Finding(
            id="x",
            leaf=ThreatLeaf.N_DAY_EXPLOIT,
            severity=Severity.LOW,
            locus=Locus(LocusKind.TRANSCRIPT_MESSAGE, "0", (0, 1)),
            evidence="a",
            detector="version-downgrade",
            confidence=1.5,
            remediation="",
        )


def test_critical_requires_capable_detector():
    with pytest.raises(ValueError):
        make_finding(
            leaf=ThreatLeaf.N_DAY_EXPLOIT,
            severity=Severity.CRITICAL,
            detector="version-downgrade",
            confidence=0.9,
            remediation="",
            kind=LocusKind.TRANSCRIPT_MESSAGE,
            path="0",
            text="abc",
            start=0,
            end=3,
        )
    # these are documented as Critical-capable
    for detector in ("destructive-command", "exfiltration-action", "jndi-lookup"):
        make_finding(
            leaf=ThreatLeaf.MALICIOUS_CODE_SNIPPET
            if detector == "destructive-command"
            else ThreatLeaf.DIRECT_PHISHING
            if detector == "exfiltration-action"
            else ThreatLeaf.N_DAY_EXPLOIT,
            severity=Severity.CRITICAL,
            detector=detector,
            confidence=0.9,
            remediation="",
            kind=LocusKind.TRANSCRIPT_MESSAGE,
            path="0",
            text="abc",
            start=0,
            end=3,
        )


def test_invalid_span_rejected():
    with pytest.raises(ValueError):
        Locus(LocusKind.TRANSCRIPT_MESSAGE, "0", (5, 2))


def test_make_finding_evidence_is_byte_slice_multibyte():
    text = "héllo ☀️ wörld"
    f = make_finding(
        leaf=ThreatLeaf.INSECURE_PRACTICE,
        severity=Severity.LOW,
        detector="sql-injection",
        confidence=0.5,
        remediation="",
        kind=LocusKind.TRANSCRIPT_MESSAGE,
        path="0",
        text=text,
        start=6,
        end=8,
    )
    assert f.evidence == text[6:8]
    assert byte_slice(text, f.locus.span) == f.evidence


@given(st.text(max_size=40), st.data())
def test_char_byte_span_round_trip(text, data):
    start = data.draw(st.integers(0, len(text)))
    end = data.draw(st.integers(start, len(text)))
    span = char_to_byte_span(text, start, end)
    assert byte_slice(text, span) == text[start:end]


# ---------------------------------------------------------------------------
# code block extraction
# ---------------------------------------------------------------------------


def test_extract_single_block_with_hint():
    content = "look:\n```python\nprint(1)\n```\ndone"
    blocks, warnings = extract_code_blocks(content)
    assert warnings == ()
    assert len(blocks) == 1
    block = blocks[0]
    assert block.language_hint == "python"
    assert block.body == "print(1)"
    region = byte_slice(content, block.span)
    assert region == "```python\nprint(1)\n```"
    # body equals the fenced region minus its fence lines
    assert "\n".join(region.split("\n")[1:-1]) == block.body


def test_unclosed_fence_is_block_plus_warning():
    content = "x\n```sh\nrm file\n"
    blocks, warnings = extract_code_blocks(content)
    assert len(blocks) == 1
    assert blocks[0].body == "rm file\n"
    assert len(warnings) == 1 and "unclosed" in warnings[0]


def test_block_body_char_range_matches_body():
    content = "a\n```c\nint x;\nint y;\n```\nb\n```\nplain\n```"
    blocks, _ = extract_code_blocks(content)
    assert len(blocks) == 2
    for block in blocks:
        start, end = block_body_char_range(content, block)
        assert content[start:end] == block.body


def test_multiple_blocks_and_empty_body():
    content = "```\n```\nmiddle\n```js\nlet a;\n```"
    blocks, _ = extract_code_blocks(content)
    assert [b.body for b in blocks] == ["", "let a;"]
    assert blocks[0].language_hint == ""
    assert blocks[1].language_hint == "js"


# ---------------------------------------------------------------------------
# transcript parsing
# ---------------------------------------------------------------------------


def _doc(messages, gpt_name="G"):
    return json.dumps({"gpt_name": gpt_name, "messages": messages}).encode()


def test_parse_minimal_transcript():
    t = parse_transcript(_doc([{"role": "user", "content": "hi"}]))
    assert t.gpt_name == "G"
    assert len(t.messages) == 1
    assert t.messages[0].role is Role.USER
    assert t.messages[0].code_blocks == ()


def test_parse_extracts_blocks():
    t = parse_transcript(
        _doc([{"role": "assistant", "content": "see\n```python\nx = 1\n```"}])
    )
    assert len(t.messages[0].code_blocks) == 1
    assert t.messages[0].code_blocks[0].language_hint == "python"
    assert t.messages[0].code_blocks[0].body == "x = 1"


def test_unknown_role_rejected():
    with pytest.raises(MalformedTranscript, match="role"):
        parse_transcript(_doc([{"role": "system", "content": "x"}]))


def test_api_call_on_user_rejected():
    call = {
        "action_name": "a",
        "endpoint": "https://x.example/e",
        "method": "POST",
        "payload": [],
    }
    with pytest.raises(MalformedTranscript):
        parse_transcript(_doc([{"role": "user", "content": "x", "api_call": call}]))


def test_non_dense_indices_rejected():
    with pytest.raises(MalformedTranscript, match="index"):
        parse_transcript(
            _doc(
                [
                    {"role": "user", "content": "a", "index": 0},
                    {"role": "assistant", "content": "b", "index": 2},
                ]
            )
        )


def test_bad_json_reports_line():
    with pytest.raises(MalformedTranscript, match="line"):
        parse_transcript(b'{"gpt_name": "x",\n "messages": [}')


def test_duplicate_payload_keys_rejected():
    call = {
        "action_name": "a",
        "endpoint": "https://x.example/e",
        "method": "POST",
        "payload": [{"key": "k", "value": "1"}, {"key": "k", "value": "2"}],
    }
    with pytest.raises(MalformedTranscript, match="unique"):
        parse_transcript(_doc([{"role": "assistant", "content": "x", "api_call": call}]))


def test_round_trip_fixture():
    raw = _doc(
        [
            {"role": "user", "content": "hi ☀️"},
            {
                "role": "assistant",
                "content": "code:\n```sh\nls\n```",
                "api_call": {
                    "action_name": "a",
                    "endpoint": "https://x.example/e",
                    "method": "POST",
                    "payload": [{"key": "q", "value": "v"}],
                    "consent": "granted",
                },
            },
        ]
    )
    once = parse_transcript(raw)
    again = parse_transcript(serialize_transcript(once))
    assert once == again


_content = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)),
    max_size=120,
)
_roles = st.sampled_from(["user", "assistant", "tool"])


@st.composite
def _transcript_docs(draw):
    n = draw(st.integers(0, 4))
    messages = []
    for _ in range(n):
        role = draw(_roles)
        message = {"role": role, "content": draw(_content)}
        if role != "user" and draw(st.booleans()):
            message["api_call"] = {
                "action_name": "act",
                "endpoint": "https://upstream.example/hook",
                "method": "POST",
                "payload": [{"key": "k", "value": draw(_content)}],
                "consent": draw(st.sampled_from(["not_requested", "requested", "granted", "denied"])),
            }
        messages.append(message)
    return json.dumps({"gpt_name": draw(_content), "messages": messages}, ensure_ascii=False).encode(
        "utf-8"
    )


@given(_transcript_docs())
def test_round_trip_property(doc):
    once = parse_transcript(doc)
    assert parse_transcript(serialize_transcript(once)) == once


@given(_transcript_docs())
def test_block_spans_reproduce_fenced_regions(doc):
    t = parse_transcript(doc)
    for message in t.messages:
        for block in message.code_blocks:
            region = byte_slice(message.content, block.span)
            assert region.startswith("```")
            lines = region.split("\n")
            if region.endswith("```") and len(lines) > 1 and lines[-1].strip().strip("`") == "":
                assert "\n".join(lines[1:-1]) == block.body
            else:  # unclosed fence runs to the end of the message
                assert "\n".join(lines[1:]) == block.body


# ---------------------------------------------------------------------------
# configuration parsing
# ---------------------------------------------------------------------------


def test_configuration_round_trip():
    doc = {
        "name": "X",
        "description": "d",
        "conversation_starters": ["hello"],
        "instructions": "be nice",
        "knowledge_docs": [{"doc_name": "a.md", "content": "text"}],
        "capabilities": {"web_browsing": True},
        "actions": [
            {
                "action_name": "act",
                "server_url": "https://api.example.com",
                "operations": [
                    {
                        "method": "POST",
                        "path": "/v1/x",
                        "params": [
                            {"name": "q", "kind": "free_text"},
                            {"name": "zip", "kind": "structured"},
                        ],
                    }
                ],
            }
        ],
    }
    config = parse_configuration(json.dumps(doc).encode())
    assert parse_configuration(serialize_configuration(config)) == config
    assert config.actions[0].operations[0].params[0].kind.value == "free_text"


def test_configuration_requires_host():
    doc = {"name": "X", "actions": [{"action_name": "a", "server_url": "not-a-url"}]}
    with pytest.raises(Exception, match="server_url"):
        parse_configuration(json.dumps(doc).encode())


def test_configuration_empty_name_rejected():
    with pytest.raises(Exception, match="name"):
        parse_configuration(b'{"name": ""}')


# ---------------------------------------------------------------------------
# locus resolution
# ---------------------------------------------------------------------------


def test_resolve_locus_paths():
    t = parse_transcript(
        _doc(
            [
                {
                    "role": "assistant",
                    "content": "hello",
                    "api_call": {
                        "action_name": "a",
                        "endpoint": "https://x.example/e",
                        "method": "POST",
                        "payload": [{"key": "msg", "value": "secret"}],
                    },
                }
            ]
        )
    )
    assert resolve_locus(Locus(LocusKind.TRANSCRIPT_MESSAGE, "0", (0, 0)), transcript=t) == "hello"
    assert (
        resolve_locus(Locus(LocusKind.API_PAYLOAD, "0.api_call.payload.msg", (0, 0)), transcript=t)
        == "secret"
    )
    assert (
        resolve_locus(Locus(LocusKind.API_PAYLOAD, "0.api_call.endpoint", (0, 0)), transcript=t)
        == "https://x.example/e"
    )
    call = ApiCallRecord(
        action_name="a", endpoint="https://x.example/e", method="POST", payload=(("k", "v"),)
    )
    assert resolve_locus(Locus(LocusKind.API_PAYLOAD, "payload.k", (0, 0)), call=call) == "v"
