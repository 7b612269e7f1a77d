"""Command-line entry points.

Exit codes for every subcommand: 0 = no findings / pass, 1 = findings (or a
failed corpus gate), 2 = usage or parse error.
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading
from pathlib import Path

from .audit import audit_configuration
from .corpus import CorpusError, evaluate_corpus, result_to_dict, result_to_table
from .gateway import EventLog, GatewayService, PolicyError, load_policy
from .gateway_http import GatewayHTTPServer
from .judge import HttpBackend, JudgeUnavailable, StubBackend
from .knowledge import KnowledgeValidationError, load_knowledge
from .model import (
    MalformedConfiguration,
    MalformedTranscript,
    parse_configuration,
    parse_transcript,
)
from .report import build_report, human_lines, report_to_json
from .scanner import scan_transcript

USAGE_ERROR = 2
FINDINGS_EXIT = 1


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return USAGE_ERROR


def _read_file(path: str) -> bytes | None:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def _load_kb(knowledge_dir: str | None):
    try:
        return load_knowledge(knowledge_dir)
    except KnowledgeValidationError as exc:
        for problem in exc.errors:
            print(f"error: knowledge: {problem}", file=sys.stderr)
        return None


def _emit_report(report: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(report_to_json(report))
    else:
        findings = report["findings"]
        if not findings:
            print("no findings")
        from .report import finding_from_dict

        for line in human_lines([finding_from_dict(d) for d in findings]):
            print(line)
        if report.get("judge") is not None:
            verdict = report["judge"]
            state = "MALICIOUS" if verdict["flagged"] else "CLEAN"
            leaves = ", ".join(verdict["leaves"]) or "-"
            print(f"judge: {state} (categories: {leaves})")
        if report.get("judge_error"):
            print(f"warning: judge unavailable: {report['judge_error']}", file=sys.stderr)


def cmd_scan_transcript(args: argparse.Namespace) -> int:
    data = _read_file(args.path)
    if data is None:
        return USAGE_ERROR
    kb = _load_kb(args.knowledge_dir)
    if kb is None:
        return USAGE_ERROR
    configuration = None
    if args.config:
        config_data = _read_file(args.config)
        if config_data is None:
            return USAGE_ERROR
        try:
            configuration = parse_configuration(config_data)
        except MalformedConfiguration as exc:
            return _fail(str(exc))
    try:
        transcript = parse_transcript(data)
    except MalformedTranscript as exc:
        return _fail(str(exc))
    findings = scan_transcript(transcript, kb, configuration)
    _emit_report(build_report(args.path, findings), args.format)
    return FINDINGS_EXIT if findings else 0


def cmd_audit_config(args: argparse.Namespace) -> int:
    data = _read_file(args.path)
    if data is None:
        return USAGE_ERROR
    kb = _load_kb(args.knowledge_dir)
    if kb is None:
        return USAGE_ERROR
    try:
        configuration = parse_configuration(data)
    except MalformedConfiguration as exc:
        return _fail(str(exc))
    judge = None
    if args.judge == "stub":
        if args.stub_manifest:
            judge = StubBackend.from_file(args.stub_manifest)
        else:
            judge = StubBackend()
    elif args.judge == "live":
        try:
            judge = HttpBackend.from_env()
        except JudgeUnavailable as exc:
            print(f"warning: judge unavailable: {exc}", file=sys.stderr)
    report = audit_configuration(configuration, kb, judge)
    _emit_report(
        build_report(args.path, report.findings, report.judge_verdict, report.judge_error),
        args.format,
    )
    return FINDINGS_EXIT if report.findings else 0


def cmd_eval_corpus(args: argparse.Namespace) -> int:
    kb = _load_kb(args.knowledge_dir)
    if kb is None:
        return USAGE_ERROR
    try:
        result = evaluate_corpus(args.corpus_dir, kb)
    except CorpusError as exc:
        return _fail(str(exc))
    if args.format == "json":
        import json

        sys.stdout.write(json.dumps(result_to_dict(result), indent=2) + "\n")
    else:
        for line in result_to_table(result):
            print(line)
    return 0 if result.passed else FINDINGS_EXIT


def cmd_serve_gateway(args: argparse.Namespace) -> int:
    import os

    kb = _load_kb(args.knowledge_dir)
    if kb is None:
        return USAGE_ERROR
    try:
        policy = load_policy(args.policy)
    except PolicyError as exc:
        return _fail(str(exc))
    host, _, port_text = args.listen.partition(":")
    try:
        port = int(port_text) if port_text else 0
    except ValueError:
        return _fail(f"--listen: invalid port {port_text!r}")

    event_log = EventLog(args.event_log) if args.event_log else EventLog()
    service = GatewayService(policy, kb, event_log=event_log)
    token = args.token or os.environ.get("GATEWAY_TOKEN") or None
    console_dir = args.console_dir if args.console_dir else None
    try:
        server = GatewayHTTPServer(
            service, host=host or "127.0.0.1", port=port, token=token, console_dir=console_dir
        )
    except OSError as exc:
        return _fail(f"cannot bind {args.listen}: {exc}")

    bound_host, bound_port = server.address
    print(f"gateway listening on http://{bound_host}:{bound_port}", flush=True)

    stop = threading.Event()

    def _signal_handler(_signum, _frame):
        stop.set()

    signal.signal(signal.SIGTERM, _signal_handler)
    signal.signal(signal.SIGINT, _signal_handler)

    server.start()
    try:
        while not stop.wait(0.2):
            pass
    finally:
        service.drain()
        server.shutdown()
        event_log.close()
    print("gateway drained and stopped", flush=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gptguard",
        description="Guardrails against malicious custom-GPT behavior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan-transcript", help="scan a conversation transcript for threats")
    scan.add_argument("path", help="transcript file (wire format JSON)")
    scan.add_argument("--knowledge-dir", default=None, help="knowledge directory (default: embedded fixtures)")
    scan.add_argument("--config", default=None, help="configuration file whose declared action servers count as expected hosts")
    scan.add_argument("--format", choices=("human", "json"), default="human")
    scan.set_defaults(func=cmd_scan_transcript)

    audit = sub.add_parser("audit-config", help="audit a GPT configuration before deployment")
    audit.add_argument("path", help="configuration file (wire format JSON)")
    audit.add_argument("--knowledge-dir", default=None)
    audit.add_argument("--judge", choices=("off", "stub", "live"), default="off")
    audit.add_argument("--stub-manifest", default=None, help="digest-keyed verdict manifest for --judge stub")
    audit.add_argument("--format", choices=("human", "json"), default="human")
    audit.set_defaults(func=cmd_audit_config)

    evalc = sub.add_parser("eval-corpus", help="score the detectors against a labeled corpus")
    evalc.add_argument("corpus_dir", help="directory containing manifest.json and fixtures")
    evalc.add_argument("--knowledge-dir", default=None)
    evalc.add_argument("--format", choices=("human", "json"), default="human")
    evalc.set_defaults(func=cmd_eval_corpus)

    serve = sub.add_parser("serve-gateway", help="run the intercepting action gateway")
    serve.add_argument("--policy", required=True, help="policy file (JSON)")
    serve.add_argument("--listen", default="127.0.0.1:8780", help="host:port (port 0 for ephemeral)")
    serve.add_argument("--knowledge-dir", default=None)
    serve.add_argument("--event-log", default=None, help="append-only JSONL event log file")
    serve.add_argument("--console-dir", default=None, help="static files served under /console")
    serve.add_argument("--token", default=None, help="control-plane bearer token (or env GATEWAY_TOKEN)")
    serve.set_defaults(func=cmd_serve_gateway)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
