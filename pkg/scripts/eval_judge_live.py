#!/usr/bin/env python3
"""Run the live judge over the corpus and record verdicts for manual review.

Requires JUDGE_ENDPOINT (and usually JUDGE_API_KEY / JUDGE_MODEL) in the
environment. Results go to judge_live_results.jsonl; nothing is asserted -
live-model recall is explicitly not part of the automated suite.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from gptguard import load_knowledge  # noqa: F401  (validates the bundle early)
from gptguard.judge import HttpBackend, JudgeError, judge_config, judge_transcript
from gptguard.model import parse_configuration, parse_transcript
from gptguard.report import verdict_to_dict

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
OUT = ROOT / "judge_live_results.jsonl"


def main() -> int:
    try:
        backend = HttpBackend.from_env()
    except JudgeError as exc:
        print(f"live judge not configured: {exc}", file=sys.stderr)
        return 2

    manifest = json.loads((CORPUS / "manifest.json").read_text("utf-8"))
    with OUT.open("w", encoding="utf-8") as sink:
        for entry in manifest:
            path = CORPUS / entry["fixture"]
            try:
                if entry["kind"] == "transcript":
                    verdict = judge_transcript(parse_transcript(path.read_bytes()), backend)
                else:
                    verdict = judge_config(parse_configuration(path.read_bytes()), backend)
                record = {"fixture": entry["fixture"], "label": entry["label"], "verdict": verdict_to_dict(verdict)}
            except JudgeError as exc:
                record = {"fixture": entry["fixture"], "label": entry["label"], "error": str(exc)}
            sink.write(json.dumps(record, ensure_ascii=False) + "\n")
            flag = record.get("verdict", {}).get("flagged")
            print(f"{entry['fixture']}: {'error' if 'error' in record else flag}")
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
