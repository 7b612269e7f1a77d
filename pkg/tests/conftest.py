import json
from pathlib import Path

import pytest

from gptguard import load_knowledge
from gptguard.model import parse_configuration, parse_transcript

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "corpus"


@pytest.fixture(scope="session")
def kb():
    return load_knowledge()


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


def load_fixture_transcript(name: str):
    return parse_transcript((CORPUS_DIR / "transcripts" / name).read_bytes())


def load_fixture_config(name: str):
    return parse_configuration((CORPUS_DIR / "configs" / name).read_bytes())


def make_transcript(*messages, gpt_name="Test GPT"):
    """Build a transcript through the parser so code blocks are extracted."""
    doc = {"gpt_name": gpt_name, "messages": list(messages)}
    return parse_transcript(json.dumps(doc, ensure_ascii=False).encode("utf-8"))
