"""PII pattern model and scanning: emails, phone numbers, custom patterns.

Matching is non-overlapping and leftmost-longest. Phone candidates get two
extra checks beyond the regex: the digit count must be 7..15, and dot
separators are only accepted after a leading "+" country prefix. Together
with the digit/dot adjacency guards in the pattern this guarantees that
dotted version strings (d+.d+.d+) never match, whatever their component
sizes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

KIND_EMAIL = "email"
KIND_PHONE = "phone"

EMAIL_PATTERN = (
    r"(?<![A-Za-z0-9._%+-])[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+"
)

# Optional "+" then 7-15 digits with single space/dash/dot separators, or a
# parenthesized area-code group. Guards: never adjacent to "<digit>" or a
# dot that continues a dotted-numeric run.
PHONE_PATTERN = (
    r"(?<![\d.])"
    r"(?:(?:\+?\d{1,3}[ .-]?)?\(\d{1,4}\)[ .-]?\d(?:[ .-]?\d){3,12}"
    r"|\+?\d(?:[ .-]?\d){6,14})"
    r"(?!\.?\d)"
)


@dataclass(frozen=True)
class PiiPattern:
    """One PII rule: `kind` is "email", "phone", or a custom label."""

    kind: str
    pattern: str
    description: str = ""

    def __post_init__(self) -> None:
        if not self.kind:
            raise ValueError("pattern kind must be nonempty")
        re.compile(self.pattern)

    @property
    def compiled(self) -> re.Pattern[str]:
        return re.compile(self.pattern)


DEFAULT_PII_PATTERNS: tuple[PiiPattern, ...] = (
    PiiPattern(kind=KIND_EMAIL, pattern=EMAIL_PATTERN, description="Email address"),
    PiiPattern(kind=KIND_PHONE, pattern=PHONE_PATTERN, description="Phone number"),
)


@dataclass(frozen=True)
class PiiMatch:
    kind: str
    start: int
    end: int
    text: str


def _valid_phone(candidate: str) -> bool:
    digits = re.sub(r"\D", "", candidate)
    if not 7 <= len(digits) <= 15:
        return False
    if "." in candidate and not candidate.startswith("+"):
        return False
    return True


def detect_pii(text: str, patterns: tuple[PiiPattern, ...] = DEFAULT_PII_PATTERNS) -> list[PiiMatch]:
    """All non-overlapping PII matches in `text`, leftmost-longest."""
    candidates: list[PiiMatch] = []
    for pattern in patterns:
        for m in pattern.compiled.finditer(text):
            matched = m.group(0)
            if pattern.kind == KIND_PHONE and not _valid_phone(matched):
                continue
            candidates.append(PiiMatch(kind=pattern.kind, start=m.start(), end=m.end(), text=matched))
    candidates.sort(key=lambda c: (c.start, -(c.end - c.start)))
    selected: list[PiiMatch] = []
    cursor = 0
    for c in candidates:
        if c.start >= cursor:
            selected.append(c)
            cursor = c.end
    return selected
