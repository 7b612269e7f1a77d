"""Link extraction, registrable-domain reduction, and link unmasking."""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import urlparse

# Markdown anchor: [label](url). Labels may not contain brackets, URLs may
# not contain parentheses or whitespace; this keeps rewriting well-defined.
ANCHOR_RE = re.compile(r"\[([^\][]*)\]\(([^()\s]*)\)")

BARE_URL_RE = re.compile(r"https?://[^\s<>()\[\]\"']+")

_TRAILING_PUNCT = ".,;:!?'\""

# Minimal multi-label public suffixes; a full public-suffix database is out
# of scope.
MULTI_LABEL_SUFFIXES = frozenset(
    {
        "co.uk",
        "org.uk",
        "gov.uk",
        "ac.uk",
        "co.jp",
        "co.in",
        "co.nz",
        "co.kr",
        "com.au",
        "com.br",
        "com.cn",
        "com.mx",
    }
)


@dataclass(frozen=True)
class LinkOccurrence:
    """A hyperlink found in scanned text, with character offsets."""

    anchor_text: str | None
    url: str
    start: int
    end: int
    url_start: int
    url_end: int


def extract_links(text: str) -> list[LinkOccurrence]:
    """Find markdown anchors and bare URLs; bare-URL matches inside anchors
    are not double-counted."""
    links: list[LinkOccurrence] = []
    covered: list[tuple[int, int]] = []
    for m in ANCHOR_RE.finditer(text):
        url = m.group(2)
        if not urlparse(url).scheme:
            continue
        links.append(
            LinkOccurrence(
                anchor_text=m.group(1),
                url=url,
                start=m.start(),
                end=m.end(),
                url_start=m.start(2),
                url_end=m.end(2),
            )
        )
        covered.append((m.start(), m.end()))
    for m in BARE_URL_RE.finditer(text):
        if any(s <= m.start() < e for s, e in covered):
            continue
        url = m.group(0).rstrip(_TRAILING_PUNCT)
        end = m.start() + len(url)
        links.append(
            LinkOccurrence(
                anchor_text=None,
                url=url,
                start=m.start(),
                end=end,
                url_start=m.start(),
                url_end=end,
            )
        )
    links.sort(key=lambda l: l.start)
    return links


def unmask_links(markdown: str) -> str:
    """Rewrite every markdown anchor "[label](url)" to "label (url)".

    Idempotent; text outside anchors is preserved byte-for-byte. Rewriting
    repeats until no anchor remains so that bracket fragments uncovered by a
    rewrite cannot leave a masked link behind.
    """
    out = markdown
    while True:
        rewritten = ANCHOR_RE.sub(lambda m: f"{m.group(1)} ({m.group(2)})", out)
        if rewritten == out:
            return out
        out = rewritten


def registrable_domain(host: str) -> str:
    """Reduce a host to its registrable domain: the last two labels, or
    three when the last two form a known multi-label suffix."""
    labels = host.lower().rstrip(".").split(".")
    if len(labels) <= 2:
        return ".".join(labels)
    if ".".join(labels[-2:]) in MULTI_LABEL_SUFFIXES:
        return ".".join(labels[-3:])
    return ".".join(labels[-2:])


def host_on_list(host: str | None, domains: frozenset[str] | set[str]) -> bool:
    """True when `host` equals a listed domain or is a subdomain of one."""
    if not host:
        return False
    host = host.lower().rstrip(".")
    return any(host == d or host.endswith("." + d) for d in domains)
