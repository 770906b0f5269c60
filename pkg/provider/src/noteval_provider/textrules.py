"""Text splitting rules shared with the evaluation harness.

The harness documents one tokenizer for everything that scores text:
lowercase, split on maximal runs of non-alphanumeric characters, digits
kept.  Contextual sidecars must list exactly this token sequence when
tokenizer compatibility mode is on, so the rules are restated here
rather than imported; the provider depends on the format contract, not
on the harness package.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENT_BREAK_RE = re.compile(r"(?<=[.?!])\s+(?=[A-Z0-9])")
_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, in order."""
    return _TOKEN_RE.findall(text.lower())


def sentence_segments(text: str) -> list[str]:
    """Sentence units: newline-delimited, plus terminator-then-capital
    breaks inside a line; segments without alphanumerics are dropped."""
    segments = []
    for line in text.split("\n"):
        for segment in _SENT_BREAK_RE.split(line):
            if _ALNUM_RE.search(segment):
                segments.append(segment.strip())
    return segments
