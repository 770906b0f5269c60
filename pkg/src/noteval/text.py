"""Shared text primitives: tokenization and sentence counting.

Every metric and statistic tokenizes through here so their scores stay
comparable: lowercase, split on maximal runs of non-alphanumeric
characters, digits kept as tokens.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
# Sentence break inside a line: terminator, whitespace, then a capital or digit.
_SENT_BREAK_RE = re.compile(r"(?<=[.?!])\s+(?=[A-Z0-9])")
_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens of `text`, in order."""
    return _TOKEN_RE.findall(text.lower())


def sentence_segments(text: str) -> list[str]:
    """Sentence units of a note.

    Units are delimited by newlines, and additionally by a period, question
    mark, or exclamation mark followed by whitespace and an uppercase letter
    or digit. Segments without a single alphanumeric character are dropped,
    so blank lines and stray punctuation contribute nothing.
    """
    segments = []
    for line in text.split("\n"):
        for segment in _SENT_BREAK_RE.split(line):
            if _ALNUM_RE.search(segment):
                segments.append(segment.strip())
    return segments


def sentence_count(text: str) -> int:
    """Number of sentence units in a note."""
    return len(sentence_segments(text))
