"""Edit-distance metrics: character Levenshtein and word-level WER/MER/WIL.

Levenshtein runs on the lowercased raw character sequence of the note;
the word metrics run on shared-tokenizer tokens via a full alignment
whose backtrace prefers hits, then substitutions, deletions, insertions.

These are distances: larger means worse. Correlation tables carry them
with lower-is-better polarity and never sign-invert them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateInput(ValueError):
    """A rate is undefined for this input (e.g. empty reference)."""


@dataclass(frozen=True)
class AlignmentCounts:
    hits: int
    substitutions: int
    deletions: int  # reference tokens with no hypothesis counterpart
    insertions: int  # hypothesis tokens with no reference counterpart


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32)


def levenshtein(hyp: str, ref: str) -> int:
    """Minimal insert/delete/substitute character operations, unit costs.

    Case-insensitive: both strings are lowercased first. The inner loop is
    one dynamic-programming row; the in-row dependency collapses to a
    running minimum of (candidate - column), which vectorizes.
    """
    hyp = hyp.lower()
    ref = ref.lower()
    if hyp == ref:
        return 0
    if not hyp:
        return len(ref)
    if not ref:
        return len(hyp)
    a = _codepoints(hyp)
    b = _codepoints(ref)
    m = len(b)
    offsets = np.arange(m + 1, dtype=np.int64)
    prev = offsets.copy()
    y = np.empty(m + 1, dtype=np.int64)
    for i in range(1, len(a) + 1):
        y[0] = i
        np.minimum(prev[:-1] + (b != a[i - 1]), prev[1:] + 1, out=y[1:])
        prev = np.minimum.accumulate(y - offsets) + offsets
        y = np.empty(m + 1, dtype=np.int64)
    return int(prev[-1])


def levenshtein_normalized(hyp: str, ref: str) -> float:
    """Distance divided by reference length in characters."""
    if not ref:
        raise DegenerateInput("normalized distance undefined: empty reference")
    return levenshtein(hyp, ref) / len(ref)


def _token_ids(
    hyp_tokens: Sequence[str], ref_tokens: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    ids: dict[str, int] = {}
    for token in hyp_tokens:
        ids.setdefault(token, len(ids))
    for token in ref_tokens:
        ids.setdefault(token, len(ids))
    hyp_arr = np.fromiter((ids[t] for t in hyp_tokens), dtype=np.int64, count=len(hyp_tokens))
    ref_arr = np.fromiter((ids[t] for t in ref_tokens), dtype=np.int64, count=len(ref_tokens))
    return hyp_arr, ref_arr


def align_words(
    hyp_tokens: Sequence[str], ref_tokens: Sequence[str]
) -> AlignmentCounts:
    """Hit/substitution/deletion/insertion counts of a minimum-edit alignment."""
    n, m = len(ref_tokens), len(hyp_tokens)
    if n == 0 or m == 0:
        return AlignmentCounts(0, 0, n, m)
    hyp_arr, ref_arr = _token_ids(hyp_tokens, ref_tokens)
    # D[i, j] = edit distance between ref[:i] and hyp[:j]
    dist = np.empty((n + 1, m + 1), dtype=np.int64)
    offsets = np.arange(m + 1, dtype=np.int64)
    dist[0] = offsets
    y = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        y[0] = i
        np.minimum(
            dist[i - 1, :-1] + (hyp_arr != ref_arr[i - 1]),
            dist[i - 1, 1:] + 1,
            out=y[1:],
        )
        dist[i] = np.minimum.accumulate(y - offsets) + offsets

    hits = substitutions = deletions = insertions = 0
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i, j]
        if (
            i > 0
            and j > 0
            and ref_arr[i - 1] == hyp_arr[j - 1]
            and here == dist[i - 1, j - 1]
        ):
            hits += 1
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and here == dist[i - 1, j - 1] + 1:
            substitutions += 1
            i -= 1
            j -= 1
        elif i > 0 and here == dist[i - 1, j] + 1:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            j -= 1
    return AlignmentCounts(hits, substitutions, deletions, insertions)


def wer(counts: AlignmentCounts) -> float:
    ref_len = counts.hits + counts.substitutions + counts.deletions
    if ref_len == 0:
        raise DegenerateInput("undefined WER: empty reference")
    return (counts.substitutions + counts.deletions + counts.insertions) / ref_len


def mer(counts: AlignmentCounts) -> float:
    total = (
        counts.hits + counts.substitutions + counts.deletions + counts.insertions
    )
    if total == 0:
        raise DegenerateInput("undefined MER: no tokens on either side")
    return (counts.substitutions + counts.deletions + counts.insertions) / total


def wil(counts: AlignmentCounts) -> float:
    ref_len = counts.hits + counts.substitutions + counts.deletions
    hyp_len = counts.hits + counts.substitutions + counts.insertions
    if ref_len == 0 or hyp_len == 0:
        raise DegenerateInput("undefined WIL: empty reference or hypothesis")
    return 1.0 - counts.hits**2 / (ref_len * hyp_len)
