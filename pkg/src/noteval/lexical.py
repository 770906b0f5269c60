"""Text-overlap metrics over shared-tokenizer token sequences.

ROUGE-n (clipped n-gram overlap), ROUGE-L (longest common subsequence),
BLEU (corpus-of-one, add-epsilon smoothing), chrF (character n-gram F2),
and METEOR (exact-then-stem alignment, no synonym tables).

All functions are pure; all scores live in [0, 1].
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .porter import stem

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9  # recall weight in Fmean
METEOR_BETA = 3.0  # penalty exponent
METEOR_GAMMA = 0.5  # penalty weight
CHRF_MAX_ORDER = 6
CHRF_BETA = 2.0


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PRF":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        f1 = 2 * precision * recall / (precision + recall)
        return cls(precision, recall, f1)


_ZERO_PRF = PRF(0.0, 0.0, 0.0)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
    )


def rouge_n(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], n: int) -> PRF:
    """Clipped n-gram multiset overlap, n in 1..4 for the standard rows."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    hyp_counts = ngram_counts(hyp_tokens, n)
    ref_counts = ngram_counts(ref_tokens, n)
    if not hyp_counts or not ref_counts:
        return _ZERO_PRF
    overlap = sum((hyp_counts & ref_counts).values())
    precision = overlap / sum(hyp_counts.values())
    recall = overlap / sum(ref_counts.values())
    return PRF.from_pr(precision, recall)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length.

    Uses the match-position reduction to longest increasing subsequence,
    which is near-linear for note-sized inputs with modest repetition.
    """
    positions: dict[str, list[int]] = {}
    for j, token in enumerate(b):
        positions.setdefault(token, []).append(j)
    tails: list[int] = []
    for token in a:
        pos = positions.get(token)
        if not pos:
            continue
        # Descending order so one a-token extends the subsequence at most once.
        for j in reversed(pos):
            k = bisect_left(tails, j)
            if k == len(tails):
                tails.append(j)
            else:
                tails[k] = j
    return len(tails)


def rouge_l(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> PRF:
    if not hyp_tokens or not ref_tokens:
        return _ZERO_PRF
    lcs = lcs_length(hyp_tokens, ref_tokens)
    return PRF.from_pr(lcs / len(hyp_tokens), lcs / len(ref_tokens))


def bleu(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    """Geometric mean of clipped 1..4-gram precisions times brevity penalty.

    The whole note is one segment. Zero precisions (including orders the
    hypothesis is too short to produce) are floored at BLEU_EPSILON so
    short notes never collapse the geometric mean to a hard zero.
    """
    if not hyp_tokens:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        hyp_counts = ngram_counts(hyp_tokens, n)
        ref_counts = ngram_counts(ref_tokens, n)
        total = sum(hyp_counts.values())
        overlap = sum((hyp_counts & ref_counts).values())
        precision = overlap / total if total else 0.0
        log_sum += math.log(max(precision, BLEU_EPSILON)) / 4.0
    brevity = 1.0
    if len(hyp_tokens) < len(ref_tokens):
        brevity = math.exp(1.0 - len(ref_tokens) / len(hyp_tokens))
    return brevity * math.exp(log_sum)


_WS_RUN_RE = re.compile(r"\s+")


def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def chrf(hyp: str, ref: str) -> float:
    """Character n-gram F-beta, beta=2, averaged over orders 1..6.

    Both strings are lowercased with whitespace runs collapsed to single
    spaces. Orders where neither string has n-grams are skipped; orders
    where exactly one side has none score zero.
    """
    hyp_s = _WS_RUN_RE.sub(" ", hyp.lower()).strip()
    ref_s = _WS_RUN_RE.sub(" ", ref.lower()).strip()
    beta_sq = CHRF_BETA * CHRF_BETA
    total = 0.0
    orders = 0
    for n in range(1, CHRF_MAX_ORDER + 1):
        hyp_counts = _char_ngrams(hyp_s, n)
        ref_counts = _char_ngrams(ref_s, n)
        if not hyp_counts and not ref_counts:
            continue
        orders += 1
        if not hyp_counts or not ref_counts:
            continue
        overlap = sum((hyp_counts & ref_counts).values())
        precision = overlap / sum(hyp_counts.values())
        recall = overlap / sum(ref_counts.values())
        if precision + recall == 0:
            continue
        total += (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
    if orders == 0:
        return 1.0  # two empty strings are identical
    return total / orders


def _stage_matches(
    hyp_items: list[tuple[int, str]],
    ref_items: list[tuple[int, str]],
    last_ref: int,
) -> list[tuple[int, int]]:
    """Greedy left-to-right pairing of equal keys, preferring the reference
    position that continues the current chunk, else the smallest available."""
    available: dict[str, list[int]] = {}
    for pos, key in ref_items:
        available.setdefault(key, []).append(pos)
    for positions in available.values():
        positions.sort()
    pairs: list[tuple[int, int]] = []
    for hyp_pos, key in hyp_items:
        positions = available.get(key)
        if not positions:
            continue
        want = last_ref + 1
        k = bisect_left(positions, want)
        if k < len(positions) and positions[k] == want:
            ref_pos = positions.pop(k)
        else:
            ref_pos = positions.pop(0)
        pairs.append((hyp_pos, ref_pos))
        last_ref = ref_pos
    return pairs


def meteor(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    """Exact-then-stem unigram alignment with a fragmentation penalty.

    Fmean weights recall at METEOR_ALPHA; the penalty is
    gamma * (chunks / matches) ** beta. No synonym or paraphrase stage.
    """
    if not hyp_tokens or not ref_tokens:
        return 0.0
    hyp_items = list(enumerate(hyp_tokens))
    ref_items = list(enumerate(ref_tokens))

    exact = _stage_matches(hyp_items, ref_items, -1)
    matched_hyp = {h for h, _ in exact}
    matched_ref = {r for _, r in exact}
    rest_hyp = [(p, stem(t)) for p, t in hyp_items if p not in matched_hyp]
    rest_ref = [(p, stem(t)) for p, t in ref_items if p not in matched_ref]
    last_ref = exact[-1][1] if exact else -1
    stemmed = _stage_matches(rest_hyp, rest_ref, last_ref)

    pairs = sorted(exact + stemmed)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (h0, r0), (h1, r1) in zip(pairs, pairs[1:]):
        if h1 != h0 + 1 or r1 != r0 + 1:
            chunks += 1
    precision = m / len(hyp_tokens)
    recall = m / len(ref_tokens)
    fmean = (
        precision
        * recall
        / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    )
    penalty = METEOR_GAMMA * (chunks / m) ** METEOR_BETA
    return fmean * (1 - penalty)
