"""Hash-derived embedding backend.

Implements the documented deterministic scheme: every vector is a pure
function of the token or sentence string, namely sha256 digests of
"<salt>:<unit>#<block>" keys mapped to float64 in [-1, 1).  Because the
scheme is fully specified, files written here are byte-identical to any
other conforming generator run on the same text.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .textrules import sentence_segments, tokenize

STATIC_DIM = 24
CONTEXT_DIM = 24
SENTENCE_DIM = 16
NEIGHBOR_WEIGHT = 0.3
BOUNDARY = "\x00"

_CACHE: dict[tuple[str, int], np.ndarray] = {}


def hash_vector(key: str, dim: int) -> np.ndarray:
    """dim floats in [-1, 1) from sha256 of "<key>#<block>" digests."""
    cached = _CACHE.get((key, dim))
    if cached is not None:
        return cached
    out = np.empty(dim, dtype=np.float64)
    filled = 0
    block = 0
    while filled < dim:
        digest = hashlib.sha256(f"{key}#{block}".encode("utf-8")).digest()
        words = np.frombuffer(digest, dtype="<u2")
        take = min(dim - filled, len(words))
        out[filled : filled + take] = words[:take].astype(np.float64)
        filled += take
        block += 1
    out = out / 32768.0 - 1.0
    out.setflags(write=False)
    _CACHE[(key, dim)] = out
    return out


def static_entries(text: str) -> tuple[list[str], np.ndarray]:
    """One vector per distinct token, first-occurrence order."""
    seen: list[str] = []
    for token in tokenize(text):
        if token not in seen:
            seen.append(token)
    if not seen:
        return [], np.empty((0, STATIC_DIM))
    return seen, np.vstack([hash_vector(f"word:{t}", STATIC_DIM) for t in seen])


def contextual_entries(text: str) -> tuple[list[str], np.ndarray]:
    """One vector per token occurrence, blended with both neighbours."""
    tokens = tokenize(text)
    rows = np.empty((len(tokens), CONTEXT_DIM))
    for i, token in enumerate(tokens):
        left = tokens[i - 1] if i > 0 else BOUNDARY
        right = tokens[i + 1] if i + 1 < len(tokens) else BOUNDARY
        rows[i] = (
            hash_vector(f"ctx:{token}", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector(f"left:{left}", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector(f"right:{right}", CONTEXT_DIM)
        )
    return tokens, rows


def sentence_entry(text: str, salt: str) -> np.ndarray:
    """Pooled note vector: mean of per-sentence hash vectors."""
    segments = sentence_segments(text) or [text]
    pooled = np.mean(
        [hash_vector(f"{salt}:{s}", SENTENCE_DIM) for s in segments], axis=0
    )
    return pooled.reshape(1, SENTENCE_DIM)
