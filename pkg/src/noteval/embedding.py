"""Embedding-based metrics over precomputed vector sidecars.

No model inference happens here: a separate provider writes one sidecar
file per note and this module only consumes them, which keeps the whole
scoring core deterministic and dependency-light.

Sidecar file format (UTF-8, ASCII floats):

    #kind=<static_word|contextual_token|sentence> dim=<d>
    <unit string>\\t<f1> <f2> ... <fd>
    ...
    #idf                      (optional section)
    <token>\\t<value>
    ...

Directory layout: one subdirectory per slot (static_word,
contextual_token, sentence_use, sentence_skipthought), one file
`<note_id>.tsv` per note inside. The sentence_* slots carry kind
"sentence" headers; a note's pooled vector is the mean of its entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .lexical import PRF
from .transport import TransportPlan, solve_transport

KINDS = ("static_word", "contextual_token", "sentence")
SLOTS = ("static_word", "contextual_token", "sentence_use", "sentence_skipthought")
ROUGE_WE_THRESHOLD = 0.8


class SidecarError(ValueError):
    """Sidecar missing, malformed, or incompatible with the request."""


@dataclass(frozen=True)
class EmbeddingSidecar:
    note_id: str
    kind: str
    dimension: int
    units: tuple[str, ...]
    vectors: np.ndarray  # (len(units), dimension)
    idf: dict[str, float] | None = None


def read_sidecar(path: str | Path) -> EmbeddingSidecar:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#kind="):
        raise SidecarError(f"{path}: missing '#kind=... dim=...' header")
    header = lines[0][1:].split()
    fields = dict(part.split("=", 1) for part in header if "=" in part)
    kind = fields.get("kind", "")
    if kind not in KINDS:
        raise SidecarError(f"{path}: unknown kind {kind!r}")
    try:
        dim = int(fields.get("dim", ""))
    except ValueError:
        raise SidecarError(f"{path}: bad dim in header") from None

    units: list[str] = []
    rows: list[np.ndarray] = []
    idf: dict[str, float] | None = None
    in_idf = False
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        if line.startswith("#"):
            if line.strip() == "#idf":
                in_idf = True
                idf = {}
                continue
            raise SidecarError(f"{path}:{lineno}: unexpected directive {line!r}")
        if "\t" not in line:
            raise SidecarError(f"{path}:{lineno}: expected '<unit>\\t<floats>'")
        unit, _, payload = line.partition("\t")
        if in_idf:
            idf[unit] = float(payload)
            continue
        vec = np.array(payload.split(), dtype=np.float64)
        if vec.size != dim:
            raise SidecarError(
                f"{path}:{lineno}: vector has {vec.size} values, header says {dim}"
            )
        units.append(unit)
        rows.append(vec)
    if kind == "sentence" and not units:
        raise SidecarError(f"{path}: sentence sidecar needs at least one entry")
    vectors = (
        np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float64)
    )
    return EmbeddingSidecar(
        note_id=path.stem, kind=kind, dimension=dim,
        units=tuple(units), vectors=vectors, idf=idf,
    )


def write_sidecar(path: str | Path, sidecar: EmbeddingSidecar) -> None:
    path = Path(path)
    parts = [f"#kind={sidecar.kind} dim={sidecar.dimension}\n"]
    for unit, vec in zip(sidecar.units, sidecar.vectors):
        values = " ".join(f"{x:.5f}" for x in vec)
        parts.append(f"{unit}\t{values}\n")
    if sidecar.idf is not None:
        parts.append("#idf\n")
        for token in sorted(sidecar.idf):
            parts.append(f"{token}\t{sidecar.idf[token]:.8f}\n")
    path.write_text("".join(parts), encoding="utf-8")


class SidecarStore:
    """Per-slot sidecar lookup with caching, rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._cache: dict[tuple[str, str], EmbeddingSidecar] = {}

    def load(self, slot: str, note_id: str) -> EmbeddingSidecar:
        if slot not in SLOTS:
            raise SidecarError(f"unknown sidecar slot {slot!r}")
        key = (slot, note_id)
        if key not in self._cache:
            path = self.root / slot / f"{note_id}.tsv"
            if not path.exists():
                raise SidecarError(
                    f"embedding sidecar required for note {note_id!r} "
                    f"(missing {path})"
                )
            self._cache[key] = read_sidecar(path)
        return self._cache[key]


def compute_idf(reference_token_lists: Iterable[Sequence[str]]) -> dict[str, float]:
    """idf(t) = ln((1+N)/(1+df(t))) with df counted over reference notes."""
    df: dict[str, int] = {}
    n_docs = 0
    for tokens in reference_token_lists:
        n_docs += 1
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    return {
        token: math.log((1 + n_docs) / (1 + count))
        for token, count in df.items()
    }


def _require_compatible(
    hyp: EmbeddingSidecar, ref: EmbeddingSidecar, kind: str
) -> None:
    if hyp.kind != kind or ref.kind != kind:
        raise SidecarError(
            f"expected kind {kind!r}, got {hyp.kind!r} and {ref.kind!r}"
        )
    if hyp.dimension != ref.dimension:
        raise SidecarError(
            f"dimension mismatch: {hyp.note_id} has {hyp.dimension}, "
            f"{ref.note_id} has {ref.dimension}"
        )


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def _require_tokens(sidecar: EmbeddingSidecar, op: str) -> None:
    if len(sidecar.units) == 0:
        raise SidecarError(f"{op}: sidecar for {sidecar.note_id!r} has no entries")


def embedding_average(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> float:
    """Cosine of the mean word vectors."""
    _require_compatible(hyp, ref, "static_word")
    _require_tokens(hyp, "embedding_average")
    _require_tokens(ref, "embedding_average")
    return _cosine(hyp.vectors.mean(axis=0), ref.vectors.mean(axis=0))


def vector_extrema(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> float:
    """Cosine of per-dimension extrema (largest magnitude, sign kept)."""
    _require_compatible(hyp, ref, "static_word")
    _require_tokens(hyp, "vector_extrema")
    _require_tokens(ref, "vector_extrema")

    def extrema(matrix: np.ndarray) -> np.ndarray:
        hi = matrix.max(axis=0)
        lo = matrix.min(axis=0)
        return np.where(np.abs(hi) >= np.abs(lo), hi, lo)

    return _cosine(extrema(hyp.vectors), extrema(ref.vectors))


def greedy_matching(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> float:
    """Mean best-cosine per token, averaged over both directions."""
    _require_compatible(hyp, ref, "static_word")
    _require_tokens(hyp, "greedy_matching")
    _require_tokens(ref, "greedy_matching")
    sims = _unit_rows(hyp.vectors) @ _unit_rows(ref.vectors).T
    return 0.5 * (float(sims.max(axis=1).mean()) + float(sims.max(axis=0).mean()))


def rouge_we(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> PRF:
    """Soft-unigram overlap: one-to-one token pairs with cosine >= threshold,
    assigned greedily by descending weight."""
    _require_compatible(hyp, ref, "static_word")
    _require_tokens(hyp, "rouge_we")
    _require_tokens(ref, "rouge_we")
    sims = _unit_rows(hyp.vectors) @ _unit_rows(ref.vectors).T
    candidates = np.argwhere(sims >= ROUGE_WE_THRESHOLD)
    order = sorted(
        ((float(sims[i, j]), int(i), int(j)) for i, j in candidates),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    used_hyp: set[int] = set()
    used_ref: set[int] = set()
    weight = 0.0
    for sim, i, j in order:
        if i in used_hyp or j in used_ref:
            continue
        used_hyp.add(i)
        used_ref.add(j)
        weight += sim
    return PRF.from_pr(weight / len(hyp.units), weight / len(ref.units))


def _bag_of_types(
    sidecar: EmbeddingSidecar,
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Unique types with occurrence counts and mean occurrence vectors."""
    index: dict[str, int] = {}
    counts: list[int] = []
    sums: list[np.ndarray] = []
    for unit, vec in zip(sidecar.units, sidecar.vectors):
        k = index.get(unit)
        if k is None:
            index[unit] = len(counts)
            counts.append(1)
            sums.append(vec.astype(np.float64, copy=True))
        else:
            counts[k] += 1
            sums[k] += vec
    count_arr = np.array(counts, dtype=np.float64)
    means = np.vstack(sums) / count_arr[:, None]
    return list(index), count_arr, means


def wmd(
    hyp: EmbeddingSidecar, ref: EmbeddingSidecar
) -> tuple[float, TransportPlan | None]:
    """Exact earth-mover distance between uniform bag-of-words marginals
    with Euclidean ground cost.

    Mass shared by a type on both sides stays put at zero cost; because
    Euclidean cost is a true metric this reduction is exact, and it keeps
    the solved instances small when the notes overlap heavily. Identical
    bags return 0.0 with no plan.
    """
    _require_compatible(hyp, ref, "static_word")
    _require_tokens(hyp, "wmd")
    _require_tokens(ref, "wmd")
    hyp_types, hyp_counts, hyp_vecs = _bag_of_types(hyp)
    ref_types, ref_counts, ref_vecs = _bag_of_types(ref)
    p = hyp_counts / hyp_counts.sum()
    q = ref_counts / ref_counts.sum()

    ref_index = {t: k for k, t in enumerate(ref_types)}
    shared = 0.0
    for i, t in enumerate(hyp_types):
        j = ref_index.get(t)
        if j is not None:
            common = min(p[i], q[j])
            p[i] -= common
            q[j] -= common
            shared += common
    residual = 1.0 - shared
    if residual <= 1e-12:
        return 0.0, None
    keep_p = p > 0
    keep_q = q > 0
    src = p[keep_p] / residual
    snk = q[keep_q] / residual
    diff = hyp_vecs[keep_p][:, None, :] - ref_vecs[keep_q][None, :, :]
    costs = np.sqrt((diff * diff).sum(axis=2))
    plan = solve_transport(src, snk, costs)
    return plan.cost * residual, plan


def bertscore(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> PRF:
    """Max-cosine token matching on contextual vectors; plain F1, no idf
    weighting or baseline rescaling."""
    _require_compatible(hyp, ref, "contextual_token")
    _require_tokens(hyp, "bertscore")
    _require_tokens(ref, "bertscore")
    sims = _unit_rows(hyp.vectors) @ _unit_rows(ref.vectors).T
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    return PRF.from_pr(precision, recall)


def _idf_marginal(
    sidecar: EmbeddingSidecar, idf: dict[str, float], op: str
) -> tuple[np.ndarray, np.ndarray]:
    types, counts, means = _bag_of_types(sidecar)
    weights = np.empty(len(types), dtype=np.float64)
    for k, token in enumerate(types):
        if token not in idf:
            raise SidecarError(
                f"{op}: idf map has no entry for token {token!r} "
                f"of note {sidecar.note_id!r}"
            )
        weights[k] = idf[token] * counts[k]
    total = float(weights.sum())
    if total <= 0:
        raise SidecarError(
            f"{op}: idf weights for note {sidecar.note_id!r} sum to zero"
        )
    keep = weights > 0
    return weights[keep] / total, means[keep]


def moverscore(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> float:
    """Transport similarity between idf-weighted token-type distributions.

    Works at type level: each type's vector is the mean of its occurrence
    vectors (a simplification of occurrence-level transport, documented
    here), cost is 1 - cosine, and the result is 1 - transport distance.
    The cost violates the triangle inequality, so no shared-mass
    reduction is applied; instances are solved whole.
    """
    _require_compatible(hyp, ref, "contextual_token")
    _require_tokens(hyp, "moverscore")
    _require_tokens(ref, "moverscore")
    if ref.idf is None and hyp.idf is None:
        raise SidecarError(
            f"moverscore: no idf section in sidecars for "
            f"{hyp.note_id!r} / {ref.note_id!r}"
        )
    # Sidecars carry idf only for their own tokens; merge both sections.
    idf = dict(hyp.idf or {})
    idf.update(ref.idf or {})
    p, hyp_vecs = _idf_marginal(hyp, idf, "moverscore")
    q, ref_vecs = _idf_marginal(ref, idf, "moverscore")
    if (
        hyp_vecs.shape == ref_vecs.shape
        and np.array_equal(hyp_vecs, ref_vecs)
        and np.array_equal(p, q)
    ):
        return 1.0
    costs = 1.0 - _unit_rows(hyp_vecs) @ _unit_rows(ref_vecs).T
    plan = solve_transport(p, q, costs)
    return 1.0 - plan.cost


def sentence_cosine(hyp: EmbeddingSidecar, ref: EmbeddingSidecar) -> float:
    """Cosine of pooled note vectors (mean over entries when several)."""
    _require_compatible(hyp, ref, "sentence")
    return _cosine(hyp.vectors.mean(axis=0), ref.vectors.mean(axis=0))
