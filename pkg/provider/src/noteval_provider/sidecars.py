"""Sidecar file emission.

One file per (note, slot) under `<out>/<slot>/<note_id>.tsv`:

    #kind=<kind> dim=<d>
    <unit>\t<d space-separated floats, 5 decimals>
    ...
    #idf                      (contextual kind only)
    <token>\t<idf, 8 decimals>

The sentence kind fills two slot directories (sentence_use and
sentence_skipthought) whose vectors differ only by hashing salt.  Writes
are per-file atomic: content lands in a temp file in the target
directory and is renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

# slot directory -> kind recorded in the header
SLOT_KINDS = {
    "static_word": "static_word",
    "contextual_token": "contextual_token",
    "sentence_use": "sentence",
    "sentence_skipthought": "sentence",
}
KINDS = ("static_word", "contextual_token", "sentence")


def slots_for_kinds(kinds: Sequence[str]) -> list[str]:
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown sidecar kind {kind!r}")
    return [slot for slot, kind in SLOT_KINDS.items() if kind in kinds]


def render_sidecar(
    kind: str,
    dim: int,
    units: Sequence[str],
    vectors: np.ndarray,
    idf: Mapping[str, float] | None = None,
) -> str:
    parts = [f"#kind={kind} dim={dim}\n"]
    for unit, vec in zip(units, vectors):
        values = " ".join(f"{x:.5f}" for x in vec)
        parts.append(f"{unit}\t{values}\n")
    if idf is not None:
        parts.append("#idf\n")
        for token in sorted(idf):
            parts.append(f"{token}\t{idf[token]:.8f}\n")
    return "".join(parts)


def atomic_write_text(path: Path, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_manifest(out_root: Path, models: Mapping[str, str], files: int) -> None:
    """Record which model produced each kind, so outputs are attributable."""
    doc = {
        "format": "embedding-sidecar/1",
        "models": dict(sorted(models.items())),
        "files": files,
    }
    atomic_write_text(out_root / "manifest.json", json.dumps(doc, indent=2) + "\n")
