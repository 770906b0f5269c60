"""Minimal reader for the corpus layout.

Only what sidecar generation needs: every note's id, role, and text.
Layout: `<root>/<consultation_id>/notes.jsonl`, one JSON note per line
with at least note_id, role, and text fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator


class CorpusError(ValueError):
    """Corpus directory missing or a notes file is malformed."""


@dataclass(frozen=True)
class Note:
    consultation_id: str
    note_id: str
    role: str
    text: str


def iter_notes(root: str | Path) -> Iterator[Note]:
    """All notes under a corpus root, consultation directories sorted.

    A readable root with no consultations yields nothing; only a missing
    root or a malformed record is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a directory: {root}")
    for path in sorted(root.glob("*/notes.jsonl")):
        consultation_id = path.parent.name
        for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                yield Note(
                    consultation_id=consultation_id,
                    note_id=doc["note_id"],
                    role=doc["role"],
                    text=doc["text"],
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad note record: {exc}") from exc
