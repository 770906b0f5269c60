"""Embedding backends.

A backend turns note text into (units, vectors) for one sidecar kind.
Two families:

- HashBackend: the deterministic stub, vectors derived from sha256 of
  the unit strings.  No model files, fully offline, reproducible.
- TransformerBackend: real models via transformers/torch.  Loading
  happens eagerly in the constructor so a bad model identifier fails
  before any sidecar is written.

In tokenizer-compatibility mode (the default) contextual units are the
core tokenizer's tokens; subword pieces are mean-pooled per token so the
emitted sequence lines up one-to-one with what the metrics expect.
"""

from __future__ import annotations

import numpy as np

from . import stub
from .textrules import sentence_segments, tokenize

SENTENCE_SALTS = {"sentence_use": "use", "sentence_skipthought": "skip"}


class BackendError(RuntimeError):
    """Model could not be resolved or loaded."""


class HashBackend:
    """Stub backend: hash-derived vectors, one instance serves all kinds."""

    model_id = "hash-sha256-v1"

    dimensions = {
        "static_word": stub.STATIC_DIM,
        "contextual_token": stub.CONTEXT_DIM,
        "sentence": stub.SENTENCE_DIM,
    }

    def units(self, text: str) -> list[str]:
        return tokenize(text)

    def static(self, text: str) -> tuple[list[str], np.ndarray]:
        return stub.static_entries(text)

    def contextual(self, text: str) -> tuple[list[str], np.ndarray]:
        return stub.contextual_entries(text)

    def sentence(self, text: str, slot: str) -> tuple[list[str], np.ndarray]:
        return ["note"], stub.sentence_entry(text, SENTENCE_SALTS[slot])


class TransformerBackend:
    """Hidden-state vectors from a pretrained masked LM checkpoint."""

    def __init__(self, model_id: str, core_tokens: bool = True):
        self.model_id = model_id
        self.core_tokens = core_tokens
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise BackendError(
                f"model {model_id!r} needs the [neural] extra (torch, transformers)"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModel.from_pretrained(model_id)
        except Exception as exc:  # load failures vary by hub/cache state
            raise BackendError(f"cannot load model {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        dim = int(self._model.config.hidden_size)
        self.dimensions = {
            "static_word": dim,
            "contextual_token": dim,
            "sentence": dim,
        }

    def units(self, text: str) -> list[str]:
        if self.core_tokens:
            return tokenize(text)
        return self._tokenizer.tokenize(text)

    def _encode_units(self, units: list[str]) -> np.ndarray:
        """One pooled hidden-state row per unit."""
        if not units:
            return np.empty((0, self.dimensions["contextual_token"]))
        enc = self._tokenizer(
            units, is_split_into_words=True, return_tensors="pt", truncation=True
        )
        with self._torch.no_grad():
            hidden = self._model(**enc).last_hidden_state[0]
        rows = np.zeros((len(units), hidden.shape[-1]))
        counts = np.zeros(len(units))
        for pos, word in enumerate(enc.word_ids(0)):
            if word is None:
                continue
            rows[word] += hidden[pos].numpy()
            counts[word] += 1
        counts[counts == 0] = 1.0
        return rows / counts[:, None]

    def static(self, text: str) -> tuple[list[str], np.ndarray]:
        # context-free: each distinct token encoded on its own
        seen: list[str] = []
        for token in self.units(text):
            if token not in seen:
                seen.append(token)
        if not seen:
            return [], np.empty((0, self.dimensions["static_word"]))
        return seen, np.vstack([self._encode_units([t]) for t in seen])

    def contextual(self, text: str) -> tuple[list[str], np.ndarray]:
        units = self.units(text)
        return units, self._encode_units(units)

    def sentence(self, text: str, slot: str) -> tuple[list[str], np.ndarray]:
        segments = sentence_segments(text) or [text]
        pooled = np.mean(
            [self._encode_units(self.units(s) or [s]).mean(axis=0) for s in segments],
            axis=0,
        )
        return ["note"], pooled.reshape(1, -1)


def load_backends(
    kinds: list[str], models: dict[str, str], use_stub: bool, core_tokens: bool
) -> dict[str, HashBackend | TransformerBackend]:
    """Resolve every requested kind's backend before anything is written."""
    backends: dict[str, HashBackend | TransformerBackend] = {}
    shared_hash = HashBackend()
    loaded: dict[str, TransformerBackend] = {}
    for kind in kinds:
        if use_stub:
            backends[kind] = shared_hash
            continue
        model_id = models[kind]
        if model_id not in loaded:
            loaded[model_id] = TransformerBackend(model_id, core_tokens)
        backends[kind] = loaded[model_id]
    return backends
