"""Deterministic builder for the packaged study corpus.

The repository ships a 57-consultation corpus (data/reproduction) whose
judgement statistics and metric correlations match the reference values
asserted by the acceptance suite: group means, agreement coefficients,
criteria correlations and the lexical/edit-distance correlation cells.
Real consultations cannot be redistributed, so the corpus is synthetic:
notes are built from pseudoword fact sentences with planted entity
mentions, errors and omissions, and evaluator behaviour (counts, span
selections, post-edit times, note restyling) is encoded in a parameter
file tuned offline by tools/calibrate_study.py.  This module only turns
that parameter file back into ConsultationRecords, byte-stably, and can
verify a corpus against the reference statistics.

Corpus shape per consultation: 1 human note, 4 generated notes (sources
sampled from 10 model ids), 5 evaluator notes, 25 post-edited notes (5
judged notes x 5 evaluators) and 25 judgements.

The acceptance tests honour the NOTEVAL_CORPUS environment variable, so
they can be pointed at a different corpus root (for example the actual
study data, where licensing permits) without touching the code.
"""

from __future__ import annotations

import argparse
import gzip
import json
import sys
from dataclasses import dataclass
from hashlib import sha256
from importlib import resources
from pathlib import Path

from .corpus import (
    ConsultationRecord,
    ErrorSpan,
    JudgementRecord,
    NoteVersion,
    Turn,
    save_corpus,
)
from .facts import MiniOntology, default_ontology, extract_mentions
from .fixtures import EVALUATORS

N_CONSULTATIONS = 57
SLOTS = ("human", "gen1", "gen2", "gen3", "gen4")
MODEL_IDS = tuple(f"model-{i:02d}" for i in range(1, 11))
PARAMS_RESOURCE = "data/study_params.json.gz"

_SYLLABLES = tuple(c + v for c in "bdfgklmnprstvz" for v in "aeiou")
_FNV_STEP = 0x100000001B3

_CLINICIAN_PROMPTS = (
    "Tell me more about that.",
    "Anything else you have noticed?",
    "How long has that been going on?",
    "And apart from that?",
)

_INCORRECT_TAGS = (
    "hallucination",
    "incorrect-statement",
    "misleading",
    "symptom-as-fact",
    "contradiction",
)
_OMISSION_TAGS = ("omission-generic", "omission-of-negative")


def _h64(key: str) -> int:
    return int.from_bytes(sha256(key.encode("utf-8")).digest()[:8], "big")


class WordBank:
    """Deterministic pseudoword per key, screened against the concept
    dictionary so no synthetic token reads as an entity mention."""

    def __init__(self, onto: MiniOntology | None = None):
        self.onto = onto if onto is not None else default_ontology()
        self._cache: dict[tuple[str, int], str] = {}

    def _candidate(self, h: int, syllables: int) -> str:
        parts = []
        for _ in range(syllables):
            h, idx = divmod(h, len(_SYLLABLES))
            parts.append(_SYLLABLES[idx])
        return "".join(parts)

    def word(self, key: str, syllables: int = 3) -> str:
        cached = self._cache.get((key, syllables))
        if cached is None:
            h = _h64(key)
            for attempt in range(64):
                cand = self._candidate(h + attempt * _FNV_STEP, syllables)
                if not extract_mentions(cand, self.onto):
                    cached = cand
                    break
            else:  # pragma: no cover - syllable space is effectively clean
                raise RuntimeError(f"no usable pseudoword for key {key!r}")
            self._cache[(key, syllables)] = cached
        return cached


def _sentence(tokens: list[str]) -> str:
    head = tokens[0][:1].upper() + tokens[0][1:]
    return " ".join([head, *tokens[1:]]) + "."


@dataclass(frozen=True)
class FactSpec:
    entity: str | None  # ontology entity id planted in the rendering
    length: int  # pseudoword count of the base rendering
    extra: bool  # covered in the transcript but absent from every note

    @classmethod
    def from_json(cls, doc: list) -> "FactSpec":
        return cls(entity=doc[0], length=int(doc[1]), extra=bool(doc[2]))


def load_params(path: str | Path | None = None) -> dict:
    """Parameter file from an explicit path or the packaged default."""
    if path is not None:
        raw = Path(path).read_bytes()
    else:
        ref = resources.files("noteval").joinpath(PARAMS_RESOURCE)
        raw = ref.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return json.loads(raw.decode("utf-8"))


class _ConsultationBuilder:
    """Expands one consultation's parameter block into a record.

    Generated and edited notes are assembled as labelled sentence lists
    (fact/error/filler/duplicate) so that judgement spans and post-edits
    can reference individual planted items.
    """

    def __init__(self, bank: WordBank, seed: int, block: dict):
        self.bank = bank
        self.seed = seed
        self.block = block
        self.cid = block["cid"]
        self.facts = [FactSpec.from_json(d) for d in block["facts"]]
        self.core_ids = [i for i, f in enumerate(self.facts) if not f.extra]
        self.extra_ids = [i for i, f in enumerate(self.facts) if f.extra]
        self._base_cache: dict[int, str] = {}

    def _h(self, *parts) -> int:
        return _h64(":".join([str(self.seed), self.cid, *map(str, parts)]))

    def _word(self, tag: str, syllables: int = 3) -> str:
        return self.bank.word(f"{self.seed}:{self.cid}:{tag}", syllables)

    def _shared_word(self, idx: int) -> str:
        return self.bank.word(f"{self.seed}:shared:{idx}", 2)

    def _entity_tokens(self, entity_id: str) -> list[str]:
        canonical = self.bank.onto.entries[entity_id][0]
        return canonical.split()

    def _render(self, fid: int, replace: dict[int, str] | None = None) -> str:
        """Fact sentence; `replace` swaps content-slot k for a literal word."""
        spec = self.facts[fid]
        words = []
        for k in range(spec.length):
            if replace and k in replace:
                words.append(replace[k])
            else:
                words.append(self._word(f"f{fid}.{k}"))
        if spec.entity is not None:
            at = 1 + self._h("entpos", fid) % max(1, len(words))
            words[at:at] = self._entity_tokens(spec.entity)
        return _sentence(words)

    def base_fact(self, fid: int) -> str:
        if fid not in self._base_cache:
            self._base_cache[fid] = self._render(fid)
        return self._base_cache[fid]

    # --- note texts -------------------------------------------------

    def human_sentences(self) -> list[tuple[str, str]]:
        return [(f"c{fid}", self.base_fact(fid)) for fid in self.core_ids]

    def _para_positions(self, fid: int, n: int, scatter: bool) -> list[int]:
        length = self.facts[fid].length
        n = min(n, length)
        if not scatter or n <= 1:
            return list(range(n))
        return sorted({round(i * (length - 1) / (n - 1)) for i in range(n)})

    def _variant(self, word: str, kind: str, salt: str) -> str:
        if kind == "S":  # same Porter stem, different surface
            return word + ("s", "ed", "ing")[_h64(salt) % 3]
        if kind == "P":  # shared character prefix, different tail
            tail = _SYLLABLES[_h64(salt) % len(_SYLLABLES)]
            cand = word[: max(3, len(word) - 2)] + tail
            return cand if cand != word else cand + "na"
        return self.bank.word(salt, 3)  # unrelated replacement

    def _para_render(self, slot: int, fid: int, plan: list) -> str:
        n_x, n_s, n_p, scatter = plan
        kinds = ["X"] * n_x + ["S"] * n_s + ["P"] * n_p
        positions = self._para_positions(fid, len(kinds), bool(scatter))
        replace: dict[int, str] = {}
        for k, kind in zip(positions, kinds):
            base = self._word(f"f{fid}.{k}")
            salt = f"{self.seed}:{self.cid}:g{slot}:para:{fid}:{k}"
            replace[k] = self._variant(base, kind, salt)
        return self._render(fid, replace)

    def gen_sentences(self, slot: int) -> list[tuple[str, str]]:
        plan = self.block["gen"][slot - 1]
        dropped = set(plan["drop"])
        para = {int(k): v for k, v in plan.get("para", {}).items()}
        wl = int(plan.get("wl", 3))
        out: list[tuple[str, str]] = []
        for fid in self.core_ids:
            if fid in dropped:
                continue
            if fid in para:
                out.append((f"c{fid}", self._para_render(slot, fid, para[fid])))
            else:
                out.append((f"c{fid}", self.base_fact(fid)))
        for i, (entity, length) in enumerate(plan["err"]):
            words = [
                self.bank.word(f"{self.seed}:{self.cid}:g{slot}:err{i}.{k}", wl)
                for k in range(int(length))
            ]
            if entity is not None:
                words[1:1] = self._entity_tokens(entity)
            at = self._h("errpos", slot, i) % (len(out) + 1)
            out.insert(at, (f"e{i}", _sentence(words)))
        for i, (shared_n, length) in enumerate(plan["fil"]):
            words = []
            for k in range(int(length)):
                if k < int(shared_n):
                    pick = self._h("filsh", slot, i, k) % 40
                    words.append(self._shared_word(pick))
                else:
                    words.append(
                        self.bank.word(
                            f"{self.seed}:{self.cid}:g{slot}:fil{i}.{k}", wl
                        )
                    )
            at = self._h("filpos", slot, i) % (len(out) + 1)
            out.insert(at, (f"f{i}", _sentence(words)))
        for i, pos in enumerate(plan.get("dup", [])):
            src = out[pos % len(out)]
            out.insert((pos % len(out)) + 1, (f"d{i}", src[1]))
        for pos in plan.get("swaps", []):
            p = pos % (len(out) - 1)
            out[p], out[p + 1] = out[p + 1], out[p]
        return out

    def eval_sentences(self, e: int) -> list[tuple[str, str]]:
        plan = self.block["eval"][e]
        exact = set(plan.get("exact", []))
        keep = {int(k): v for k, v in plan.get("keep", {}).items()}
        out: list[tuple[str, str]] = []
        for b in range(int(plan.get("boiler", 0))):
            words = [
                self.bank.word(f"{self.seed}:e{e}:boiler:{b}.{k}", 3)
                for k in range(4 + self._h("boillen", e, b) % 3)
            ]
            out.append((f"b{b}", _sentence(words)))
        for fid in plan["facts"]:
            if fid in exact:
                out.append((f"c{fid}", self.base_fact(fid)))
                continue
            spec = self.facts[fid]
            k_keep = min(keep.get(fid, 2), spec.length)
            kept = [self._word(f"f{fid}.{k}") for k in range(k_keep)]
            styled = [
                self.bank.word(f"{self.seed}:{self.cid}:e{e}:x{fid}.{k}", 2)
                for k in range(max(1, spec.length - k_keep))
            ]
            words = styled[:1] + kept + styled[1:]
            if spec.entity is not None:
                at = 1 + self._h("evalent", e, fid) % max(1, len(words))
                words[at:at] = self._entity_tokens(spec.entity)
            out.append((f"c{fid}", _sentence(words)))
        return out

    def edited_sentences(self, slot: int, e: int) -> list[tuple[str, str]]:
        plan = self.block["edited"][f"{slot}:{e}"]
        judge = self.block["judge"][f"{slot}:{e}"]
        base = (
            self.human_sentences() if slot == 0 else self.gen_sentences(slot)
        )
        actions = plan.get("fix", {})
        out: list[tuple[str, str]] = []
        for label, text in base:
            if label in actions:
                if actions[label] == "del":
                    continue
                n_tok = len(text.split())
                words = [
                    self.bank.word(
                        f"{self.seed}:{self.cid}:s{slot}:e{e}:fix:{label}.{k}", 3
                    )
                    for k in range(n_tok)
                ]
                out.append((label, _sentence(words)))
            else:
                out.append((label, text))
        rtweak = {int(k): v for k, v in plan.get("rtweak", {}).items()}
        for fid in judge.get("omi", []):
            t = rtweak.get(fid, 0)
            replace = {}
            for k in range(min(t, self.facts[fid].length)):
                replace[k] = self.bank.word(
                    f"{self.seed}:{self.cid}:s{slot}:e{e}:rest:{fid}.{k}", 3
                )
            text = self._render(fid, replace)
            at = len(out)
            for i, (label, _) in enumerate(out):
                if label.startswith("c") and int(label[1:]) > fid:
                    at = i
                    break
            out.insert(at, (f"c{fid}", text))
        # final pass: a post-edit always touches at least one kept token
        n_tweaks = max(1, int(plan.get("tweaks", 1)))
        kept_pos = [i for i, (label, _) in enumerate(out) if label[0] == "c"]
        for k in range(n_tweaks):
            if not kept_pos:
                break
            i = kept_pos[self._h("tweakat", slot, e, k) % len(kept_pos)]
            label, text = out[i]
            words = text[:-1].split(" ")
            j = self._h("tweakslot", slot, e, k) % len(words)
            words[j] = self.bank.word(
                f"{self.seed}:{self.cid}:s{slot}:e{e}:tweak{k}", 3
            )
            out[i] = (label, _sentence([w.lower() for w in words]))
        return out

    # --- spans and judgements ----------------------------------------

    def _note_text(self, slot: int) -> dict[str, str]:
        rows = self.human_sentences() if slot == 0 else self.gen_sentences(slot)
        return dict(rows)

    def _incorrect_spans(self, slot: int, e: int) -> tuple[ErrorSpan, ...]:
        judge = self.block["judge"][f"{slot}:{e}"]
        by_label = self._note_text(slot)
        extents = judge.get("ext", {})
        spans = []
        for item in judge.get("inc", []):
            text = by_label[item]
            extent = int(extents.get(item, -1))
            if extent > 0:
                words = text[:-1].split(" ")
                text = " ".join(words[:extent])
            critical = self._h("crit", slot, e, item) % 10 == 0
            tag = _INCORRECT_TAGS[self._h("itag", slot, item) % len(_INCORRECT_TAGS)]
            spans.append(
                ErrorSpan(text, "incorrect", critical=critical, extras={"tag": tag})
            )
        return tuple(spans)

    def _omission_spans(self, slot: int, e: int) -> tuple[ErrorSpan, ...]:
        judge = self.block["judge"][f"{slot}:{e}"]
        ocore = {int(k): v for k, v in judge.get("ocore", {}).items()}
        oextra = {int(k): v for k, v in judge.get("oextra", {}).items()}
        spans = []
        for fid in judge.get("omi", []):
            spec = self.facts[fid]
            k_core = min(ocore.get(fid, 2), spec.length)
            words = [self._word(f"f{fid}.{k}") for k in range(k_core)]
            if spec.entity is not None:
                words.extend(self._entity_tokens(spec.entity))
            for u in range(oextra.get(fid, 1)):
                words.append(
                    self.bank.word(f"{self.seed}:e{e}:omiword:{u}", 2)
                )
            critical = self._h("ocrit", slot, e, fid) % 14 == 0
            tag = _OMISSION_TAGS[self._h("otag", slot, fid) % len(_OMISSION_TAGS)]
            spans.append(
                ErrorSpan(
                    " ".join(words), "omission", critical=critical,
                    extras={"tag": tag},
                )
            )
        return tuple(spans)

    # --- assembly -----------------------------------------------------

    def build(self) -> ConsultationRecord:
        cid = self.cid
        turns = [Turn("clinician", "What brings you in today?")]
        for i, fid in enumerate(range(len(self.facts))):
            if i and i % 4 == 0:
                prompt = _CLINICIAN_PROMPTS[self._h("prompt", i) % 4]
                turns.append(Turn("clinician", prompt))
            turns.append(Turn("patient", self.base_fact(fid)))

        notes: list[NoteVersion] = [
            NoteVersion(
                note_id=f"{cid}-human",
                role="human",
                source_id="consulting-clinician",
                text="\n".join(t for _, t in self.human_sentences()),
            )
        ]
        for slot in range(1, 5):
            notes.append(
                NoteVersion(
                    note_id=f"{cid}-gen{slot}",
                    role="generated",
                    source_id=self.block["models"][slot - 1],
                    text="\n".join(t for _, t in self.gen_sentences(slot)),
                )
            )
        for e, evaluator in enumerate(EVALUATORS):
            notes.append(
                NoteVersion(
                    note_id=f"{cid}-eval-{evaluator}",
                    role="eval",
                    source_id=evaluator,
                    text="\n".join(t for _, t in self.eval_sentences(e)),
                )
            )
        for slot, slot_name in enumerate(SLOTS):
            parent = f"{cid}-human" if slot == 0 else f"{cid}-gen{slot}"
            for e, evaluator in enumerate(EVALUATORS):
                notes.append(
                    NoteVersion(
                        note_id=f"{cid}-edit-{slot_name}-{evaluator}",
                        role="edited",
                        source_id=evaluator,
                        parent_note_id=parent,
                        text="\n".join(
                            t for _, t in self.edited_sentences(slot, e)
                        ),
                    )
                )

        judgements: list[JudgementRecord] = []
        for slot in range(5):
            note_id = f"{cid}-human" if slot == 0 else f"{cid}-gen{slot}"
            for e, evaluator in enumerate(EVALUATORS):
                judge = self.block["judge"][f"{slot}:{e}"]
                inc = self._incorrect_spans(slot, e)
                omi = self._omission_spans(slot, e)
                tags = frozenset(
                    s.extras["tag"] for s in (*inc, *omi) if "tag" in s.extras
                )
                judgements.append(
                    JudgementRecord(
                        evaluator_id=evaluator,
                        note_id=note_id,
                        post_edit_seconds=float(judge["time"]),
                        incorrect_spans=inc,
                        omission_spans=omi,
                        comments="",
                        taxonomy_tags=tags or frozenset({"good-behaviour"}),
                    )
                )

        return ConsultationRecord(
            consultation_id=cid,
            transcript=tuple(turns),
            notes=tuple(notes),
            judgements=tuple(judgements),
        )


def build_corpus(
    params: dict, bank: WordBank | None = None
) -> list[ConsultationRecord]:
    """All consultation records described by a parameter document."""
    bank = bank if bank is not None else WordBank()
    seed = int(params["seed"])
    return [
        _ConsultationBuilder(bank, seed, block).build()
        for block in params["consultations"]
    ]


def _cmd_rebuild(args: argparse.Namespace) -> int:
    params = load_params(args.params)
    records = build_corpus(params)
    save_corpus(records, Path(args.out))
    print(f"wrote {len(records)} consultations to {args.out}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from . import refstats

    failures = refstats.run(
        Path(args.corpus),
        sidecar_root=Path(args.sidecars) if args.sidecars else None,
        out=sys.stdout,
    )
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="noteval-study",
        description="Rebuild or verify the packaged study corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_rebuild = sub.add_parser("rebuild", help="regenerate corpus from parameters")
    p_rebuild.add_argument("--params", help="parameter file (default: packaged)")
    p_rebuild.add_argument("--out", required=True, help="corpus output directory")
    p_rebuild.set_defaults(func=_cmd_rebuild)
    p_verify = sub.add_parser(
        "verify", help="check a corpus against the reference statistics"
    )
    p_verify.add_argument("--corpus", required=True)
    p_verify.add_argument(
        "--sidecars", help="embedding sidecar root (enables embedding rows)"
    )
    p_verify.set_defaults(func=_cmd_verify)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
