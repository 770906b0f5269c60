"""Task server for the annotation workflow.

Serves consultation bundles (transcript plus the five judged notes in a
blinded, deterministic shuffle), accepts posted judgement documents, and
hosts the UI's static assets.  Judgement writes are idempotent on
(evaluator_id, note_id) and atomic at the file level.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import mimetypes
import os
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urlsplit

from .corpus import (
    TAXONOMY_TAGS,
    ConsultationRecord,
    CorpusError,
    JudgementRecord,
    load_corpus,
    validate_judgement,
)

log = logging.getLogger(__name__)

JUDGED_ROLES = ("human", "generated")


def bundle_seed(consultation_id: str, seed: int = 0) -> int:
    """Stable shuffle seed; hash() is salted per process so use sha256."""
    digest = hashlib.sha256(f"{seed}:{consultation_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_bundle(record: ConsultationRecord, seed: int = 0) -> dict:
    """Blinded task document: notes shuffled, roles withheld."""
    notes = [n for n in record.notes if n.role in JUDGED_ROLES]
    random.Random(bundle_seed(record.consultation_id, seed)).shuffle(notes)
    return {
        "consultation_id": record.consultation_id,
        "transcript": [
            {"speaker": t.speaker, "text": t.text} for t in record.transcript
        ],
        "notes": [{"note_id": n.note_id, "text": n.text} for n in notes],
        "taxonomy_tags": sorted(TAXONOMY_TAGS),
    }


class JudgementStore:
    """Keeps corpus judgement files in sync with posted records."""

    def __init__(self, root: str | Path, records: list[ConsultationRecord]):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._by_cid: dict[str, ConsultationRecord] = {
            rec.consultation_id: rec for rec in records
        }
        self._note_to_cid: dict[str, str] = {
            n.note_id: rec.consultation_id
            for rec in records
            for n in rec.notes
            if n.role in JUDGED_ROLES
        }

    @property
    def consultation_ids(self) -> list[str]:
        return list(self._by_cid)

    def record(self, consultation_id: str) -> ConsultationRecord | None:
        return self._by_cid.get(consultation_id)

    def ingest(self, doc: dict) -> JudgementRecord:
        """Validate and persist one judgement document; returns the record."""
        if not isinstance(doc, dict):
            raise CorpusError("judgement document must be a JSON object")
        judgement = JudgementRecord.from_json(doc)
        cid = self._note_to_cid.get(judgement.note_id)
        if cid is None:
            raise CorpusError(
                f"note_id: {judgement.note_id!r} is not a judged note "
                "of any loaded consultation"
            )
        record = self._by_cid[cid]
        validate_judgement(
            judgement,
            {n.note_id for n in record.notes},
            where=f"judgement for {judgement.note_id}",
        )
        with self._lock:
            record = self._by_cid[cid]
            key = (judgement.evaluator_id, judgement.note_id)
            kept = [
                j
                for j in record.judgements
                if (j.evaluator_id, j.note_id) != key
            ]
            kept.append(judgement)
            updated = dataclasses.replace(record, judgements=tuple(kept))
            self._write_judgements(updated)
            self._by_cid[cid] = updated
        return judgement

    def _write_judgements(self, record: ConsultationRecord) -> None:
        cdir = self.root / record.consultation_id
        cdir.mkdir(parents=True, exist_ok=True)
        target = cdir / "judgements.jsonl"
        tmp = cdir / "judgements.jsonl.tmp"
        payload = "".join(
            json.dumps(j.to_json(), ensure_ascii=False) + "\n"
            for j in record.judgements
        )
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, target)


_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>noteval tasks</title></head>
<body><h1>noteval task server</h1>
<p>No UI assets are configured. Task bundles are available under
<code>/tasks/&lt;consultation_id&gt;</code>.</p></body></html>
"""


class _Handler(BaseHTTPRequestHandler):
    store: JudgementStore
    assets: Path | None
    seed: int

    server_version = "noteval-serve/0.1"

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        log.info("%s %s", self.address_string(), format % args)

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_asset(self, relative: str) -> None:
        if self.assets is None:
            body = _FALLBACK_PAGE.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        base = self.assets.resolve()
        target = (base / relative.lstrip("/")).resolve()
        if base not in target.parents and target != base:
            self._send_json(404, {"error": "not found"})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802
        path = urlsplit(self.path).path
        if path == "/tasks" or path == "/tasks/":
            self._send_json(
                200, {"consultations": self.store.consultation_ids}
            )
            return
        if path.startswith("/tasks/"):
            cid = unquote(path[len("/tasks/") :])
            record = self.store.record(cid)
            if record is None:
                self._send_json(404, {"error": f"unknown consultation {cid!r}"})
                return
            self._send_json(200, build_bundle(record, self.seed))
            return
        self._send_asset("index.html" if path == "/" else path)

    def do_POST(self) -> None:  # noqa: N802
        path = urlsplit(self.path).path
        if path != "/judgements":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            doc = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            self._send_json(400, {"error": f"bad request body: {exc}"})
            return
        try:
            judgement = self.store.ingest(doc)
        except CorpusError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(
            200,
            {
                "stored": {
                    "evaluator_id": judgement.evaluator_id,
                    "note_id": judgement.note_id,
                }
            },
        )


class TaskServer:
    """ThreadingHTTPServer wrapper with a background serve loop."""

    def __init__(
        self,
        corpus_root: str | Path,
        host: str = "127.0.0.1",
        port: int = 0,
        assets: str | Path | None = None,
        seed: int = 0,
        records: list[ConsultationRecord] | None = None,
    ):
        if records is None:
            records = load_corpus(corpus_root)
        self.store = JudgementStore(corpus_root, records)
        handler = type(
            "BoundHandler",
            (_Handler,),
            {
                "store": self.store,
                "assets": Path(assets) if assets else None,
                "seed": seed,
            },
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._httpd.server_address[:2]
        return str(host), int(port)

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, daemon=True
        )
        self._thread.start()
        log.info("serving tasks on http://%s:%d/", *self.address)

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def serve_forever(self) -> None:
        log.info("serving tasks on http://%s:%d/", *self.address)
        try:
            self._httpd.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            self._httpd.server_close()
