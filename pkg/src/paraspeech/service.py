"""Local annotation service.

Hosts the annotation UI's backend: taxonomy (with grammar conformance
vectors), batch assignment, audio bytes, submission intake, and progress.
Submissions are append-only JSONL, fsynced before the acknowledgement goes
out, so a crash after an ack never loses work; at export the latest
submission per (record, annotator) wins.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse
from pydantic import BaseModel

from . import __version__
from .corpus import ManifestRecord
from .taxonomy import Taxonomy
from .transcript import UnbalancedBracket, UnknownTag, parse_transcript, serialize


@dataclass(frozen=True)
class AnnotationSubmission:
    record_id: str
    annotator: str
    transcript: str
    submitted_at: str
    client_version: str = ""

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "annotator": self.annotator,
            "transcript": self.transcript,
            "submitted_at": self.submitted_at,
            "client_version": self.client_version,
        }


class SubmissionBody(BaseModel):
    record_id: str
    annotator: str
    transcript: str
    client_version: str = ""


def conformance_vectors(t: Taxonomy) -> list[dict]:
    """Parse test vectors served with the taxonomy so clients can prove
    their grammar matches the server's before submitting anything."""
    first = t.categories[0]
    vectors: list[dict] = [
        {"input": "", "outcome": "ok", "canonical": ""},
        {"input": "你 好", "outcome": "ok", "canonical": "你好"},
        {"input": f"你好{first.surface}", "outcome": "ok", "canonical": f"你好{first.surface}"},
        {"input": "你好[", "outcome": "unbalanced-bracket"},
        {"input": "你好]", "outcome": "unbalanced-bracket"},
        {"input": "[Zzz-not-a-tag]", "outcome": "unknown-tag"},
    ]
    for cat in t.categories:
        vectors.append({"input": cat.surface, "outcome": "ok", "canonical": cat.surface})
        for alias in cat.aliases:
            vectors.append({"input": alias, "outcome": "ok", "canonical": cat.surface})
    return vectors


def taxonomy_doc(t: Taxonomy) -> dict:
    return {
        "version": t.version,
        "none_surface": t.none_surface,
        "categories": [
            {"id": c.id, "surface": c.surface, "kind": c.kind, "aliases": list(c.aliases)}
            for c in t.categories
        ],
        "conformance": conformance_vectors(t),
    }


def read_submissions(path: str | Path) -> list[AnnotationSubmission]:
    subs: list[AnnotationSubmission] = []
    path = Path(path)
    if not path.exists():
        return subs
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                subs.append(
                    AnnotationSubmission(
                        record_id=doc["record_id"],
                        annotator=doc["annotator"],
                        transcript=doc["transcript"],
                        submitted_at=doc.get("submitted_at", ""),
                        client_version=doc.get("client_version", ""),
                    )
                )
    return subs


def latest_submissions(
    subs: Sequence[AnnotationSubmission],
) -> dict[tuple[str, str], AnnotationSubmission]:
    """Last write wins per (record, annotator); the log is in arrival order."""
    latest: dict[tuple[str, str], AnnotationSubmission] = {}
    for sub in subs:
        latest[(sub.record_id, sub.annotator)] = sub
    return latest


class AnnotationService:
    """In-process state behind the HTTP app. One writer lock guards the
    append log; reads take snapshots under the GIL."""

    def __init__(
        self,
        records: Sequence[ManifestRecord],
        taxonomy: Taxonomy,
        out_path: str | Path,
        assignments: Mapping[str, Sequence[str]] | None = None,
        audio_root: str | Path | None = None,
    ):
        self.records = list(records)
        self.by_id = {rec.id: rec for rec in self.records}
        self.taxonomy = taxonomy
        self.out_path = Path(out_path)
        self.cross = {rid: tuple(pair) for rid, pair in (assignments or {}).items()}
        self.audio_root = Path(audio_root) if audio_root else None
        self._lock = threading.Lock()
        self._submissions = read_submissions(self.out_path)
        self._served: dict[str, set[str]] = {}
        self._reserved: set[str] = set()

    def _submitted_by(self, annotator: str) -> set[str]:
        return {s.record_id for s in self._submissions if s.annotator == annotator}

    def _submitted_any(self) -> set[str]:
        return {s.record_id for s in self._submissions}

    def next_batch(self, annotator: str, n: int) -> list[ManifestRecord]:
        with self._lock:
            done = self._submitted_by(annotator)
            done_any = self._submitted_any()
            served = self._served.setdefault(annotator, set())
            batch: list[ManifestRecord] = []
            for rec in self.records:
                if len(batch) >= n:
                    break
                if rec.id in served or rec.id in done:
                    continue
                pair = self.cross.get(rec.id)
                if pair is not None:
                    if annotator in pair:
                        batch.append(rec)
                elif rec.id not in done_any and rec.id not in self._reserved:
                    batch.append(rec)
                    self._reserved.add(rec.id)
            served.update(rec.id for rec in batch)
            return batch

    def accept(self, body: SubmissionBody) -> AnnotationSubmission:
        if body.record_id not in self.by_id:
            raise HTTPException(status_code=404, detail={"error": "unknown-record", "record_id": body.record_id})
        try:
            parse_transcript(body.transcript, self.taxonomy)
        except UnknownTag as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": "unknown-tag", "surface": exc.surface, "byte_offset": exc.byte_offset},
            ) from exc
        except UnbalancedBracket as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": "unbalanced-bracket", "byte_offset": exc.byte_offset},
            ) from exc
        sub = AnnotationSubmission(
            record_id=body.record_id,
            annotator=body.annotator,
            transcript=body.transcript,
            submitted_at=datetime.now(timezone.utc).isoformat(),
            client_version=body.client_version,
        )
        with self._lock:
            with open(self.out_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(sub.to_json(), ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._submissions.append(sub)
        return sub

    def progress(self) -> dict:
        with self._lock:
            per_annotator: dict[str, int] = {}
            for (rid, annotator) in latest_submissions(self._submissions):
                per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
            return {
                "records": len(self.records),
                "annotated": len(self._submitted_any()),
                "submissions": len(self._submissions),
                "per_annotator": dict(sorted(per_annotator.items())),
            }

    def audio_file(self, record_id: str) -> Path:
        rec = self.by_id.get(record_id)
        if rec is None:
            raise HTTPException(status_code=404, detail={"error": "unknown-record", "record_id": record_id})
        root = self.audio_root or Path(".")
        path = root / rec.audio_path
        if not path.is_file():
            raise HTTPException(status_code=404, detail={"error": "audio-missing", "path": str(path)})
        return path


def _record_doc(rec: ManifestRecord, cross_pair: tuple[str, ...] | None) -> dict:
    doc = rec.to_json()
    if cross_pair:
        doc["cross_annotators"] = list(cross_pair)
    return doc


def build_app(service: AnnotationService, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="paraspeech annotation service", version=__version__)

    @app.get("/taxonomy")
    def get_taxonomy():
        return taxonomy_doc(service.taxonomy)

    @app.get("/batch")
    def get_batch(annotator: str, n: int = 10):
        if not annotator:
            raise HTTPException(status_code=422, detail={"error": "missing-annotator"})
        batch = service.next_batch(annotator, n)
        return {
            "annotator": annotator,
            "records": [_record_doc(rec, service.cross.get(rec.id)) for rec in batch],
        }

    @app.get("/audio/{record_id}")
    def get_audio(record_id: str):
        return FileResponse(service.audio_file(record_id))

    @app.post("/annotation")
    def post_annotation(body: SubmissionBody):
        sub = service.accept(body)
        return {"status": "accepted", **sub.to_json()}

    @app.get("/progress")
    def get_progress():
        return service.progress()

    if static_dir is not None:
        index = Path(static_dir) / "index.html"

        @app.get("/", response_class=HTMLResponse)
        def get_index():
            if not index.is_file():
                raise HTTPException(status_code=404, detail={"error": "no-ui-bundle"})
            return index.read_text(encoding="utf-8")

        bundle = Path(static_dir) / "app.js"

        @app.get("/app.js")
        def get_bundle():
            if not bundle.is_file():
                raise HTTPException(status_code=404, detail={"error": "no-ui-bundle"})
            return FileResponse(bundle, media_type="text/javascript")

    return app


def serve_annotation(
    records: Sequence[ManifestRecord],
    taxonomy: Taxonomy,
    out_path: str | Path,
    port: int = 8700,
    host: str = "127.0.0.1",
    assignments: Mapping[str, Sequence[str]] | None = None,
    audio_root: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    service = AnnotationService(records, taxonomy, out_path, assignments, audio_root)
    uvicorn.run(build_app(service, static_dir), host=host, port=port, log_level="info")


def export_annotator_manifest(
    base: Sequence[ManifestRecord],
    subs: Sequence[AnnotationSubmission],
    annotator: str,
    taxonomy: Taxonomy,
) -> list[ManifestRecord]:
    """Materialize one annotator's view: base records they annotated, with
    the latest accepted transcript, canonicalized, provenance human."""
    from dataclasses import replace

    latest = latest_submissions(subs)
    out: list[ManifestRecord] = []
    for rec in base:
        sub = latest.get((rec.id, annotator))
        if sub is None:
            continue
        canonical = serialize(parse_transcript(sub.transcript, taxonomy))
        out.append(replace(rec, transcript=canonical, provenance="human", annotator=annotator))
    return out
