"""Manifest construction and management.

A manifest is UTF-8 JSONL, one utterance record per line, with the transcript
stored in serialized inline-tag form. A sidecar ``<name>.meta.json`` records
the taxonomy and toolkit versions that produced it. All samplers and splitters
run on the id-sorted record list with an explicit seed, so identical inputs
give byte-identical outputs.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .errors import ParaspeechError
from .taxonomy import Taxonomy
from .transcript import TranscriptError, parse_transcript, serialize, tag_events

SOURCES = ("game", "in-the-wild", "nonspeech-augment", "synthetic")
PROVENANCES = ("human", "auto", "synthetic")


class CorpusError(ParaspeechError):
    pass


class InsufficientSpeakers(CorpusError):
    pass


class OrphanHypothesis(CorpusError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"hypothesis id {record_id!r} not present in base manifest")


class PoolExhausted(CorpusError):
    def __init__(self, pool: str, needed: int, available: int):
        self.pool = pool
        self.needed = needed
        self.available = available
        super().__init__(f"{pool} pool has {available} records, {needed} requested")


class TooFewAnnotators(CorpusError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    audio_path: str
    duration_s: float
    speaker: str
    source: str
    transcript: str
    provenance: str
    lang: str = "zh"
    annotator: str | None = None

    def to_json(self) -> dict:
        doc = {
            "id": self.id,
            "audio_path": self.audio_path,
            "duration_s": self.duration_s,
            "speaker": self.speaker,
            "source": self.source,
            "transcript": self.transcript,
            "provenance": self.provenance,
            "lang": self.lang,
        }
        if self.annotator is not None:
            doc["annotator"] = self.annotator
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "ManifestRecord":
        return cls(
            id=str(doc["id"]),
            audio_path=str(doc["audio_path"]),
            duration_s=float(doc["duration_s"]),
            speaker=str(doc["speaker"]),
            source=str(doc["source"]),
            transcript=str(doc["transcript"]),
            provenance=str(doc["provenance"]),
            lang=str(doc.get("lang", "zh")),
            annotator=doc.get("annotator"),
        )


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    """Strict manifest reader; malformed lines raise CorpusError."""
    records, errors = scan_manifest(path)
    if errors:
        line, msg = errors[0]
        raise CorpusError(f"{path}:{line}: {msg}" + (f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""))
    return records


def scan_manifest(path: str | Path) -> tuple[list[ManifestRecord], list[tuple[int, str]]]:
    """Lenient reader: returns well-formed records plus (line, message)
    structural errors, so validation can report instead of crash."""
    records: list[ManifestRecord] = []
    errors: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                rec = ManifestRecord.from_json(doc)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                errors.append((lineno, f"unreadable record: {exc}"))
                continue
            records.append(rec)
    return records, errors


def write_manifest(
    path: str | Path, records: Iterable[ManifestRecord], taxonomy: Taxonomy | None = None
) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    meta = {"toolkit_version": __version__}
    if taxonomy is not None:
        meta["taxonomy_version"] = taxonomy.version
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


@dataclass(frozen=True)
class RecordIssue:
    record_id: str
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    total: int
    valid: int
    errors: tuple[RecordIssue, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_doc(self) -> dict:
        return {
            "toolkit_version": __version__,
            "total": self.total,
            "valid": self.valid,
            "errors": [
                {"record_id": e.record_id, "kind": e.kind, "detail": e.detail}
                for e in self.errors
            ],
            "warnings": list(self.warnings),
        }


def _record_issues(rec: ManifestRecord, t: Taxonomy) -> tuple[list[RecordIssue], Counter]:
    issues: list[RecordIssue] = []
    cats: Counter = Counter()
    if rec.duration_s <= 0:
        issues.append(RecordIssue(rec.id, "nonpositive-duration", f"duration_s={rec.duration_s}"))
    if rec.source not in SOURCES:
        issues.append(RecordIssue(rec.id, "unknown-source", rec.source))
    if rec.provenance not in PROVENANCES:
        issues.append(RecordIssue(rec.id, "unknown-provenance", rec.provenance))
    try:
        tt = parse_transcript(rec.transcript, t)
        cats.update(ev.category.id for ev in tag_events(tt))
    except TranscriptError as exc:
        kind = "unknown-tag" if "unknown tag" in str(exc) else "unbalanced-bracket"
        issues.append(RecordIssue(rec.id, kind, str(exc)))
    return issues, cats


def validate_manifest(
    records: Sequence[ManifestRecord], t: Taxonomy, workers: int | None = None
) -> ValidationReport:
    """Per-record semantic checks plus corpus-level warnings.

    Errors: unparseable transcript (unknown tag / unbalanced bracket),
    duplicate id, nonpositive duration, unknown source or provenance values.
    Warnings: taxonomy categories with zero occurrences. Reduction runs in
    input order, so the report is identical for any worker count.
    """
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_record = list(pool.map(lambda r: _record_issues(r, t), records))
    else:
        per_record = [_record_issues(r, t) for r in records]

    errors: list[RecordIssue] = []
    seen_ids: set[str] = set()
    category_counts: Counter = Counter()
    valid = 0
    for rec, (issues, cats) in zip(records, per_record):
        if rec.id in seen_ids:
            issues = issues + [RecordIssue(rec.id, "duplicate-id", "id already used")]
        seen_ids.add(rec.id)
        if issues:
            errors.extend(issues)
        else:
            valid += 1
            category_counts.update(cats)
    warnings: list[str] = []
    empty = [c.id for c in t.categories if category_counts[c.id] == 0]
    if empty:
        warnings.append("categories with no occurrences: " + ", ".join(empty))
    return ValidationReport(len(records), valid, tuple(errors), tuple(warnings))


def validate_manifest_file(
    path: str | Path, t: Taxonomy, workers: int | None = None
) -> ValidationReport:
    """Validate a manifest on disk; structurally unreadable lines become
    report errors rather than exceptions."""
    records, structural = scan_manifest(path)
    report = validate_manifest(records, t, workers=workers)
    if not structural:
        return report
    line_errors = tuple(
        RecordIssue(f"line:{lineno}", "unreadable-record", msg) for lineno, msg in structural
    )
    return ValidationReport(
        total=report.total + len(structural),
        valid=report.valid,
        errors=line_errors + report.errors,
        warnings=report.warnings,
    )


@dataclass(frozen=True)
class CorpusStats:
    utterance_count: int
    total_hours: float
    speaker_count: int
    per_category_counts: dict[str, int]
    per_source_counts: dict[str, int]
    tagged_fraction: float

    def to_doc(self) -> dict:
        return {
            "utterance_count": self.utterance_count,
            "total_hours": self.total_hours,
            "speaker_count": self.speaker_count,
            "per_category_counts": dict(sorted(self.per_category_counts.items())),
            "per_source_counts": dict(sorted(self.per_source_counts.items())),
            "tagged_fraction": self.tagged_fraction,
        }


def corpus_stats(
    records: Sequence[ManifestRecord], t: Taxonomy, workers: int | None = None
) -> CorpusStats:
    """Exact corpus tallies over validated records."""

    def one(rec: ManifestRecord) -> tuple[float, str, str, Counter]:
        cats: Counter = Counter()
        cats.update(ev.category.id for ev in tag_events(parse_transcript(rec.transcript, t)))
        return rec.duration_s, rec.speaker, rec.source, cats

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, records))
    else:
        rows = [one(r) for r in records]

    per_category: Counter = Counter({c.id: 0 for c in t.categories})
    per_source: Counter = Counter()
    speakers: set[str] = set()
    total_seconds = 0.0
    tagged = 0
    for seconds, speaker, source, cats in rows:
        total_seconds += seconds
        speakers.add(speaker)
        per_source[source] += 1
        per_category.update(cats)
        if cats:
            tagged += 1
    n = len(records)
    return CorpusStats(
        utterance_count=n,
        total_hours=total_seconds / 3600.0,
        speaker_count=len(speakers),
        per_category_counts=dict(per_category),
        per_source_counts=dict(per_source),
        tagged_fraction=tagged / n if n else 0.0,
    )


@dataclass(frozen=True)
class SplitSpec:
    ratios: dict[str, float]
    seed: int = 0
    speaker_disjoint: bool = False

    def __post_init__(self):
        if not self.ratios:
            raise ValueError("at least one split required")
        if any(not 0.0 < r <= 1.0 for r in self.ratios.values()):
            raise ValueError("ratios must lie in (0, 1]")
        if abs(sum(self.ratios.values()) - 1.0) > 1e-9:
            raise ValueError("ratios must sum to 1")


def _target_sizes(names: Sequence[str], ratios: Mapping[str, float], n: int) -> dict[str, int]:
    # largest-remainder apportionment; ties resolved by spec order
    exact = {name: ratios[name] * n for name in names}
    sizes = {name: math.floor(exact[name]) for name in names}
    shortfall = n - sum(sizes.values())
    by_remainder = sorted(names, key=lambda m: (-(exact[m] - sizes[m]), names.index(m)))
    for name in by_remainder[:shortfall]:
        sizes[name] += 1
    return sizes


def split(
    records: Sequence[ManifestRecord], spec: SplitSpec
) -> dict[str, list[ManifestRecord]]:
    """Seeded exact partition into named splits.

    Plain mode shuffles the id-sorted records and slices to largest-remainder
    targets (sizes within one record of the ratios). Speaker-disjoint mode
    assigns whole speaker groups, largest first, to the most under-filled
    split, so no speaker spans two splits.
    """
    names = list(spec.ratios)
    rng = random.Random(spec.seed)
    ordered = sorted(records, key=lambda r: r.id)

    if not spec.speaker_disjoint:
        rng.shuffle(ordered)
        sizes = _target_sizes(names, spec.ratios, len(ordered))
        out: dict[str, list[ManifestRecord]] = {}
        start = 0
        for name in names:
            out[name] = ordered[start : start + sizes[name]]
            start += sizes[name]
        return out

    groups: dict[str, list[ManifestRecord]] = {}
    for rec in ordered:
        groups.setdefault(rec.speaker, []).append(rec)
    if len(groups) < len(names):
        raise InsufficientSpeakers(f"{len(groups)} speakers cannot populate {len(names)} splits")
    speakers = sorted(groups)
    rng.shuffle(speakers)  # seeded tie-break among equal-sized groups
    speakers.sort(key=lambda s: -len(groups[s]))

    assigned: dict[str, list[ManifestRecord]] = {name: [] for name in names}
    counts = {name: 0 for name in names}
    targets = {name: spec.ratios[name] * len(ordered) for name in names}
    for idx, speaker in enumerate(speakers):
        empty = [m for m in names if not assigned[m]]
        if empty and len(speakers) - idx <= len(empty):
            pick = max(empty, key=lambda m: (targets[m], -names.index(m)))
        else:
            pick = max(names, key=lambda m: (targets[m] - counts[m], -names.index(m)))
        assigned[pick].extend(groups[speaker])
        counts[pick] += len(groups[speaker])
    return assigned


@dataclass(frozen=True)
class MergeResult:
    records: list[ManifestRecord]
    quarantine: list[dict] = field(default_factory=list)


def merge_auto_labels(
    base: Sequence[ManifestRecord], hyps: Mapping[str, str], t: Taxonomy
) -> MergeResult:
    """Overlay machine-produced tagged transcripts onto untagged records.

    Matched records get the parsed hypothesis (canonical serialization) and
    provenance "auto"; unmatched records pass through untouched. Hypotheses
    that fail to parse land in the quarantine list with a reason, never
    silently dropped; their base records also pass through untouched. A
    hypothesis id absent from base raises OrphanHypothesis.
    """
    by_id = {rec.id: rec for rec in base}
    for hyp_id in hyps:
        if hyp_id not in by_id:
            raise OrphanHypothesis(hyp_id)
    out: list[ManifestRecord] = []
    quarantine: list[dict] = []
    for rec in base:
        hyp = hyps.get(rec.id)
        if hyp is None:
            out.append(rec)
            continue
        try:
            canonical = serialize(parse_transcript(hyp, t))
        except TranscriptError as exc:
            quarantine.append({**rec.to_json(), "transcript": hyp, "reason": str(exc)})
            out.append(rec)
            continue
        out.append(replace(rec, transcript=canonical, provenance="auto"))
    return MergeResult(out, quarantine)


def _has_tags(rec: ManifestRecord, t: Taxonomy) -> bool:
    return bool(tag_events(parse_transcript(rec.transcript, t)))


def mix_sampler(
    records: Sequence[ManifestRecord],
    para_rich_fraction: float,
    target_size: int,
    seed: int,
    t: Taxonomy,
) -> list[ManifestRecord]:
    """Training-mix sampler: ceil(target * fraction) tag-bearing records and
    the remainder tag-free, drawn without replacement, seed-deterministic.
    A record is paralinguistic-rich iff it carries at least one tag event."""
    if not 0.0 <= para_rich_fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    ordered = sorted(records, key=lambda r: r.id)
    tagged: list[ManifestRecord] = []
    untagged: list[ManifestRecord] = []
    for rec in ordered:
        (tagged if _has_tags(rec, t) else untagged).append(rec)
    n_tagged = math.ceil(target_size * para_rich_fraction)
    n_untagged = target_size - n_tagged
    if n_tagged > len(tagged):
        raise PoolExhausted("tagged", n_tagged, len(tagged))
    if n_untagged > len(untagged):
        raise PoolExhausted("untagged", n_untagged, len(untagged))
    rng = random.Random(seed)
    chosen = rng.sample(tagged, n_tagged) + rng.sample(untagged, n_untagged)
    rng.shuffle(chosen)
    return chosen


def assign_cross_annotation(
    records: Sequence[ManifestRecord],
    fraction: float,
    annotators: Sequence[str],
    seed: int,
) -> dict[str, tuple[str, str]]:
    """Pick ceil(fraction * n) records for double annotation and spread them
    round-robin over all annotator pairs, so pair loads differ by at most
    one."""
    if len(set(annotators)) < 2:
        raise TooFewAnnotators("cross-annotation needs at least two annotators")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    ordered = sorted(records, key=lambda r: r.id)
    n_pick = math.ceil(len(ordered) * fraction)
    rng = random.Random(seed)
    picked = rng.sample(ordered, n_pick)
    pairs = [tuple(sorted(p)) for p in combinations(sorted(set(annotators)), 2)]
    rng.shuffle(pairs)
    return {rec.id: pairs[i % len(pairs)] for i, rec in enumerate(picked)}
