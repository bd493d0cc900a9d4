"""Command-line entry points for every pipeline stage.

Exit status: 0 on success, 1 on validation/metric failures, 2 on usage
errors (argparse prints the schema). All report outputs are JSON documents;
pass --out to write to a file instead of stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__, corpus, metrics, seqmath
from .errors import ParaspeechError
from .taxonomy import Taxonomy, load_taxonomy_file
from .transcript import event_categories, parse_transcript


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _taxonomy(args) -> Taxonomy:
    return load_taxonomy_file(getattr(args, "taxonomy", None))


def _parse_ratios(text: str) -> dict[str, float]:
    ratios: dict[str, float] = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not name or not value:
            raise ValueError(f"bad ratio component {part!r}; expected name=value")
        ratios[name.strip()] = float(value)
    return ratios


def cmd_validate(args) -> int:
    t = _taxonomy(args)
    report = corpus.validate_manifest_file(args.manifest, t, workers=args.workers)
    _emit(report.to_doc(), args.out)
    return 0 if report.ok else 1


def cmd_stats(args) -> int:
    t = _taxonomy(args)
    records = corpus.read_manifest(args.manifest)
    stats = corpus.corpus_stats(records, t, workers=args.workers)
    _emit(stats.to_doc(), args.out)
    return 0


def cmd_split(args) -> int:
    t = _taxonomy(args)
    records = corpus.read_manifest(args.manifest)
    spec = corpus.SplitSpec(
        ratios=_parse_ratios(args.ratios), seed=args.seed, speaker_disjoint=args.speaker_disjoint
    )
    splits = corpus.split(records, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, recs in splits.items():
        corpus.write_manifest(out_dir / f"{name}.jsonl", recs, taxonomy=t)
    _emit({name: len(recs) for name, recs in splits.items()}, None)
    return 0


def _paired_transcripts(ref_path: str, hyp_path: str, t: Taxonomy) -> list[metrics.UtterancePair]:
    refs = {r.id: r for r in corpus.read_manifest(ref_path)}
    hyps = {r.id: r for r in corpus.read_manifest(hyp_path)}
    if set(refs) != set(hyps):
        missing = sorted(set(refs) ^ set(hyps))[:5]
        raise ParaspeechError(f"ref/hyp id sets differ (e.g. {missing})")
    return [
        metrics.UtterancePair(
            rid,
            parse_transcript(refs[rid].transcript, t),
            parse_transcript(hyps[rid].transcript, t),
        )
        for rid in sorted(refs)
    ]


def cmd_score(args) -> int:
    t = _taxonomy(args)
    pairs = _paired_transcripts(args.ref, args.hyp, t)
    report = metrics.score_corpus(
        pairs,
        drop_punct=args.drop_punct,
        detection=args.detection,
        category_ids=t.category_ids(),
        taxonomy_version=t.version,
        workers=args.workers,
    )
    _emit(report.to_doc(), args.out)
    return 0


def _read_tag_vectors(path: str, t: Taxonomy) -> dict[str, dict[str, float]]:
    known = set(t.category_ids())
    vectors: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc = json.loads(line)
            tags = doc.get("tags", {})
            unknown = set(tags) - known
            if unknown:
                raise ParaspeechError(f"{path}:{lineno}: unknown categories {sorted(unknown)}")
            vec = {cid: 0.0 for cid in known}
            vec.update({k: float(v) for k, v in tags.items()})
            vectors[str(doc["id"])] = vec
    return vectors


def cmd_tag_score(args) -> int:
    t = _taxonomy(args)
    refs = _read_tag_vectors(args.ref, t)
    hyps = _read_tag_vectors(args.hyp, t)
    if set(refs) != set(hyps):
        raise ParaspeechError("ref/hyp id sets differ")
    ids = sorted(refs)
    p, r, f1 = metrics.multilabel_prf([refs[i] for i in ids], [hyps[i] for i in ids], args.threshold)
    _emit(
        {
            "toolkit_version": __version__,
            "taxonomy_version": t.version,
            "threshold": args.threshold,
            "utterances": len(ids),
            "precision": p,
            "recall": r,
            "f1": f1,
        },
        args.out,
    )
    return 0


def _presence_vectors(path: str, t: Taxonomy) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for rec in corpus.read_manifest(path):
        tt = parse_transcript(rec.transcript, t)
        vec = {cid: 0.0 for cid in t.category_ids()}
        for cid in event_categories(tt):
            vec[cid] = 1.0
        out[rec.id] = vec
    return out


def cmd_kappa(args) -> int:
    t = _taxonomy(args)
    a = _presence_vectors(args.manifest_a, t)
    b = _presence_vectors(args.manifest_b, t)
    common = sorted(set(a) & set(b))
    if not common:
        raise ParaspeechError("no record ids shared between the two manifests")
    per_category, macro = metrics.cohen_kappa([a[i] for i in common], [b[i] for i in common])
    _emit(
        {
            "toolkit_version": __version__,
            "taxonomy_version": t.version,
            "n": len(common),
            "per_category": per_category,
            "macro": macro,
        },
        args.out,
    )
    return 0


def cmd_mix(args) -> int:
    t = _taxonomy(args)
    records = corpus.read_manifest(args.manifest)
    mixed = corpus.mix_sampler(records, args.fraction, args.size, args.seed, t)
    corpus.write_manifest(args.out, mixed, taxonomy=t)
    _emit({"written": len(mixed), "out": args.out}, None)
    return 0


def cmd_merge_auto(args) -> int:
    t = _taxonomy(args)
    base = corpus.read_manifest(args.base)
    hyps: dict[str, str] = {}
    with open(args.hyps, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                hyps[str(doc["id"])] = str(doc["transcript"])
    result = corpus.merge_auto_labels(base, hyps, t)
    corpus.write_manifest(args.out, result.records, taxonomy=t)
    if args.quarantine:
        with open(args.quarantine, "w", encoding="utf-8") as fh:
            for item in result.quarantine:
                fh.write(json.dumps(item, ensure_ascii=False, sort_keys=True) + "\n")
    _emit(
        {"merged": len(hyps) - len(result.quarantine), "quarantined": len(result.quarantine)},
        None,
    )
    return 0


def cmd_assign_cross(args) -> int:
    records = corpus.read_manifest(args.manifest)
    annotators = [a for a in args.annotators.split(",") if a]
    assignment = corpus.assign_cross_annotation(records, args.fraction, annotators, args.seed)
    _emit({rid: list(pair) for rid, pair in sorted(assignment.items())}, args.out)
    return 0


def cmd_ctc_check(args) -> int:
    p = seqmath.load_prob_matrix(Path(args.fixture).read_text(encoding="utf-8"))
    if args.target:
        target = [int(x) for x in args.target.split(",") if x != ""]
    else:
        target = seqmath.ctc_greedy_decode(p)
    loss = seqmath.ctc_loss(p, target)
    doc = {"frames": p.frames, "vocab": p.vocab, "blank": p.blank, "target": target, "loss": loss}
    if p.vocab**p.frames <= 4096:
        oracle = seqmath.ctc_loss_bruteforce(p, target)
        diff = abs(loss - oracle) if math.isfinite(loss) or math.isfinite(oracle) else 0.0
        doc.update({"oracle": oracle, "diff": diff, "within_tolerance": diff <= 1e-9})
        _emit(doc, args.out)
        return 0 if diff <= 1e-9 else 1
    _emit(doc, args.out)
    return 0


def cmd_serve(args) -> int:
    from .service import serve_annotation

    t = _taxonomy(args)
    records = corpus.read_manifest(args.manifest)
    assignments = None
    if args.assignments:
        raw = json.loads(Path(args.assignments).read_text(encoding="utf-8"))
        assignments = {rid: tuple(pair) for rid, pair in raw.items()}
    audio_root = args.audio_root or str(Path(args.manifest).parent)
    serve_annotation(
        records,
        t,
        args.out,
        port=args.port,
        host=args.host,
        assignments=assignments,
        audio_root=audio_root,
        static_dir=args.ui_dir,
    )
    return 0


def cmd_export(args) -> int:
    from .service import export_annotator_manifest, read_submissions

    t = _taxonomy(args)
    base = corpus.read_manifest(args.manifest)
    subs = read_submissions(args.submissions)
    exported = export_annotator_manifest(base, subs, args.annotator, t)
    corpus.write_manifest(args.out, exported, taxonomy=t)
    _emit({"annotator": args.annotator, "records": len(exported), "out": args.out}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paraspeech", description=__doc__)
    parser.add_argument("--version", action="version", version=f"paraspeech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str, taxonomy: bool = True, workers: bool = False):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        if taxonomy:
            sp.add_argument("--taxonomy", default=None, help="taxonomy config path (or 'default')")
        if workers:
            sp.add_argument("--workers", type=int, default=None, help="parallel scan threads")
        return sp

    sp = add("validate", cmd_validate, "validate a manifest against the taxonomy", workers=True)
    sp.add_argument("manifest")
    sp.add_argument("--out")

    sp = add("stats", cmd_stats, "corpus statistics for a manifest", workers=True)
    sp.add_argument("manifest")
    sp.add_argument("--out")

    sp = add("split", cmd_split, "deterministic seeded split")
    sp.add_argument("manifest")
    sp.add_argument("--ratios", required=True, help="e.g. train=0.8,test=0.2")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--speaker-disjoint", action="store_true")
    sp.add_argument("--out-dir", required=True)

    sp = add("score", cmd_score, "score hypothesis manifest against reference", workers=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--drop-punct", action="store_true")
    sp.add_argument("--detection", choices=("category", "any"), default="category")
    sp.add_argument("--out")

    sp = add("tag-score", cmd_tag_score, "multi-label tagging P/R/F1 from tag-vector files")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out")

    sp = add("kappa", cmd_kappa, "inter-annotator agreement between two manifests")
    sp.add_argument("manifest_a")
    sp.add_argument("manifest_b")
    sp.add_argument("--out")

    sp = add("mix", cmd_mix, "sample a training mix of tagged/untagged records")
    sp.add_argument("manifest")
    sp.add_argument("--fraction", type=float, required=True)
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("merge-auto", cmd_merge_auto, "overlay auto-labeled transcripts onto a base manifest")
    sp.add_argument("base")
    sp.add_argument("hyps", help="JSONL of {id, transcript}")
    sp.add_argument("--out", required=True)
    sp.add_argument("--quarantine")

    sp = add("assign-cross", cmd_assign_cross, "assign records for cross-annotation", taxonomy=False)
    sp.add_argument("manifest")
    sp.add_argument("--fraction", type=float, required=True)
    sp.add_argument("--annotators", required=True, help="comma-separated names")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = add("ctc-check", cmd_ctc_check, "CTC loss vs brute-force oracle on a fixture", taxonomy=False)
    sp.add_argument("fixture")
    sp.add_argument("--target", default=None, help="comma-separated label indices")
    sp.add_argument("--out")

    sp = add("serve", cmd_serve, "start the annotation service")
    sp.add_argument("manifest")
    sp.add_argument("--out", required=True, help="submission log path")
    sp.add_argument("--port", type=int, default=8700)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--assignments", help="cross-annotation assignment JSON")
    sp.add_argument("--audio-root")
    sp.add_argument("--ui-dir", help="directory with the built annotation UI")

    sp = add("export", cmd_export, "materialize one annotator's manifest from the submission log")
    sp.add_argument("submissions")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--annotator", required=True)
    sp.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParaspeechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
