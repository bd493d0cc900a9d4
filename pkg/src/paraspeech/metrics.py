"""Evaluation metrics for tagging, inline-tag ASR, and tag-controlled TTS.

Conventions, recorded here once and in every serialized report:
  * Corpus CER pools edit distances and reference lengths (sum/sum), it is
    not a mean of per-utterance rates.
  * Event P/R/F1 matches per-utterance category multisets; no positional or
    temporal alignment between events is enforced.
  * Detection rate requires a category-correct hit by default; the looser
    "any tag emitted" reading sits behind detection="any".
  * F1 values are computed from integer counts as 2*tp / (2*tp + fp + fn),
    which equals 2pr/(p+r) and keeps golden-fixture assertions exact.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from . import __version__
from .errors import ParaspeechError
from .transcript import TaggedTranscript, event_categories, is_punctuation, strip_tags

EPS = 1e-12  # probability clamp for bce_loss

TagVector = Mapping[str, float]


class MetricsError(ParaspeechError):
    pass


class EmptyReferenceCorpus(MetricsError):
    pass


class NoTaggedReference(MetricsError):
    pass


class DimensionMismatch(MetricsError):
    pass


class LengthMismatch(MetricsError):
    pass


@dataclass(frozen=True)
class UtterancePair:
    id: str
    reference: TaggedTranscript
    hypothesis: TaggedTranscript


@dataclass(frozen=True)
class CategoryScore:
    tp: int
    fp: int
    fn: int
    f1: float


@dataclass(frozen=True)
class EventScores:
    precision: float
    recall: float
    f1: float
    per_category: dict[str, CategoryScore]


@dataclass(frozen=True)
class ScoreReport:
    cer_full: float
    cer_wo_para: float
    para_detection_rate: float
    event_precision: float
    event_recall: float
    event_f1: float
    per_category: dict[str, CategoryScore]
    utterances: int
    ref_chars: int
    ref_events: int
    drop_punct: bool
    detection: str
    taxonomy_version: str | None = None

    def to_doc(self) -> dict:
        """Machine-readable report document (the CLI serializes this)."""
        return {
            "toolkit_version": __version__,
            "taxonomy_version": self.taxonomy_version,
            "flags": {
                "cer_pooling": "sum/sum",
                "drop_punct": self.drop_punct,
                "detection": self.detection,
                "event_matching": "multiset",
            },
            "cer_full": self.cer_full,
            "cer_wo_para": self.cer_wo_para,
            "para_detection_rate": self.para_detection_rate,
            "event_precision": self.event_precision,
            "event_recall": self.event_recall,
            "event_f1": self.event_f1,
            "per_category": {
                cid: {"tp": s.tp, "fp": s.fp, "fn": s.fn, "f1": s.f1}
                for cid, s in self.per_category.items()
            },
            "counts": {
                "utterances": self.utterances,
                "ref_chars": self.ref_chars,
                "ref_events": self.ref_events,
            },
        }


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Levenshtein distance over token sequences.

    Tokens compare by value: a Tag equals only the identical category and
    never equals a Lexical unit. Two-row DP, O(len(a)*len(b)).
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def _scoring_tokens(tt: TaggedTranscript, mode: str, drop_punct: bool):
    tokens = strip_tags(tt).tokens if mode == "strip_para" else tt.tokens
    if drop_punct:
        tokens = tuple(tok for tok in tokens if not is_punctuation(tok))
    return tokens


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


@dataclass(frozen=True)
class _PairStats:
    """Integer per-pair counters; corpus metrics reduce these by summation,
    which keeps results identical across worker counts and input orders."""

    dist_full: int
    len_full: int
    dist_strip: int
    len_strip: int
    ref_cats: Counter
    hyp_cats: Counter
    ref_tagged: bool
    hit_category: bool
    hit_any: bool


def _pair_stats(pair: UtterancePair, drop_punct: bool) -> _PairStats:
    ref_full = _scoring_tokens(pair.reference, "full", drop_punct)
    hyp_full = _scoring_tokens(pair.hypothesis, "full", drop_punct)
    ref_strip = _scoring_tokens(pair.reference, "strip_para", drop_punct)
    hyp_strip = _scoring_tokens(pair.hypothesis, "strip_para", drop_punct)
    ref_cats = Counter(event_categories(pair.reference))
    hyp_cats = Counter(event_categories(pair.hypothesis))
    return _PairStats(
        dist_full=edit_distance(ref_full, hyp_full),
        len_full=len(ref_full),
        dist_strip=edit_distance(ref_strip, hyp_strip),
        len_strip=len(ref_strip),
        ref_cats=ref_cats,
        hyp_cats=hyp_cats,
        ref_tagged=bool(ref_cats),
        hit_category=bool(set(ref_cats) & set(hyp_cats)),
        hit_any=bool(hyp_cats),
    )


def _all_stats(pairs: Sequence[UtterancePair], drop_punct: bool, workers: int | None = None):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: _pair_stats(p, drop_punct), pairs))
    return [_pair_stats(p, drop_punct) for p in pairs]


def cer(pairs: Sequence[UtterancePair], mode: str = "full", drop_punct: bool = False) -> float:
    """Pooled character error rate: sum of edit distances over sum of
    reference lengths, on full token sequences or with tags stripped from
    both sides (mode="strip_para"). References that are empty under the
    chosen mode drop out of both sums."""
    if mode not in ("full", "strip_para"):
        raise ValueError(f"unknown cer mode {mode!r}")
    stats = _all_stats(pairs, drop_punct)
    return _cer_from_stats(stats, mode)


def _cer_from_stats(stats: Sequence[_PairStats], mode: str) -> float:
    if mode == "full":
        sums = [(s.dist_full, s.len_full) for s in stats if s.len_full > 0]
    else:
        sums = [(s.dist_strip, s.len_strip) for s in stats if s.len_strip > 0]
    if not sums:
        raise EmptyReferenceCorpus(f"every reference is empty under mode {mode!r}")
    total_dist = sum(d for d, _ in sums)
    total_len = sum(n for _, n in sums)
    return total_dist / total_len


def para_detection(pairs: Sequence[UtterancePair], detection: str = "category") -> float:
    """Fraction of tag-bearing-reference utterances where the hypothesis
    detects at least one event: category-correct by default, or any tag at
    all with detection="any". Tag-free references leave the denominator."""
    stats = _all_stats(pairs, drop_punct=False)
    return _detection_from_stats(stats, detection)


def _detection_from_stats(stats: Sequence[_PairStats], detection: str) -> float:
    if detection not in ("category", "any"):
        raise ValueError(f"unknown detection mode {detection!r}")
    tagged = [s for s in stats if s.ref_tagged]
    if not tagged:
        raise NoTaggedReference("no reference contains a tag event")
    hits = sum((s.hit_category if detection == "category" else s.hit_any) for s in tagged)
    return hits / len(tagged)


def event_prf(pairs: Sequence[UtterancePair]) -> EventScores:
    """Event-level micro P/R/F1 over per-utterance category multisets:
    tp = min(ref_count, hyp_count) per (utterance, category)."""
    stats = _all_stats(pairs, drop_punct=False)
    return _events_from_stats(stats)


def _events_from_stats(
    stats: Sequence[_PairStats], category_ids: Sequence[str] = ()
) -> EventScores:
    per_tp: Counter = Counter()
    per_fp: Counter = Counter()
    per_fn: Counter = Counter()
    for s in stats:
        for cid in set(s.ref_cats) | set(s.hyp_cats):
            tp = min(s.ref_cats[cid], s.hyp_cats[cid])
            per_tp[cid] += tp
            per_fp[cid] += s.hyp_cats[cid] - tp
            per_fn[cid] += s.ref_cats[cid] - tp
    cids = list(category_ids) if category_ids else sorted(set(per_tp) | set(per_fp) | set(per_fn))
    per_category = {
        cid: CategoryScore(per_tp[cid], per_fp[cid], per_fn[cid], _f1(per_tp[cid], per_fp[cid], per_fn[cid]))
        for cid in cids
    }
    tp, fp, fn = sum(per_tp.values()), sum(per_fp.values()), sum(per_fn.values())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return EventScores(precision, recall, _f1(tp, fp, fn), per_category)


def event_recall(pairs: Sequence[UtterancePair]) -> float:
    """Recall component of event_prf, standalone: with requested tags as the
    reference and detected tags as the hypothesis this is the TTS
    event-realization rate."""
    return event_prf(pairs).recall


def _check_same_keys(ref: TagVector, hyp: TagVector) -> None:
    if set(ref) != set(hyp):
        raise DimensionMismatch("tag vectors cover different category sets")


def multilabel_prf(
    refs: Sequence[TagVector], hyps: Sequence[TagVector], threshold: float = 0.5
) -> tuple[float, float, float]:
    """Micro-averaged P/R/F1 over all (utterance, category) cells after
    binarizing hypothesis scores at ``threshold``."""
    if len(refs) != len(hyps):
        raise DimensionMismatch(f"{len(refs)} references vs {len(hyps)} hypotheses")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    tp = fp = fn = 0
    for ref, hyp in zip(refs, hyps):
        _check_same_keys(ref, hyp)
        for cid, truth in ref.items():
            pred = hyp[cid] >= threshold
            if truth:
                tp += pred
                fn += not pred
            else:
                fp += pred
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, _f1(tp, fp, fn)


def bce_loss(ref: TagVector, hyp: TagVector) -> float:
    """Binary cross-entropy summed over categories,
    -sum_c [y_c log p_c + (1-y_c) log(1-p_c)], with predictions clamped to
    [1e-12, 1-1e-12] so hard 0/1 outputs stay finite."""
    _check_same_keys(ref, hyp)
    total = 0.0
    for cid, y in ref.items():
        p = min(max(hyp[cid], EPS), 1.0 - EPS)
        total -= y * math.log(p) + (1.0 - y) * math.log(1.0 - p)
    return total


def cohen_kappa(
    a: Sequence[TagVector], b: Sequence[TagVector]
) -> tuple[dict[str, float], float]:
    """Chance-corrected agreement per category from utterance-level presence
    bits, plus the macro mean over categories either annotator ever marked.

    Per category the 2x2 confusion (both-present, a-only, b-only, neither)
    gives p_o = (agree)/n and p_e from the marginals; kappa is
    (p_o - p_e)/(1 - p_e), defined as 1 when p_e = p_o = 1 and 0 when
    p_e = 1 otherwise.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} annotation vectors")
    n = len(a)
    categories: set[str] = set()
    for vec in (*a, *b):
        categories.update(vec)
    per_category: dict[str, float] = {}
    marked: list[str] = []
    for cid in sorted(categories):
        both = a_only = b_only = neither = 0
        for va, vb in zip(a, b):
            pa = bool(va.get(cid, 0))
            pb = bool(vb.get(cid, 0))
            if pa and pb:
                both += 1
            elif pa:
                a_only += 1
            elif pb:
                b_only += 1
            else:
                neither += 1
        p_o = (both + neither) / n
        p_e = ((both + a_only) * (both + b_only) + (b_only + neither) * (a_only + neither)) / n**2
        if p_e == 1.0:
            kappa = 1.0 if p_o == 1.0 else 0.0
        else:
            kappa = (p_o - p_e) / (1.0 - p_e)
        per_category[cid] = kappa
        if both + a_only + b_only > 0:
            marked.append(cid)
    macro = sum(per_category[c] for c in marked) / len(marked) if marked else 0.0
    return per_category, macro


def score_corpus(
    pairs: Sequence[UtterancePair],
    *,
    drop_punct: bool = False,
    detection: str = "category",
    category_ids: Sequence[str] = (),
    taxonomy_version: str | None = None,
    workers: int | None = None,
) -> ScoreReport:
    """Full corpus report: both CER modes, detection rate, event P/R/F1 with
    per-category breakdown, and reference counts.

    ``category_ids`` (normally the taxonomy's) fixes the per-category table's
    rows; otherwise only observed categories appear. ``workers`` fans the
    per-utterance scan out to threads; reduction is plain integer summation,
    so output is identical for any worker count.
    """
    if not pairs:
        raise EmptyReferenceCorpus("no utterance pairs to score")
    stats = _all_stats(pairs, drop_punct, workers=workers)
    events = _events_from_stats(stats, category_ids)
    return ScoreReport(
        cer_full=_cer_from_stats(stats, "full"),
        cer_wo_para=_cer_from_stats(stats, "strip_para"),
        para_detection_rate=_detection_from_stats(stats, detection),
        event_precision=events.precision,
        event_recall=events.recall,
        event_f1=events.f1,
        per_category=events.per_category,
        utterances=len(pairs),
        ref_chars=sum(s.len_strip for s in stats),
        ref_events=sum(sum(s.ref_cats.values()) for s in stats),
        drop_punct=drop_punct,
        detection=detection,
        taxonomy_version=taxonomy_version,
    )
