"""Desk-scale reference math for sequence training objectives.

CTC collapse/loss/greedy decoding over a vocabulary that mixes lexical units
with inline tag tokens, continuous integrate-and-fire segmentation, and
autoregressive sequence NLL. Everything runs in log space with log-sum-exp;
no gradients, no batching tricks, sized for tests and fixtures rather than
training.

Infeasible CTC targets and zero-probability NLL steps return math.inf rather
than raising: an infinite loss is the correct value for an impossible event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParaspeechError


class SeqMathError(ParaspeechError):
    pass


class LengthMismatch(SeqMathError):
    pass


class ZeroTotalWeight(SeqMathError):
    pass


@dataclass(frozen=True)
class ProbMatrix:
    """T x V per-frame symbol distributions with a designated blank column."""

    probs: np.ndarray
    blank: int

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ValueError("probability matrix must be 2-D and non-empty")
        if not (0 <= self.blank < probs.shape[1]):
            raise ValueError(f"blank index {self.blank} outside vocabulary")
        if (probs < 0).any() or (probs > 1).any():
            raise ValueError("probabilities must lie in [0, 1]")
        rows = probs.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-9:
            raise ValueError("every row must sum to 1 within 1e-9")

    @property
    def frames(self) -> int:
        return self.probs.shape[0]

    @property
    def vocab(self) -> int:
        return self.probs.shape[1]


def load_prob_matrix(text: str) -> ProbMatrix:
    """Parse the plain-text fixture format: a "T V blank" header line, then
    T rows of V decimals. Blank lines and #-comments are skipped."""
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty probability matrix document")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError("header must be: T V blank_index")
    t, v, blank = (int(x) for x in header)
    if len(lines) - 1 != t:
        raise ValueError(f"expected {t} rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        vals = [float(x) for x in ln.split()]
        if len(vals) != v:
            raise ValueError(f"expected {v} columns, found {len(vals)}")
        rows.append(vals)
    return ProbMatrix(np.array(rows), blank=blank)


def dump_prob_matrix(p: ProbMatrix) -> str:
    lines = [f"{p.frames} {p.vocab} {p.blank}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in p.probs]
    return "\n".join(lines) + "\n"


def _check_labels(y: Sequence[int], vocab: int, blank: int) -> None:
    for s in y:
        if not (0 <= s < vocab) or s == blank:
            raise ValueError(f"label {s} invalid for vocab {vocab} with blank {blank}")


def ctc_collapse(path: Sequence[int], blank: int) -> list[int]:
    """Standard collapsing: drop repeated adjacent symbols, then blanks."""
    out: list[int] = []
    prev: int | None = None
    for s in path:
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return out


def _logadd(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def min_frames_for(y: Sequence[int]) -> int:
    """Shortest path length that can collapse to y: one frame per label plus
    a mandatory blank between equal neighbours."""
    repeats = sum(1 for a, b in zip(y, y[1:]) if a == b)
    return len(y) + repeats


def ctc_loss(p: ProbMatrix, y: Sequence[int]) -> float:
    """Forward-algorithm CTC loss: -log of the summed probability of every
    frame path that collapses to y. math.inf when no such path fits in T
    frames."""
    _check_labels(y, p.vocab, p.blank)
    t_frames = p.frames
    if min_frames_for(y) > t_frames:
        return math.inf

    ext = [p.blank]
    for s in y:
        ext.extend((s, p.blank))
    n_states = len(ext)

    with np.errstate(divide="ignore"):
        logp = np.log(p.probs).tolist()

    alpha = [-math.inf] * n_states
    alpha[0] = logp[0][ext[0]]
    if n_states > 1:
        alpha[1] = logp[0][ext[1]]
    for t in range(1, t_frames):
        nxt = [-math.inf] * n_states
        for s in range(n_states):
            acc = alpha[s]
            if s >= 1:
                acc = _logadd(acc, alpha[s - 1])
            if s >= 2 and ext[s] != p.blank and ext[s] != ext[s - 2]:
                acc = _logadd(acc, alpha[s - 2])
            nxt[s] = acc + logp[t][ext[s]]
        alpha = nxt

    total = alpha[-1] if n_states == 1 else _logadd(alpha[-1], alpha[-2])
    return math.inf if total == -math.inf else -total


def ctc_loss_bruteforce(p: ProbMatrix, y: Sequence[int]) -> float:
    """Exhaustive oracle: enumerate all V^T paths, sum the probability of
    those collapsing to y. Only sensible for tiny instances."""
    import itertools

    target = list(y)
    rows = p.probs.tolist()
    total = 0.0
    for path in itertools.product(range(p.vocab), repeat=p.frames):
        if ctc_collapse(path, p.blank) == target:
            prob = 1.0
            for t, s in enumerate(path):
                prob *= rows[t][s]
            total += prob
    return math.inf if total == 0.0 else -math.log(total)


def ctc_greedy_decode(p: ProbMatrix) -> list[int]:
    """Per-frame argmax (ties to the lowest index) followed by collapsing."""
    path = [int(np.argmax(row)) for row in p.probs]
    return ctc_collapse(path, p.blank)


@dataclass(frozen=True)
class CifFrame:
    """One encoder frame: its firing weight and hidden vector."""

    weight: float
    hidden: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hidden", np.asarray(self.hidden, dtype=float))
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"frame weight {self.weight} outside [0, 1]")


def cif_segment(
    frames: Sequence[CifFrame], threshold: float = 1.0, scale_to: int | None = None
) -> list[np.ndarray]:
    """Integrate-and-fire segmentation.

    Weights accumulate left to right; each time the accumulator crosses
    ``threshold`` the crossing frame's weight is split between the firing
    segment and the carry, and the segment embedding is the weight-blended
    hidden sum divided by the threshold. Free mode drops trailing mass below
    the threshold; ``scale_to`` mode first rescales all weights so exactly
    that many segments fire, with the final segment absorbing all residual
    mass (this keeps total weighted mass conserved under rounding).
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if scale_to is not None and scale_to < 1:
        raise ValueError("scale_to must be at least 1")

    weights = [f.weight for f in frames]
    if scale_to is not None:
        total = sum(weights)
        if total <= 0.0:
            raise ZeroTotalWeight("cannot rescale weights summing to zero")
        factor = scale_to * threshold / total
        weights = [w * factor for w in weights]

    dims = {f.hidden.shape for f in frames}
    if len(dims) > 1:
        raise ValueError(f"inconsistent hidden dimensions: {sorted(dims)}")

    segments: list[np.ndarray] = []
    acc_w = 0.0
    acc_v: np.ndarray | None = None
    for w, frame in zip(weights, frames):
        if acc_v is None:
            acc_v = np.zeros_like(frame.hidden)
        remaining = w
        while acc_w + remaining >= threshold:
            if scale_to is not None and len(segments) == scale_to - 1:
                break  # residual mass all belongs to the final segment
            used = threshold - acc_w
            acc_v = acc_v + used * frame.hidden
            segments.append(acc_v / threshold)
            remaining -= used
            acc_w = 0.0
            acc_v = np.zeros_like(frame.hidden)
        acc_w += remaining
        acc_v = acc_v + remaining * frame.hidden
    if scale_to is not None and acc_v is not None and len(segments) < scale_to:
        segments.append(acc_v / threshold)
    return segments


def sequence_nll(step_probs: Sequence[Sequence[float]], y: Sequence[int]) -> float:
    """Autoregressive negative log-likelihood: -sum_t log p_t[y_t].
    A zero probability at any target yields math.inf."""
    if len(step_probs) != len(y):
        raise LengthMismatch(f"{len(step_probs)} steps vs {len(y)} labels")
    total = 0.0
    for dist, target in zip(step_probs, y):
        if not 0 <= target < len(dist):
            raise ValueError(f"target {target} outside distribution of size {len(dist)}")
        prob = dist[target]
        if prob <= 0.0:
            return math.inf
        total -= math.log(prob)
    return total
