import itertools
import math
import random

import numpy as np
import pytest

from paraspeech.seqmath import (
    CifFrame,
    LengthMismatch,
    ProbMatrix,
    ZeroTotalWeight,
    cif_segment,
    ctc_collapse,
    ctc_greedy_decode,
    ctc_loss,
    ctc_loss_bruteforce,
    dump_prob_matrix,
    load_prob_matrix,
    sequence_nll,
)


def random_matrix(rng, t, v, blank=0):
    rows = []
    for _ in range(t):
        raw = [rng.random() + 1e-3 for _ in range(v)]
        s = sum(raw)
        rows.append([x / s for x in raw])
    return ProbMatrix(np.array(rows), blank=blank)


def one_hot_matrix(path, v, blank=0):
    rows = np.zeros((len(path), v))
    for t, s in enumerate(path):
        rows[t, s] = 1.0
    return ProbMatrix(rows, blank=blank)


# --- ProbMatrix -----------------------------------------------------------


def test_prob_matrix_validates_rows():
    with pytest.raises(ValueError):
        ProbMatrix(np.array([[0.5, 0.4]]), blank=0)  # row sums to 0.9
    with pytest.raises(ValueError):
        ProbMatrix(np.array([[1.5, -0.5]]), blank=0)
    with pytest.raises(ValueError):
        ProbMatrix(np.array([[0.5, 0.5]]), blank=3)


def test_fixture_format_round_trip():
    rng = random.Random(3)
    p = random_matrix(rng, 4, 3, blank=2)
    again = load_prob_matrix(dump_prob_matrix(p))
    assert again.blank == 2
    assert np.array_equal(again.probs, p.probs)


# --- collapsing -----------------------------------------------------------


def test_collapse_blank_only():
    assert ctc_collapse([0], blank=0) == []


def test_collapse_repeat_then_blank_rules():
    # indices: blank=0, a=1, b=2
    assert ctc_collapse([1, 1, 0, 1, 2], blank=0) == [1, 1, 2]
    assert ctc_collapse([1, 0, 0, 2, 2], blank=0) == [1, 2]


def test_collapse_idempotent_on_clean_sequences():
    assert ctc_collapse([1, 2, 3], blank=0) == [1, 2, 3]


# --- CTC loss -------------------------------------------------------------


def test_single_frame_single_path():
    p = ProbMatrix(np.array([[0.3, 0.7]]), blank=0)
    assert ctc_loss(p, [1]) == pytest.approx(-math.log(0.7), abs=1e-12)


def test_loss_matches_bruteforce_on_random_instances():
    rng = random.Random(99)
    for _ in range(100):
        t = rng.randint(1, 6)
        v = rng.randint(2, 4)
        p = random_matrix(rng, t, v, blank=rng.randrange(v))
        labels = [s for s in (rng.randrange(v) for _ in range(rng.randint(0, 3))) if s != p.blank][:3]
        got = ctc_loss(p, labels)
        want = ctc_loss_bruteforce(p, labels)
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, abs=1e-9)


def test_infeasible_repeat_returns_inf():
    p = ProbMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]), blank=0)
    # aa needs a blank in between: 3 frames minimum
    assert ctc_loss(p, [1, 1]) == math.inf


def test_empty_label_sequence_is_all_blank_mass():
    p = ProbMatrix(np.array([[0.6, 0.4], [0.3, 0.7]]), blank=0)
    assert ctc_loss(p, []) == pytest.approx(-math.log(0.6 * 0.3), abs=1e-12)


def test_total_probability_tiny_vocab():
    rng = random.Random(4)
    p = random_matrix(rng, 4, 2, blank=0)
    total = 0.0
    for length in range(0, 5):
        for labels in itertools.product([1], repeat=length):
            total += math.exp(-ctc_loss(p, list(labels)))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_labels_validated():
    p = ProbMatrix(np.array([[0.5, 0.5]]), blank=0)
    with pytest.raises(ValueError):
        ctc_loss(p, [0])  # blank not allowed in labels
    with pytest.raises(ValueError):
        ctc_loss(p, [5])


# --- greedy decoding ------------------------------------------------------


def test_greedy_decodes_dominant_path():
    # blank=0, ni=1, hao=2, laughter-tag=3
    p = one_hot_matrix([1, 0, 2, 2, 0, 3], v=4, blank=0)
    assert ctc_greedy_decode(p) == [1, 2, 3]


def test_greedy_all_blank():
    p = ProbMatrix(np.array([[0.9, 0.1], [0.8, 0.2]]), blank=0)
    assert ctc_greedy_decode(p) == []


def test_greedy_tie_breaks_to_lowest_index():
    p = ProbMatrix(np.array([[0.5, 0.5]]), blank=0)
    assert ctc_greedy_decode(p) == []  # blank has the lower index and wins
    p2 = ProbMatrix(np.array([[0.5, 0.5]]), blank=1)
    assert ctc_greedy_decode(p2) == [0]  # symbol index 0 beats blank=1


# --- CIF ------------------------------------------------------------------


def test_cif_single_full_fire():
    v = np.array([2.0, -1.0])
    segs = cif_segment([CifFrame(1.0, v)], threshold=1.0)
    assert len(segs) == 1
    assert np.allclose(segs[0], v)


def test_cif_two_fires_identical_hidden():
    v = np.array([3.0])
    frames = [CifFrame(0.5, v) for _ in range(4)]
    segs = cif_segment(frames, threshold=1.0)
    assert len(segs) == 2
    for seg in segs:
        assert np.allclose(seg, v)


def test_cif_below_threshold_drops_trailing_mass():
    frames = [CifFrame(0.3, np.array([1.0])), CifFrame(0.3, np.array([1.0]))]
    assert cif_segment(frames, threshold=1.0) == []


def test_cif_free_mode_emits_floor_of_total():
    rng = random.Random(12)
    for _ in range(100):
        frames = [CifFrame(rng.random(), np.array([rng.random()])) for _ in range(rng.randint(1, 30))]
        segs = cif_segment(frames, threshold=1.0)
        assert len(segs) == math.floor(sum(f.weight for f in frames))


def test_cif_crossing_frame_weight_is_split():
    # dyadic weights keep the arithmetic exact: fire 1 uses 0.375 of frame 2
    # (carry 0.375), fire 2 uses 0.625 of frame 3
    frames = [
        CifFrame(0.625, np.array([1.0])),
        CifFrame(0.75, np.array([2.0])),
        CifFrame(0.75, np.array([4.0])),
    ]
    segs = cif_segment(frames, threshold=1.0)
    assert len(segs) == 2
    assert segs[0][0] == 0.625 * 1.0 + 0.375 * 2.0
    assert segs[1][0] == 0.375 * 2.0 + 0.625 * 4.0


def test_cif_scale_to_exact_count_and_conservation():
    rng = random.Random(21)
    for _ in range(50):
        n = rng.randint(2, 20)
        frames = [CifFrame(rng.random(), np.array([rng.random(), rng.random()])) for _ in range(n)]
        k = rng.randint(1, 5)
        segs = cif_segment(frames, threshold=1.0, scale_to=k)
        assert len(segs) == k
        total = sum(f.weight for f in frames)
        scaled = [f.weight * k / total for f in frames]
        want = sum(w * f.hidden for w, f in zip(scaled, frames))
        got = sum(seg for seg in segs)
        assert np.allclose(got, want, atol=1e-9)


def test_cif_scale_to_zero_weight_rejected():
    with pytest.raises(ZeroTotalWeight):
        cif_segment([CifFrame(0.0, np.array([1.0]))], scale_to=2)


def test_cif_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        cif_segment([CifFrame(0.5, np.array([1.0])), CifFrame(0.5, np.array([1.0, 2.0]))])


# --- sequence NLL ---------------------------------------------------------


def test_nll_certain_step_is_zero():
    assert sequence_nll([[0.0, 1.0]], [1]) == 0.0


def test_nll_two_steps():
    got = sequence_nll([[0.5, 0.5], [0.25, 0.75]], [0, 0])
    assert got == pytest.approx(math.log(2) + math.log(4), abs=1e-12)


def test_nll_length_mismatch():
    with pytest.raises(LengthMismatch):
        sequence_nll([[1.0]], [0, 0])


def test_nll_zero_probability_is_inf():
    assert sequence_nll([[1.0, 0.0]], [1]) == math.inf


def test_nll_additive_over_blocks():
    rng = random.Random(8)
    steps = [[rng.random() + 0.1 for _ in range(3)] for _ in range(6)]
    steps = [[x / sum(row) for x in row] for row in steps]
    y = [rng.randrange(3) for _ in range(6)]
    whole = sequence_nll(steps, y)
    parts = sequence_nll(steps[:2], y[:2]) + sequence_nll(steps[2:], y[2:])
    assert whole == pytest.approx(parts, abs=1e-12)
