import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_calibration

from hintloop.scoring import ScoreSeries
from hintloop.segmenter import (
    CalibrationError,
    RawSegment,
    SegmentContractError,
    binarize,
    calibrate_threshold,
    merge_segments,
)
from hintloop.synthdata import TruthSegment


def series(scores, video_id="v", policy_id="p"):
    return ScoreSeries(video_id=video_id, policy_id=policy_id, scores=np.array(scores))


def truth_at(frames, video_id="v", policy_id="p"):
    return [
        TruthSegment(video_id=video_id, policy_id=policy_id, start_frame=f, end_frame=f + 1)
        for f in frames
    ]


class TestCalibrateThreshold:
    def test_worked_example_chooses_recall_max_feasible(self):
        # positives at scores 0.9, 0.8, 0.4: t=0.8 -> P=1.0 R=2/3; t=0.4 -> P=0.75 R=1.0
        s = series([0.9, 0.8, 0.6, 0.4, 0.2])
        cal = calibrate_threshold(s_list := [s], truth_at([0, 1, 3]), min_precision=0.40)
        assert cal.threshold == pytest.approx(0.4)
        assert cal.achieved_precision == pytest.approx(0.75)
        assert cal.achieved_recall == pytest.approx(1.0)
        t, p, r, feasible = brute_force_calibration(
            s.scores, np.array([True, True, False, True, False]), 0.40
        )
        assert (t, p, r, feasible) == (
            pytest.approx(cal.threshold),
            pytest.approx(cal.achieved_precision),
            pytest.approx(cal.achieved_recall),
            True,
        )

    def test_all_frames_positive_gives_min_score(self):
        s = series([0.7, 0.3, 0.5])
        cal = calibrate_threshold([s], truth_at([0, 1, 2]), min_precision=0.40)
        assert cal.threshold == pytest.approx(0.3)
        assert cal.achieved_precision == 1.0
        assert cal.achieved_recall == 1.0

    def test_unreachable_floor_is_infeasible(self):
        s = series([0.9, 0.8, 0.7, 0.6])
        truth = truth_at([1])  # single positive drowned by negatives at every cut
        cal = calibrate_threshold([s], truth, min_precision=0.99)
        assert not cal.feasible
        assert cal.threshold == math.inf
        t, _, _, feasible = brute_force_calibration(
            s.scores, np.array([False, True, False, False]), 0.99
        )
        assert not feasible and t == math.inf

    def test_zero_positives_rejected(self):
        with pytest.raises(CalibrationError, match="no positives"):
            calibrate_threshold([series([0.5, 0.4])], [], min_precision=0.4)

    def test_bad_floor_rejected(self):
        with pytest.raises(CalibrationError, match="min_precision"):
            calibrate_threshold([series([0.5])], truth_at([0]), min_precision=1.0)

    def test_mixed_policies_rejected(self):
        with pytest.raises(CalibrationError, match="mixes"):
            calibrate_threshold(
                [series([0.5]), series([0.5], policy_id="other")], truth_at([0])
            )

    def test_matches_brute_force_on_random_fixtures(self):
        rng = np.random.default_rng(42)
        for trial in range(25):
            n = int(rng.integers(5, 400))
            scores = np.round(rng.random(n), 2)
            positive = rng.random(n) < rng.uniform(0.1, 0.6)
            if not positive.any():
                positive[0] = True
            s = series(scores)
            truth = truth_at(np.nonzero(positive)[0].tolist())
            cal = calibrate_threshold([s], truth, min_precision=0.40)
            t, p, r, feasible = brute_force_calibration(scores, positive, 0.40)
            assert cal.feasible == feasible, f"trial {trial}"
            if feasible:
                assert cal.threshold == pytest.approx(t)
                assert cal.achieved_precision == pytest.approx(p)
                assert cal.achieved_recall == pytest.approx(r)

    def test_multi_video_series_concatenated(self):
        s1 = series([0.9, 0.1], video_id="a")
        s2 = series([0.8, 0.2], video_id="b")
        truth = truth_at([0], video_id="a") + truth_at([0], video_id="b")
        cal = calibrate_threshold([s1, s2], truth, min_precision=0.4)
        assert cal.threshold == pytest.approx(0.8)
        assert cal.calibration_set_size == 4


class TestBinarize:
    def test_two_runs(self):
        segs = binarize(series([0.1, 0.7, 0.8, 0.2, 0.9]), 0.5)
        assert [(s.start_frame, s.end_frame, s.max_score) for s in segs] == [
            (1, 3, 0.8),
            (4, 5, 0.9),
        ]

    def test_threshold_above_max_empty(self):
        assert binarize(series([0.1, 0.2]), 0.5) == []

    def test_all_above_single_segment(self):
        segs = binarize(series([0.6, 0.7, 0.8]), 0.5)
        assert [(s.start_frame, s.end_frame) for s in segs] == [(0, 3)]

    def test_infinite_threshold_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            binarize(series([0.5]), math.inf)

    def test_monotonicity_higher_threshold_never_covers_more(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            s = series(rng.random(int(rng.integers(5, 200))))
            t1, t2 = sorted(rng.random(2))
            covered1 = sum(seg.end_frame - seg.start_frame for seg in binarize(s, t1))
            covered2 = sum(seg.end_frame - seg.start_frame for seg in binarize(s, t2))
            assert covered2 <= covered1


def seg(a, b, score=0.9, video_id="v", policy_id="p"):
    return RawSegment(
        video_id=video_id, policy_id=policy_id, start_frame=a, end_frame=b, max_score=score
    )


class TestMergeSegments:
    def test_close_pair_merges(self):
        out = merge_segments([seg(100, 150, 0.7), seg(170, 200, 0.9)], video_frames=1000)
        assert [(s.start_frame, s.end_frame) for s in out] == [(100, 200)]
        assert out[0].max_score == 0.9

    def test_distant_pair_unchanged(self):
        inp = [seg(100, 150), seg(190, 200)]
        assert merge_segments(inp, video_frames=1000) == inp

    def test_exact_cutoff_gap_not_merged(self):
        # gap of exactly 3% is NOT under the strict < cutoff
        inp = [seg(0, 10), seg(40, 50)]
        assert merge_segments(inp, video_frames=1000) == inp

    def test_single_segment_unchanged(self):
        inp = [seg(5, 9)]
        assert merge_segments(inp, video_frames=100) == inp

    def test_transitive_merge(self):
        out = merge_segments([seg(0, 10), seg(15, 25), seg(30, 40)], video_frames=1000)
        assert [(s.start_frame, s.end_frame) for s in out] == [(0, 40)]

    def test_unsorted_input_rejected(self):
        with pytest.raises(SegmentContractError):
            merge_segments([seg(50, 60), seg(0, 10)], video_frames=100)

    def test_overlapping_input_rejected(self):
        with pytest.raises(SegmentContractError):
            merge_segments([seg(0, 20), seg(10, 30)], video_frames=100)

    def test_mixed_policies_rejected(self):
        with pytest.raises(SegmentContractError):
            merge_segments([seg(0, 5), seg(20, 30, policy_id="q")], video_frames=100)


@st.composite
def score_series_and_threshold(draw):
    n = draw(st.integers(min_value=1, max_value=300))
    scores = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            min_size=n,
            max_size=n,
        )
    )
    threshold = draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    return series(scores), threshold


@settings(max_examples=200, deadline=None)
@given(score_series_and_threshold())
def test_binarize_merge_properties(case):
    s, threshold = case
    frames = len(s.scores)
    raw = binarize(s, threshold)
    merged = merge_segments(raw, frames)
    cutoff = 0.03 * frames

    covered_raw = np.zeros(frames, dtype=bool)
    for r in raw:
        covered_raw[r.start_frame : r.end_frame] = True
    covered_merged = np.zeros(frames, dtype=bool)
    for m in merged:
        covered_merged[m.start_frame : m.end_frame] = True
    # conservation: merge output covers at least the input frames
    assert (covered_merged | covered_raw).sum() == covered_merged.sum()
    # output gaps all at or above the cutoff
    for a, b in zip(merged, merged[1:]):
        assert b.start_frame - a.end_frame >= cutoff
    # idempotence
    assert merge_segments(merged, frames) == merged
