import numpy as np
import pytest
from oracles import brute_force_quality

from hintloop.evaluation import (
    comparison_table,
    efficiency_metrics,
    hint_interaction_metrics,
    quality_metrics,
)
from hintloop.feedbackstore import Annotation, HintResponse
from hintloop.ranker import HintSegment
from hintloop.ratersim import ReviewOutcome


def hint(hint_id="h1", start=0, end=10, vid="v0", policy="p", rank=1):
    return HintSegment(
        hint_id=hint_id, video_id=vid, policy_id=policy,
        start_frame=start, end_frame=end, max_score=0.5, rank=rank,
    )


def annotation(start, end, vid="v0", aid=None, policy="p"):
    return Annotation(
        annotation_id=aid or f"{vid}:{start}:{end}", video_id=vid, rater_id="r",
        policy_id=policy, start_frame=start, end_frame=end, origin="organic", timestamp=0.0,
    )


def response(hint_id, verdict, rater="r"):
    return HintResponse(hint_id=hint_id, rater_id=rater, verdict=verdict, timestamp=0.0)


class TestQualityMetrics:
    def test_perfect_agreement(self):
        expert = {"v1": True, "v2": False}
        report = quality_metrics(expert, [dict(expert), dict(expert)])
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.disagreement_rate == 0.0

    def test_hand_derived_three_video_example(self):
        expert = {"v1": True, "v2": False, "v3": True}
        gen_a = {"v1": True, "v2": True, "v3": False}
        gen_b = {"v1": True, "v2": False, "v3": True}
        report = quality_metrics(expert, [gen_a, gen_b])
        assert report.per_set[0].precision == pytest.approx(0.5)
        assert report.per_set[0].recall == pytest.approx(0.5)
        assert report.per_set[0].disagreement_rate == pytest.approx(2 / 3)
        assert report.per_set[1].precision == 1.0
        assert report.per_set[1].recall == 1.0
        assert report.per_set[1].disagreement_rate == 0.0
        assert report.precision == pytest.approx(0.75)
        assert report.recall == pytest.approx(0.75)
        assert report.disagreement_rate == pytest.approx(1 / 3)

    def test_all_negative_corpus_undefined_recall(self):
        expert = {"v1": False, "v2": False}
        silent = {"v1": False, "v2": False}
        report = quality_metrics(expert, [silent, silent])
        assert report.recall is None
        assert report.precision is None  # nothing flagged either
        assert "set0.recall" in report.undefined

    def test_matches_brute_force_on_random_corpora(self):
        rng = np.random.default_rng(8)
        for trial in range(20):
            n = int(rng.integers(2, 500))
            vids = [f"v{i}" for i in range(n)]
            expert = {v: bool(rng.random() < 0.3) for v in vids}
            gen_a = {v: bool(rng.random() < 0.4) for v in vids}
            gen_b = {v: bool(rng.random() < 0.4) for v in vids}
            report = quality_metrics(expert, [gen_a, gen_b])
            pa, ra, da = brute_force_quality(expert, gen_a)
            pb, rb, db = brute_force_quality(expert, gen_b)
            assert report.per_set[0].precision == pa
            assert report.per_set[0].recall == ra
            assert report.per_set[0].disagreement_rate == da
            assert report.per_set[1].disagreement_rate == db
            if None not in (pa, pb):
                assert report.precision == (pa + pb) / 2
            if None not in (ra, rb):
                assert report.recall == (ra + rb) / 2

    def test_set_swap_symmetry(self):
        rng = np.random.default_rng(9)
        vids = [f"v{i}" for i in range(50)]
        expert = {v: bool(rng.random() < 0.4) for v in vids}
        gen_a = {v: bool(rng.random() < 0.5) for v in vids}
        gen_b = {v: bool(rng.random() < 0.5) for v in vids}
        fwd = quality_metrics(expert, [gen_a, gen_b])
        rev = quality_metrics(expert, [gen_b, gen_a])
        assert fwd.precision == rev.precision
        assert fwd.recall == rev.recall
        assert fwd.disagreement_rate == rev.disagreement_rate

    def test_id_mismatch_rejected(self):
        with pytest.raises(ValueError, match="different video ids"):
            quality_metrics({"v1": True}, [{"v2": True}, {"v1": True}])


def outcome(vid, n_annotations, duration=10.0, rater="g"):
    anns = [annotation(i * 10, i * 10 + 5, vid=vid, aid=f"{vid}:{rater}:{i}") for i in range(n_annotations)]
    return ReviewOutcome(
        video_id=vid, rater_id=rater, decision=bool(anns), annotations=anns,
        hint_responses=[], duration_units=duration,
    )


class TestEfficiencyMetrics:
    def test_full_coverage(self):
        expert = {"v0": True, "v1": True, "v2": False}
        sets = [
            {v: outcome(v, 1 if expert[v] else 0) for v in expert},
            {v: outcome(v, 0, rater="g2") for v in expert},
        ]
        report = efficiency_metrics(sets, expert)
        assert report.pct_violating_videos_with_segments == 1.0

    def test_segments_per_video_arithmetic(self):
        expert = {f"v{i}": True for i in range(10)}
        # 30 annotations over 10 videos (both sets pooled)
        sets = [
            {v: outcome(v, 2) for v in expert},
            {v: outcome(v, 1, rater="g2") for v in expert},
        ]
        report = efficiency_metrics(sets, expert)
        assert report.segments_per_video == 3.0

    def test_duration_average(self):
        expert = {"v0": False}
        sets = [{"v0": outcome("v0", 0, duration=100.0)}, {"v0": outcome("v0", 0, duration=50.0, rater="g2")}]
        report = efficiency_metrics(sets, expert)
        assert report.avg_review_duration == 75.0

    def test_no_violating_videos_undefined_pct(self):
        expert = {"v0": False}
        sets = [{"v0": outcome("v0", 0)}]
        assert efficiency_metrics(sets, expert).pct_violating_videos_with_segments is None


class TestHintInteractionMetrics:
    def test_acceptance_rate_35_percent_fixture(self):
        hints = [hint(f"h{i}", start=i * 10, end=i * 10 + 5, rank=i + 1) for i in range(20)]
        responses = [response(f"h{i}", "accepted") for i in range(7)]
        responses += [response(f"h{i}", "rejected") for i in range(7, 20)]
        report = hint_interaction_metrics(responses, [], hints)
        assert report.acceptance_rate == pytest.approx(0.35)
        assert report.acceptance_rate_shown == pytest.approx(0.35)

    def test_unresponded_hints_out_of_primary_denominator(self):
        hints = [hint("h1"), hint("h2", start=20, end=30, rank=2)]
        report = hint_interaction_metrics([response("h1", "accepted")], [], hints)
        assert report.acceptance_rate == 1.0
        assert report.acceptance_rate_shown == 0.5

    def test_organic_fraction_zero_when_all_match_hints(self):
        hints = [hint("h1", start=10, end=20)]
        anns = [annotation(10, 20)]
        report = hint_interaction_metrics([], anns, hints)
        assert report.organic_fraction == 0.0

    def test_disjoint_annotation_is_organic(self):
        hints = [hint("h1", start=0, end=40)]
        anns = [annotation(50, 60)]
        report = hint_interaction_metrics([], anns, hints)
        assert report.organic_fraction == 1.0

    def test_touching_intervals_do_not_overlap(self):
        hints = [hint("h1", start=0, end=50)]
        anns = [annotation(50, 60)]
        assert hint_interaction_metrics([], anns, hints).organic_fraction == 1.0

    def test_unknown_hint_response_rejected(self):
        with pytest.raises(ValueError, match="unknown hint"):
            hint_interaction_metrics([response("ghost", "accepted")], [], [hint("h1")])

    def test_acceptance_plus_rejection_is_one(self):
        hints = [hint(f"h{i}", start=i * 10, end=i * 10 + 5, rank=i + 1) for i in range(10)]
        responses = [
            response(f"h{i}", "accepted" if i % 3 else "rejected") for i in range(10)
        ]
        report = hint_interaction_metrics(responses, [], hints)
        rejection_rate = report.n_rejected / (report.n_accepted + report.n_rejected)
        assert report.acceptance_rate + rejection_rate == pytest.approx(1.0)


def test_comparison_table_layout():
    from hintloop.evaluation import ArmReport, EfficiencyReport, QualityReport

    reports = {
        name: ArmReport(
            arm=name,
            quality=QualityReport(precision=p, recall=r, disagreement_rate=d, n_videos=100),
            efficiency=EfficiencyReport(
                pct_violating_videos_with_segments=0.5,
                segments_per_video=s,
                avg_review_duration=80.0,
                n_videos=100,
            ),
        )
        for name, (p, r, d, s) in {
            "baseline": (0.8, 0.6, 0.2, 1.0),
            "v1": (0.85, 0.65, 0.15, 1.1),
            "v1_v2": (0.9, 0.75, 0.1, 1.4),
        }.items()
    }
    table = comparison_table(reports, [("baseline", "v1"), ("v1", "v1_v2")])
    assert "Treatment" in table and "Precision" in table and "Recall" in table
    assert "Disagreement%" in table and "# Videos" in table
    assert "v1 vs. baseline" in table
    assert "v1_v2 vs. v1" in table
    # both relative and absolute deltas present
    assert "rel" in table and "abs" in table
    assert "segments/video" in table
