import numpy as np
import pytest

from hintloop.ranker import HintSegment, LineGraphHint
from hintloop.ratersim import (
    RaterProfile,
    SimConfig,
    run_experiment,
    simulate_review,
)
from hintloop.synthdata import Corpus, CorpusConfig, TruthSegment, VideoMeta, generate_corpus


def video(vid="v0", frames=100):
    return VideoMeta(video_id=vid, frame_count=frames, fps=4.0)


def truth(start, end, policy="p", vid="v0"):
    return TruthSegment(video_id=vid, policy_id=policy, start_frame=start, end_frame=end)


def hint(start, end, policy="p", rank=1, vid="v0", score=0.9):
    return HintSegment(
        hint_id=f"h{rank}", video_id=vid, policy_id=policy,
        start_frame=start, end_frame=end, max_score=score, rank=rank,
    )


def expert(seed=1):
    return RaterProfile(rater_id="exp", kind="expert", budget_frames=None, detect_prob=1.0, seed=seed)


def generalist(budget, detect=1.0, false_flag=0.0, seed=1, rater_id="gen"):
    return RaterProfile(
        rater_id=rater_id, kind="generalist", budget_frames=budget,
        detect_prob=detect, false_flag_prob=false_flag, seed=seed,
    )


class TestSimulateReview:
    def test_expert_annotates_everything(self):
        truths = [truth(10, 30), truth(60, 70, policy="q")]
        out = simulate_review(expert(), video(), truths, SimConfig())
        assert out.decision is True
        got = {(a.policy_id, a.start_frame, a.end_frame) for a in out.annotations}
        assert got == {("p", 10, 30), ("q", 60, 70)}
        assert all(a.origin == "organic" for a in out.annotations)

    def test_zero_budget_no_flags(self):
        out = simulate_review(generalist(0), video(), [truth(10, 30)], SimConfig())
        assert out.decision is False
        assert out.annotations == []
        assert out.watched_frames == 0

    def test_hand_walked_hinted_fixture(self):
        # 100 frames, budget 20, hint exactly covers the only truth segment
        t = truth(40, 55)
        h = hint(40, 55)
        out = simulate_review(
            generalist(20), video(), [t], SimConfig(), v2_hints=[h]
        )
        assert out.decision is True
        assert [r.verdict for r in out.hint_responses] == ["accepted"]
        spans = {(a.start_frame, a.end_frame, a.origin) for a in out.annotations}
        assert (40, 55, "from_accepted_hint") in spans
        assert out.watched_frames <= 20

    def test_hint_not_matching_truth_rejected(self):
        out = simulate_review(
            generalist(50), video(), [truth(10, 20)], SimConfig(),
            v2_hints=[hint(60, 70)],
        )
        assert [r.verdict for r in out.hint_responses] == ["rejected"]

    def test_hint_same_span_other_policy_rejected(self):
        out = simulate_review(
            generalist(50), video(), [truth(10, 20, policy="other")], SimConfig(),
            v2_hints=[hint(10, 20, policy="p")],
        )
        assert [r.verdict for r in out.hint_responses] == ["rejected"]

    def test_hints_for_other_video_rejected(self):
        with pytest.raises(ValueError, match="not v0"):
            simulate_review(
                generalist(10), video(), [], SimConfig(), v2_hints=[hint(0, 5, vid="w")]
            )

    def test_deterministic_per_seed(self):
        truths = [truth(10, 30), truth(50, 80, policy="q")]
        hints = [hint(12, 28), hint(55, 70, policy="q", rank=2)]
        config = SimConfig()
        a = simulate_review(generalist(30, detect=0.7, seed=9), video(), truths, config, v2_hints=hints)
        b = simulate_review(generalist(30, detect=0.7, seed=9), video(), truths, config, v2_hints=hints)
        assert a.to_dict() == b.to_dict()
        c = simulate_review(generalist(30, detect=0.7, seed=10), video(), truths, config, v2_hints=hints)
        assert a.to_dict() != c.to_dict() or a.decision == c.decision  # seeds may coincide on tiny fixtures

    def test_budget_never_exceeded(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            frames = int(rng.integers(20, 300))
            budget = int(rng.integers(0, frames + 1))
            truths = [truth(5, min(15, frames), vid=f"v{trial}")] if frames > 15 else []
            out = simulate_review(
                generalist(budget, seed=trial, detect=0.5),
                video(f"v{trial}", frames),
                truths,
                SimConfig(explore_stop_after_detection=False),
            )
            assert out.watched_frames <= budget

    def test_full_recall_when_hints_cover_all_truths(self):
        # budget >= total hint length guarantees a positive decision
        truths = [truth(0, 10), truth(40, 60, policy="q")]
        hints = [hint(0, 10), hint(40, 60, policy="q", rank=2)]
        out = simulate_review(generalist(30), video(), truths, SimConfig(), v2_hints=hints)
        assert out.decision is True
        assert {r.verdict for r in out.hint_responses} == {"accepted"}

    def test_acceptance_equals_watched_hint_precision(self):
        # with verification error 0, acceptance fraction == precision of watched hints
        rng = np.random.default_rng(4)
        for trial in range(10):
            frames = 400
            truths = [truth(50, 90, vid=f"v{trial}"), truth(200, 260, policy="q", vid=f"v{trial}")]
            hints = []
            for k in range(6):
                start = int(rng.integers(0, frames - 20))
                hints.append(hint(start, start + 15, policy=rng.choice(["p", "q"]), rank=k + 1, vid=f"v{trial}"))
            out = simulate_review(
                generalist(frames, seed=trial), video(f"v{trial}", frames), truths,
                SimConfig(), v2_hints=hints,
            )
            assert len(out.hint_responses) == len(hints)  # all watched
            accepted = sum(1 for r in out.hint_responses if r.verdict == "accepted")
            truly_good = sum(
                1 for h in hints
                if any(t.policy_id == h.policy_id and max(t.start_frame, h.start_frame) < min(t.end_frame, h.end_frame)
                       for t in truths)
            )
            assert accepted == truly_good

    def test_v1_peaks_guide_watching(self):
        # a graph peak sits on the truth segment; tight budget still finds it
        frames = 200
        scores = np.full(frames, 0.05)
        scores[100:120] = 0.9
        graph = LineGraphHint(
            video_id="v0", policy_id="p",
            points=tuple((i, float(s)) for i, s in enumerate(scores)),
        )
        out = simulate_review(
            generalist(20, seed=3), video(frames=frames), [truth(100, 120)],
            SimConfig(), v1_hints=[graph],
        )
        assert out.decision is True

    def test_false_flags_only_on_clean_watched_runs(self):
        out = simulate_review(
            generalist(100, false_flag=1.0, seed=5), video(), [truth(0, 100)],
            SimConfig(explore_stop_after_detection=False),
        )
        # whole video is violating: nothing clean to flag
        assert all(a.start_frame >= 0 for a in out.annotations)
        organic_flags = [a for a in out.annotations if a.end_frame - a.start_frame < 100 and a.policy_id != "p"]
        assert organic_flags == []

    def test_duration_counts_watching_and_annotations(self):
        config = SimConfig(per_frame_cost=2.0, per_annotation_overhead=15.0)
        out = simulate_review(generalist(40), video(), [truth(0, 10)], config, v2_hints=[hint(0, 10)])
        assert out.duration_units == out.watched_frames * 2.0 + len(out.annotations) * 15.0


def small_corpus():
    return generate_corpus(
        CorpusConfig(
            n_videos=12, policies=("p.a", "p.b"), seed=3, violating_fraction=0.5,
            frame_count_range=(60, 90), dims=4,
        )
    )


def hints_covering_truth(corpus):
    out = {}
    for v in corpus.videos:
        v2 = []
        for k, t in enumerate(corpus.truth_for(v.video_id)):
            v2.append(
                HintSegment(
                    hint_id=f"{v.video_id}:h{k}", video_id=v.video_id, policy_id=t.policy_id,
                    start_frame=t.start_frame, end_frame=t.end_frame, max_score=0.9, rank=k + 1,
                )
            )
        if v2:
            out[v.video_id] = ([], v2)
    return out


class TestRunExperiment:
    def test_structure_and_pairing(self):
        corpus = small_corpus()
        hints = hints_covering_truth(corpus)
        results = run_experiment(
            corpus,
            {"baseline": {}, "v1_v2": hints},
            generalist_template=generalist(20, detect=0.8),
            config=SimConfig(),
            seed=5,
        )
        assert set(results) == {"baseline", "v1_v2"}
        for arm in results.values():
            assert len(arm.generalists) == 2
            assert set(arm.expert) == set(corpus.video_ids)
        # expert shared across arms
        assert results["baseline"].expert is results["v1_v2"].expert
        # paired seeds: re-running is identical
        again = run_experiment(
            corpus, {"baseline": {}, "v1_v2": hints},
            generalist_template=generalist(20, detect=0.8), config=SimConfig(), seed=5,
        )
        for arm in results:
            for g in range(2):
                for vid in corpus.video_ids:
                    assert (
                        results[arm].generalists[g][vid].to_dict()
                        == again[arm].generalists[g][vid].to_dict()
                    )

    def test_generalist_sets_use_different_seeds(self):
        corpus = small_corpus()
        results = run_experiment(
            corpus, {"baseline": {}},
            generalist_template=generalist(20, detect=0.5),
            config=SimConfig(), seed=5,
        )
        a, b = results["baseline"].generalists
        assert any(a[v].to_dict() != b[v].to_dict() for v in corpus.video_ids)

    def test_unknown_hint_videos_rejected(self):
        corpus = small_corpus()
        bogus = {"ghost": ([], [hint(0, 5, vid="ghost")])}
        with pytest.raises(ValueError, match="unknown videos"):
            run_experiment(
                corpus, {"v1_v2": bogus},
                generalist_template=generalist(20), config=SimConfig(), seed=1,
            )

    def test_zero_violating_corpus_no_positives(self):
        corpus = generate_corpus(
            CorpusConfig(n_videos=6, policies=("p.a",), seed=4, violating_fraction=0.0,
                         frame_count_range=(50, 60), dims=4)
        )
        results = run_experiment(
            corpus, {"baseline": {}},
            generalist_template=generalist(20, false_flag=0.0),
            config=SimConfig(), seed=2,
        )
        for outcomes in results["baseline"].generalists:
            assert all(not o.decision for o in outcomes.values())
