import pytest

from hintloop.feedbackstore import (
    Annotation,
    FeedbackStore,
    HintResponse,
    StoreError,
    export_training_labels,
    load_labels,
    replay_log,
    save_labels,
)
from hintloop.ranker import HintSegment
from hintloop.synthdata import Corpus, FrameFeatureSeries, VideoMeta

import numpy as np


def make_corpus(n=2, frames=100):
    videos = [VideoMeta(video_id=f"v{i}", frame_count=frames, fps=4.0) for i in range(n)]
    feats = [
        FrameFeatureSeries(video_id=v.video_id, dims=2, values=np.zeros((frames, 2)))
        for v in videos
    ]
    return Corpus(videos=videos, truth=[], features=feats)


def hint(hint_id="h1", video_id="v0", policy_id="p", start=10, end=20, rank=1):
    return HintSegment(
        hint_id=hint_id, video_id=video_id, policy_id=policy_id,
        start_frame=start, end_frame=end, max_score=0.9, rank=rank,
    )


def annotation(aid="a1", video_id="v0", start=10, end=20, origin="organic", rater="r1"):
    return Annotation(
        annotation_id=aid, video_id=video_id, rater_id=rater, policy_id="p",
        start_frame=start, end_frame=end, origin=origin, timestamp=1.0,
    )


class TestRecording:
    def test_round_trip(self):
        store = FeedbackStore(["v0", "v1"])
        store.record_annotation(annotation())
        assert [a.annotation_id for a in store.annotations] == ["a1"]

    def test_duplicate_hint_response_rejected(self):
        store = FeedbackStore(["v0"], [hint()])
        store.record_hint_response(HintResponse("h1", "r1", "accepted", 1.0))
        with pytest.raises(StoreError, match="duplicate response"):
            store.record_hint_response(HintResponse("h1", "r1", "rejected", 2.0))

    def test_same_hint_different_rater_allowed(self):
        store = FeedbackStore(["v0"], [hint()])
        store.record_hint_response(HintResponse("h1", "r1", "accepted", 1.0))
        store.record_hint_response(HintResponse("h1", "r2", "rejected", 2.0))
        assert len(store.hint_responses) == 2

    def test_unknown_hint_rejected(self):
        store = FeedbackStore(["v0"], [hint()])
        with pytest.raises(StoreError, match="unknown hint"):
            store.record_hint_response(HintResponse("ghost", "r1", "accepted", 1.0))

    def test_unknown_video_rejected(self):
        store = FeedbackStore(["v0"])
        with pytest.raises(StoreError, match="unknown video"):
            store.record_annotation(annotation(video_id="v9"))

    def test_duplicate_annotation_id_rejected(self):
        store = FeedbackStore(["v0"])
        store.record_annotation(annotation())
        with pytest.raises(StoreError, match="duplicate annotation"):
            store.record_annotation(annotation())


class TestExport:
    def test_spec_fixture_two_videos(self):
        # 1 accepted hint, 1 organic annotation, 1 rejected hint on v0; v1 untouched
        corpus = make_corpus(2)
        hints = [hint("h1", start=10, end=20), hint("h2", start=50, end=60, rank=2)]
        store = FeedbackStore(["v0", "v1"], hints)
        store.record_hint_response(HintResponse("h1", "r1", "accepted", 1.0))
        store.record_annotation(annotation("a1", start=10, end=20, origin="from_accepted_hint"))
        store.record_annotation(annotation("a2", start=70, end=80, origin="organic"))
        store.record_hint_response(HintResponse("h2", "r1", "rejected", 2.0))
        labels = export_training_labels(store, hints, corpus)
        by_polarity = {}
        for l in labels:
            by_polarity.setdefault(l.polarity, []).append(l)
        assert len(by_polarity["positive"]) == 2
        assert len(by_polarity["clean_negative"]) == 1
        assert len(by_polarity["weak_negative"]) == 1
        assert by_polarity["clean_negative"][0].start_frame == 50
        assert by_polarity["weak_negative"][0].video_id == "v1"
        assert by_polarity["weak_negative"][0].end_frame == 100

    def test_empty_store_all_weak(self):
        corpus = make_corpus(5)
        store = FeedbackStore(corpus.video_ids)
        labels = export_training_labels(store, [], corpus)
        assert len(labels) == 5
        assert all(l.polarity == "weak_negative" for l in labels)

    def test_clean_negatives_appear_once_v2_responses_exist(self):
        corpus = make_corpus(2)
        hints = [hint()]
        store = FeedbackStore(["v0", "v1"], hints)
        before = export_training_labels(store, hints, corpus)
        assert sum(1 for l in before if l.polarity == "clean_negative") == 0
        store.record_hint_response(HintResponse("h1", "r1", "rejected", 1.0))
        after = export_training_labels(store, hints, corpus)
        assert sum(1 for l in after if l.polarity == "clean_negative") == 1

    def test_conflicting_verdicts_keep_both_sides(self):
        corpus = make_corpus(1)
        hints = [hint()]
        store = FeedbackStore(["v0"], hints)
        store.record_hint_response(HintResponse("h1", "rA", "accepted", 1.0))
        store.record_annotation(annotation("a1", origin="from_accepted_hint", rater="rA"))
        store.record_hint_response(HintResponse("h1", "rB", "rejected", 2.0))
        labels = export_training_labels(store, hints, corpus)
        polarities = sorted(l.polarity for l in labels)
        assert polarities == ["clean_negative", "positive"]

    def test_weights_configurable(self):
        corpus = make_corpus(1)
        store = FeedbackStore(["v0"])
        labels = export_training_labels(store, [], corpus, weak_negative_weight=0.25)
        assert labels[0].weight == 0.25

    def test_export_is_pure_and_deterministic(self):
        corpus = make_corpus(3)
        hints = [hint()]
        store = FeedbackStore(corpus.video_ids, hints)
        store.record_annotation(annotation())
        store.record_hint_response(HintResponse("h1", "r2", "rejected", 3.0))
        a = export_training_labels(store, hints, corpus)
        b = export_training_labels(store, hints, corpus)
        assert a == b


class TestLogReplay:
    def test_replay_reproduces_export_bytes(self, tmp_path):
        corpus = make_corpus(4)
        hints = [hint(), hint("h2", video_id="v1", rank=2)]
        log = tmp_path / "store.log"
        store = FeedbackStore(corpus.video_ids, hints, log_path=log)
        store.record_annotation(annotation())
        store.record_annotation(annotation("a2", video_id="v1", start=5, end=9))
        store.record_hint_response(HintResponse("h1", "r1", "accepted", 1.5))
        store.record_hint_response(HintResponse("h2", "r2", "rejected", 2.5))

        original = tmp_path / "labels_a.jsonl"
        save_labels(export_training_labels(store, hints, corpus), original)

        replayed_store = replay_log(log, corpus.video_ids, hints)
        replayed = tmp_path / "labels_b.jsonl"
        save_labels(export_training_labels(replayed_store, hints, corpus), replayed)
        assert original.read_bytes() == replayed.read_bytes()

    def test_labels_round_trip(self, tmp_path):
        corpus = make_corpus(2)
        store = FeedbackStore(corpus.video_ids)
        store.record_annotation(annotation())
        labels = export_training_labels(store, [], corpus)
        path = tmp_path / "labels.jsonl"
        save_labels(labels, path)
        assert load_labels(path) == labels
