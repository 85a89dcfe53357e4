"""Hint assembly: rank candidate segments and build both hint payload styles.

V2 hints are the top-N segments per video under a lexicographic priority
(policy egregiousness, then max score). V1 hints are per-policy score line
graphs across the whole timeline, limited to the most frequent policies and
downsampled by bucket-max so peaks survive.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .scoring import ScoreSeries
from .segmenter import RawSegment
from .taxonomy import PolicyTaxonomy


@dataclass(frozen=True)
class RankerConfig:
    top_n: int = 5
    max_points: int = 512
    v1_policy_limit: int = 7

    def __post_init__(self) -> None:
        if self.top_n < 1 or self.max_points < 1 or self.v1_policy_limit < 1:
            raise ValueError("ranker config values must be positive")


@dataclass(frozen=True)
class HintSegment:
    hint_id: str
    video_id: str
    policy_id: str
    start_frame: int
    end_frame: int  # half-open
    max_score: float
    rank: int  # 1-based, contiguous within a video


@dataclass(frozen=True)
class LineGraphHint:
    video_id: str
    policy_id: str
    points: tuple[tuple[int, float], ...]  # (frame, score), ordered by frame


def hint_id_for(video_id: str, policy_id: str, start_frame: int, end_frame: int) -> str:
    raw = f"{video_id}|{policy_id}|{start_frame}|{end_frame}".encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


def rank_segments(segments: list[RawSegment], taxonomy: PolicyTaxonomy) -> list[RawSegment]:
    """Deterministic total order: egregiousness desc, max score desc, start asc, policy asc."""
    videos = {s.video_id for s in segments}
    if len(videos) > 1:
        raise ValueError(f"segments span multiple videos: {sorted(videos)}")
    tiers = {s.policy_id: taxonomy.get(s.policy_id).egregiousness for s in segments}
    return sorted(
        segments,
        key=lambda s: (-tiers[s.policy_id], -s.max_score, s.start_frame, s.policy_id),
    )


def top_n(ranked: list[RawSegment], n: int) -> list[HintSegment]:
    """First min(n, len) ranked segments, ranks 1..k."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [
        HintSegment(
            hint_id=hint_id_for(s.video_id, s.policy_id, s.start_frame, s.end_frame),
            video_id=s.video_id,
            policy_id=s.policy_id,
            start_frame=s.start_frame,
            end_frame=s.end_frame,
            max_score=s.max_score,
            rank=i + 1,
        )
        for i, s in enumerate(ranked[:n])
    ]


def downsample_bucket_max(scores: np.ndarray, max_points: int) -> list[tuple[int, float]]:
    """At most max_points (frame, score) pairs; each bucket keeps its peak."""
    n = len(scores)
    if n <= max_points:
        return [(i, float(s)) for i, s in enumerate(scores)]
    bounds = (np.arange(max_points + 1) * n) // max_points
    points = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        arg = int(lo + np.argmax(scores[lo:hi]))
        points.append((arg, float(scores[arg])))
    return points


def build_v1_hints(
    series: list[ScoreSeries],
    taxonomy: PolicyTaxonomy,
    config: RankerConfig,
    policy_frequency: dict[str, int],
) -> list[LineGraphHint]:
    """Line graphs for the most frequent hint-enabled policies of one video.

    policy_frequency ranks policies (e.g. truth-segment counts on the
    calibration corpus); ties break on policy id.
    """
    videos = {s.video_id for s in series}
    if len(videos) > 1:
        raise ValueError(f"series span multiple videos: {sorted(videos)}")
    enabled = {p.id for p in taxonomy.policies if p.hint_enabled}
    eligible = [s for s in series if s.policy_id in enabled]
    eligible.sort(key=lambda s: (-policy_frequency.get(s.policy_id, 0), s.policy_id))
    selected = eligible[: config.v1_policy_limit]
    return [
        LineGraphHint(
            video_id=s.video_id,
            policy_id=s.policy_id,
            points=tuple(downsample_bucket_max(s.scores, config.max_points)),
        )
        for s in selected
    ]


def hint_payload(video_id: str, v1: list[LineGraphHint], v2: list[HintSegment]) -> dict:
    """Wire form served to rater clients."""
    return {
        "video_id": video_id,
        "v1": [
            {
                "video_id": g.video_id,
                "policy_id": g.policy_id,
                "points": [[f, s] for f, s in g.points],
            }
            for g in v1
        ],
        "v2": [
            {
                "hint_id": h.hint_id,
                "video_id": h.video_id,
                "policy_id": h.policy_id,
                "start_frame": h.start_frame,
                "end_frame": h.end_frame,
                "max_score": h.max_score,
                "rank": h.rank,
            }
            for h in v2
        ],
    }


def payload_to_hints(payload: dict) -> tuple[list[LineGraphHint], list[HintSegment]]:
    v1 = [
        LineGraphHint(
            video_id=g["video_id"],
            policy_id=g["policy_id"],
            points=tuple((int(f), float(s)) for f, s in g["points"]),
        )
        for g in payload.get("v1", [])
    ]
    v2 = [HintSegment(**h) for h in payload.get("v2", [])]
    return v1, v2
