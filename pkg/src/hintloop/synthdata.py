"""Synthetic desk-scale corpora: videos, ground-truth violation segments, features.

Background frames are isotropic gaussian noise; frames inside a truth segment
get a policy-specific mean shift along a per-policy direction, so a linear
scorer can separate them and more labels genuinely improve it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .util import read_jsonl, stable_seed, write_jsonl


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    frame_count: int
    fps: float

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError(f"{self.video_id}: frame_count must be >= 1")
        if self.fps <= 0:
            raise ValueError(f"{self.video_id}: fps must be > 0")


@dataclass(frozen=True)
class TruthSegment:
    video_id: str
    policy_id: str
    start_frame: int
    end_frame: int  # half-open

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(
                f"{self.video_id}/{self.policy_id}: bad segment [{self.start_frame}, {self.end_frame})"
            )


@dataclass
class FrameFeatureSeries:
    video_id: str
    dims: int
    values: np.ndarray  # frame_count x dims

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.dims:
            raise ValueError(f"{self.video_id}: values must be frame_count x {self.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.video_id}: features must be finite")

    @property
    def frame_count(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class CorpusConfig:
    n_videos: int
    policies: tuple[str, ...]
    seed: int
    violating_fraction: float = 0.15
    frame_count_range: tuple[int, int] = (120, 360)
    fps: float = 4.0
    dims: int = 16
    signal_shift: float = 2.0
    segment_length_range: tuple[int, int] = (8, 40)
    segments_per_video_range: tuple[int, int] = (1, 3)
    id_prefix: str = "v"

    def __post_init__(self) -> None:
        if not 0.0 <= self.violating_fraction <= 1.0:
            raise ValueError("violating_fraction must be in [0, 1]")
        if self.violating_fraction > 0 and not self.policies:
            raise ValueError("empty policy list with violating_fraction > 0")
        if self.n_videos < 1:
            raise ValueError("n_videos must be >= 1")
        if self.frame_count_range[0] < 1 or self.frame_count_range[0] > self.frame_count_range[1]:
            raise ValueError("bad frame_count_range")
        if self.segment_length_range[0] < 1 or self.segment_length_range[0] > self.segment_length_range[1]:
            raise ValueError("bad segment_length_range")


@dataclass
class Corpus:
    videos: list[VideoMeta]
    truth: list[TruthSegment]
    features: list[FrameFeatureSeries]
    _features_by_video: dict[str, FrameFeatureSeries] = field(default_factory=dict, repr=False)

    def features_for(self, video_id: str) -> FrameFeatureSeries:
        if not self._features_by_video:
            self._features_by_video = {f.video_id: f for f in self.features}
        return self._features_by_video[video_id]

    def truth_for(self, video_id: str, policy_id: str | None = None) -> list[TruthSegment]:
        return [
            t
            for t in self.truth
            if t.video_id == video_id and (policy_id is None or t.policy_id == policy_id)
        ]

    @property
    def video_ids(self) -> list[str]:
        return [v.video_id for v in self.videos]


def policy_direction(policy_id: str, dims: int) -> np.ndarray:
    """Deterministic unit direction in feature space for a policy's signal."""
    rng = np.random.default_rng(stable_seed("policy-direction", policy_id, dims))
    v = rng.normal(size=dims)
    return v / np.linalg.norm(v)


def generate_corpus(config: CorpusConfig) -> Corpus:
    """Generate a corpus; deterministic for a fixed config (seed included)."""
    rng = np.random.default_rng(stable_seed("corpus", config.seed))
    n_violating = int(config.n_videos * config.violating_fraction + 0.5)
    violating_idx = set(rng.choice(config.n_videos, size=n_violating, replace=False).tolist())

    videos: list[VideoMeta] = []
    truth: list[TruthSegment] = []
    features: list[FrameFeatureSeries] = []
    directions = {p: policy_direction(p, config.dims) for p in config.policies}

    for i in range(config.n_videos):
        video_id = f"{config.id_prefix}{i:05d}"
        vrng = np.random.default_rng(stable_seed("video", config.seed, video_id))
        lo, hi = config.frame_count_range
        frame_count = int(vrng.integers(lo, hi + 1))
        videos.append(VideoMeta(video_id=video_id, frame_count=frame_count, fps=config.fps))

        values = vrng.normal(0.0, 1.0, size=(frame_count, config.dims))
        if i in violating_idx:
            segments = _place_segments(vrng, video_id, frame_count, config)
            for seg in segments:
                values[seg.start_frame : seg.end_frame] += (
                    config.signal_shift * directions[seg.policy_id]
                )
            truth.extend(segments)
        # quantize once so in-memory and persisted corpora are identical
        values = np.round(values, 6)
        features.append(FrameFeatureSeries(video_id=video_id, dims=config.dims, values=values))

    truth.sort(key=lambda t: (t.video_id, t.policy_id, t.start_frame))
    return Corpus(videos=videos, truth=truth, features=features)


def _place_segments(
    rng: np.random.Generator, video_id: str, frame_count: int, config: CorpusConfig
) -> list[TruthSegment]:
    """Place 1..k segments, non-overlapping per policy; at least one always lands."""
    lo_n, hi_n = config.segments_per_video_range
    n_target = int(rng.integers(lo_n, hi_n + 1))
    placed: list[TruthSegment] = []
    by_policy: dict[str, list[tuple[int, int]]] = {}
    for _ in range(n_target):
        policy = str(rng.choice(list(config.policies)))
        lo_l, hi_l = config.segment_length_range
        length = int(rng.integers(lo_l, hi_l + 1))
        length = min(length, frame_count)
        for _attempt in range(20):
            start = int(rng.integers(0, frame_count - length + 1))
            span = (start, start + length)
            if all(span[1] <= s or span[0] >= e for s, e in by_policy.get(policy, [])):
                by_policy.setdefault(policy, []).append(span)
                placed.append(
                    TruthSegment(
                        video_id=video_id,
                        policy_id=policy,
                        start_frame=span[0],
                        end_frame=span[1],
                    )
                )
                break
    if not placed:
        # a violating video must violate something; fall back to a fixed spot
        policy = str(rng.choice(list(config.policies)))
        length = min(config.segment_length_range[0], frame_count)
        placed.append(
            TruthSegment(video_id=video_id, policy_id=policy, start_frame=0, end_frame=length)
        )
    return placed


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    directory = Path(directory)
    write_jsonl(
        directory / "videos.jsonl",
        (
            {"video_id": v.video_id, "frame_count": v.frame_count, "fps": v.fps}
            for v in corpus.videos
        ),
    )
    write_jsonl(
        directory / "truth.jsonl",
        (
            {
                "video_id": t.video_id,
                "policy_id": t.policy_id,
                "start_frame": t.start_frame,
                "end_frame": t.end_frame,
            }
            for t in corpus.truth
        ),
    )
    write_jsonl(
        directory / "features.jsonl",
        (
            {"video_id": f.video_id, "dims": f.dims, "values": f.values.tolist()}
            for f in corpus.features
        ),
    )


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    videos = [VideoMeta(**rec) for rec in read_jsonl(directory / "videos.jsonl")]
    truth = [TruthSegment(**rec) for rec in read_jsonl(directory / "truth.jsonl")]
    features = [
        FrameFeatureSeries(
            video_id=rec["video_id"], dims=rec["dims"], values=np.array(rec["values"])
        )
        for rec in read_jsonl(directory / "features.jsonl")
    ]
    return Corpus(videos=videos, truth=truth, features=features)
