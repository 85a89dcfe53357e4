"""Behavioral rater models: budgeted watching, detection, hint verification.

A review builds a watch plan (hinted segments first, else line-graph peaks,
else uniformly placed blocks), detects truth segments it watched with a
configurable probability, accepts or rejects each fully watched hint against
the truth, and reports a duration linear in frames watched plus a per
annotation overhead. Everything is deterministic given the profile seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .feedbackstore import ACCEPTED, FROM_ACCEPTED_HINT, ORGANIC, REJECTED, Annotation, HintResponse
from .ranker import HintSegment, LineGraphHint
from .synthdata import Corpus, TruthSegment, VideoMeta
from .util import stable_seed

EXPERT = "expert"
GENERALIST = "generalist"


@dataclass(frozen=True)
class RaterProfile:
    rater_id: str
    kind: str  # expert | generalist
    budget_frames: int | None  # None = unbounded
    detect_prob: float = 1.0
    false_flag_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (EXPERT, GENERALIST):
            raise ValueError(f"bad rater kind {self.kind!r}")
        if not 0.0 <= self.detect_prob <= 1.0 or not 0.0 <= self.false_flag_prob <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
        if self.budget_frames is not None and self.budget_frames < 0:
            raise ValueError("budget_frames must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    block_fraction: float = 0.05
    per_frame_cost: float = 1.0
    per_annotation_overhead: float = 20.0
    verification_error_rate: float = 0.0
    explore_stop_after_detection: bool = True
    min_false_flag_run: int = 3


@dataclass
class ReviewOutcome:
    video_id: str
    rater_id: str
    decision: bool
    annotations: list[Annotation]
    hint_responses: list[HintResponse]
    duration_units: float
    watched_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "rater_id": self.rater_id,
            "decision": self.decision,
            "annotations": [
                {
                    "annotation_id": a.annotation_id,
                    "video_id": a.video_id,
                    "rater_id": a.rater_id,
                    "policy_id": a.policy_id,
                    "start_frame": a.start_frame,
                    "end_frame": a.end_frame,
                    "origin": a.origin,
                    "timestamp": a.timestamp,
                }
                for a in self.annotations
            ],
            "hint_responses": [
                {
                    "hint_id": r.hint_id,
                    "rater_id": r.rater_id,
                    "verdict": r.verdict,
                    "timestamp": r.timestamp,
                }
                for r in self.hint_responses
            ],
            "duration_units": self.duration_units,
            "watched_frames": self.watched_frames,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "ReviewOutcome":
        return cls(
            video_id=rec["video_id"],
            rater_id=rec["rater_id"],
            decision=rec["decision"],
            annotations=[Annotation(**a) for a in rec["annotations"]],
            hint_responses=[HintResponse(**r) for r in rec["hint_responses"]],
            duration_units=rec["duration_units"],
            watched_frames=rec.get("watched_frames", 0),
        )


class _Review:
    """One rater watching one video; accumulates watch mask and findings."""

    def __init__(
        self,
        profile: RaterProfile,
        video: VideoMeta,
        truth: list[TruthSegment],
        config: SimConfig,
        policy_pool: list[str],
    ) -> None:
        self.profile = profile
        self.video = video
        self.config = config
        self.policy_pool = policy_pool
        self.truth = sorted(truth, key=lambda t: (t.start_frame, t.end_frame, t.policy_id))
        self.rng = np.random.default_rng(
            stable_seed("review", profile.seed, video.video_id, profile.rater_id)
        )
        self.frames = video.frame_count
        self.budget = self.frames if profile.budget_frames is None else min(
            profile.budget_frames, self.frames
        )
        self.watched = np.zeros(self.frames, dtype=bool)
        self.detected: list[bool | None] = [None] * len(self.truth)
        self.accepted_hints: list[HintSegment] = []
        self.responses: list[HintResponse] = []
        self.block_len = max(1, round(config.block_fraction * self.frames))
        self.clock = 0.0

    def remaining(self) -> int:
        return self.budget - int(self.watched.sum())

    def watch_span(self, start: int, end: int) -> None:
        """Mark [start, end) watched, truncated to the remaining budget."""
        start = max(0, start)
        end = min(end, self.frames)
        if start >= end:
            return
        rem = self.remaining()
        if rem <= 0:
            return
        new_idx = np.nonzero(~self.watched[start:end])[0]
        take = new_idx[:rem]
        self.watched[start + take] = True
        self._detect_in_span(start, end)

    def _detect_in_span(self, start: int, end: int) -> None:
        for i, t in enumerate(self.truth):
            if self.detected[i] is not None:
                continue
            lo, hi = max(t.start_frame, start), min(t.end_frame, end)
            if lo < hi and self.watched[lo:hi].any():
                self.detected[i] = bool(self.rng.random() < self.profile.detect_prob)

    def found_anything(self) -> bool:
        return any(d for d in self.detected if d) or bool(self.accepted_hints)

    def guided_v2(self, hints: list[HintSegment]) -> None:
        for h in sorted(hints, key=lambda h: h.rank):
            span_unwatched = int((~self.watched[h.start_frame : min(h.end_frame, self.frames)]).sum())
            if span_unwatched > self.remaining():
                # can only afford part of it; no verdict for a partly seen hint
                self.watch_span(h.start_frame, h.end_frame)
                break
            self.watch_span(h.start_frame, h.end_frame)
            self._respond_to_hint(h)

    def _respond_to_hint(self, h: HintSegment) -> None:
        overlaps_truth = any(
            t.policy_id == h.policy_id
            and max(t.start_frame, h.start_frame) < min(t.end_frame, h.end_frame)
            for t in self.truth
        )
        verdict = ACCEPTED if overlaps_truth else REJECTED
        if self.config.verification_error_rate > 0 and self.rng.random() < self.config.verification_error_rate:
            verdict = REJECTED if verdict == ACCEPTED else ACCEPTED
        self.responses.append(
            HintResponse(
                hint_id=h.hint_id,
                rater_id=self.profile.rater_id,
                verdict=verdict,
                timestamp=self._tick(),
            )
        )
        if verdict == ACCEPTED:
            self.accepted_hints.append(h)

    def guided_v1(self, graphs: list[LineGraphHint]) -> None:
        # all graph points, strongest first; each seeds a block centered on it
        points = sorted(
            ((s, f, g.policy_id) for g in graphs for f, s in g.points),
            key=lambda p: (-p[0], p[1], p[2]),
        )
        for score, frame, _pid in points:
            if self.remaining() <= 0:
                return
            if self.watched[frame]:
                continue
            half = self.block_len // 2
            self.watch_span(frame - half, frame - half + self.block_len)

    def explore(self) -> None:
        misses = 0
        while self.remaining() > 0 and not self.watched.all():
            if (
                self.config.explore_stop_after_detection
                and self.profile.kind == GENERALIST
                and self.found_anything()
            ):
                return
            start = int(self.rng.integers(0, max(1, self.frames - self.block_len + 1)))
            before = int(self.watched.sum())
            self.watch_span(start, start + self.block_len)
            if int(self.watched.sum()) == before:
                misses += 1
                if misses > 20:
                    # sparse leftovers: sweep them in frame order
                    unwatched = np.nonzero(~self.watched)[0][: self.remaining()]
                    self.watched[unwatched] = True
                    self._detect_in_span(0, self.frames)
                    return

    def collect_annotations(self) -> list[Annotation]:
        annotations: list[Annotation] = []
        for h in self.accepted_hints:
            # the rater corrects the suggested span to the violation they verified
            start, end = h.start_frame, min(h.end_frame, self.frames)
            for t in self.truth:
                lo = max(t.start_frame, h.start_frame)
                hi = min(t.end_frame, h.end_frame)
                if t.policy_id == h.policy_id and lo < hi:
                    start, end = lo, min(hi, self.frames)
                    break
            annotations.append(
                Annotation(
                    annotation_id=f"{self.video.video_id}:{self.profile.rater_id}:{h.policy_id}:{h.start_frame}:{h.end_frame}:hint",
                    video_id=self.video.video_id,
                    rater_id=self.profile.rater_id,
                    policy_id=h.policy_id,
                    start_frame=start,
                    end_frame=end,
                    origin=FROM_ACCEPTED_HINT,
                    timestamp=self._tick(),
                )
            )
        for i, t in enumerate(self.truth):
            if not self.detected[i]:
                continue
            covered = any(
                h.policy_id == t.policy_id
                and max(h.start_frame, t.start_frame) < min(h.end_frame, t.end_frame)
                for h in self.accepted_hints
            )
            if covered:
                continue
            annotations.append(
                Annotation(
                    annotation_id=f"{self.video.video_id}:{self.profile.rater_id}:{t.policy_id}:{t.start_frame}:{t.end_frame}:organic",
                    video_id=self.video.video_id,
                    rater_id=self.profile.rater_id,
                    policy_id=t.policy_id,
                    start_frame=t.start_frame,
                    end_frame=t.end_frame,
                    origin=ORGANIC,
                    timestamp=self._tick(),
                )
            )
        annotations.extend(self._false_flags())
        return annotations

    def _false_flags(self) -> list[Annotation]:
        if self.profile.false_flag_prob <= 0 or not self.policy_pool:
            return []
        truth_mask = np.zeros(self.frames, dtype=bool)
        for t in self.truth:
            truth_mask[t.start_frame : min(t.end_frame, self.frames)] = True
        clean_watched = self.watched & ~truth_mask
        edges = np.diff(clean_watched.astype(np.int8), prepend=0, append=0)
        starts = np.nonzero(edges == 1)[0]
        ends = np.nonzero(edges == -1)[0]
        flags = []
        for a, b in zip(starts, ends):
            if b - a < self.config.min_false_flag_run:
                continue
            if self.rng.random() < self.profile.false_flag_prob:
                policy = str(self.rng.choice(self.policy_pool))
                flags.append(
                    Annotation(
                        annotation_id=f"{self.video.video_id}:{self.profile.rater_id}:{policy}:{a}:{b}:flag",
                        video_id=self.video.video_id,
                        rater_id=self.profile.rater_id,
                        policy_id=policy,
                        start_frame=int(a),
                        end_frame=int(b),
                        origin=ORGANIC,
                        timestamp=self._tick(),
                    )
                )
        return flags

    def _tick(self) -> float:
        self.clock += 1.0
        return self.clock


def simulate_review(
    profile: RaterProfile,
    video: VideoMeta,
    truth: list[TruthSegment],
    config: SimConfig,
    v1_hints: list[LineGraphHint] | None = None,
    v2_hints: list[HintSegment] | None = None,
    policy_pool: list[str] | None = None,
) -> ReviewOutcome:
    """Run one review. Hint lists may be empty/None for the unassisted arm."""
    v1_hints = v1_hints or []
    v2_hints = v2_hints or []
    for h in v2_hints:
        if h.video_id != video.video_id:
            raise ValueError(f"hint {h.hint_id} is for video {h.video_id}, not {video.video_id}")
    for g in v1_hints:
        if g.video_id != video.video_id:
            raise ValueError(f"line graph for video {g.video_id}, not {video.video_id}")
    for t in truth:
        if t.video_id != video.video_id:
            raise ValueError("truth segments belong to a different video")

    review = _Review(profile, video, truth, config, policy_pool or [])
    if profile.budget_frames is None:
        review.watched[:] = True
        review._detect_in_span(0, review.frames)
        for h in sorted(v2_hints, key=lambda h: h.rank):
            review._respond_to_hint(h)
    else:
        if v2_hints:
            review.guided_v2(v2_hints)
        elif v1_hints:
            review.guided_v1(v1_hints)
        review.explore()

    annotations = review.collect_annotations()
    watched_count = int(review.watched.sum())
    duration = (
        watched_count * config.per_frame_cost
        + len(annotations) * config.per_annotation_overhead
    )
    return ReviewOutcome(
        video_id=video.video_id,
        rater_id=profile.rater_id,
        decision=bool(annotations),
        annotations=annotations,
        hint_responses=review.responses,
        duration_units=duration,
        watched_frames=watched_count,
    )


@dataclass
class ArmOutcomes:
    arm: str
    expert: dict[str, ReviewOutcome]
    generalists: list[dict[str, ReviewOutcome]] = field(default_factory=list)


def run_experiment(
    corpus: Corpus,
    hints_by_arm: dict[str, dict[str, tuple[list[LineGraphHint], list[HintSegment]]]],
    generalist_template: RaterProfile,
    config: SimConfig,
    seed: int,
    n_generalist_sets: int = 2,
    expert_template: RaterProfile | None = None,
) -> dict[str, ArmOutcomes]:
    """Paired-arm experiment: 1 expert + n generalist reviews per video per arm.

    Arms share the corpus and the per-(video, rater) seeds, so outcome
    differences are attributable to the hints alone. Expert reviews never use
    hints and are shared across arms as the ground truth.
    """
    truth_by_video: dict[str, list] = {}
    for t in corpus.truth:
        truth_by_video.setdefault(t.video_id, []).append(t)
    policy_pool = sorted({t.policy_id for t in corpus.truth})
    video_ids = set(corpus.video_ids)
    for arm, hints in hints_by_arm.items():
        unknown = set(hints) - video_ids
        if unknown:
            raise ValueError(f"arm {arm!r} has hints for unknown videos: {sorted(unknown)[:3]}")

    expert = expert_template or RaterProfile(
        rater_id="expert", kind=EXPERT, budget_frames=None, detect_prob=1.0, seed=seed
    )
    expert_outcomes = {
        v.video_id: simulate_review(
            expert, v, truth_by_video.get(v.video_id, []), config, policy_pool=policy_pool
        )
        for v in corpus.videos
    }

    results: dict[str, ArmOutcomes] = {}
    for arm in sorted(hints_by_arm):
        hints = hints_by_arm[arm]
        arm_out = ArmOutcomes(arm=arm, expert=expert_outcomes, generalists=[])
        for g in range(n_generalist_sets):
            profile = RaterProfile(
                rater_id=f"gen{g}",
                kind=GENERALIST,
                budget_frames=generalist_template.budget_frames,
                detect_prob=generalist_template.detect_prob,
                false_flag_prob=generalist_template.false_flag_prob,
                seed=stable_seed("generalist-set", seed, g),
            )
            outcomes = {}
            for v in corpus.videos:
                v1, v2 = hints.get(v.video_id, ([], []))
                outcomes[v.video_id] = simulate_review(
                    profile,
                    v,
                    truth_by_video.get(v.video_id, []),
                    config,
                    v1_hints=v1,
                    v2_hints=v2,
                    policy_pool=policy_pool,
                )
            arm_out.generalists.append(outcomes)
        results[arm] = arm_out
    return results
