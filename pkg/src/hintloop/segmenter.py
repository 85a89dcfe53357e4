"""Threshold calibration and score-to-segment conversion.

Calibration picks, per policy, the score threshold that maximizes frame-level
recall subject to a minimum frame-level precision (default 0.40). Binarization
turns runs of above-threshold frames into segments; near-adjacent segments
(gap under 3% of the video length) are merged to avoid visual clutter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scoring import ScoreSeries
from .synthdata import TruthSegment


class CalibrationError(ValueError):
    pass


class SegmentContractError(ValueError):
    """merge_segments received unsorted or overlapping input."""


@dataclass(frozen=True)
class CalibrationResult:
    policy_id: str
    threshold: float  # +inf sentinel when infeasible
    achieved_precision: float
    achieved_recall: float
    calibration_set_size: int
    feasible: bool


@dataclass(frozen=True)
class RawSegment:
    video_id: str
    policy_id: str
    start_frame: int
    end_frame: int  # half-open
    max_score: float

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"bad segment [{self.start_frame}, {self.end_frame})")


def frame_truth_mask(frame_count: int, truth: list[TruthSegment]) -> np.ndarray:
    mask = np.zeros(frame_count, dtype=bool)
    for t in truth:
        mask[t.start_frame : min(t.end_frame, frame_count)] = True
    return mask


def calibrate_threshold(
    series: list[ScoreSeries],
    truth: list[TruthSegment],
    min_precision: float = 0.40,
    frame_counts: dict[str, int] | None = None,
) -> CalibrationResult:
    """Recall-max threshold with frame-level precision >= min_precision.

    Candidates are the distinct observed scores. Ties on recall resolve to the
    higher-precision (higher) threshold: at equal recall a lower threshold only
    adds false-positive frames. Infeasible floors yield the +inf sentinel.
    """
    if not series:
        raise CalibrationError("no score series given")
    if not 0.0 < min_precision < 1.0:
        raise CalibrationError("min_precision must be in (0, 1)")
    policy_id = series[0].policy_id
    if any(s.policy_id != policy_id for s in series):
        raise CalibrationError("calibration input mixes policies")

    all_scores = []
    all_pos = []
    for s in series:
        n = len(s.scores)
        if frame_counts and s.video_id in frame_counts and frame_counts[s.video_id] != n:
            raise CalibrationError(f"{s.video_id}: score length != frame_count")
        seg = [t for t in truth if t.video_id == s.video_id and t.policy_id == policy_id]
        all_scores.append(s.scores)
        all_pos.append(frame_truth_mask(n, seg))
    scores = np.concatenate(all_scores)
    positive = np.concatenate(all_pos)
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise CalibrationError("no positives for calibration")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = positive[order].astype(np.float64)
    block_end = np.nonzero(np.diff(s_sorted) != 0)[0]
    block_end = np.append(block_end, len(s_sorted) - 1)
    tp = np.cumsum(y_sorted)[block_end]
    predicted = block_end + 1.0
    precision = tp / predicted
    recall = tp / n_pos
    thresholds = s_sorted[block_end]

    feasible = precision >= min_precision
    if not feasible.any():
        return CalibrationResult(
            policy_id=policy_id,
            threshold=math.inf,
            achieved_precision=0.0,
            achieved_recall=0.0,
            calibration_set_size=len(scores),
            feasible=False,
        )
    best = max(
        np.nonzero(feasible)[0],
        key=lambda i: (recall[i], precision[i], thresholds[i]),
    )
    return CalibrationResult(
        policy_id=policy_id,
        threshold=float(thresholds[best]),
        achieved_precision=float(precision[best]),
        achieved_recall=float(recall[best]),
        calibration_set_size=len(scores),
        feasible=True,
    )


def binarize(series: ScoreSeries, threshold: float) -> list[RawSegment]:
    """Maximal runs of frames with score >= threshold, sorted by start."""
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    mask = series.scores >= threshold
    if not mask.any():
        return []
    edges = np.diff(mask.astype(np.int8), prepend=0, append=0)
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return [
        RawSegment(
            video_id=series.video_id,
            policy_id=series.policy_id,
            start_frame=int(a),
            end_frame=int(b),
            max_score=float(series.scores[a:b].max()),
        )
        for a, b in zip(starts, ends)
    ]


def merge_segments(
    segments: list[RawSegment], video_frames: int, gap_fraction: float = 0.03
) -> list[RawSegment]:
    """Coalesce consecutive segments whose gap is under gap_fraction of the video.

    Input must be sorted and non-overlapping, all for one (video, policy).
    The comparison is strict (<), so output gaps are >= the cutoff and the
    operation is idempotent.
    """
    if not segments:
        return []
    keys = {(s.video_id, s.policy_id) for s in segments}
    if len(keys) > 1:
        raise SegmentContractError(f"segments mix (video, policy) pairs: {sorted(keys)}")
    for prev, cur in zip(segments, segments[1:]):
        if cur.start_frame < prev.end_frame:
            raise SegmentContractError(
                f"segments unsorted or overlapping at [{prev.start_frame},{prev.end_frame}) "
                f"-> [{cur.start_frame},{cur.end_frame})"
            )
    cutoff = gap_fraction * video_frames
    merged = [segments[0]]
    for cur in segments[1:]:
        prev = merged[-1]
        if cur.start_frame - prev.end_frame < cutoff:
            merged[-1] = RawSegment(
                video_id=prev.video_id,
                policy_id=prev.policy_id,
                start_frame=prev.start_frame,
                end_frame=cur.end_frame,
                max_score=max(prev.max_score, cur.max_score),
            )
        else:
            merged.append(cur)
    return merged
