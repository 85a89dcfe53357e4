"""Sliding-window scoring over per-frame features, plus a trainable reference scorer.

Windows of n frames (stride 1) start at every frame; rows past the end of the
video are padded with zero vectors. Window features are flat-concatenated and
scored by a per-policy logistic-linear model, standing in for the production
multi-label network so the retraining loop stays fast and deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .feedbackstore import CLEAN_NEGATIVE, POSITIVE, WEAK_NEGATIVE, TrainingLabel
from .synthdata import Corpus, FrameFeatureSeries
from .util import read_json, stable_seed, write_json

logger = logging.getLogger(__name__)

FLAT_CONCAT = "flat_concat"


@dataclass(frozen=True)
class ScorerConfig:
    window_frames: int = 16
    aggregation: str = FLAT_CONCAT

    def __post_init__(self) -> None:
        if self.window_frames < 1:
            raise ValueError("window_frames must be >= 1")
        if self.aggregation != FLAT_CONCAT:
            raise ValueError(f"unsupported aggregation {self.aggregation!r}")


@dataclass
class ScoreSeries:
    video_id: str
    policy_id: str
    scores: np.ndarray  # one score per start frame, each in [0, 1]

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1:
            raise ValueError("scores must be a 1-d vector")
        if len(self.scores) and (self.scores.min() < 0.0 or self.scores.max() > 1.0):
            raise ValueError("scores must lie in [0, 1]")


@dataclass
class PolicyWeights:
    weights: np.ndarray  # length window_frames * dims
    bias: float


@dataclass
class ScorerModel:
    window_frames: int
    dims: int
    policies: dict[str, PolicyWeights]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AucprReport:
    policy_id: str
    aucpr: float | None  # None when undefined (no positives in the eval set)
    positive_count: int
    negative_count: int


@dataclass(frozen=True)
class TrainHyperparams:
    learning_rate: float = 0.5
    epochs: int = 300
    seed: int = 0
    dedup: bool = True
    windows_per_segment: int = 8
    windows_per_weak_video: int = 8


def aggregate_window(features: FrameFeatureSeries, start: int, n: int) -> np.ndarray:
    """Rows start..start+n flat-concatenated; rows past the last frame are zeros."""
    frame_count = features.frame_count
    if not 0 <= start < frame_count:
        raise IndexError(f"window start {start} out of range [0, {frame_count})")
    out = np.zeros(n * features.dims)
    avail = min(n, frame_count - start)
    out[: avail * features.dims] = features.values[start : start + avail].ravel()
    return out


def _window_matrix(features: FrameFeatureSeries, n: int) -> np.ndarray:
    """All frame_count windows at once: frame_count x (n * dims), zero-padded tail."""
    padded = np.vstack([features.values, np.zeros((n - 1, features.dims))]) if n > 1 else features.values
    windows = np.lib.stride_tricks.sliding_window_view(padded, (n, features.dims))
    return windows.reshape(features.frame_count, n * features.dims).copy()


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def score_video(
    model: ScorerModel,
    features: FrameFeatureSeries,
    config: ScorerConfig,
    policy_ids: list[str] | None = None,
) -> list[ScoreSeries]:
    """One score per start frame for each requested policy (default: all in the model)."""
    if model.window_frames != config.window_frames:
        raise ValueError(
            f"model window {model.window_frames} != config window {config.window_frames}"
        )
    if model.dims != features.dims:
        raise ValueError(f"model dims {model.dims} != feature dims {features.dims}")
    ids = list(model.policies) if policy_ids is None else policy_ids
    for pid in ids:
        if pid not in model.policies:
            raise ValueError(f"model has no policy {pid!r}")
    X = _window_matrix(features, config.window_frames)
    series = []
    for pid in ids:
        pw = model.policies[pid]
        scores = _sigmoid(X @ pw.weights + pw.bias)
        series.append(ScoreSeries(video_id=features.video_id, policy_id=pid, scores=scores))
    return series


def _label_window_starts(
    label: TrainingLabel,
    frame_count: int,
    window_frames: int,
    per_segment: int,
    per_weak: int,
    seed: int,
) -> np.ndarray:
    """Deterministic window-start sample for one label, independent of label order.

    Segment labels only admit starts whose window overlaps the span by at least
    half a window (or the whole span if shorter), so a short segment does not
    contribute mostly-background examples.
    """
    rng = np.random.default_rng(stable_seed("label-windows", seed, label.key()))
    if label.polarity == WEAK_NEGATIVE:
        k = min(per_weak, frame_count)
        return np.sort(rng.choice(frame_count, size=k, replace=False))
    lo = max(0, label.start_frame)
    end = min(label.end_frame, frame_count)
    if end <= lo:
        return np.array([], dtype=int)
    min_overlap = min(end - lo, max(1, window_frames // 2))
    hi = min(end - min_overlap, frame_count - 1)  # inclusive
    span = hi - lo + 1
    if span <= 0:
        return np.array([], dtype=int)
    k = min(per_segment, span)
    return lo + np.sort(rng.choice(span, size=k, replace=False))


def build_examples(
    labels: list[TrainingLabel],
    corpus: Corpus,
    config: ScorerConfig,
    seed: int,
    windows_per_segment: int = 8,
    windows_per_weak_video: int = 8,
    dedup: bool = True,
) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-policy (X, y, sample_weight) built from labeled spans.

    Weak whole-video negatives (policy "*") contribute negatives to every
    policy that has at least one specific label.
    """
    if dedup:
        seen: set[str] = set()
        unique = []
        for l in labels:
            if l.key() not in seen:
                seen.add(l.key())
                unique.append(l)
        labels = unique
    specific = [l for l in labels if l.policy_id != "*"]
    weak = [l for l in labels if l.policy_id == "*"]
    policy_ids = sorted({l.policy_id for l in specific})

    window_cache: dict[str, np.ndarray] = {}

    def windows_for(video_id: str) -> np.ndarray:
        if video_id not in window_cache:
            window_cache[video_id] = _window_matrix(
                corpus.features_for(video_id), config.window_frames
            )
        return window_cache[video_id]

    out: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for pid in policy_ids:
        rows, ys, ws = [], [], []
        for l in [x for x in specific if x.policy_id == pid] + weak:
            frame_count = corpus.features_for(l.video_id).frame_count
            starts = _label_window_starts(
                l, frame_count, config.window_frames, windows_per_segment,
                windows_per_weak_video, seed,
            )
            if len(starts) == 0:
                continue
            rows.append(windows_for(l.video_id)[starts])
            y = 1.0 if l.polarity == POSITIVE else 0.0
            ys.append(np.full(len(starts), y))
            ws.append(np.full(len(starts), l.weight))
        if not rows:
            continue
        out[pid] = (np.vstack(rows), np.concatenate(ys), np.concatenate(ws))
    return out


def train_scorer(
    labels: list[TrainingLabel],
    corpus: Corpus,
    config: ScorerConfig,
    hyper: TrainHyperparams,
) -> ScorerModel:
    """Per-policy logistic regression by full-batch gradient descent.

    Policies lacking a positive or a negative example are skipped with a
    warning. Zero epochs leaves the zero-initialized model untouched.
    """
    dims = corpus.features[0].dims if corpus.features else 0
    examples = build_examples(
        labels,
        corpus,
        config,
        seed=hyper.seed,
        windows_per_segment=hyper.windows_per_segment,
        windows_per_weak_video=hyper.windows_per_weak_video,
        dedup=hyper.dedup,
    )
    policies: dict[str, PolicyWeights] = {}
    counts: dict[str, dict[str, int]] = {}
    for pid, (X, y, w) in sorted(examples.items()):
        n_pos = int((y == 1.0).sum())
        n_neg = int((y == 0.0).sum())
        if n_pos == 0:
            logger.warning("policy %s skipped: no positive labels", pid)
            continue
        if n_neg == 0:
            logger.warning("policy %s skipped: no negative labels", pid)
            continue
        # balance the classes so a flood of negatives (rejected hints) cannot
        # drown the positives; relative weights within each class survive
        wb = w * np.where(y == 1.0, 0.5 / w[y == 1.0].sum(), 0.5 / w[y == 0.0].sum())
        weights = np.zeros(X.shape[1])
        bias = 0.0
        for _ in range(hyper.epochs):
            p = _sigmoid(X @ weights + bias)
            err = (p - y) * wb
            weights -= hyper.learning_rate * (X.T @ err)
            bias -= hyper.learning_rate * err.sum()
        policies[pid] = PolicyWeights(weights=weights, bias=bias)
        counts[pid] = {"positives": n_pos, "negatives": n_neg}
    label_counts = {
        POSITIVE: sum(1 for l in labels if l.polarity == POSITIVE),
        CLEAN_NEGATIVE: sum(1 for l in labels if l.polarity == CLEAN_NEGATIVE),
        WEAK_NEGATIVE: sum(1 for l in labels if l.polarity == WEAK_NEGATIVE),
    }
    metadata = {
        "epochs": hyper.epochs,
        "label_counts": label_counts,
        "example_counts": counts,
        "label_keys": sorted({l.key() for l in labels}),
    }
    return ScorerModel(
        window_frames=config.window_frames, dims=dims, policies=policies, metadata=metadata
    )


def aucpr(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Area under the precision-recall step curve (average precision).

    Thresholds sweep the distinct scores descending; tied scores enter as one
    block. Returns None when the set has no positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = labels.sum()
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # block ends where the score changes (last index of each distinct score)
    block_end = np.nonzero(np.diff(s) != 0)[0]
    block_end = np.append(block_end, len(s) - 1)
    tp = np.cumsum(y)[block_end]
    k = block_end + 1.0
    precision = tp / k
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def eval_aucpr(
    model: ScorerModel,
    eval_labels: list[TrainingLabel],
    corpus: Corpus,
    config: ScorerConfig,
    seed: int = 1,
) -> dict[str, AucprReport]:
    """AUCPR per policy on a labeled eval set disjoint from the training labels."""
    trained_keys = set(model.metadata.get("label_keys", []))
    overlap = trained_keys & {l.key() for l in eval_labels}
    if overlap:
        raise ValueError(f"eval set overlaps training labels: {sorted(overlap)[:3]}...")
    examples = build_examples(labels=eval_labels, corpus=corpus, config=config, seed=seed)
    reports: dict[str, AucprReport] = {}
    for pid, (X, y, _w) in sorted(examples.items()):
        if pid not in model.policies:
            continue
        pw = model.policies[pid]
        scores = _sigmoid(X @ pw.weights + pw.bias)
        reports[pid] = AucprReport(
            policy_id=pid,
            aucpr=aucpr(scores, y),
            positive_count=int((y == 1.0).sum()),
            negative_count=int((y == 0.0).sum()),
        )
    return reports


def save_score_series(series: list[ScoreSeries], path: str | Path) -> None:
    from .util import write_jsonl

    write_jsonl(
        path,
        (
            {"video_id": s.video_id, "policy_id": s.policy_id, "scores": s.scores.tolist()}
            for s in series
        ),
    )


def load_score_series(path: str | Path) -> list[ScoreSeries]:
    from .util import read_jsonl

    return [
        ScoreSeries(video_id=r["video_id"], policy_id=r["policy_id"], scores=np.array(r["scores"]))
        for r in read_jsonl(path)
    ]


def save_model(model: ScorerModel, path: str | Path) -> None:
    write_json(
        path,
        {
            "window_frames": model.window_frames,
            "dims": model.dims,
            "policies": {
                pid: {"weights": pw.weights.tolist(), "bias": pw.bias}
                for pid, pw in model.policies.items()
            },
            "metadata": model.metadata,
        },
    )


def load_model(path: str | Path) -> ScorerModel:
    raw = read_json(path)
    return ScorerModel(
        window_frames=raw["window_frames"],
        dims=raw["dims"],
        policies={
            pid: PolicyWeights(weights=np.array(p["weights"]), bias=p["bias"])
            for pid, p in raw["policies"].items()
        },
        metadata=raw["metadata"],
    )
