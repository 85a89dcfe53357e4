"""Append-only store for rater annotations and hint responses, plus label export.

Every write is a line in a JSONL log; replaying the log reproduces the store
and its export byte for byte. Export emits three label polarities: positives
from annotations (organic or accepted hints), clean negatives from rejected
hints, and weak whole-video negatives from videos nobody annotated.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .synthdata import Corpus

if TYPE_CHECKING:
    from .ranker import HintSegment

LOG_SCHEMA_VERSION = 1

POSITIVE = "positive"
CLEAN_NEGATIVE = "clean_negative"
WEAK_NEGATIVE = "weak_negative"

ORGANIC = "organic"
FROM_ACCEPTED_HINT = "from_accepted_hint"

ACCEPTED = "accepted"
REJECTED = "rejected"


class StoreError(ValueError):
    """Unknown reference or duplicate write."""


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    video_id: str
    rater_id: str
    policy_id: str
    start_frame: int
    end_frame: int  # half-open
    origin: str  # organic | from_accepted_hint
    timestamp: float

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"annotation {self.annotation_id}: bad span")
        if self.origin not in (ORGANIC, FROM_ACCEPTED_HINT):
            raise ValueError(f"annotation {self.annotation_id}: bad origin {self.origin!r}")


@dataclass(frozen=True)
class HintResponse:
    hint_id: str
    rater_id: str
    verdict: str  # accepted | rejected
    timestamp: float

    def __post_init__(self) -> None:
        if self.verdict not in (ACCEPTED, REJECTED):
            raise ValueError(f"hint response {self.hint_id}: bad verdict {self.verdict!r}")


@dataclass(frozen=True)
class TrainingLabel:
    video_id: str
    policy_id: str
    start_frame: int
    end_frame: int  # half-open
    polarity: str  # positive | clean_negative | weak_negative
    weight: float
    source: str

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError("label weight must be > 0")
        if self.polarity not in (POSITIVE, CLEAN_NEGATIVE, WEAK_NEGATIVE):
            raise ValueError(f"bad polarity {self.polarity!r}")

    def key(self) -> str:
        """Identity used for dedup and train/eval disjointness checks."""
        return f"{self.video_id}|{self.policy_id}|{self.start_frame}|{self.end_frame}|{self.polarity}"


class FeedbackStore:
    """Single-writer append log of annotations and hint responses.

    known_videos / known hint ids gate referential integrity; a log path makes
    writes durable (one JSON line per record).
    """

    def __init__(
        self,
        known_videos: Iterable[str],
        known_hints: Iterable["HintSegment"] = (),
        log_path: str | Path | None = None,
    ) -> None:
        self._known_videos = set(known_videos)
        self._hints_by_id = {h.hint_id: h for h in known_hints}
        self._annotations: list[Annotation] = []
        self._responses: list[HintResponse] = []
        self._response_keys: set[tuple[str, str]] = set()
        self._annotation_ids: set[str] = set()
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)

    @property
    def annotations(self) -> list[Annotation]:
        return list(self._annotations)

    @property
    def hint_responses(self) -> list[HintResponse]:
        return list(self._responses)

    def hint(self, hint_id: str) -> "HintSegment":
        try:
            return self._hints_by_id[hint_id]
        except KeyError:
            raise StoreError(f"unknown hint id {hint_id!r}") from None

    def record_annotation(self, a: Annotation) -> None:
        with self._lock:
            if a.video_id not in self._known_videos:
                raise StoreError(f"unknown video id {a.video_id!r}")
            if a.annotation_id in self._annotation_ids:
                raise StoreError(f"duplicate annotation id {a.annotation_id!r}")
            self._append_log("annotation", _annotation_to_dict(a))
            self._annotations.append(a)
            self._annotation_ids.add(a.annotation_id)

    def record_hint_response(self, r: HintResponse) -> None:
        with self._lock:
            if r.hint_id not in self._hints_by_id:
                raise StoreError(f"unknown hint id {r.hint_id!r}")
            key = (r.hint_id, r.rater_id)
            if key in self._response_keys:
                raise StoreError(f"duplicate response to hint {r.hint_id!r} by {r.rater_id!r}")
            self._append_log("hint_response", _response_to_dict(r))
            self._responses.append(r)
            self._response_keys.add(key)

    def _append_log(self, kind: str, record: dict) -> None:
        if not self._log_path:
            return
        line = json.dumps(
            {"v": LOG_SCHEMA_VERSION, "kind": kind, "record": record},
            sort_keys=True,
            separators=(",", ":"),
        )
        with self._log_path.open("a", encoding="utf-8") as f:
            f.write(line + "\n")

    def snapshot(self) -> dict:
        """Consistent point-in-time copy of store contents."""
        with self._lock:
            return {
                "v": LOG_SCHEMA_VERSION,
                "annotations": [_annotation_to_dict(a) for a in self._annotations],
                "hint_responses": [_response_to_dict(r) for r in self._responses],
            }


def replay_log(
    log_path: str | Path,
    known_videos: Iterable[str],
    known_hints: Iterable["HintSegment"] = (),
    new_log_path: str | Path | None = None,
) -> FeedbackStore:
    """Rebuild a store from its append log."""
    store = FeedbackStore(known_videos, known_hints, log_path=new_log_path)
    for rec in _read_log(log_path):
        if rec["kind"] == "annotation":
            store.record_annotation(Annotation(**rec["record"]))
        elif rec["kind"] == "hint_response":
            store.record_hint_response(HintResponse(**rec["record"]))
        else:
            raise StoreError(f"unknown log record kind {rec['kind']!r}")
    return store


def _read_log(path: str | Path) -> Iterable[dict]:
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def export_training_labels(
    store: FeedbackStore,
    hints: Iterable["HintSegment"],
    corpus: Corpus,
    positive_weight: float = 1.0,
    clean_negative_weight: float = 1.0,
    weak_negative_weight: float = 0.3,
) -> list[TrainingLabel]:
    """Pure function of store contents; deterministic ordering.

    Positives: every annotation. Clean negatives: every rejected hint, policy
    specific. Weak negatives: whole videos with zero annotations from any
    rater (noisy: unwatched regions may still violate).
    """
    hints_by_id = {h.hint_id: h for h in hints}
    labels: list[TrainingLabel] = []
    for a in store.annotations:
        labels.append(
            TrainingLabel(
                video_id=a.video_id,
                policy_id=a.policy_id,
                start_frame=a.start_frame,
                end_frame=a.end_frame,
                polarity=POSITIVE,
                weight=positive_weight,
                source=f"annotation:{a.annotation_id}",
            )
        )
    for r in store.hint_responses:
        if r.verdict != REJECTED:
            continue
        h = hints_by_id.get(r.hint_id)
        if h is None:
            raise StoreError(f"response references unknown hint {r.hint_id!r}")
        labels.append(
            TrainingLabel(
                video_id=h.video_id,
                policy_id=h.policy_id,
                start_frame=h.start_frame,
                end_frame=h.end_frame,
                polarity=CLEAN_NEGATIVE,
                weight=clean_negative_weight,
                source=f"rejected_hint:{r.hint_id}:{r.rater_id}",
            )
        )
    annotated_videos = {a.video_id for a in store.annotations}
    for v in corpus.videos:
        if v.video_id not in annotated_videos:
            labels.append(
                TrainingLabel(
                    video_id=v.video_id,
                    policy_id="*",
                    start_frame=0,
                    end_frame=v.frame_count,
                    polarity=WEAK_NEGATIVE,
                    weight=weak_negative_weight,
                    source="unannotated_video",
                )
            )
    labels.sort(key=lambda l: (l.polarity, l.video_id, l.policy_id, l.start_frame, l.end_frame, l.source))
    return labels


def save_labels(labels: Iterable[TrainingLabel], path: str | Path) -> None:
    from .util import write_jsonl

    write_jsonl(path, (_label_to_dict(l) for l in labels))


def load_labels(path: str | Path) -> list[TrainingLabel]:
    from .util import read_jsonl

    return [TrainingLabel(**rec) for rec in read_jsonl(path)]


def _annotation_to_dict(a: Annotation) -> dict:
    return {
        "annotation_id": a.annotation_id,
        "video_id": a.video_id,
        "rater_id": a.rater_id,
        "policy_id": a.policy_id,
        "start_frame": a.start_frame,
        "end_frame": a.end_frame,
        "origin": a.origin,
        "timestamp": a.timestamp,
    }


def _response_to_dict(r: HintResponse) -> dict:
    return {
        "hint_id": r.hint_id,
        "rater_id": r.rater_id,
        "verdict": r.verdict,
        "timestamp": r.timestamp,
    }


def _label_to_dict(l: TrainingLabel) -> dict:
    return {
        "video_id": l.video_id,
        "policy_id": l.policy_id,
        "start_frame": l.start_frame,
        "end_frame": l.end_frame,
        "polarity": l.polarity,
        "weight": l.weight,
        "source": l.source,
    }
