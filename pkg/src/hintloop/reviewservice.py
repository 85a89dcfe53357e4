"""Review task coordination and the HTTP surface rater clients consume.

The coordinator leases videos to raters under the 1-expert / 2-generalist
quota, serves precomputed hint payloads by assist mode, and funnels
submissions into the append-only feedback store. Every mutating call takes an
explicit `now` and is logged, so replaying the request log rebuilds the exact
terminal state.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .evaluation import hint_interaction_metrics, quality_metrics
from .feedbackstore import Annotation, FeedbackStore, HintResponse, StoreError
from .ranker import HintSegment, LineGraphHint, hint_payload
from .ratersim import ReviewOutcome
from .synthdata import FrameFeatureSeries, VideoMeta

EXPERT_POOL = "expert"
GENERALIST_POOL = "generalist"
ASSIST_MODES = ("none", "v1", "v1_v2")

MAX_EXPERT_SLOTS = 1
MAX_GENERALIST_SLOTS = 2


class ServiceError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass
class ReviewTask:
    task_id: str
    video_id: str
    rater_id: str
    pool: str
    assist_mode: str
    lease_expiry: float
    submitted: bool = False

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "video_id": self.video_id,
            "rater_id": self.rater_id,
            "pool": self.pool,
            "assist_mode": self.assist_mode,
            "lease_expiry": self.lease_expiry,
        }


class ReviewCoordinator:
    """Single logical assigner; all public methods are serialized by one lock."""

    def __init__(
        self,
        videos: list[VideoMeta],
        hints_by_video: dict[str, tuple[list[LineGraphHint], list[HintSegment]]],
        store: FeedbackStore,
        assist_mode: str = "v1_v2",
        arm_by_video: dict[str, str] | None = None,
        lease_seconds: float = 1800.0,
        experiment: str = "default",
        features_by_video: dict[str, FrameFeatureSeries] | None = None,
        request_log_path: str | Path | None = None,
    ) -> None:
        if assist_mode not in ASSIST_MODES:
            raise ValueError(f"bad assist mode {assist_mode!r}")
        self._videos = list(videos)
        self._video_by_id = {v.video_id: v for v in videos}
        self._hints = hints_by_video
        self._store = store
        self._default_mode = assist_mode
        self._arm_by_video = arm_by_video or {}
        self._lease_seconds = lease_seconds
        self.experiment = experiment
        self._features = features_by_video or {}
        self._tasks: dict[str, ReviewTask] = {}
        self._task_counter = 0
        self._lock = threading.Lock()
        self._request_log_path = Path(request_log_path) if request_log_path else None
        if self._request_log_path:
            self._request_log_path.parent.mkdir(parents=True, exist_ok=True)

    @property
    def store(self) -> FeedbackStore:
        return self._store

    def _log_request(self, record: dict) -> None:
        if not self._request_log_path:
            return
        with self._request_log_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    def _mode_for(self, video_id: str) -> str:
        return self._arm_by_video.get(video_id, self._default_mode)

    def _slots_taken(self, video_id: str, pool: str, now: float) -> int:
        return sum(
            1
            for t in self._tasks.values()
            if t.video_id == video_id
            and t.pool == pool
            and (t.submitted or t.lease_expiry > now)
        )

    def _rater_touched(self, video_id: str, rater_id: str, now: float) -> bool:
        return any(
            t.video_id == video_id
            and t.rater_id == rater_id
            and (t.submitted or t.lease_expiry > now)
            for t in self._tasks.values()
        )

    def next_task(self, rater_id: str, pool: str, now: float) -> ReviewTask | None:
        """Lease an unreviewed video honoring pool quotas; idempotent while leased."""
        if pool not in (EXPERT_POOL, GENERALIST_POOL):
            raise ServiceError("bad_pool", f"unknown pool {pool!r}")
        with self._lock:
            self._log_request({"op": "next_task", "rater_id": rater_id, "pool": pool, "now": now})
            for t in self._tasks.values():
                if t.rater_id == rater_id and not t.submitted and t.lease_expiry > now:
                    return t
            limit = MAX_EXPERT_SLOTS if pool == EXPERT_POOL else MAX_GENERALIST_SLOTS
            for v in self._videos:
                vid = v.video_id
                if self._rater_touched(vid, rater_id, now):
                    continue
                if self._slots_taken(vid, pool, now) >= limit:
                    continue
                self._task_counter += 1
                task = ReviewTask(
                    task_id=f"t{self._task_counter:06d}",
                    video_id=vid,
                    rater_id=rater_id,
                    pool=pool,
                    assist_mode=self._mode_for(vid),
                    lease_expiry=now + self._lease_seconds,
                )
                self._tasks[task.task_id] = task
                return task
            return None

    def get_hints(self, video_id: str, assist_mode: str) -> dict:
        """Hint payload filtered by assist mode; empty payload for mode none."""
        if assist_mode not in ASSIST_MODES:
            raise ServiceError("bad_mode", f"unknown assist mode {assist_mode!r}")
        if video_id not in self._video_by_id:
            raise ServiceError("unknown_video", f"unknown video {video_id!r}")
        v1, v2 = self._hints.get(video_id, ([], []))
        if assist_mode == "none":
            return hint_payload(video_id, [], [])
        if assist_mode == "v1":
            return hint_payload(video_id, v1, [])
        return hint_payload(video_id, v1, v2)

    def submit_review(
        self,
        task_id: str,
        decision: bool,
        annotations: list[Annotation],
        hint_responses: list[HintResponse],
        now: float,
    ) -> dict:
        """Atomically persist a review and release the lease; task becomes terminal."""
        with self._lock:
            self._log_request(
                {
                    "op": "submit",
                    "task_id": task_id,
                    "decision": decision,
                    "annotations": [a.__dict__ for a in annotations],
                    "hint_responses": [r.__dict__ for r in hint_responses],
                    "now": now,
                }
            )
            task = self._tasks.get(task_id)
            if task is None:
                raise ServiceError("unknown_task", f"unknown task {task_id!r}")
            if task.submitted:
                raise ServiceError("already_submitted", f"task {task_id} already submitted")
            if task.lease_expiry <= now:
                raise ServiceError("lease_expired", f"lease for task {task_id} expired")
            shown = self._shown_hint_ids(task)
            for r in hint_responses:
                if r.hint_id not in shown:
                    raise ServiceError(
                        "unknown_hint",
                        f"response to hint {r.hint_id!r} not shown for video {task.video_id}",
                    )
                if r.rater_id != task.rater_id:
                    raise ServiceError("bad_rater", "hint response rater differs from task rater")
            for a in annotations:
                if a.video_id != task.video_id:
                    raise ServiceError("bad_video", "annotation video differs from task video")
                if a.rater_id != task.rater_id:
                    raise ServiceError("bad_rater", "annotation rater differs from task rater")
            if decision != bool(annotations):
                raise ServiceError(
                    "decision_mismatch", "decision must be true iff annotations were submitted"
                )
            try:
                for a in annotations:
                    self._store.record_annotation(a)
                for r in hint_responses:
                    self._store.record_hint_response(r)
            except StoreError as e:
                raise ServiceError("store_error", str(e)) from e
            task.submitted = True
            return {"status": "ok", "task_id": task_id}

    def _shown_hint_ids(self, task: ReviewTask) -> set[str]:
        if task.assist_mode != "v1_v2":
            return set()
        _v1, v2 = self._hints.get(task.video_id, ([], []))
        return {h.hint_id for h in v2}

    def media_strip(self, video_id: str) -> dict:
        """Stub frame strip: one brightness byte per frame, derived from features."""
        v = self._video_by_id.get(video_id)
        if v is None:
            raise ServiceError("unknown_video", f"unknown video {video_id!r}")
        feats = self._features.get(video_id)
        if feats is not None:
            norms = np.linalg.norm(feats.values, axis=1)
            lo, hi = norms.min(), norms.max()
            scale = (norms - lo) / (hi - lo) if hi > lo else np.zeros_like(norms)
        else:
            rng = np.random.default_rng(abs(hash(video_id)) % (2**32))
            scale = rng.random(v.frame_count)
        return {
            "video_id": video_id,
            "frame_count": v.frame_count,
            "fps": v.fps,
            "strip": [int(round(255 * s)) for s in scale],
        }

    def metrics(self, experiment: str) -> dict:
        """Best-effort metrics over submissions so far, expert decisions as truth."""
        if experiment != self.experiment:
            raise ServiceError("unknown_experiment", f"unknown experiment {experiment!r}")
        with self._lock:
            submitted = [t for t in self._tasks.values() if t.submitted]
        outcomes = self._outcomes_from_store(submitted)
        expert = {
            t.video_id: outcomes[t.task_id].decision for t in submitted if t.pool == EXPERT_POOL
        }
        gen_tasks = sorted(
            (t for t in submitted if t.pool == GENERALIST_POOL), key=lambda t: t.task_id
        )
        sets: list[dict[str, bool]] = [{}, {}]
        for t in gen_tasks:
            slot = 0 if t.video_id not in sets[0] else 1
            sets[slot][t.video_id] = outcomes[t.task_id].decision
        complete = [v for v in expert if v in sets[0] and v in sets[1]]
        result: dict = {"experiment": experiment, "n_videos_complete": len(complete)}
        if complete:
            q = quality_metrics(
                {v: expert[v] for v in complete},
                [{v: s[v] for v in complete} for s in sets],
            )
            result["quality"] = {
                "precision": q.precision,
                "recall": q.recall,
                "disagreement_rate": q.disagreement_rate,
                "n_videos": q.n_videos,
            }
        all_hints = [h for _v1, v2 in self._hints.values() for h in v2]
        if all_hints:
            hi = hint_interaction_metrics(
                self._store.hint_responses, self._store.annotations, all_hints
            )
            result["hint_interaction"] = {
                "acceptance_rate": hi.acceptance_rate,
                "acceptance_rate_shown": hi.acceptance_rate_shown,
                "organic_fraction": hi.organic_fraction,
                "n_accepted": hi.n_accepted,
                "n_rejected": hi.n_rejected,
            }
        return result

    def _outcomes_from_store(self, tasks: list[ReviewTask]) -> dict[str, ReviewOutcome]:
        ann_by_key: dict[tuple[str, str], list[Annotation]] = {}
        for a in self._store.annotations:
            ann_by_key.setdefault((a.video_id, a.rater_id), []).append(a)
        out = {}
        for t in tasks:
            anns = ann_by_key.get((t.video_id, t.rater_id), [])
            out[t.task_id] = ReviewOutcome(
                video_id=t.video_id,
                rater_id=t.rater_id,
                decision=bool(anns),
                annotations=anns,
                hint_responses=[],
                duration_units=0.0,
            )
        return out


def replay_requests(
    log_path: str | Path,
    make_coordinator,
) -> ReviewCoordinator:
    """Re-apply a request log to a fresh coordinator built by make_coordinator().

    Submissions that errored live (duplicates, expired leases) error identically
    and leave no state, so the terminal store matches byte for byte.
    """
    coordinator: ReviewCoordinator = make_coordinator()
    with Path(log_path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                if rec["op"] == "next_task":
                    coordinator.next_task(rec["rater_id"], rec["pool"], rec["now"])
                elif rec["op"] == "submit":
                    coordinator.submit_review(
                        rec["task_id"],
                        rec["decision"],
                        [Annotation(**a) for a in rec["annotations"]],
                        [HintResponse(**r) for r in rec["hint_responses"]],
                        rec["now"],
                    )
            except ServiceError:
                pass
    return coordinator


def create_app(coordinator: ReviewCoordinator) -> FastAPI:
    """FastAPI wrapper exposing the /v1 endpoints."""
    app = FastAPI(title="hintloop review service")

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        status = {
            "unknown_video": 404,
            "unknown_task": 404,
            "unknown_experiment": 404,
            "unknown_hint": 422,
            "lease_expired": 410,
            "already_submitted": 409,
        }.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": exc.message})

    @app.get("/v1/tasks/next")
    def next_task(rater: str, pool: str):
        task = coordinator.next_task(rater, pool, now=time.time())
        return {"task": task.to_dict() if task else None}

    @app.get("/v1/videos/{video_id}/hints")
    def hints(video_id: str, mode: str):
        return coordinator.get_hints(video_id, mode)

    @app.get("/v1/videos/{video_id}/media")
    def media(video_id: str):
        return coordinator.media_strip(video_id)

    @app.post("/v1/tasks/{task_id}/submit")
    async def submit(task_id: str, request: Request):
        body = await request.json()
        try:
            annotations = [Annotation(**a) for a in body.get("annotations", [])]
            responses = [HintResponse(**r) for r in body.get("hint_responses", [])]
            decision = bool(body["decision"])
        except (KeyError, TypeError, ValueError) as e:
            raise ServiceError("bad_request", f"malformed submission: {e}") from e
        return coordinator.submit_review(
            task_id, decision, annotations, responses, now=time.time()
        )

    @app.get("/v1/metrics/{experiment}")
    def metrics(experiment: str):
        return coordinator.metrics(experiment)

    return app
