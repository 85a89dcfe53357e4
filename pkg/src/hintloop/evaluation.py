"""Quality and efficiency metrics over review outcomes, expert decisions as truth.

Video-level precision/recall/disagreement per generalist set, averaged across
the two sets; efficiency counts (segment coverage, segments per video, review
duration); and hint-interaction rates (acceptance, organic fraction).
Undefined divisions surface as None, never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .feedbackstore import ACCEPTED, REJECTED, Annotation, HintResponse
from .ranker import HintSegment
from .ratersim import ArmOutcomes, ReviewOutcome


@dataclass(frozen=True)
class SetQuality:
    precision: float | None
    recall: float | None
    disagreement_rate: float


@dataclass(frozen=True)
class QualityReport:
    precision: float | None  # averaged across the generalist sets; None if undefined
    recall: float | None
    disagreement_rate: float | None
    n_videos: int
    per_set: tuple[SetQuality, ...] = ()
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class EfficiencyReport:
    pct_violating_videos_with_segments: float | None
    segments_per_video: float
    avg_review_duration: float
    n_videos: int


@dataclass(frozen=True)
class HintInteractionReport:
    acceptance_rate: float | None  # accepted / (accepted + rejected)
    acceptance_rate_shown: float | None  # accepted / hints shown (alt denominator)
    organic_fraction: float | None
    n_accepted: int
    n_rejected: int
    n_hints_shown: int
    n_annotations: int


def _set_quality(expert: dict[str, bool], generalist: dict[str, bool]) -> SetQuality:
    tp = sum(1 for v, d in generalist.items() if d and expert[v])
    fp = sum(1 for v, d in generalist.items() if d and not expert[v])
    fn = sum(1 for v, d in generalist.items() if not d and expert[v])
    disagree = sum(1 for v, d in generalist.items() if d != expert[v])
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    return SetQuality(
        precision=precision, recall=recall, disagreement_rate=disagree / len(generalist)
    )


def quality_metrics(
    expert_decisions: dict[str, bool],
    generalist_sets: list[dict[str, bool]],
) -> QualityReport:
    """Average P/R/disagreement of the generalist sets against expert truth."""
    ids = set(expert_decisions)
    for i, g in enumerate(generalist_sets):
        if set(g) != ids:
            raise ValueError(f"generalist set {i} covers different video ids than the expert set")
    per_set = tuple(_set_quality(expert_decisions, g) for g in generalist_sets)
    undefined = []
    for i, s in enumerate(per_set):
        if s.precision is None:
            undefined.append(f"set{i}.precision")
        if s.recall is None:
            undefined.append(f"set{i}.recall")

    def _avg(values: list[float | None]) -> float | None:
        if any(v is None for v in values):
            return None
        return sum(values) / len(values)  # type: ignore[arg-type]

    return QualityReport(
        precision=_avg([s.precision for s in per_set]),
        recall=_avg([s.recall for s in per_set]),
        disagreement_rate=_avg([s.disagreement_rate for s in per_set]),
        n_videos=len(ids),
        per_set=per_set,
        undefined=tuple(undefined),
    )


def decisions_of(outcomes: dict[str, ReviewOutcome]) -> dict[str, bool]:
    return {v: o.decision for v, o in outcomes.items()}


def efficiency_metrics(
    generalist_sets: list[dict[str, ReviewOutcome]],
    expert_decisions: dict[str, bool],
) -> EfficiencyReport:
    """Coverage of violating videos, annotations per video, mean review duration."""
    if not generalist_sets or not expert_decisions:
        raise ValueError("empty outcomes or ground truth")
    violating = [v for v, d in expert_decisions.items() if d]
    covered = sum(
        1
        for v in violating
        if any(len(s[v].annotations) > 0 for s in generalist_sets if v in s)
    )
    pct = covered / len(violating) if violating else None
    all_outcomes = [o for s in generalist_sets for o in s.values()]
    n_videos = len({o.video_id for o in all_outcomes})
    total_annotations = sum(len(o.annotations) for o in all_outcomes)
    return EfficiencyReport(
        pct_violating_videos_with_segments=pct,
        segments_per_video=total_annotations / n_videos if n_videos else 0.0,
        avg_review_duration=(
            sum(o.duration_units for o in all_outcomes) / len(all_outcomes)
            if all_outcomes
            else 0.0
        ),
        n_videos=n_videos,
    )


def hint_interaction_metrics(
    hint_responses: list[HintResponse],
    annotations: list[Annotation],
    hints: list[HintSegment],
) -> HintInteractionReport:
    """Acceptance rate over responded hints and fraction of hint-free annotations."""
    known = {h.hint_id for h in hints}
    for r in hint_responses:
        if r.hint_id not in known:
            raise ValueError(f"response to unknown hint id {r.hint_id!r}")
    n_accepted = sum(1 for r in hint_responses if r.verdict == ACCEPTED)
    n_rejected = sum(1 for r in hint_responses if r.verdict == REJECTED)
    responded = n_accepted + n_rejected
    hints_by_video: dict[str, list[HintSegment]] = {}
    for h in hints:
        hints_by_video.setdefault(h.video_id, []).append(h)
    organic = 0
    for a in annotations:
        overlapping = [
            h
            for h in hints_by_video.get(a.video_id, [])
            if max(h.start_frame, a.start_frame) < min(h.end_frame, a.end_frame)
        ]
        if not overlapping:
            organic += 1
    return HintInteractionReport(
        acceptance_rate=n_accepted / responded if responded else None,
        acceptance_rate_shown=n_accepted / len(hints) if hints else None,
        organic_fraction=organic / len(annotations) if annotations else None,
        n_accepted=n_accepted,
        n_rejected=n_rejected,
        n_hints_shown=len(hints),
        n_annotations=len(annotations),
    )


def segment_level_precision(hints: list[HintSegment], truth_by_video: dict[str, list]) -> float | None:
    """Fraction of hint segments overlapping a same-policy truth segment."""
    if not hints:
        return None
    good = 0
    for h in hints:
        for t in truth_by_video.get(h.video_id, []):
            if t.policy_id == h.policy_id and max(t.start_frame, h.start_frame) < min(
                t.end_frame, h.end_frame
            ):
                good += 1
                break
    return good / len(hints)


@dataclass
class ArmReport:
    arm: str
    quality: QualityReport
    efficiency: EfficiencyReport
    hint_interaction: HintInteractionReport | None = None


def evaluate_arm(arm_outcomes: ArmOutcomes, hints: list[HintSegment]) -> ArmReport:
    expert_decisions = decisions_of(arm_outcomes.expert)
    gen_decisions = [decisions_of(s) for s in arm_outcomes.generalists]
    quality = quality_metrics(expert_decisions, gen_decisions)
    efficiency = efficiency_metrics(arm_outcomes.generalists, expert_decisions)
    interaction = None
    if hints:
        responses = [r for s in arm_outcomes.generalists for o in s.values() for r in o.hint_responses]
        annotations = [a for s in arm_outcomes.generalists for o in s.values() for a in o.annotations]
        interaction = hint_interaction_metrics(responses, annotations, hints)
    return ArmReport(
        arm=arm_outcomes.arm, quality=quality, efficiency=efficiency, hint_interaction=interaction
    )


def _fmt(value: float | None, pct: bool = False) -> str:
    if value is None:
        return "undefined"
    return f"{100 * value:.2f}%" if pct else f"{value:.4f}"


def _delta(before: float | None, after: float | None) -> str:
    """Both views of a change: relative and absolute percentage points."""
    if before is None or after is None:
        return "undefined"
    absolute = (after - before) * 100
    if before == 0:
        return f"{absolute:+.2f}pt (rel undefined)"
    relative = (after - before) / before * 100
    return f"{relative:+.2f}% rel, {absolute:+.2f}pt abs"


def comparison_table(reports: dict[str, ArmReport], pairs: list[tuple[str, str]]) -> str:
    """Plain-text table: absolute rows per arm, then paired treatment deltas."""
    lines = []
    header = f"{'Treatment':<24} | {'Precision':>12} | {'Recall':>12} | {'Disagreement%':>14} | {'# Videos':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for arm in sorted(reports):
        q = reports[arm].quality
        lines.append(
            f"{arm:<24} | {_fmt(q.precision):>12} | {_fmt(q.recall):>12} | "
            f"{_fmt(q.disagreement_rate, pct=True):>14} | {q.n_videos:>8}"
        )
    for before, after in pairs:
        if before not in reports or after not in reports:
            continue
        qb, qa = reports[before].quality, reports[after].quality
        lines.append(
            f"{after + ' vs. ' + before:<24} | {_delta(qb.precision, qa.precision):>12} | "
            f"{_delta(qb.recall, qa.recall):>12} | {_delta(qb.disagreement_rate, qa.disagreement_rate):>14} | "
            f"{min(qb.n_videos, qa.n_videos):>8}"
        )
        eb, ea = reports[before].efficiency, reports[after].efficiency
        if eb.segments_per_video > 0:
            ratio = (ea.segments_per_video / eb.segments_per_video - 1) * 100
            lines.append(f"  segments/video: {eb.segments_per_video:.2f} -> {ea.segments_per_video:.2f} ({ratio:+.1f}%)")
        lines.append(
            f"  avg duration:   {eb.avg_review_duration:.1f} -> {ea.avg_review_duration:.1f}"
        )
    return "\n".join(lines)


def report_to_dict(report: ArmReport) -> dict:
    out: dict = {
        "arm": report.arm,
        "quality": {
            "precision": report.quality.precision,
            "recall": report.quality.recall,
            "disagreement_rate": report.quality.disagreement_rate,
            "n_videos": report.quality.n_videos,
            "per_set": [
                {
                    "precision": s.precision,
                    "recall": s.recall,
                    "disagreement_rate": s.disagreement_rate,
                }
                for s in report.quality.per_set
            ],
            "undefined": list(report.quality.undefined),
        },
        "efficiency": {
            "pct_violating_videos_with_segments": report.efficiency.pct_violating_videos_with_segments,
            "segments_per_video": report.efficiency.segments_per_video,
            "avg_review_duration": report.efficiency.avg_review_duration,
            "n_videos": report.efficiency.n_videos,
        },
    }
    if report.hint_interaction:
        hi = report.hint_interaction
        out["hint_interaction"] = {
            "acceptance_rate": hi.acceptance_rate,
            "acceptance_rate_shown": hi.acceptance_rate_shown,
            "organic_fraction": hi.organic_fraction,
            "n_accepted": hi.n_accepted,
            "n_rejected": hi.n_rejected,
            "n_hints_shown": hi.n_hints_shown,
            "n_annotations": hi.n_annotations,
        }
    return out
