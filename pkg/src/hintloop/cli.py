"""Operator entry point: synth, train, calibrate, hints, simulate, evaluate,
export-labels, retrain-eval, serve.

One JSON or TOML config file drives every stage; a few flags override single
values. All artifacts land under <run_root>/<config-hash>/ so a re-run with
the same config reproduces the same bytes. Exit codes: 0 ok, 2 config error,
3 missing input, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import evaluation, feedbackstore, ranker, ratersim, scoring, segmenter, synthdata
from .feedbackstore import (
    POSITIVE,
    WEAK_NEGATIVE,
    FeedbackStore,
    TrainingLabel,
    export_training_labels,
    load_labels,
    replay_log,
    save_labels,
)
from .ranker import HintSegment, LineGraphHint, RankerConfig, hint_payload, payload_to_hints
from .ratersim import GENERALIST, RaterProfile, SimConfig
from .scoring import ScorerConfig, TrainHyperparams
from .synthdata import Corpus, CorpusConfig
from .taxonomy import PolicyTaxonomy, TaxonomyError, load_taxonomy
from .util import content_hash, read_json, read_jsonl, write_json, write_jsonl

ARMS = ("baseline", "v1", "v1_v2")

DEFAULT_CONFIG: dict = {
    "seed": 7,
    "taxonomy": None,  # null -> packaged default taxonomy
    "run_root": "runs",
    "corpus": {
        "n_videos": 200,
        "violating_fraction": 0.15,
        "frame_count_range": [120, 360],
        "fps": 4.0,
        "dims": 16,
        "signal_shift": 2.0,
        "segment_length_range": [8, 40],
        "segments_per_video_range": [1, 3],
        "id_prefix": "v",
    },
    "eval_corpus": {
        "n_videos": 120,
        "violating_fraction": 0.5,
        "id_prefix": "e",
    },
    "scorer": {"window_frames": 16, "aggregation": "flat_concat"},
    "train": {
        "learning_rate": 0.5,
        "epochs": 300,
        "windows_per_segment": 8,
        "windows_per_weak_video": 8,
        "bootstrap_per_policy": 4,
    },
    "segmenter": {"min_precision": 0.40, "gap_fraction": 0.03},
    "ranker": {"top_n": 5, "max_points": 512, "v1_policy_limit": 7},
    "simulation": {
        "arms": ["baseline", "v1", "v1_v2"],
        "generalist_budget_frames": 60,
        "generalist_detect_prob": 0.9,
        "generalist_false_flag_prob": 0.02,
        "block_fraction": 0.05,
        "per_frame_cost": 1.0,
        "per_annotation_overhead": 20.0,
        "verification_error_rate": 0.0,
        "explore_stop_after_detection": True,
    },
    "export": {
        "positive_weight": 1.0,
        "clean_negative_weight": 1.0,
        "weak_negative_weight": 0.3,
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8321,
        "assist_mode": "v1_v2",
        "lease_seconds": 1800.0,
        "experiment": "default",
    },
}


class ConfigError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class MissingInput(Exception):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"{stage}: missing input {path}")
        self.stage = stage
        self.path = path


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(user_cfg: dict) -> dict:
    """Defaults merged in; eval_corpus inherits the corpus shape (dims, fps, ...)
    unless overridden, keeping its own size/mix/id fields."""
    cfg = _deep_merge(DEFAULT_CONFIG, user_cfg)
    inherited = dict(cfg["corpus"])
    for key in ("n_videos", "violating_fraction", "id_prefix"):
        inherited.pop(key, None)
    cfg["eval_corpus"] = _deep_merge(
        _deep_merge(inherited, DEFAULT_CONFIG["eval_corpus"]), user_cfg.get("eval_corpus", {})
    )
    return cfg


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    if path.suffix == ".toml":
        import tomli

        with path.open("rb") as f:
            return tomli.load(f)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError([f"config parse error in {path}: {e}"]) from e


def validate_config(cfg: dict) -> list[str]:
    """Collect every problem instead of stopping at the first."""
    errors: list[str] = []

    def check(cond: bool, msg: str) -> None:
        if not cond:
            errors.append(msg)

    check(isinstance(cfg.get("seed"), int), "seed must be an integer")
    for section in ("corpus", "eval_corpus"):
        c = cfg.get(section, {})
        check(isinstance(c.get("n_videos"), int) and c.get("n_videos", 0) >= 1,
              f"{section}.n_videos must be a positive integer")
        vf = c.get("violating_fraction")
        check(isinstance(vf, (int, float)) and 0 <= vf <= 1,
              f"{section}.violating_fraction must be in [0, 1]")
        fr = c.get("frame_count_range")
        check(
            isinstance(fr, (list, tuple)) and len(fr) == 2 and 1 <= fr[0] <= fr[1],
            f"{section}.frame_count_range must be [lo, hi] with 1 <= lo <= hi",
        )
    check(cfg.get("scorer", {}).get("window_frames", 0) >= 1, "scorer.window_frames must be >= 1")
    check(cfg.get("scorer", {}).get("aggregation") == "flat_concat",
          "scorer.aggregation must be 'flat_concat'")
    mp = cfg.get("segmenter", {}).get("min_precision")
    check(isinstance(mp, (int, float)) and 0 < mp < 1, "segmenter.min_precision must be in (0, 1)")
    gf = cfg.get("segmenter", {}).get("gap_fraction")
    check(isinstance(gf, (int, float)) and 0 <= gf < 1, "segmenter.gap_fraction must be in [0, 1)")
    for key in ("top_n", "max_points", "v1_policy_limit"):
        check(cfg.get("ranker", {}).get(key, 0) >= 1, f"ranker.{key} must be >= 1")
    sim = cfg.get("simulation", {})
    for arm in sim.get("arms", []):
        check(arm in ARMS, f"simulation.arms: unknown arm {arm!r}")
    check(sim.get("generalist_budget_frames", 0) >= 0,
          "simulation.generalist_budget_frames must be >= 0")
    for key in ("generalist_detect_prob", "generalist_false_flag_prob", "verification_error_rate"):
        v = sim.get(key)
        check(isinstance(v, (int, float)) and 0 <= v <= 1, f"simulation.{key} must be in [0, 1]")
    for key in ("positive_weight", "clean_negative_weight", "weak_negative_weight"):
        v = cfg.get("export", {}).get(key)
        check(isinstance(v, (int, float)) and v > 0, f"export.{key} must be > 0")
    check(cfg.get("train", {}).get("epochs", -1) >= 0, "train.epochs must be >= 0")
    check(cfg.get("train", {}).get("bootstrap_per_policy", 0) >= 1,
          "train.bootstrap_per_policy must be >= 1")
    mode = cfg.get("service", {}).get("assist_mode")
    check(mode in ("none", "v1", "v1_v2"), "service.assist_mode must be none|v1|v1_v2")
    tax = cfg.get("taxonomy")
    check(tax is None or isinstance(tax, str), "taxonomy must be null or a path string")
    return errors


@dataclass
class Pipeline:
    """Resolved config plus the run directory all stages share."""

    cfg: dict
    run_dir: Path
    taxonomy: PolicyTaxonomy

    @classmethod
    def from_config(cls, cfg: dict, run_dir_override: str | None = None) -> "Pipeline":
        errors = validate_config(cfg)
        if errors:
            raise ConfigError(errors)
        tax_path = cfg["taxonomy"] or _default_taxonomy_path()
        try:
            taxonomy = load_taxonomy(tax_path)
        except TaxonomyError as e:
            raise ConfigError([f"taxonomy: {e}"]) from e
        if run_dir_override:
            run_dir = Path(run_dir_override)
        else:
            run_dir = Path(cfg["run_root"]) / content_hash(cfg)
        return cls(cfg=cfg, run_dir=run_dir, taxonomy=taxonomy)

    # canonical artifact locations
    @property
    def corpus_dir(self) -> Path:
        return self.run_dir / "corpus"

    @property
    def eval_corpus_dir(self) -> Path:
        return self.run_dir / "eval_corpus"

    @property
    def model_path(self) -> Path:
        return self.run_dir / "model.json"

    @property
    def bootstrap_labels_path(self) -> Path:
        return self.run_dir / "bootstrap_labels.jsonl"

    @property
    def calibration_path(self) -> Path:
        return self.run_dir / "calibration.json"

    @property
    def hints_path(self) -> Path:
        return self.run_dir / "hints.jsonl"

    def store_log_path(self, arm: str) -> Path:
        return self.run_dir / f"store_{arm}.log"

    def outcomes_path(self, arm: str) -> Path:
        return self.run_dir / "outcomes" / f"{arm}.jsonl"

    def labels_path(self, arm: str) -> Path:
        return self.run_dir / f"labels_{arm}.jsonl"

    @property
    def eval_labels_path(self) -> Path:
        return self.run_dir / "eval_labels.jsonl"

    def require(self, stage: str, *paths: Path) -> None:
        for p in paths:
            if not p.exists():
                raise MissingInput(stage, p)

    def corpus_config(self, section: str) -> CorpusConfig:
        c = self.cfg[section]
        policies = tuple(self.taxonomy.hint_enabled_ids())
        seed_salt = 1 if section == "eval_corpus" else 0
        return CorpusConfig(
            n_videos=c["n_videos"],
            policies=policies,
            seed=self.cfg["seed"] + seed_salt,
            violating_fraction=c["violating_fraction"],
            frame_count_range=tuple(c["frame_count_range"]),
            fps=c["fps"],
            dims=c["dims"],
            signal_shift=c["signal_shift"],
            segment_length_range=tuple(c["segment_length_range"]),
            segments_per_video_range=tuple(c["segments_per_video_range"]),
            id_prefix=c["id_prefix"],
        )

    @property
    def scorer_config(self) -> ScorerConfig:
        return ScorerConfig(
            window_frames=self.cfg["scorer"]["window_frames"],
            aggregation=self.cfg["scorer"]["aggregation"],
        )

    @property
    def ranker_config(self) -> RankerConfig:
        r = self.cfg["ranker"]
        return RankerConfig(
            top_n=r["top_n"], max_points=r["max_points"], v1_policy_limit=r["v1_policy_limit"]
        )

    @property
    def sim_config(self) -> SimConfig:
        s = self.cfg["simulation"]
        return SimConfig(
            block_fraction=s["block_fraction"],
            per_frame_cost=s["per_frame_cost"],
            per_annotation_overhead=s["per_annotation_overhead"],
            verification_error_rate=s["verification_error_rate"],
            explore_stop_after_detection=s["explore_stop_after_detection"],
        )

    @property
    def generalist_template(self) -> RaterProfile:
        s = self.cfg["simulation"]
        return RaterProfile(
            rater_id="gen",
            kind=GENERALIST,
            budget_frames=s["generalist_budget_frames"],
            detect_prob=s["generalist_detect_prob"],
            false_flag_prob=s["generalist_false_flag_prob"],
            seed=self.cfg["seed"],
        )

    @property
    def hyperparams(self) -> TrainHyperparams:
        t = self.cfg["train"]
        return TrainHyperparams(
            learning_rate=t["learning_rate"],
            epochs=t["epochs"],
            seed=self.cfg["seed"],
            windows_per_segment=t["windows_per_segment"],
            windows_per_weak_video=t["windows_per_weak_video"],
        )


def _default_taxonomy_path() -> Path:
    return Path(__file__).parent / "data" / "default_taxonomy.json"


def bootstrap_labels(corpus: Corpus, per_policy: int, weak_weight: float) -> list[TrainingLabel]:
    """Seed labels standing in for the pre-existing production ground truth:
    a few truth segments per policy plus weak negatives from clean videos."""
    labels: list[TrainingLabel] = []
    by_policy: dict[str, list] = {}
    for t in sorted(corpus.truth, key=lambda t: (t.policy_id, t.video_id, t.start_frame)):
        by_policy.setdefault(t.policy_id, []).append(t)
    for pid in sorted(by_policy):
        for t in by_policy[pid][:per_policy]:
            labels.append(
                TrainingLabel(
                    video_id=t.video_id,
                    policy_id=pid,
                    start_frame=t.start_frame,
                    end_frame=t.end_frame,
                    polarity=POSITIVE,
                    weight=1.0,
                    source="bootstrap",
                )
            )
    violating = {t.video_id for t in corpus.truth}
    for v in corpus.videos:
        if v.video_id not in violating:
            labels.append(
                TrainingLabel(
                    video_id=v.video_id,
                    policy_id="*",
                    start_frame=0,
                    end_frame=v.frame_count,
                    polarity=WEAK_NEGATIVE,
                    weight=weak_weight,
                    source="bootstrap",
                )
            )
    return labels


def score_corpus(
    pipeline: Pipeline, model: scoring.ScorerModel, corpus: Corpus
) -> dict[str, list[scoring.ScoreSeries]]:
    """ScoreSeries per video for all hint-enabled policies the model knows."""
    policy_ids = [p for p in pipeline.taxonomy.hint_enabled_ids() if p in model.policies]
    out = {}
    for feats in corpus.features:
        out[feats.video_id] = scoring.score_video(
            model, feats, pipeline.scorer_config, policy_ids=policy_ids
        )
    return out


def generate_hints(
    pipeline: Pipeline,
    model: scoring.ScorerModel,
    corpus: Corpus,
    thresholds: dict[str, segmenter.CalibrationResult],
    collect_segments: list[segmenter.RawSegment] | None = None,
) -> dict[str, tuple[list[LineGraphHint], list[HintSegment]]]:
    """Full hint assembly for every video: binarize, merge, rank, top-N, V1 graphs."""
    gap_fraction = pipeline.cfg["segmenter"]["gap_fraction"]
    frequency: dict[str, int] = {}
    for t in corpus.truth:
        frequency[t.policy_id] = frequency.get(t.policy_id, 0) + 1
    scored = score_corpus(pipeline, model, corpus)
    hints: dict[str, tuple[list[LineGraphHint], list[HintSegment]]] = {}
    for video in corpus.videos:
        series = scored[video.video_id]
        candidates = []
        for s in series:
            cal = thresholds.get(s.policy_id)
            if cal is None or not cal.feasible:
                continue
            raw = segmenter.binarize(s, cal.threshold)
            candidates.extend(segmenter.merge_segments(raw, video.frame_count, gap_fraction))
        if collect_segments is not None:
            collect_segments.extend(sorted(candidates, key=lambda c: (c.policy_id, c.start_frame)))
        ranked = ranker.rank_segments(candidates, pipeline.taxonomy) if candidates else []
        v2 = ranker.top_n(ranked, pipeline.ranker_config.top_n) if ranked else []
        v1 = ranker.build_v1_hints(series, pipeline.taxonomy, pipeline.ranker_config, frequency)
        hints[video.video_id] = (v1, v2)
    return hints


def save_hints(hints: dict[str, tuple[list[LineGraphHint], list[HintSegment]]], path: Path) -> None:
    write_jsonl(
        path,
        (hint_payload(vid, v1, v2) for vid, (v1, v2) in sorted(hints.items())),
    )


def load_hints(path: Path) -> dict[str, tuple[list[LineGraphHint], list[HintSegment]]]:
    out = {}
    for payload in read_jsonl(path):
        out[payload["video_id"]] = payload_to_hints(payload)
    return out


# ---------------------------------------------------------------- commands


def cmd_synth(pipeline: Pipeline) -> int:
    corpus = synthdata.generate_corpus(pipeline.corpus_config("corpus"))
    synthdata.save_corpus(corpus, pipeline.corpus_dir)
    eval_corpus = synthdata.generate_corpus(pipeline.corpus_config("eval_corpus"))
    synthdata.save_corpus(eval_corpus, pipeline.eval_corpus_dir)
    n_violating = len({t.video_id for t in corpus.truth})
    print(f"synth: {len(corpus.videos)} videos ({n_violating} violating), "
          f"{len(eval_corpus.videos)} eval videos -> {pipeline.corpus_dir.parent}")
    return 0


def _training_labels(pipeline: Pipeline, extra_label_files: list[str]) -> list[TrainingLabel]:
    labels = load_labels(pipeline.bootstrap_labels_path)
    for f in extra_label_files:
        path = Path(f)
        if not path.exists():
            raise MissingInput("train", path)
        labels.extend(load_labels(path))
    return labels


def cmd_train(pipeline: Pipeline, extra_label_files: list[str] | None = None) -> int:
    pipeline.require("train", pipeline.corpus_dir / "videos.jsonl")
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    if not pipeline.bootstrap_labels_path.exists():
        labels = bootstrap_labels(
            corpus,
            pipeline.cfg["train"]["bootstrap_per_policy"],
            pipeline.cfg["export"]["weak_negative_weight"],
        )
        save_labels(labels, pipeline.bootstrap_labels_path)
    labels = _training_labels(pipeline, extra_label_files or [])
    model = scoring.train_scorer(labels, corpus, pipeline.scorer_config, pipeline.hyperparams)
    scoring.save_model(model, pipeline.model_path)
    print(f"train: {len(model.policies)} policies trained on {len(labels)} labels -> {pipeline.model_path}")
    return 0


def cmd_calibrate(pipeline: Pipeline) -> int:
    pipeline.require("calibrate", pipeline.corpus_dir / "videos.jsonl", pipeline.model_path)
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    model = scoring.load_model(pipeline.model_path)
    min_precision = pipeline.cfg["segmenter"]["min_precision"]
    scored = score_corpus(pipeline, model, corpus)
    scoring.save_score_series(
        [s for vid in sorted(scored) for s in scored[vid]], pipeline.run_dir / "scores.jsonl"
    )
    by_policy: dict[str, list[scoring.ScoreSeries]] = {}
    for series in scored.values():
        for s in series:
            by_policy.setdefault(s.policy_id, []).append(s)
    results = {}
    for pid in sorted(by_policy):
        truth = [t for t in corpus.truth if t.policy_id == pid]
        if not any(truth):
            continue
        cal = segmenter.calibrate_threshold(by_policy[pid], truth, min_precision)
        results[pid] = {
            "threshold": cal.threshold if cal.feasible else None,
            "achieved_precision": cal.achieved_precision,
            "achieved_recall": cal.achieved_recall,
            "calibration_set_size": cal.calibration_set_size,
            "feasible": cal.feasible,
        }
        status = f"t={cal.threshold:.4f} P={cal.achieved_precision:.3f} R={cal.achieved_recall:.3f}" if cal.feasible else "infeasible"
        print(f"calibrate: {pid}: {status}")
    write_json(pipeline.calibration_path, results)
    return 0


def _load_calibration(pipeline: Pipeline) -> dict[str, segmenter.CalibrationResult]:
    raw = read_json(pipeline.calibration_path)
    out = {}
    for pid, r in raw.items():
        out[pid] = segmenter.CalibrationResult(
            policy_id=pid,
            threshold=r["threshold"] if r["feasible"] else float("inf"),
            achieved_precision=r["achieved_precision"],
            achieved_recall=r["achieved_recall"],
            calibration_set_size=r["calibration_set_size"],
            feasible=r["feasible"],
        )
    return out


def cmd_hints(pipeline: Pipeline) -> int:
    pipeline.require(
        "hints", pipeline.corpus_dir / "videos.jsonl", pipeline.model_path, pipeline.calibration_path
    )
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    model = scoring.load_model(pipeline.model_path)
    thresholds = _load_calibration(pipeline)
    segments: list[segmenter.RawSegment] = []
    hints = generate_hints(pipeline, model, corpus, thresholds, collect_segments=segments)
    write_jsonl(
        pipeline.run_dir / "segments.jsonl",
        (
            {
                "video_id": s.video_id,
                "policy_id": s.policy_id,
                "start_frame": s.start_frame,
                "end_frame": s.end_frame,
                "max_score": s.max_score,
            }
            for s in segments
        ),
    )
    save_hints(hints, pipeline.hints_path)
    n_v2 = sum(len(v2) for _v1, v2 in hints.values())
    print(f"hints: {n_v2} segments across {len(hints)} videos -> {pipeline.hints_path}")
    return 0


def _arm_hints(
    arm: str, hints: dict[str, tuple[list[LineGraphHint], list[HintSegment]]]
) -> dict[str, tuple[list[LineGraphHint], list[HintSegment]]]:
    if arm == "baseline":
        return {}
    if arm == "v1":
        return {vid: (v1, []) for vid, (v1, _v2) in hints.items()}
    return hints


def cmd_simulate(pipeline: Pipeline, arms: list[str] | None = None) -> int:
    pipeline.require("simulate", pipeline.corpus_dir / "videos.jsonl", pipeline.hints_path)
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    hints = load_hints(pipeline.hints_path)
    arms = arms or pipeline.cfg["simulation"]["arms"]
    hints_by_arm = {arm: _arm_hints(arm, hints) for arm in arms}
    results = ratersim.run_experiment(
        corpus,
        hints_by_arm,
        pipeline.generalist_template,
        pipeline.sim_config,
        seed=pipeline.cfg["seed"],
    )
    for arm, arm_out in results.items():
        rows = []
        for vid in sorted(arm_out.expert):
            rows.append({"set": "expert", **arm_out.expert[vid].to_dict()})
        for g, outcomes in enumerate(arm_out.generalists):
            for vid in sorted(outcomes):
                rows.append({"set": f"gen{g}", **outcomes[vid].to_dict()})
        write_jsonl(pipeline.outcomes_path(arm), rows)

        # persist generalist submissions: this store is what closes the loop
        log_path = pipeline.store_log_path(arm)
        if log_path.exists():
            log_path.unlink()
        all_v2 = [h for _v1, v2 in hints_by_arm[arm].values() for h in v2]
        store = FeedbackStore(corpus.video_ids, all_v2, log_path=log_path)
        for outcomes in arm_out.generalists:
            for vid in sorted(outcomes):
                o = outcomes[vid]
                for a in o.annotations:
                    store.record_annotation(a)
                for r in o.hint_responses:
                    store.record_hint_response(r)
        print(f"simulate: arm {arm}: outcomes -> {pipeline.outcomes_path(arm)}")
    return 0


def _load_arm_outcomes(pipeline: Pipeline, arm: str) -> ratersim.ArmOutcomes:
    path = pipeline.outcomes_path(arm)
    expert: dict[str, ratersim.ReviewOutcome] = {}
    gens: dict[str, dict[str, ratersim.ReviewOutcome]] = {}
    for rec in read_jsonl(path):
        which = rec.pop("set")
        outcome = ratersim.ReviewOutcome.from_dict(rec)
        if which == "expert":
            expert[outcome.video_id] = outcome
        else:
            gens.setdefault(which, {})[outcome.video_id] = outcome
    return ratersim.ArmOutcomes(
        arm=arm, expert=expert, generalists=[gens[k] for k in sorted(gens)]
    )


def cmd_evaluate(pipeline: Pipeline, arms: list[str] | None = None) -> int:
    arms = arms or pipeline.cfg["simulation"]["arms"]
    for arm in arms:
        pipeline.require("evaluate", pipeline.outcomes_path(arm))
    pipeline.require("evaluate", pipeline.hints_path)
    hints = load_hints(pipeline.hints_path)
    reports = {}
    for arm in arms:
        arm_out = _load_arm_outcomes(pipeline, arm)
        arm_v2 = [h for _v1, v2 in _arm_hints(arm, hints).values() for h in v2]
        reports[arm] = evaluation.evaluate_arm(arm_out, arm_v2)
    pairs = [("baseline", "v1"), ("v1", "v1_v2")]
    table = evaluation.comparison_table(reports, pairs)
    write_json(
        pipeline.run_dir / "reports" / "report.json",
        {arm: evaluation.report_to_dict(r) for arm, r in reports.items()},
    )
    (pipeline.run_dir / "reports").mkdir(parents=True, exist_ok=True)
    (pipeline.run_dir / "reports" / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_export_labels(pipeline: Pipeline, arm: str = "v1_v2") -> int:
    pipeline.require("export-labels", pipeline.store_log_path(arm), pipeline.hints_path,
                     pipeline.corpus_dir / "videos.jsonl")
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    hints = load_hints(pipeline.hints_path)
    all_v2 = [h for _v1, v2 in _arm_hints(arm, hints).values() for h in v2]
    store = replay_log(pipeline.store_log_path(arm), corpus.video_ids, all_v2)
    exp = pipeline.cfg["export"]
    labels = export_training_labels(
        store,
        all_v2,
        corpus,
        positive_weight=exp["positive_weight"],
        clean_negative_weight=exp["clean_negative_weight"],
        weak_negative_weight=exp["weak_negative_weight"],
    )
    save_labels(labels, pipeline.labels_path(arm))
    counts = {p: sum(1 for l in labels if l.polarity == p)
              for p in ("positive", "clean_negative", "weak_negative")}
    print(f"export-labels: arm {arm}: {counts} -> {pipeline.labels_path(arm)}")
    return 0


def _eval_labels(pipeline: Pipeline) -> list[TrainingLabel]:
    """Labels gathered without ML hints: an unassisted expert pass over the eval corpus."""
    if pipeline.eval_labels_path.exists():
        return load_labels(pipeline.eval_labels_path)
    pipeline.require("retrain-eval", pipeline.eval_corpus_dir / "videos.jsonl")
    corpus = synthdata.load_corpus(pipeline.eval_corpus_dir)
    expert = RaterProfile(
        rater_id="eval_expert", kind="expert", budget_frames=None, detect_prob=1.0,
        seed=pipeline.cfg["seed"] + 2,
    )
    truth_by_video: dict[str, list] = {}
    for t in corpus.truth:
        truth_by_video.setdefault(t.video_id, []).append(t)
    store = FeedbackStore(corpus.video_ids)
    for v in corpus.videos:
        outcome = ratersim.simulate_review(
            expert, v, truth_by_video.get(v.video_id, []), pipeline.sim_config
        )
        for a in outcome.annotations:
            store.record_annotation(a)
    labels = export_training_labels(
        store, [], corpus, weak_negative_weight=pipeline.cfg["export"]["weak_negative_weight"]
    )
    save_labels(labels, pipeline.eval_labels_path)
    return labels


def retrain_eval(pipeline: Pipeline, arm: str = "v1_v2") -> dict:
    """Train before/after the review round's labels; AUCPR deltas on hint-free eval labels."""
    pipeline.require("retrain-eval", pipeline.bootstrap_labels_path, pipeline.labels_path(arm),
                     pipeline.corpus_dir / "videos.jsonl")
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    eval_corpus = synthdata.load_corpus(pipeline.eval_corpus_dir)
    before_labels = load_labels(pipeline.bootstrap_labels_path)
    round_labels = load_labels(pipeline.labels_path(arm))
    after_labels = before_labels + round_labels
    eval_labels = _eval_labels(pipeline)

    before = scoring.train_scorer(before_labels, corpus, pipeline.scorer_config, pipeline.hyperparams)
    after = scoring.train_scorer(after_labels, corpus, pipeline.scorer_config, pipeline.hyperparams)
    rep_before = scoring.eval_aucpr(before, eval_labels, eval_corpus, pipeline.scorer_config,
                                    seed=pipeline.cfg["seed"] + 3)
    rep_after = scoring.eval_aucpr(after, eval_labels, eval_corpus, pipeline.scorer_config,
                                   seed=pipeline.cfg["seed"] + 3)

    def pos_count(labels: list[TrainingLabel], pid: str) -> int:
        return sum(1 for l in labels if l.policy_id == pid and l.polarity == POSITIVE)

    rows = {}
    for pid in sorted(set(rep_before) & set(rep_after)):
        b, a = rep_before[pid], rep_after[pid]
        if b.aucpr is None or a.aucpr is None:
            continue
        rows[pid] = {
            "aucpr_before": b.aucpr,
            "aucpr_after": a.aucpr,
            "aucpr_delta": a.aucpr - b.aucpr,
            "positives_before": pos_count(before_labels, pid),
            "positives_after": pos_count(after_labels, pid),
        }
    return rows


def cmd_retrain_eval(pipeline: Pipeline, arm: str = "v1_v2") -> int:
    rows = retrain_eval(pipeline, arm)
    write_json(pipeline.run_dir / "reports" / "retrain.json", rows)
    header = f"{'policy':<28} | {'AUCPR before':>12} | {'AUCPR after':>12} | {'delta':>8} | {'pos before':>10} | {'pos after':>9}"
    print(header)
    print("-" * len(header))
    for pid, r in rows.items():
        print(
            f"{pid:<28} | {r['aucpr_before']:>12.4f} | {r['aucpr_after']:>12.4f} | "
            f"{r['aucpr_delta']:>+8.4f} | {r['positives_before']:>10} | {r['positives_after']:>9}"
        )
    return 0


def cmd_serve(pipeline: Pipeline, host: str | None = None, port: int | None = None) -> int:
    import uvicorn

    from .reviewservice import ReviewCoordinator, create_app

    pipeline.require("serve", pipeline.corpus_dir / "videos.jsonl", pipeline.hints_path)
    corpus = synthdata.load_corpus(pipeline.corpus_dir)
    hints = load_hints(pipeline.hints_path)
    svc = pipeline.cfg["service"]
    all_v2 = [h for _v1, v2 in hints.values() for h in v2]
    store = FeedbackStore(
        corpus.video_ids, all_v2, log_path=pipeline.run_dir / "store_serve.log"
    )
    coordinator = ReviewCoordinator(
        videos=corpus.videos,
        hints_by_video=hints,
        store=store,
        assist_mode=svc["assist_mode"],
        lease_seconds=svc["lease_seconds"],
        experiment=svc["experiment"],
        features_by_video={f.video_id: f for f in corpus.features},
        request_log_path=pipeline.run_dir / "requests.log",
    )
    app = create_app(coordinator)
    uvicorn.run(app, host=host or svc["host"], port=port or svc["port"], log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hintloop", description="Hint generation and feedback loop pipeline")
    ap.add_argument("--config", help="JSON or TOML config file (defaults apply otherwise)")
    ap.add_argument("--run-dir", help="explicit run directory (default: <run_root>/<config hash>)")
    ap.add_argument("--seed", type=int, help="override config seed")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", help="generate the synthetic corpora")
    p_train = sub.add_parser("train", help="train the scorer from bootstrap (and extra) labels")
    p_train.add_argument("--labels", action="append", default=[], help="extra label JSONL file")
    p_cal = sub.add_parser("calibrate", help="per-policy thresholds under the precision floor")
    p_cal.add_argument("--min-precision", type=float, help="override segmenter.min_precision")
    p_hints = sub.add_parser("hints", help="binarize, merge, rank, and persist hint payloads")
    p_hints.add_argument("--top-n", type=int, help="override ranker.top_n")
    p_sim = sub.add_parser("simulate", help="run the rater experiment arms")
    p_sim.add_argument("--arms", help="comma-separated arm list")
    p_eval = sub.add_parser("evaluate", help="quality/efficiency reports and comparison table")
    p_eval.add_argument("--arms", help="comma-separated arm list")
    p_exp = sub.add_parser("export-labels", help="export training labels from an arm's store")
    p_exp.add_argument("--arm", default="v1_v2")
    p_rt = sub.add_parser("retrain-eval", help="before/after AUCPR deltas from one review round")
    p_rt.add_argument("--arm", default="v1_v2")
    p_srv = sub.add_parser("serve", help="run the review HTTP service")
    p_srv.add_argument("--host")
    p_srv.add_argument("--port", type=int)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        user_cfg = load_config_file(args.config) if args.config else {}
        if args.seed is not None:
            user_cfg = _deep_merge(user_cfg, {"seed": args.seed})
        if getattr(args, "min_precision", None) is not None:
            user_cfg = _deep_merge(user_cfg, {"segmenter": {"min_precision": args.min_precision}})
        if getattr(args, "top_n", None) is not None:
            user_cfg = _deep_merge(user_cfg, {"ranker": {"top_n": args.top_n}})
        cfg = resolve_config(user_cfg)
        pipeline = Pipeline.from_config(cfg, run_dir_override=args.run_dir)
        pipeline.run_dir.mkdir(parents=True, exist_ok=True)
        write_json(pipeline.run_dir / "config.json", cfg)

        arms = None
        if getattr(args, "arms", None):
            arms = [a.strip() for a in args.arms.split(",") if a.strip()]
            unknown = [a for a in arms if a not in ARMS]
            if unknown:
                raise ConfigError([f"unknown arm {a!r}" for a in unknown])

        if args.command == "synth":
            return cmd_synth(pipeline)
        if args.command == "train":
            return cmd_train(pipeline, args.labels)
        if args.command == "calibrate":
            return cmd_calibrate(pipeline)
        if args.command == "hints":
            return cmd_hints(pipeline)
        if args.command == "simulate":
            return cmd_simulate(pipeline, arms)
        if args.command == "evaluate":
            return cmd_evaluate(pipeline, arms)
        if args.command == "export-labels":
            return cmd_export_labels(pipeline, args.arm)
        if args.command == "retrain-eval":
            return cmd_retrain_eval(pipeline, args.arm)
        if args.command == "serve":
            return cmd_serve(pipeline, args.host, args.port)
        raise ConfigError([f"unknown command {args.command!r}"])
    except ConfigError as e:
        for err in e.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except MissingInput as e:
        print(str(e), file=sys.stderr)
        return 3
    except Exception as e:  # runtime failure
        print(f"{args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
