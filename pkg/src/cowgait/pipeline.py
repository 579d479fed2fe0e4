"""Stage orchestration: trajectories -> features -> labels -> study reports.

Every stage persists its output in the run directory so stages can be
re-run and audited on their own. Videos failing a per-video stage are
excluded (not imputed) and listed in the manifest.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, scoring, synth
from .classify import folds as folds_mod
from .classify.data import from_frames
from .classify.models import ClassifierSpec
from .classify.study import (
    ablation_study, evaluate_cv, permutation_importance, random_search, rank_groups,
)
from .config import PipelineConfig, dumps, write_json
from .filters import FilterParams, correct_trajectories
from .steps import StepParams, StepTimeline, detect_steps
from .traits import FEATURE_NAMES, TRAIT_GROUPS, extract_features
from .trajectory import (
    CSV_CODES, HOOVES, LEG_CODES, TrajectoryError, TrajectorySet, head_length, normalize_direction,
    read_trajectory_csv, write_trajectory_csv,
)

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ["video_id", "cow_id", *FEATURE_NAMES, "valid"]
LABEL_COLUMNS = ["video_id", "merged_score", "binary_label"]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def filter_video(traj: TrajectorySet, params: FilterParams = FilterParams()):
    """Direction normalization followed by MAD + Savitzky-Golay filtering."""
    return correct_trajectories(normalize_direction(traj), params)


def process_video(traj: TrajectorySet, filter_params=FilterParams(), step_params=StepParams(),
                  hba_band="gait"):
    """Run one video through filtering, step detection and trait extraction.

    Returns ``(filtered, outlier_fraction, timeline, features)``; raises
    ``StageError`` tagged with the failing stage.
    """
    try:
        filtered, frac = filter_video(traj, filter_params)
    except (TrajectoryError, ValueError) as exc:
        raise StageError("filter", str(exc)) from exc
    try:
        timeline = detect_steps(filtered, step_params)
    except ValueError as exc:
        raise StageError("steps", str(exc)) from exc
    try:
        fv = extract_features(filtered, timeline, head_length(filtered), hba_band)
    except ValueError as exc:
        raise StageError("traits", str(exc)) from exc
    return filtered, frac, timeline, fv


def features_frame(rows) -> pd.DataFrame:
    """Features table from (video_id, cow_id, FeatureVector or None) rows."""
    recs = []
    for vid, cow, fv in rows:
        rec = {"video_id": vid, "cow_id": cow}
        for f in FEATURE_NAMES:
            rec[f] = getattr(fv, f) if fv is not None else math.nan
        rec["valid"] = fv is not None
        recs.append(rec)
    return pd.DataFrame(recs, columns=FEATURE_COLUMNS)


def write_csv(df: pd.DataFrame, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def extract_all(trajs: dict, cfg: PipelineConfig):
    """Per-video stages over every trajectory, in input order."""
    filtered, fracs, timelines, rows, excluded = {}, {}, {}, [], []
    for vid, traj in trajs.items():
        try:
            f, frac, tl, fv = process_video(traj, cfg.filter_params, cfg.step_params, cfg["hba_band"])
        except StageError as exc:
            log.info("excluding %s: %s", vid, exc)
            excluded.append({"video_id": vid, "stage": exc.stage, "reason": str(exc)})
            rows.append((vid, traj.cow_id, None))
            continue
        filtered[vid], fracs[vid], timelines[vid] = f, frac, tl
        rows.append((vid, traj.cow_id, fv))
    return filtered, fracs, timelines, features_frame(rows), excluded


def _synth_inputs(cfg: PipelineConfig, inputs_dir: Path):
    s = cfg["synth"]
    jitter = synth.DatasetJitter(noise_sd=s.get("noise_sd", 0.0), outlier_rate=s.get("outlier_rate", 0.0))
    ds = synth.generate_dataset(s["n_healthy"], s["n_lame"], jitter, seed=cfg["seed"])
    traj_path = inputs_dir / "trajectories.csv"
    write_trajectory_csv(traj_path, ds.trajectories)
    cows = {t.video_id: t.cow_id for t in ds.trajectories}
    names = "ABCDEFGH"[: s.get("n_observers", 4)]
    rates = [0.10, 0.35, 0.15, 0.30, 0.20, 0.25, 0.05, 0.40]
    observers = {n: rates[i % len(rates)] for i, n in enumerate(names)}
    scores = synth.synth_scores(ds.labels, cows, observers, seed=cfg["seed"])
    scores_path = inputs_dir / "scores.csv"
    write_csv(scores, scores_path)
    return traj_path, scores_path


def _plot_videos(order, n):
    return list(order)[:n]


def trajectory_overlay(raw: dict, filtered: dict, video_ids) -> pd.DataFrame:
    parts = []
    for vid in video_ids:
        for stage, traj in (("raw", raw[vid]), ("filtered", filtered[vid])):
            n = traj.n_frames
            parts.append(pd.DataFrame({
                "video_id": vid,
                "frame": np.repeat(np.arange(n), 9),
                "keypoint": np.tile(np.array(CSV_CODES), n),
                "stage": stage,
                "x": traj.coords[:, :, 0].ravel(),
                "y": traj.coords[:, :, 1].ravel(),
            }))
    cols = ["video_id", "frame", "keypoint", "stage", "x", "y"]
    return pd.concat(parts, ignore_index=True)[cols] if parts else pd.DataFrame(columns=cols)


def step_markers(filtered: dict, timelines: dict, video_ids) -> pd.DataFrame:
    """Hoof x per frame with stance and mid-swing flags."""
    recs = []
    for vid in video_ids:
        traj, tl = filtered[vid], timelines[vid]
        for leg in HOOVES:
            x = traj.x(leg)
            stance = np.zeros(traj.n_frames, dtype=int)
            for s in tl.stances[leg]:
                stance[s.start:s.end + 1] = 1
            mids = {m.frame for m in tl.midswings[leg]}
            for fr in range(traj.n_frames):
                recs.append((vid, LEG_CODES[leg], fr, float(x[fr]), int(stance[fr]), int(fr in mids),
                             int(tl.valid_range[0] <= fr <= tl.valid_range[1])))
    return pd.DataFrame(recs, columns=["video_id", "leg", "frame", "x", "stance", "midswing", "in_valid_range"])


def feature_distributions(features: pd.DataFrame, labels: pd.DataFrame) -> pd.DataFrame:
    df = features[features["valid"].astype(bool)].merge(
        labels[["video_id", "binary_label"]], on="video_id", how="inner")
    long = df.melt(id_vars=["video_id", "binary_label"], value_vars=list(FEATURE_NAMES),
                   var_name="feature", value_name="value")
    long = long.rename(columns={"binary_label": "label"})
    order = {f: i for i, f in enumerate(FEATURE_NAMES)}
    long["_o"] = long["feature"].map(order)
    return long.sort_values(["_o", "video_id"], kind="stable").drop(columns="_o")[
        ["feature", "video_id", "label", "value"]].reset_index(drop=True)


def ablation_frame(ablation: dict) -> pd.DataFrame:
    recs = []
    for i, step in enumerate(ablation["steps"]):
        m = step["mean"]
        recs.append((i + 1, step["group"], len(step["features"]), m["accuracy"], m["f1"],
                     m["sensitivity"], m["specificity"]))
    return pd.DataFrame(recs, columns=["step", "group_added", "n_features", "accuracy", "f1",
                                       "sensitivity", "specificity"])


def importance_frame(importance: dict) -> pd.DataFrame:
    rank = {f: i + 1 for i, f in enumerate(importance["ranking"])}
    recs = [(f, v["mean"], v["std"], rank[f]) for f, v in importance["features"].items()]
    return pd.DataFrame(recs, columns=["feature", "mean", "std", "rank"])


def _read_stage(path: Path, stage: str):
    if not path.exists():
        raise StageError(stage, f"missing stage output {path.name}")
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    return pd.read_csv(path, dtype={"video_id": str, "cow_id": str}, float_precision="round_trip")


def emit_plot_data(out_dir, raw_trajectories=None, n_videos: int = 3, frame_rate: float = 30.0) -> list:
    """Write the plot-ready CSV series from the stage outputs in ``out_dir``."""
    out = Path(out_dir)
    plots = out / "plots"
    filtered = read_trajectory_csv(_require(out / "filtered_trajectories.csv", "filter"), frame_rate)
    tl_json = _read_stage(out / "timelines.json", "steps")
    timelines = {vid: StepTimeline.from_dict(d) for vid, d in tl_json.items()}
    features = _read_stage(out / "features.csv", "traits")
    labels = _read_stage(out / "labels.csv", "merge-scores")
    importance = _read_stage(out / "importance.json", "importance")
    ablation = _read_stage(out / "ablation.json", "ablation")

    vids = _plot_videos(timelines, n_videos)
    written = []
    if raw_trajectories is not None:
        raw = read_trajectory_csv(raw_trajectories, frame_rate)
        raw = {v: normalize_direction(raw[v]) for v in vids}
        write_csv(trajectory_overlay(raw, filtered, vids), plots / "trajectory_overlay.csv")
        written.append("trajectory_overlay.csv")
    write_csv(step_markers(filtered, timelines, vids), plots / "step_markers.csv")
    write_csv(feature_distributions(features, labels), plots / "feature_distributions.csv")
    write_csv(importance_frame(importance), plots / "importance.csv")
    write_csv(ablation_frame(ablation), plots / "ablation.csv")
    written += ["step_markers.csv", "feature_distributions.csv", "importance.csv", "ablation.csv"]
    return written


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing stage output {path.name}")
    return path


def _rel(path, base: Path) -> str:
    path = Path(path)
    try:
        return path.resolve().relative_to(base.resolve()).as_posix()
    except ValueError:
        return str(path)


def _leakage_check(data, plan) -> dict:
    groups = np.asarray(data.groups)
    overlap = 0
    for tr, va in plan.splits():
        overlap += len(set(groups[tr]) & set(groups[va]))
    return {"cow_overlap": overlap, "scaler_fit_on": "training split only",
            "smote_fit_on": "training split only"}


def run_pipeline(cfg: PipelineConfig, out_dir) -> dict:
    """Run every stage and return the manifest (also written to ``manifest.json``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.check_inputs()
    seed = int(cfg["seed"])
    cv = cfg["cv"]
    manifest = {
        "version": __version__,
        "config_hash": cfg.hash(),
        "seed": seed,
        "stages": {},
        "rows": {},
        "excluded": [],
        "complete": False,
    }

    def done(stage, **info):
        manifest["stages"][stage] = {"version": __version__, "complete": True, **info}
        write_json(out / "manifest.json", manifest)

    write_json(out / "config.json", cfg.data)
    try:
        traj_path, scores_path = cfg.path("trajectories"), cfg.path("scores")
        if traj_path is None:
            traj_path, synth_scores = _synth_inputs(cfg, out / "inputs")
            scores_path = scores_path or synth_scores
            done("synth")
        manifest["inputs"] = {"trajectories": _rel(traj_path, out),
                              "scores": _rel(scores_path, out) if scores_path else None}

        log.info("loading trajectories from %s", traj_path)
        try:
            trajs = read_trajectory_csv(traj_path, cfg["frame_rate"])
        except (TrajectoryError, ValueError, OSError) as exc:
            raise StageError("load", str(exc)) from exc
        manifest["rows"]["videos"] = len(trajs)

        filtered, fracs, timelines, features, excluded = extract_all(trajs, cfg)
        manifest["excluded"] = excluded
        write_trajectory_csv(out / "filtered_trajectories.csv", list(filtered.values()))
        write_json(out / "outliers.json", {
            "per_video": fracs,
            "overall": float(np.mean(list(fracs.values()))) if fracs else None,
        })
        done("filter", excluded=sum(e["stage"] == "filter" for e in excluded))
        write_json(out / "timelines.json", {v: tl.to_dict() for v, tl in timelines.items()})
        done("steps", videos=len(timelines))
        write_csv(features, out / "features.csv")
        manifest["rows"]["features"] = int(features["valid"].sum())
        done("traits")

        # labels: merged observer scores, or a labels file as given
        if scores_path is not None:
            try:
                table = scoring.read_scores_csv(scores_path)
                rel = scoring.reliability(table, cfg["merge"]["window_hours"])
                m = cfg["merge"]
                labels = scoring.merge_scores(table, m["strategy"], m["tau"], window_hours=m["window_hours"])
            except ValueError as exc:
                raise StageError("merge-scores", str(exc)) from exc
            rel["merge"] = {"strategy": m["strategy"], "tau": m["tau"],
                            "weights_from": "intra-observer alpha (clamped at 0)"
                            if m["strategy"] == "weighted" else None,
                            "unlabeled": labels.attrs.get("unlabeled", [])}
            write_json(out / "reliability.json", rel)
            labels = labels[LABEL_COLUMNS]
        else:
            labels = pd.read_csv(cfg.path("labels"), dtype={"video_id": str})
        write_csv(labels, out / "labels.csv")
        manifest["rows"]["labels"] = len(labels)
        done("merge-scores")

        data = from_frames(features, labels)
        plan = folds_mod.make_folds(data.groups, data.y, cv["k"], seed)
        write_json(out / "folds.json", plan.to_dict(list(data.video_ids)))
        manifest["rows"]["dataset"] = len(data)
        manifest["leakage"] = _leakage_check(data, plan)

        search, cv_reports = {}, {}
        for kind in cfg["classifiers"]:
            log.info("random search: %s", kind)
            space = cfg["search_spaces"].get(kind)
            res = random_search(kind, data, plan, cv["n_iter"], seed, space, cv["smote_k"])
            search[kind] = res.to_dict()
            cv_reports[kind] = evaluate_cv(res.best, data, plan, cv["smote_k"]).to_dict()
        write_json(out / "search.json", search)
        write_json(out / "cv.json", cv_reports)
        done("cv")

        chosen = cfg["importance_classifier"] or max(
            cfg["classifiers"],
            key=lambda k: (_nz(cv_reports[k]["mean"]["f1"]), _nz(cv_reports[k]["mean"]["accuracy"]),
                           -cfg["classifiers"].index(k)))
        best = ClassifierSpec(chosen, dict(search[chosen]["best"]["params"]), seed,
                              cfg["search_spaces"].get(chosen))
        log.info("permutation importance with %s", chosen)
        imp = permutation_importance(best, data, plan, cv["n_perm"], seed, cv["smote_k"])
        imp_d = imp.to_dict()
        imp_d["classifier"] = best.to_dict()
        write_json(out / "importance.json", imp_d)
        done("importance", classifier=chosen)

        ranking = rank_groups(imp)
        reports = ablation_study(best, data, plan, ranking, TRAIT_GROUPS, cv["smote_k"])
        write_json(out / "ablation.json", {
            "classifier": best.to_dict(),
            "ranking": ranking,
            "steps": [dict(group=g, **r.to_dict()) for g, r in zip(ranking, reports)],
        })
        done("ablation")

        files = emit_plot_data(out, traj_path, cfg["plots"]["n_videos"], cfg["frame_rate"])
        done("emit-plots", files=files)
    except StageError:
        write_json(out / "manifest.json", manifest)
        raise
    manifest["complete"] = True
    write_json(out / "manifest.json", manifest)
    return manifest


def _nz(v):
    return -math.inf if v is None or (isinstance(v, float) and math.isnan(v)) else v


__all__ = [
    "StageError", "filter_video", "process_video", "extract_all", "features_frame", "run_pipeline",
    "emit_plot_data", "dumps",
]
