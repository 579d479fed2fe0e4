"""Command-line interface: ``cowgait <subcommand> [options]``.

Global options (``--config``, ``--seed``, ``--out``, ``--frame-rate``) may
be given before or after the subcommand.
"""
from __future__ import annotations

import argparse
import json
import logging
import pickle
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, scoring, synth
from .classify.data import read_dataset
from .classify.folds import make_folds
from .classify.models import KINDS, ClassifierSpec, train
from .classify.study import (
    ablation_study, classification_metrics, evaluate_cv, fit_pipeline, permutation_importance,
    random_search, rank_groups,
)
from .config import ConfigError, PipelineConfig, write_json
from .pipeline import (
    LABEL_COLUMNS, StageError, ablation_frame, emit_plot_data, extract_all, features_frame,
    filter_video, importance_frame, run_pipeline, write_csv,
)
from .steps import StepTimeline, detect_steps
from .traits import TRAIT_GROUPS, extract_features
from .trajectory import TrajectoryError, head_length, read_trajectory_csv, write_trajectory_csv

log = logging.getLogger("cowgait")


def _global_args(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides config)")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--frame-rate", type=float, default=d, help="frames per second (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true", default=d)


def _cfg(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig.from_dict({})
    return cfg.override(seed=args.seed, frame_rate=args.frame_rate)


def _out(args, default="out") -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec(args, cfg) -> ClassifierSpec:
    params = json.loads(args.params) if getattr(args, "params", None) else None
    kind = args.classifier
    if params is None:
        return ClassifierSpec.default(kind, cfg["seed"])
    return ClassifierSpec(kind, params, cfg["seed"], cfg["search_spaces"].get(kind))


def _dataset(args, cfg):
    data = read_dataset(args.features, args.labels)
    plan = make_folds(data.groups, data.y, cfg["cv"]["k"], cfg["seed"])
    return data, plan


# subcommands -------------------------------------------------------------

def cmd_synth(args, cfg):
    out = _out(args)
    if args.n_healthy or args.n_lame:
        jitter = synth.DatasetJitter(noise_sd=args.noise_sd or 0.0, outlier_rate=args.outlier_rate or 0.0)
        ds = synth.generate_dataset(args.n_healthy or 1, args.n_lame or 1, jitter, cfg["seed"])
        write_trajectory_csv(out / "trajectories.csv", ds.trajectories)
        write_json(out / "ground_truth.json", {t.video_id: g.to_dict() for t, g in zip(ds.trajectories, ds.truths)})
        labels = pd.DataFrame({"video_id": list(ds.labels), "binary_label": list(ds.labels.values())})
        labels.insert(1, "merged_score", np.where(labels["binary_label"] == 1, 2, 1))
        write_csv(labels[LABEL_COLUMNS], out / "labels.csv")
        if args.scores:
            cows = {t.video_id: t.cow_id for t in ds.trajectories}
            write_csv(synth.synth_scores(ds.labels, cows, seed=cfg["seed"]), out / "scores.csv")
        return 0
    changes = json.loads(Path(args.gait_config).read_text()) if args.gait_config else {}
    for key in ("noise_sd", "outlier_rate"):
        if getattr(args, key) is not None:
            changes[key] = getattr(args, key)
    changes.setdefault("seed", cfg["seed"])
    for key, val in list(changes.items()):
        if isinstance(val, list):
            changes[key] = tuple(val)
    gcfg = synth.PRESETS[args.preset](**changes)
    traj, truth = synth.generate(gcfg)
    write_trajectory_csv(out / "trajectories.csv", traj)
    write_json(out / "ground_truth.json", {traj.video_id: truth.to_dict()})
    return 0


def cmd_filter(args, cfg):
    out = _out(args)
    trajs = read_trajectory_csv(args.input, cfg["frame_rate"])
    filtered, fracs = [], {}
    for vid, t in trajs.items():
        f, frac = filter_video(t, cfg.filter_params)
        filtered.append(f)
        fracs[vid] = frac
    write_trajectory_csv(out / "filtered_trajectories.csv", filtered)
    write_json(out / "outliers.json", {"per_video": fracs, "overall": float(np.mean(list(fracs.values())))})
    return 0


def cmd_steps(args, cfg):
    out = _out(args)
    trajs = read_trajectory_csv(args.input, cfg["frame_rate"])
    timelines, excluded = {}, []
    for vid, t in trajs.items():
        try:
            timelines[vid] = detect_steps(t, cfg.step_params).to_dict()
        except ValueError as exc:
            excluded.append({"video_id": vid, "stage": "steps", "reason": str(exc)})
    write_json(out / "timelines.json", timelines)
    write_json(out / "excluded.json", excluded)
    return 0


def cmd_traits(args, cfg):
    out = _out(args)
    trajs = read_trajectory_csv(args.input, cfg["frame_rate"])
    if args.timelines:
        tls = json.loads(Path(args.timelines).read_text())
        rows, excluded = [], []
        for vid, t in trajs.items():
            if vid not in tls:
                rows.append((vid, t.cow_id, None))
                excluded.append({"video_id": vid, "stage": "steps", "reason": "no timeline"})
                continue
            try:
                fv = extract_features(t, StepTimeline.from_dict(tls[vid]), head_length(t), cfg["hba_band"])
            except ValueError as exc:
                fv = None
                excluded.append({"video_id": vid, "stage": "traits", "reason": str(exc)})
            rows.append((vid, t.cow_id, fv))
        features = features_frame(rows)
    else:
        _, _, _, features, excluded = extract_all(trajs, cfg)
    write_csv(features, out / "features.csv")
    write_json(out / "excluded.json", excluded)
    return 0


def cmd_reliability(args, cfg):
    out = _out(args)
    table = scoring.read_scores_csv(args.scores)
    write_json(out / "reliability.json", scoring.reliability(table, cfg["merge"]["window_hours"]))
    return 0


def cmd_merge(args, cfg):
    out = _out(args)
    table = scoring.read_scores_csv(args.scores)
    m = cfg["merge"]
    strategy = args.strategy or m["strategy"]
    tau = m["tau"] if args.tau is None else args.tau
    labels = scoring.merge_scores(table, strategy, tau, window_hours=m["window_hours"])
    write_csv(labels[LABEL_COLUMNS], out / "labels.csv")
    meta = {"strategy": strategy, "tau": tau, "unlabeled": labels.attrs.get("unlabeled", [])}
    if "weights" in labels.attrs:
        meta["weights"] = labels.attrs["weights"]
        meta["weights_from"] = "intra-observer alpha, clamped at 0, normalized to sum 1"
    write_json(out / "merge.json", meta)
    return 0


def cmd_train(args, cfg):
    out = _out(args)
    data = read_dataset(args.features, args.labels)
    spec = _spec(args, cfg)
    pipe = fit_pipeline(spec, data.X, data.y, cfg["cv"]["smote_k"], cfg["seed"])
    with open(out / "model.pkl", "wb") as fh:
        pickle.dump(pipe, fh)
    write_json(out / "train.json", {"spec": spec.to_dict(),
                                    "training_metrics": classification_metrics(data.y, pipe.predict(data.X))})
    return 0


def cmd_cv(args, cfg):
    out = _out(args)
    data, plan = _dataset(args, cfg)
    rep = evaluate_cv(_spec(args, cfg), data, plan, cfg["cv"]["smote_k"]).to_dict()
    rep["seed"] = cfg["seed"]
    rep["folds"] = plan.to_dict(list(data.video_ids))
    write_json(out / "cv.json", rep)
    return 0


def cmd_search(args, cfg):
    out = _out(args)
    data, plan = _dataset(args, cfg)
    n_iter = args.n_iter or cfg["cv"]["n_iter"]
    res = random_search(args.classifier, data, plan, n_iter, cfg["seed"],
                        cfg["search_spaces"].get(args.classifier), cfg["cv"]["smote_k"])
    rep = res.to_dict()
    rep["cv"] = evaluate_cv(res.best, data, plan, cfg["cv"]["smote_k"]).to_dict()
    rep["seed"] = cfg["seed"]
    write_json(out / "search.json", rep)
    return 0


def cmd_importance(args, cfg):
    out = _out(args)
    data, plan = _dataset(args, cfg)
    n_perm = args.n_perm or cfg["cv"]["n_perm"]
    imp = permutation_importance(_spec(args, cfg), data, plan, n_perm, cfg["seed"], cfg["cv"]["smote_k"])
    d = imp.to_dict()
    d["group_ranking"] = rank_groups(imp)
    write_json(out / "importance.json", d)
    write_csv(importance_frame(d), out / "importance.csv")
    return 0


def cmd_ablation(args, cfg):
    out = _out(args)
    data, plan = _dataset(args, cfg)
    if args.ranking:
        ranking = [g.strip() for g in args.ranking.split(",")]
    elif args.importance:
        ranking = json.loads(Path(args.importance).read_text())["group_ranking"]
    else:
        raise ConfigError("ablation needs --ranking or --importance")
    bad = [g for g in ranking if g not in TRAIT_GROUPS]
    if bad:
        raise ConfigError(f"unknown trait groups {bad}; expected {list(TRAIT_GROUPS)}")
    spec = _spec(args, cfg)
    reports = ablation_study(spec, data, plan, ranking, TRAIT_GROUPS, cfg["cv"]["smote_k"])
    d = {"classifier": spec.to_dict(), "ranking": ranking,
         "steps": [dict(group=g, **r.to_dict()) for g, r in zip(ranking, reports)]}
    write_json(out / "ablation.json", d)
    write_csv(ablation_frame(d), out / "ablation.csv")
    return 0


def cmd_run(args, cfg):
    manifest = run_pipeline(cfg, _out(args))
    log.info("run complete: %d videos, %d excluded", manifest["rows"].get("videos", 0), len(manifest["excluded"]))
    return 0


def cmd_emit_plots(args, cfg):
    out = Path(args.out or "out")
    raw = args.trajectories
    if raw is None:
        manifest = out / "manifest.json"
        if manifest.exists():
            rel = json.loads(manifest.read_text()).get("inputs", {}).get("trajectories")
            if rel:
                raw = rel if Path(rel).is_absolute() else out / rel
    emit_plot_data(out, raw, cfg["plots"]["n_videos"], cfg["frame_rate"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cowgait", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_args(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _global_args(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("synth", cmd_synth, "generate synthetic trajectories with ground truth")
    p.add_argument("--preset", choices=sorted(synth.PRESETS), default="healthy")
    p.add_argument("--gait-config", help="JSON file of GaitConfig overrides")
    p.add_argument("--n-healthy", type=int, help="generate a labelled dataset instead of one walk")
    p.add_argument("--n-lame", type=int)
    p.add_argument("--noise-sd", type=float)
    p.add_argument("--outlier-rate", type=float)
    p.add_argument("--scores", action="store_true", help="also write synthetic observer scores")

    p = add("filter", cmd_filter, "MAD outlier correction and Savitzky-Golay smoothing")
    p.add_argument("input", help="trajectory CSV")
    p = add("steps", cmd_steps, "stance and mid-swing detection")
    p.add_argument("input", help="filtered trajectory CSV")
    p = add("traits", cmd_traits, "extract the ten locomotion-trait features")
    p.add_argument("input", help="filtered trajectory CSV (or raw, without --timelines)")
    p.add_argument("--timelines", help="timelines JSON from the steps subcommand")

    p = add("reliability", cmd_reliability, "inter- and intra-observer reliability")
    p.add_argument("scores", help="scores CSV")
    p = add("merge-scores", cmd_merge, "merge observer scores into labels")
    p.add_argument("scores", help="scores CSV")
    p.add_argument("--strategy", choices=scoring.STRATEGIES)
    p.add_argument("--tau", type=float)

    for name, fn, help_ in (
        ("train", cmd_train, "fit one classifier on all rows"),
        ("cv", cmd_cv, "cross-validated metrics"),
        ("search", cmd_search, "random hyper-parameter search"),
        ("importance", cmd_importance, "permutation feature importance"),
        ("ablation", cmd_ablation, "incremental trait-group ablation"),
    ):
        p = add(name, fn, help_)
        p.add_argument("--features", required=True, help="features CSV")
        p.add_argument("--labels", required=True, help="labels CSV")
        p.add_argument("--classifier", choices=KINDS, default="svm_rbf")
        if name != "search":
            p.add_argument("--params", help="hyper-parameters as a JSON object")
        if name == "search":
            p.add_argument("--n-iter", type=int)
        if name == "importance":
            p.add_argument("--n-perm", type=int)
        if name == "ablation":
            p.add_argument("--ranking", help="comma-separated trait groups, e.g. BPM,TRK,HBA")
            p.add_argument("--importance", help="importance.json with a group_ranking")

    add("run", cmd_run, "full pipeline")
    p = add("emit-plots", cmd_emit_plots, "write plot-ready CSV series from stage outputs")
    p.add_argument("--trajectories", help="raw trajectory CSV for the overlay")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, _cfg(args))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, TrajectoryError, scoring.ScoringError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
