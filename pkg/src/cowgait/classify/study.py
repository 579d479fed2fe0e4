"""Cross-validated evaluation, hyper-parameter search, importance and ablation.

Per-task seeds are derived from a master seed with
``SeedSequence(master, spawn_key=keys)``: SMOTE in fold ``f`` uses key
``(f,)``; permutation ``r`` of feature ``j`` in fold ``f`` uses
``(1, f, j)``. Results are reduced in fold/feature order, so any
evaluation order gives identical reports.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..traits import TRAIT_GROUPS
from .data import LabeledDataset
from .folds import FoldPlan
from .models import SEARCH_SPACES, ClassifierSpec, make_classifier
from .preprocess import RobustScaler, smote_oversample

METRICS = ("accuracy", "f1", "sensitivity", "specificity")


def derive_seed(master: int, *keys) -> int:
    return int(np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys)).generate_state(1)[0])


def confusion(y_true, y_pred) -> dict:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    return {
        "tp": int(np.sum((y_true == 1) & (y_pred == 1))),
        "fn": int(np.sum((y_true == 1) & (y_pred == 0))),
        "tn": int(np.sum((y_true == 0) & (y_pred == 0))),
        "fp": int(np.sum((y_true == 0) & (y_pred == 1))),
    }


def _ratio(num, den):
    return 100.0 * num / den if den else math.nan


def metrics_from_confusion(tp, fn, tn, fp) -> dict:
    """Accuracy, macro-F1, sensitivity and specificity in percent.

    Undefined values (empty denominators) are NaN and named under
    ``"undefined"``; macro-F1 averages the defined per-class F1 values.
    """
    f1_pos = _ratio(2 * tp, 2 * tp + fp + fn)
    f1_neg = _ratio(2 * tn, 2 * tn + fn + fp)
    defined = [v for v in (f1_pos, f1_neg) if not math.isnan(v)]
    out = {
        "accuracy": _ratio(tp + tn, tp + tn + fp + fn),
        "f1": float(np.mean(defined)) if defined else math.nan,
        "sensitivity": _ratio(tp, tp + fn),
        "specificity": _ratio(tn, tn + fp),
    }
    out["undefined"] = [k for k in METRICS if math.isnan(out[k])]
    if len(defined) < 2:
        out["undefined"].append("f1_per_class")
    return out


def classification_metrics(y_true, y_pred) -> dict:
    c = confusion(y_true, y_pred)
    out = metrics_from_confusion(c["tp"], c["fn"], c["tn"], c["fp"])
    out.update(c)
    return out


def macro_f1(y_true, y_pred) -> float:
    """Macro-F1 as a fraction in [0, 1]."""
    return classification_metrics(y_true, y_pred)["f1"] / 100.0


@dataclasses.dataclass
class MetricsReport:
    per_fold: list
    mean: dict
    pooled: dict
    spec: dict
    features: tuple

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "features": list(self.features),
            "per_fold": self.per_fold,
            "mean": self.mean,
            "pooled": self.pooled,
        }


@dataclasses.dataclass
class FittedPipeline:
    scaler: RobustScaler
    model: object

    def predict(self, X) -> np.ndarray:
        return self.model.predict(self.scaler.transform(X))


def fit_pipeline(spec: ClassifierSpec, X, y, smote_k: int = 5, smote_seed: int = 0) -> FittedPipeline:
    """Scale on ``X`` only, oversample the scaled rows, then train."""
    scaler = RobustScaler.fit(X)
    sm = smote_oversample(scaler.transform(X), y, smote_k, smote_seed)
    return FittedPipeline(scaler, make_classifier(spec).fit(sm.X, sm.y))


def _fold_pipelines(spec, data, folds, smote_k):
    for f, (tr, va) in enumerate(folds.splits()):
        pipe = fit_pipeline(spec, data.X[tr], data.y[tr], smote_k, derive_seed(spec.seed, f))
        yield f, tr, va, pipe


def evaluate_cv(spec: ClassifierSpec, data: LabeledDataset, folds: FoldPlan, smote_k: int = 5) -> MetricsReport:
    per_fold = []
    pooled = dict.fromkeys(("tp", "fn", "tn", "fp"), 0)
    for f, tr, va, pipe in _fold_pipelines(spec, data, folds, smote_k):
        m = classification_metrics(data.y[va], pipe.predict(data.X[va]))
        m["fold"] = f
        m["n_val"] = int(va.size)
        per_fold.append(m)
        for key in pooled:
            pooled[key] += m[key]
    mean = {}
    for key in METRICS:
        vals = [m[key] for m in per_fold if not math.isnan(m[key])]
        mean[key] = float(np.mean(vals)) if vals else math.nan
    pooled_m = metrics_from_confusion(**pooled)
    pooled_m.update(pooled)
    return MetricsReport(per_fold, mean, pooled_m, spec.to_dict(), data.feature_names)


def sample_params(space: dict, rng) -> dict:
    out = {}
    for name in sorted(space):
        dist = space[name]
        kind = dist[0]
        if kind == "loguniform":
            out[name] = float(math.exp(rng.uniform(math.log(dist[1]), math.log(dist[2]))))
        elif kind == "uniform":
            out[name] = float(rng.uniform(dist[1], dist[2]))
        elif kind == "int":
            out[name] = int(rng.integers(dist[1], dist[2] + 1))
        elif kind == "choice":
            out[name] = dist[1][int(rng.integers(len(dist[1])))]
        else:
            raise ValueError(f"unknown distribution {kind!r} for {name}")
    return out


@dataclasses.dataclass
class SearchResult:
    best: ClassifierSpec
    best_score: float
    trials: list

    def to_dict(self) -> dict:
        return {"best": self.best.to_dict(), "best_f1": self.best_score, "trials": self.trials}


def random_search(kind: str, data: LabeledDataset, folds: FoldPlan, n_iter: int = 100, seed: int = 0,
                  space: dict | None = None, smote_k: int = 5) -> SearchResult:
    """Random hyper-parameter search maximizing mean CV macro-F1 (first best wins)."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    space = SEARCH_SPACES[kind] if space is None else space
    rng = np.random.default_rng(seed)
    best, best_score, trials = None, -math.inf, []
    for i in range(n_iter):
        spec = ClassifierSpec(kind, sample_params(space, rng), seed, space)
        score = evaluate_cv(spec, data, folds, smote_k).mean["f1"]
        score = -math.inf if math.isnan(score) else score
        trials.append({"iter": i, "params": dict(spec.params), "f1": score})
        if score > best_score:
            best, best_score = spec, score
    return SearchResult(best, best_score, trials)


@dataclasses.dataclass
class ImportanceReport:
    features: tuple
    mean: np.ndarray
    std: np.ndarray
    per_fold: np.ndarray  # (k, n_features) mean drop per fold
    n_perm: int
    seed: int

    @property
    def ranking(self) -> list:
        order = sorted(range(len(self.features)), key=lambda j: (-self.mean[j], j))
        return [self.features[j] for j in order]

    def to_frame(self):
        import pandas as pd

        rank = {name: r + 1 for r, name in enumerate(self.ranking)}
        return pd.DataFrame({
            "feature": list(self.features),
            "mean": self.mean,
            "std": self.std,
            "rank": [rank[f] for f in self.features],
        })

    def to_dict(self) -> dict:
        return {
            "n_perm": self.n_perm,
            "seed": self.seed,
            "units": "macro-F1 fraction",
            "ranking": self.ranking,
            "features": {
                f: {"mean": float(self.mean[j]), "std": float(self.std[j]),
                    "per_fold": [float(v) for v in self.per_fold[:, j]]}
                for j, f in enumerate(self.features)
            },
        }


def permutation_importance(spec: ClassifierSpec, data: LabeledDataset, folds: FoldPlan, n_perm: int = 100,
                           seed: int = 0, smote_k: int = 5) -> ImportanceReport:
    """Mean drop in validation macro-F1 (as a fraction) when one column is shuffled."""
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    p = data.X.shape[1]
    per_fold = np.zeros((folds.k, p))
    drops = [[] for _ in range(p)]
    for f, tr, va, pipe in _fold_pipelines(spec, data, folds, smote_k):
        Xv, yv = data.X[va], data.y[va]
        base = macro_f1(yv, pipe.predict(Xv))
        for j in range(p):
            rng = np.random.default_rng(derive_seed(seed, 1, f, j))
            d = np.empty(n_perm)
            for r in range(n_perm):
                Xs = Xv.copy()
                Xs[:, j] = Xs[rng.permutation(va.size), j]
                d[r] = base - macro_f1(yv, pipe.predict(Xs))
            per_fold[f, j] = d.mean()
            drops[j].extend(d.tolist())
    return ImportanceReport(
        data.feature_names, per_fold.mean(axis=0),
        np.array([np.std(d) for d in drops]), per_fold, n_perm, seed,
    )


def rank_groups(report: ImportanceReport, groups: dict = TRAIT_GROUPS) -> list:
    """Trait groups ordered by the largest mean importance of their members."""
    imp = dict(zip(report.features, report.mean))
    names = list(groups)
    score = {g: max(imp[f] for f in groups[g]) for g in names}
    return sorted(names, key=lambda g: (-score[g], names.index(g)))


def ablation_study(spec: ClassifierSpec, data: LabeledDataset, folds: FoldPlan, ranking,
                   groups: dict = TRAIT_GROUPS, smote_k: int = 5) -> list:
    """Evaluate with the top-1, top-2, ... groups of ``ranking``."""
    reports = []
    chosen = []
    for g in ranking:
        chosen.extend(groups[g])
        cols = [f for f in data.feature_names if f in chosen]
        reports.append(evaluate_cv(spec, data.select_features(cols), folds, smote_k))
    return reports
