"""Observer reliability, agreement, score merging and binarization.

A score table is a DataFrame with columns
``video_id, cow_id, recorded_at, observer_id, score`` where scores are
integers on the 1-5 locomotion scale.
"""
from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
import pandas as pd

SCORE_COLUMNS = ("video_id", "cow_id", "recorded_at", "observer_id", "score")
CATEGORIES = (1, 2, 3, 4, 5)
STRATEGIES = ("mean", "majority", "weighted", "tau_vote")
DEFAULT_TAU = 0.602
DEFAULT_WINDOW_HOURS = 48.0


class ScoringError(ValueError):
    pass


def validate_scores(table: pd.DataFrame) -> pd.DataFrame:
    """Check a score table and return a normalized copy."""
    missing = [c for c in SCORE_COLUMNS if c not in table.columns]
    if missing:
        raise ScoringError(f"score table missing columns {missing}")
    df = table.loc[:, list(SCORE_COLUMNS)].copy()
    for col in ("video_id", "cow_id", "observer_id"):
        df[col] = df[col].astype(str)
    score = pd.to_numeric(df["score"], errors="coerce")
    if score.isna().any() or (score != np.round(score)).any():
        raise ScoringError("scores must be integers")
    if not score.isin(CATEGORIES).all():
        raise ScoringError("scores must be in 1..5")
    df["score"] = score.astype(int)
    df["recorded_at"] = pd.to_datetime(df["recorded_at"], format="ISO8601")
    if df.duplicated(["video_id", "observer_id"]).any():
        raise ScoringError("more than one score per (video, observer)")
    cows = df.groupby("video_id")["cow_id"].nunique()
    if (cows > 1).any():
        raise ScoringError(f"video {cows[cows > 1].index[0]} has several cow_id values")
    return df.reset_index(drop=True)


def read_scores_csv(path) -> pd.DataFrame:
    return validate_scores(pd.read_csv(path, dtype={"video_id": str, "cow_id": str, "observer_id": str}))


def ratings_matrix(table: pd.DataFrame) -> pd.DataFrame:
    """Items x observers matrix of scores (NaN where unrated)."""
    return table.pivot(index="video_id", columns="observer_id", values="score").astype(float)


def _as_units(data) -> list[np.ndarray]:
    """Per-item arrays of the (non-missing) values."""
    if isinstance(data, pd.DataFrame) and "score" in data.columns:
        data = ratings_matrix(data)
    if isinstance(data, pd.DataFrame):
        data = data.to_numpy(dtype=float)
    if isinstance(data, np.ndarray):
        if data.ndim != 2:
            raise ScoringError("ratings must be a 2-D items x observers array")
        return [row[~np.isnan(row)] for row in data.astype(float)]
    return [np.asarray([v for v in unit if v is not None and not _isnan(v)], dtype=float) for unit in data]


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


def coincidence_matrix(units, categories=CATEGORIES) -> np.ndarray:
    """Krippendorff coincidence matrix o[c, k] over pairable items."""
    cats = np.asarray(categories, dtype=float)
    o = np.zeros((cats.size, cats.size))
    for vals in units:
        m = vals.size
        if m < 2:
            continue
        idx = np.searchsorted(cats, vals)
        if np.any(idx >= cats.size) or np.any(cats[np.minimum(idx, cats.size - 1)] != vals):
            raise ScoringError(f"rating outside categories {tuple(categories)}")
        cnt = np.bincount(idx, minlength=cats.size).astype(float)
        o += (np.outer(cnt, cnt) - np.diag(cnt)) / (m - 1)
    return o


def ordinal_delta2(marginals) -> np.ndarray:
    """delta^2(c, k) = (sum_{g=c..k} n_g - (n_c + n_k)/2)^2."""
    n = np.asarray(marginals, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(n)])
    K = n.size
    d = np.zeros((K, K))
    for c in range(K):
        for k in range(K):
            lo, hi = min(c, k), max(c, k)
            d[c, k] = (cum[hi + 1] - cum[lo] - (n[c] + n[k]) / 2.0) ** 2
    return d


@dataclasses.dataclass(frozen=True)
class AlphaResult:
    alpha: float
    degenerate: bool
    n_pairable: float


def krippendorff_alpha_details(data, categories=CATEGORIES) -> AlphaResult:
    units = _as_units(data)
    o = coincidence_matrix(units, categories)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    if n == 0:
        raise ScoringError("no comparable pairs")
    if np.count_nonzero(n_c) == 1:
        return AlphaResult(1.0, True, float(n))
    d2 = ordinal_delta2(n_c)
    d_obs = float((o * d2).sum())
    d_exp = float((np.outer(n_c, n_c) * d2).sum())
    return AlphaResult(1.0 - (n - 1.0) * d_obs / d_exp, False, float(n))


def krippendorff_alpha_ordinal(data, categories=CATEGORIES) -> float:
    """Ordinal Krippendorff alpha.

    ``data`` is a score table, an items x observers array with NaN for
    missing ratings, or a sequence of per-item rating lists. Items with a
    single rating are ignored. When only one category occurs, alpha is
    reported as 1 (see ``krippendorff_alpha_details`` for the flag).
    """
    return krippendorff_alpha_details(data, categories).alpha


def _pair_counts(units, categories):
    total = agree = 0
    A = dict.fromkeys(categories, 0)
    D = dict.fromkeys(categories, 0)
    for vals in units:
        for a, b in itertools.combinations(vals.tolist(), 2):
            total += 1
            if a == b:
                agree += 1
                A[int(a)] = A.get(int(a), 0) + 1
            else:
                D[int(a)] = D.get(int(a), 0) + 1
                D[int(b)] = D.get(int(b), 0) + 1
    return total, agree, A, D


def percent_agreement(data, categories=CATEGORIES):
    """Percentage agreement and per-category specific agreement.

    Returns
    -------
    pa : float
        Agreeing observer pairs over all pairs, in percent.
    sa : dict
        ``{category: percent}``; ``None`` for categories nobody assigned.
    """
    units = _as_units(data)
    total, agree, A, D = _pair_counts(units, categories)
    if total == 0:
        raise ScoringError("no comparable pairs")
    sa = {}
    for k in categories:
        denom = 2 * A[k] + D[k]
        sa[k] = None if denom == 0 else 100.0 * 2 * A[k] / denom
    return 100.0 * agree / total, sa


@dataclasses.dataclass(frozen=True)
class ReliabilityReport:
    alpha: float
    degenerate: bool
    pa: float
    sa: dict
    n_items: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "degenerate": self.degenerate,
            "pa": self.pa,
            "sa": {str(k): v for k, v in self.sa.items()},
            "n_items": self.n_items,
        }


def reliability_report(data, categories=CATEGORIES) -> ReliabilityReport:
    units = [u for u in _as_units(data) if u.size >= 2]
    res = krippendorff_alpha_details(units, categories)
    pa, sa = percent_agreement(units, categories)
    return ReliabilityReport(res.alpha, res.degenerate, pa, sa, len(units))


def pair_repeats(table: pd.DataFrame, window_hours: float = DEFAULT_WINDOW_HOURS) -> list[tuple[str, str]]:
    """All pairs of videos of one cow recorded less than ``window_hours`` apart."""
    vids = table.drop_duplicates("video_id")[["video_id", "cow_id", "recorded_at"]]
    vids = vids.assign(recorded_at=pd.to_datetime(vids["recorded_at"], format="ISO8601"))
    window = pd.Timedelta(hours=window_hours)
    pairs = []
    for _, grp in vids.sort_values(["cow_id", "recorded_at", "video_id"]).groupby("cow_id", sort=True):
        rows = list(grp.itertuples(index=False))
        for a, b in itertools.combinations(rows, 2):
            if abs(b.recorded_at - a.recorded_at) < window:
                pairs.append((a.video_id, b.video_id))
    return pairs


def intra_observer_units(table: pd.DataFrame, pairs) -> dict[str, list[np.ndarray]]:
    """Per observer, the repeat pairs they scored both of, as 2-rating items."""
    lookup = {(r.observer_id, r.video_id): r.score for r in table.itertuples(index=False)}
    out = {}
    for obs in sorted(table["observer_id"].unique()):
        units = []
        for a, b in pairs:
            if (obs, a) in lookup and (obs, b) in lookup:
                units.append(np.array([lookup[obs, a], lookup[obs, b]], dtype=float))
        out[obs] = units
    return out


def intra_observer_reports(table: pd.DataFrame, window_hours: float = DEFAULT_WINDOW_HOURS) -> dict:
    """Observer -> ReliabilityReport on their repeat pairs (None if no pairs)."""
    table = validate_scores(table)
    units = intra_observer_units(table, pair_repeats(table, window_hours))
    return {obs: (reliability_report(u) if u else None) for obs, u in units.items()}


def intra_observer_alpha(table: pd.DataFrame, window_hours: float = DEFAULT_WINDOW_HOURS) -> dict:
    """Observer -> intra-observer alpha (NaN when the observer has no repeat pairs)."""
    return {obs: (r.alpha if r is not None else math.nan)
            for obs, r in intra_observer_reports(table, window_hours).items()}


def reliability(table: pd.DataFrame, window_hours: float = DEFAULT_WINDOW_HOURS) -> dict:
    """Inter-observer report plus per-observer intra-observer reports."""
    table = validate_scores(table)
    pairs = pair_repeats(table, window_hours)
    intra = intra_observer_reports(table, window_hours)
    return {
        "inter": reliability_report(table).to_dict(),
        "intra": {obs: (r.to_dict() if r else None) for obs, r in intra.items()},
        "n_repeat_pairs": len(pairs),
        "window_hours": window_hours,
    }


def _lowest_mode(weights_by_score: dict) -> int:
    best = max(weights_by_score.values())
    # tolerance guards weighted sums that should tie exactly
    return min(s for s, w in weights_by_score.items() if w >= best - 1e-12)


def _merge_mean(scores) -> int:
    s, n = int(sum(scores)), len(scores)
    return (2 * s + n - 1) // (2 * n)  # nearest integer, halves down


def _merge_majority(scores, weights=None) -> int:
    tally = {}
    for i, s in enumerate(scores):
        tally[s] = tally.get(s, 0.0) + (1.0 if weights is None else weights[i])
    return _lowest_mode(tally)


def merge_scores(table: pd.DataFrame, strategy: str = "tau_vote", tau: float = DEFAULT_TAU,
                 alphas: dict | None = None, window_hours: float = DEFAULT_WINDOW_HOURS) -> pd.DataFrame:
    """Merge multi-observer scores into one ordinal score and binary label per video.

    Parameters
    ----------
    strategy : {"mean", "majority", "weighted", "tau_vote"}
    tau : float
        Eligibility threshold on intra-observer alpha for ``tau_vote``.
    alphas : dict, optional
        Observer -> intra-observer alpha. Computed from the table's repeat
        pairs when omitted (``weighted`` and ``tau_vote`` only).

    Returns
    -------
    DataFrame with ``video_id, cow_id, merged_score, binary_label`` sorted
    by video_id. Under ``tau_vote``, videos scored only by ineligible
    observers are left out and listed in ``df.attrs["unlabeled"]``.
    """
    if strategy not in STRATEGIES:
        raise ScoringError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    table = validate_scores(table)
    if strategy in ("weighted", "tau_vote") and alphas is None:
        alphas = intra_observer_alpha(table, window_hours)

    weights = None
    eligible = None
    if strategy == "weighted":
        raw = {o: max(0.0, a) if not math.isnan(a) else 0.0 for o, a in alphas.items()}
        tot = sum(raw.values())
        if tot <= 0:
            raise ScoringError("all observer weights are zero")
        weights = {o: w / tot for o, w in raw.items()}
    elif strategy == "tau_vote":
        eligible = {o for o, a in alphas.items() if not math.isnan(a) and a >= tau}
        if not eligible:
            raise ScoringError("no eligible observers")

    rows, unlabeled = [], []
    for vid, grp in table.sort_values(["video_id", "observer_id"]).groupby("video_id", sort=True):
        scores = grp["score"].tolist()
        observers = grp["observer_id"].tolist()
        if strategy == "mean":
            merged = _merge_mean(scores)
        elif strategy == "majority":
            merged = _merge_majority(scores)
        elif strategy == "weighted":
            w = [weights.get(o, 0.0) for o in observers]
            if sum(w) <= 0:
                raise ScoringError(f"video {vid}: all its observers have zero weight")
            merged = _merge_majority(scores, w)
        else:
            kept = [s for s, o in zip(scores, observers) if o in eligible]
            if not kept:
                unlabeled.append(vid)
                continue
            merged = _merge_majority(kept)
        rows.append((vid, grp["cow_id"].iloc[0], merged))
    out = pd.DataFrame(rows, columns=["video_id", "cow_id", "merged_score"])
    out["merged_score"] = out["merged_score"].astype(int)
    out["binary_label"] = binarize(out["merged_score"])
    out.attrs["strategy"] = strategy
    out.attrs["unlabeled"] = unlabeled
    if weights is not None:
        out.attrs["weights"] = weights
    return out


def binarize(scores):
    """1 -> 0 (normal); 2..5 -> 1 (lame)."""
    arr = np.asarray(scores)
    if arr.size and (not np.all(np.isin(arr, CATEGORIES))):
        raise ScoringError("scores must be in 1..5")
    out = (arr != 1).astype(int)
    if isinstance(scores, pd.Series):
        return pd.Series(out, index=scores.index, name="binary_label")
    if np.ndim(scores) == 0:
        return int(out)
    return out
