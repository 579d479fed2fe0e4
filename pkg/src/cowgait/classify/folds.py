"""Grouped, stratified k-fold assignment."""
from __future__ import annotations

import dataclasses

import numpy as np


class FoldError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class FoldPlan:
    """``folds[i]`` holds the row indices validated in fold ``i``."""

    folds: tuple
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def splits(self):
        """Yield ``(train_idx, val_idx)`` per fold."""
        n = sum(len(f) for f in self.folds)
        for val in self.folds:
            mask = np.ones(n, dtype=bool)
            val = np.asarray(val, dtype=np.int64)
            mask[val] = False
            yield np.flatnonzero(mask), val

    def fold_of(self) -> np.ndarray:
        n = sum(len(f) for f in self.folds)
        out = np.empty(n, dtype=np.int64)
        for i, f in enumerate(self.folds):
            out[np.asarray(f, dtype=np.int64)] = i
        return out

    def to_dict(self, video_ids=None) -> dict:
        folds = [sorted(int(i) for i in f) for f in self.folds]
        if video_ids is not None:
            folds = [[video_ids[i] for i in f] for f in folds]
        return {"seed": self.seed, "k": self.k, "folds": folds}


def make_folds(groups, y, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign whole groups to folds, keeping class counts near ``N_c / k``.

    Groups are visited largest first (ties in a seed-shuffled order). Each
    goes to the fold where it least increases the squared deviation of the
    per-class counts from their ideal ``N_c / k``; remaining ties go to the
    smaller fold, then the lower fold index.
    """
    groups = np.asarray([str(g) for g in groups])
    y = np.asarray(y).astype(np.int64)
    if k < 2:
        raise FoldError("k must be >= 2")
    if groups.size != y.size:
        raise FoldError("groups and labels differ in length")
    uniq = sorted(set(groups.tolist()))
    if len(uniq) < k:
        raise FoldError(f"fewer groups ({len(uniq)}) than folds ({k})")
    classes = np.unique(y)
    ideal = np.array([np.count_nonzero(y == c) for c in classes]) / k

    members = {g: np.flatnonzero(groups == g) for g in uniq}
    counts = {g: np.array([np.count_nonzero(y[members[g]] == c) for c in classes]) for g in uniq}
    rng = np.random.default_rng(seed)
    order = [uniq[i] for i in rng.permutation(len(uniq))]
    order.sort(key=lambda g: -members[g].size)  # stable: shuffled order breaks size ties

    fold_counts = np.zeros((k, classes.size))
    fold_sizes = np.zeros(k, dtype=np.int64)
    assigned = [[] for _ in range(k)]
    for g in order:
        c = counts[g]
        before = ((fold_counts - ideal) ** 2).sum(axis=1)
        after = ((fold_counts + c - ideal) ** 2).sum(axis=1)
        cost = after - before
        best = min(range(k), key=lambda f: (round(cost[f], 9), fold_sizes[f], f))
        fold_counts[best] += c
        fold_sizes[best] += members[g].size
        assigned[best].extend(members[g].tolist())
    return FoldPlan(tuple(tuple(sorted(a)) for a in assigned), int(seed))
