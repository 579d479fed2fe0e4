"""Labelled feature tables for the classification study."""
from __future__ import annotations

import dataclasses

import numpy as np
import pandas as pd

from ..traits import FEATURE_NAMES


class DatasetError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with binary labels and cow groups, one row per video."""

    video_ids: tuple
    groups: tuple
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DatasetError(f"X must have shape (n, {len(self.feature_names)})")
        n = X.shape[0]
        if not (len(self.video_ids) == len(self.groups) == y.size == n):
            raise DatasetError("video_ids, groups, X and y lengths differ")
        if len(set(self.video_ids)) != n:
            raise DatasetError("duplicate video_id")
        if not np.all(np.isfinite(X)):
            raise DatasetError("non-finite feature value")
        if not np.all(np.isin(y, (0, 1))):
            raise DatasetError("labels must be binary 0/1")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "video_ids", tuple(str(v) for v in self.video_ids))
        object.__setattr__(self, "groups", tuple(str(g) for g in self.groups))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            tuple(self.video_ids[i] for i in idx),
            tuple(self.groups[i] for i in idx),
            self.X[idx], self.y[idx], self.feature_names,
        )

    def select_features(self, names) -> "LabeledDataset":
        cols = [self.feature_names.index(n) for n in names]
        return LabeledDataset(self.video_ids, self.groups, self.X[:, cols], self.y, tuple(names))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=list(self.feature_names))
        df.insert(0, "cow_id", list(self.groups))
        df.insert(0, "video_id", list(self.video_ids))
        df["label"] = self.y
        return df


def from_frames(features: pd.DataFrame, labels: pd.DataFrame, label_col: str = "binary_label",
                feature_names=FEATURE_NAMES) -> LabeledDataset:
    """Join a features table and a labels table on video_id.

    Feature rows flagged ``valid == False`` (if that column exists) and
    videos missing from either table are dropped. Rows keep the features
    table order.
    """
    feats = features.copy()
    feats["video_id"] = feats["video_id"].astype(str)
    if "valid" in feats.columns:
        feats = feats[feats["valid"].astype(bool)]
    labs = labels[["video_id", label_col]].copy()
    labs["video_id"] = labs["video_id"].astype(str)
    df = feats.merge(labs, on="video_id", how="inner", validate="one_to_one")
    if "cow_id" not in df.columns:
        raise DatasetError("features table needs a cow_id column")
    return LabeledDataset(
        tuple(df["video_id"]), tuple(df["cow_id"].astype(str)),
        df[list(feature_names)].to_numpy(dtype=float), df[label_col].to_numpy(), tuple(feature_names),
    )


def read_dataset(features_csv, labels_csv, label_col: str = "binary_label") -> LabeledDataset:
    feats = pd.read_csv(features_csv, dtype={"video_id": str, "cow_id": str}, float_precision="round_trip")
    labs = pd.read_csv(labels_csv, dtype={"video_id": str})
    return from_frames(feats, labs, label_col)
