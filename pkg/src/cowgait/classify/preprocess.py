"""Robust scaling and SMOTE oversampling."""
from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class RobustScaler:
    """Per-feature ``(x - median) / IQR``; a zero IQR divides by 1."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "RobustScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("robust scaling needs at least 2 rows")
        q1, med, q3 = np.percentile(X, [25, 50, 75], axis=0)
        iqr = q3 - q1
        return cls(med, np.where(iqr == 0, 1.0, iqr))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center) / self.scale


def robust_scale(X) -> RobustScaler:
    return RobustScaler.fit(X)


@dataclasses.dataclass(frozen=True)
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    # for synthetic rows: (base row, neighbour row, u) into the input arrays
    provenance: np.ndarray


def smote_oversample(X, y, k_neighbors: int = 5, seed=0) -> SmoteResult:
    """Oversample the minority class until both classes are equally large.

    Each synthetic row is ``x + u * (x_nn - x)`` with ``x`` a minority row
    (cycled in order, then drawn at random), ``x_nn`` one of its
    ``k_neighbors`` nearest minority rows and ``u ~ U[0, 1]``. The
    neighbour count is clamped to minority size - 1.

    Returns the originals followed by the synthetic rows.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    classes, counts = np.unique(y, return_counts=True)
    empty = np.zeros((0, 3))
    if classes.size < 2 or counts[0] == counts[1]:
        return SmoteResult(X.copy(), y.copy(), empty)
    minority = classes[np.argmin(counts)]
    idx = np.flatnonzero(y == minority)
    if idx.size < 2:
        raise ValueError("cannot interpolate: minority class has a single sample")
    need = int(counts.max() - counts.min())
    k = min(k_neighbors, idx.size - 1)

    P = X[idx]
    d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    base = np.concatenate([np.arange(min(need, idx.size)),
                           rng.integers(0, idx.size, max(0, need - idx.size))])
    pick = nn[base, rng.integers(0, k, need)]
    u = rng.random(need)
    synth = P[base] + u[:, None] * (P[pick] - P[base])
    prov = np.column_stack([idx[base], idx[pick], u])
    return SmoteResult(
        np.vstack([X, synth]),
        np.concatenate([y, np.full(need, minority)]),
        prov,
    )
