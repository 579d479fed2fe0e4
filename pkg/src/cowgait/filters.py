"""1-D filters applied per keypoint coordinate channel.

All filters use edge-truncated centred windows: near the ends of a series
the window simply holds fewer samples.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .trajectory import TrajectorySet


@dataclasses.dataclass(frozen=True)
class FilterParams:
    mad_window: int = 3
    mad_k: float = 3.0
    mad_floor_px: float = 10.0
    sg_window: int = 10
    sg_order: int = 3


def _series(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("series must be a non-empty 1-D sequence")
    return s


def mad_correct(s, window: int = 3, k: float = 3.0, floor: float = 10.0):
    """Replace samples far from their window median by that median.

    A sample is an outlier when ``|s_i - m| > max(k * 1.4826 * MAD, floor)``
    with ``m`` and ``MAD`` taken over the centred window around ``i``
    (computed on the uncorrected input).

    Returns
    -------
    corrected : ndarray
    count : int
        Number of replaced samples.
    """
    s = _series(s)
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    if k <= 0 or floor < 0:
        raise ValueError("k must be positive and floor non-negative")
    if window > s.size:
        raise ValueError("window exceeds series")
    out, count = kernels.mad_filter(np.ascontiguousarray(s), int(window), float(k), float(floor))
    return np.asarray(out), int(count)


def _sg_row(offsets: np.ndarray, order: int) -> np.ndarray:
    """Weights giving the least-squares polynomial value at offset 0."""
    deg = min(order, offsets.size - 1)
    A = np.vander(offsets.astype(np.float64), deg + 1, increasing=True)
    return np.linalg.pinv(A)[0]


def savgol_smooth(s, window: int = 10, order: int = 3) -> np.ndarray:
    """Savitzky-Golay smoothing with truncated-window refits at the edges.

    Sample ``i`` is replaced by the value at ``i`` of the least-squares
    polynomial fitted to samples ``i - (window-1)//2 .. i + window//2``.
    Even windows therefore take one extra sample ahead of ``i``. When a
    truncated edge window has no more points than ``order``, the degree
    drops to ``points - 1``.
    """
    s = _series(s)
    if window < order + 2:
        raise ValueError("window must be at least order + 2")
    n = s.size
    if n < window:
        raise ValueError("series shorter than window")
    back = (window - 1) // 2
    ahead = window // 2
    out = np.empty(n)

    w = _sg_row(np.arange(-back, ahead + 1), order)
    interior = np.lib.stride_tricks.sliding_window_view(s, window) @ w
    out[back:n - ahead] = interior
    for i in list(range(back)) + list(range(n - ahead, n)):
        lo, hi = max(0, i - back), min(n, i + ahead + 1)
        out[i] = _sg_row(np.arange(lo - i, hi - i), order) @ s[lo:hi]
    return out


def second_derivative(s) -> np.ndarray:
    """Central second difference; endpoints copy their interior neighbour."""
    s = _series(s)
    if s.size < 3:
        raise ValueError("second derivative needs at least 3 samples")
    a = np.empty_like(s)
    a[1:-1] = s[2:] - 2.0 * s[1:-1] + s[:-2]
    a[0] = a[1]
    a[-1] = a[-2]
    return a


def uniform_filter(s, size: int = 3) -> np.ndarray:
    """Centred moving average, truncated at the edges."""
    s = _series(s)
    if size < 1:
        raise ValueError("size must be >= 1")
    if size == 1:
        return s.copy()
    back = (size - 1) // 2
    ahead = size // 2
    c = np.concatenate([[0.0], np.cumsum(s)])
    idx = np.arange(s.size)
    lo = np.maximum(idx - back, 0)
    hi = np.minimum(idx + ahead + 1, s.size)
    return (c[hi] - c[lo]) / (hi - lo)


def correct_trajectories(traj: TrajectorySet, params: FilterParams = FilterParams()):
    """MAD outlier correction followed by Savitzky-Golay smoothing.

    Every keypoint's x and y channel is filtered independently.

    Returns
    -------
    filtered : TrajectorySet
    outlier_fraction : float
        Fraction of (frame, keypoint) cells with at least one corrected
        coordinate.
    """
    coords = np.array(traj.coords)
    flagged = np.zeros(coords.shape[:2], dtype=bool)
    for kp in range(coords.shape[1]):
        for axis in range(2):
            raw = coords[:, kp, axis]
            fixed, count = mad_correct(raw, params.mad_window, params.mad_k, params.mad_floor_px)
            if count:
                flagged[:, kp] |= fixed != raw
            coords[:, kp, axis] = savgol_smooth(fixed, params.sg_window, params.sg_order)
    return traj.replace(coords=coords), float(flagged.mean())
