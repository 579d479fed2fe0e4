"""The six locomotion traits (ten feature values) of one walking cow.

Lengths are normalized by the head length ``h`` so that traits compare
across cows and camera distances; durations are in frames.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .steps import StepTimeline
from .trajectory import HOOVES, KP, TrajectorySet

FEATURE_NAMES = ("BPM", "HBA", "TRK_L", "TRK_R", "STL_F", "STL_H", "STD_F", "STD_H", "SWD_F", "SWD_H")
TRAIT_GROUPS = {
    "BPM": ("BPM",),
    "HBA": ("HBA",),
    "TRK": ("TRK_L", "TRK_R"),
    "STL": ("STL_F", "STL_H"),
    "STD": ("STD_F", "STD_H"),
    "SWD": ("SWD_F", "SWD_H"),
}
GIRDLES = {
    "front": (KP.LeftFrontHoof, KP.RightFrontHoof),
    "hind": (KP.LeftHindHoof, KP.RightHindHoof),
}
SIDES = {
    "left": (KP.LeftFrontHoof, KP.LeftHindHoof),
    "right": (KP.RightFrontHoof, KP.RightHindHoof),
}
HBA_BANDS = ("gait", "full")


class TraitError(ValueError):
    """A locomotion trait could not be computed for this video."""


@dataclasses.dataclass(frozen=True)
class CircleFit:
    cx: float
    cy: float
    radius: float

    @property
    def curvature(self) -> float:
        return 0.0 if math.isinf(self.radius) else 1.0 / self.radius


def fit_circle(p1, p2, p3) -> CircleFit:
    """Circumcircle of three points; collinear points give ``radius = inf``."""
    p1, p2, p3 = (np.asarray(p, dtype=np.float64) for p in (p1, p2, p3))
    if np.array_equal(p1, p2) or np.array_equal(p1, p3) or np.array_equal(p2, p3):
        raise TraitError("degenerate spine")
    b = p2 - p1
    c = p3 - p1
    # work in units of the largest offset so squares neither under- nor overflow
    scale = max(np.abs(b).max(), np.abs(c).max())
    b, c = b / scale, c / scale
    cross = b[0] * c[1] - b[1] * c[0]
    span = max(np.dot(b, b), np.dot(c, c), np.dot(p3 - p2, p3 - p2))
    if abs(cross) / 2.0 < 1e-9 * span:
        return CircleFit(math.nan, math.nan, math.inf)
    d = 2.0 * cross
    bb = np.dot(b, b)
    cc = np.dot(c, c)
    ux = (c[1] * bb - b[1] * cc) / d
    uy = (b[0] * cc - c[0] * bb) / d
    return CircleFit(float(p1[0] + ux * scale), float(p1[1] + uy * scale), float(math.hypot(ux, uy) * scale))


def back_posture(traj: TrajectorySet, timeline: StepTimeline, h: float) -> float:
    """Largest per-leg median of h/r over the mid-swing frames."""
    per_leg = []
    for leg in HOOVES:
        vals = []
        for m in timeline.midswings[leg]:
            fit = fit_circle(
                traj.point(KP.Withers, m.frame),
                traj.point(KP.Sacrum, m.frame),
                traj.point(KP.CaudalThoracic, m.frame),
            )
            vals.append(h * fit.curvature)
        if vals:
            per_leg.append(float(np.median(vals)))
    if not per_leg:
        raise TraitError("no swing events")
    return max(per_leg)


def amplitude_spectrum(y) -> np.ndarray:
    """One-sided |X_k| / N for k = 0 .. N//2."""
    y = np.asarray(y, dtype=np.float64)
    return np.abs(np.fft.rfft(y)) / y.size


def head_bobbing(traj: TrajectorySet, timeline: StepTimeline, band: str = "gait") -> float:
    """Largest Forehead-y Fourier amplitude within the analysed band.

    ``band="gait"`` searches k = 1 .. ceil(N_v / P): from one cycle per
    clip up to one cycle per gait cycle. ``band="full"`` searches every
    non-DC bin.
    """
    lo, hi = timeline.valid_range
    y = traj.y(KP.Forehead)[lo:hi + 1]
    n = y.size
    if n < 8:
        raise TraitError("head bobbing needs at least 8 frames")
    P = timeline.gait_period
    if not P or not math.isfinite(P) or P <= 0:
        raise TraitError("gait period undefined")
    amp = amplitude_spectrum(y)
    if band == "gait":
        kmax = min(math.ceil(n / P), amp.size - 1)
    elif band == "full":
        kmax = amp.size - 1
    else:
        raise ValueError(f"unknown HBA band {band!r}; expected one of {HBA_BANDS}")
    return float(amp[1:max(kmax, 1) + 1].max())


def tracking_distance(traj: TrajectorySet, timeline: StepTimeline, h: float, side: str) -> float:
    """Median (x_front - x_hind) / h between a front landing and the next hind landing."""
    front, hind = SIDES[side]
    xf, xh = traj.x(front), traj.x(hind)
    lo = timeline.valid_range[0]
    hind_starts = [s.start for s in timeline.stances[hind]]
    vals = []
    for s in timeline.stances[front]:
        if s.start <= lo:
            continue  # landing happened before the observed range
        nxt = next((t for t in hind_starts if t > s.start), None)
        if nxt is None:
            continue
        vals.append((xf[s.start] - xh[nxt]) / h)
    if not vals:
        raise TraitError("no tracking event")
    return float(np.median(vals))


def _median_diff(left, right) -> float:
    return abs(float(np.median(right)) - float(np.median(left)))


def stride_length_diff(traj: TrajectorySet, timeline: StepTimeline, h: float, girdle: str) -> float:
    left, right = GIRDLES[girdle]
    strides = []
    for leg in (left, right):
        starts = [s.start for s in timeline.stances[leg]]
        if len(starts) < 2:
            raise TraitError("insufficient strides")
        x = traj.x(leg)[starts]
        strides.append(np.diff(x) / h)
    return _median_diff(*strides)


def stance_duration_diff(timeline: StepTimeline, girdle: str) -> float:
    """|median right - median left| of complete stance durations b - a."""
    left, right = GIRDLES[girdle]
    durs = []
    for leg in (left, right):
        d = [s.duration for s in timeline.stances[leg] if not timeline.is_censored(s)]
        if not d:
            raise TraitError("no complete stance phase")
        durs.append(d)
    return _median_diff(*durs)


def swing_duration_diff(timeline: StepTimeline, girdle: str) -> float:
    left, right = GIRDLES[girdle]
    durs = []
    for leg in (left, right):
        d = [b - a for a, b in timeline.swings(leg)]
        if not d:
            raise TraitError("no swing phase")
        durs.append(d)
    return _median_diff(*durs)


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    video_id: str
    BPM: float
    HBA: float
    TRK_L: float
    TRK_R: float
    STL_F: float
    STL_H: float
    STD_F: float
    STD_H: float
    SWD_F: float
    SWD_H: float
    cow_id: str = ""

    def values(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES])

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in FEATURE_NAMES}


def extract_features(traj: TrajectorySet, timeline: StepTimeline, h: float,
                     hba_band: str = "gait") -> FeatureVector:
    steps = [
        ("BPM", lambda: back_posture(traj, timeline, h)),
        ("HBA", lambda: head_bobbing(traj, timeline, hba_band)),
        ("TRK_L", lambda: tracking_distance(traj, timeline, h, "left")),
        ("TRK_R", lambda: tracking_distance(traj, timeline, h, "right")),
        ("STL_F", lambda: stride_length_diff(traj, timeline, h, "front")),
        ("STL_H", lambda: stride_length_diff(traj, timeline, h, "hind")),
        ("STD_F", lambda: stance_duration_diff(timeline, "front")),
        ("STD_H", lambda: stance_duration_diff(timeline, "hind")),
        ("SWD_F", lambda: swing_duration_diff(timeline, "front")),
        ("SWD_H", lambda: swing_duration_diff(timeline, "hind")),
    ]
    vals = {}
    for name, fn in steps:
        try:
            v = fn()
        except TraitError as exc:
            raise TraitError(f"feature extraction failed: {name} ({exc})") from exc
        if not math.isfinite(v):
            raise TraitError(f"feature extraction failed: {name} (non-finite)")
        vals[name] = v
    return FeatureVector(traj.video_id, cow_id=traj.cow_id, **vals)
