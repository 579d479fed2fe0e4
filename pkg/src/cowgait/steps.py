"""Stance and mid-swing detection from hoof x-trajectories.

Detection runs per hoof; ``validate_and_trim`` then cross-checks the four
legs and keeps the longest stretch of frames whose steps are consistent.
"""
from __future__ import annotations

import dataclasses
import json

import numpy as np

from .filters import second_derivative, uniform_filter
from .trajectory import HOOVES, KP, LEG_CODES, KeypointId, TrajectorySet

CONTRALATERAL = {
    KP.LeftHindHoof: KP.RightHindHoof,
    KP.RightHindHoof: KP.LeftHindHoof,
    KP.LeftFrontHoof: KP.RightFrontHoof,
    KP.RightFrontHoof: KP.LeftFrontHoof,
}
CODE_TO_LEG = {v: k for k, v in LEG_CODES.items()}


class StepError(ValueError):
    """The gait could not be segmented into enough valid steps."""


@dataclasses.dataclass(frozen=True)
class StepParams:
    stance_min_frames: int = 10
    stance_tol_px: float = 10.0
    accel_filter_size: int = 3


@dataclasses.dataclass(frozen=True, order=True)
class StancePhase:
    start: int
    end: int
    leg: KeypointId = KP.LeftHindHoof

    @property
    def duration(self) -> int:
        return self.end - self.start

    def __contains__(self, frame) -> bool:
        return self.start <= frame <= self.end


@dataclasses.dataclass(frozen=True, order=True)
class MidSwing:
    frame: int
    leg: KeypointId = KP.LeftHindHoof


@dataclasses.dataclass(frozen=True)
class StepTimeline:
    stances: dict
    midswings: dict
    gait_period: float
    valid_range: tuple

    def is_censored(self, stance: StancePhase) -> bool:
        """True if the stance touches either end of the valid range."""
        return stance.start <= self.valid_range[0] or stance.end >= self.valid_range[1]

    def swings(self, leg) -> list[tuple[int, int]]:
        """Swing intervals (a, b) between consecutive stances of ``leg``."""
        st = self.stances[leg]
        return [(p.end + 1, q.start - 1) for p, q in zip(st, st[1:])]

    def to_dict(self) -> dict:
        legs = {}
        for leg in HOOVES:
            legs[LEG_CODES[leg]] = {
                "stances": [{"start": s.start, "end": s.end} for s in self.stances[leg]],
                "midswings": [m.frame for m in self.midswings[leg]],
            }
        return {
            "legs": legs,
            "gait_period": self.gait_period,
            "valid_range": list(self.valid_range),
        }

    @classmethod
    def from_dict(cls, d) -> "StepTimeline":
        stances, mids = {}, {}
        for code, leg in CODE_TO_LEG.items():
            entry = d["legs"][code]
            stances[leg] = tuple(StancePhase(s["start"], s["end"], leg) for s in entry["stances"])
            mids[leg] = tuple(MidSwing(int(f), leg) for f in entry["midswings"])
        return cls(stances, mids, float(d["gait_period"]), tuple(d["valid_range"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def detect_stances(x, min_len: int = 10, tol: float = 10.0, leg: KeypointId = KP.LeftHindHoof):
    """Maximal runs of frames with consecutive |dx| <= tol, at least min_len long."""
    x = np.asarray(x, dtype=np.float64)
    if min_len < 2 or tol <= 0:
        raise ValueError("min_len must be >= 2 and tol > 0")
    still = np.abs(np.diff(x)) <= tol
    out = []
    t = 0
    n_diff = still.size
    while t < n_diff:
        if not still[t]:
            t += 1
            continue
        a = t
        while t < n_diff and still[t]:
            t += 1
        b = t  # last frame of the run
        if b - a + 1 >= min_len:
            out.append(StancePhase(a, b, leg))
    return out


def _gaps(stances, n):
    """(lo, hi, is_edge) frame ranges not covered by any stance."""
    if not stances:
        return [(0, n - 1, True)]
    gaps = [(0, stances[0].start - 1, True)]
    gaps += [(p.end + 1, q.start - 1, False) for p, q in zip(stances, stances[1:])]
    gaps.append((stances[-1].end + 1, n - 1, True))
    return [g for g in gaps if g[1] >= g[0]]


def detect_midswings(x, stances, accel_size: int = 3, leg: KeypointId = KP.LeftHindHoof):
    """One mid-swing per gap of >= 3 frames at the peak forward acceleration.

    Gaps at the ends of the series only see part of a swing; their peak is
    kept only if it is positive and not on the series boundary.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    acc = uniform_filter(second_derivative(x), accel_size)
    out = []
    for lo, hi, edge in _gaps(stances, n):
        if hi - lo + 1 < 3:
            continue
        f = lo + int(np.argmax(acc[lo:hi + 1]))
        if edge and (f == 0 or f == n - 1 or acc[f] <= 0):
            continue
        out.append(MidSwing(f, leg))
    return out


def _containing(stances, frame):
    for s in stances:
        if frame in s:
            return s
    return None


def _gap_around(stances, frame, n):
    prev_end = max((s.end for s in stances if s.end < frame), default=-1)
    next_start = min((s.start for s in stances if s.start > frame), default=n)
    return prev_end + 1, next_start - 1


def _longest_run(valid):
    best, best_lo = 0, 0
    t, n = 0, valid.size
    while t < n:
        if not valid[t]:
            t += 1
            continue
        lo = t
        while t < n and valid[t]:
            t += 1
        if t - lo > best:
            best, best_lo = t - lo, lo
    if best == 0:
        return None
    return best_lo, best_lo + best - 1


def _contra_state(opp_stances, frame):
    """'stance', 'swing' or 'unknown' for the contralateral leg at ``frame``."""
    if _containing(opp_stances, frame) is not None:
        return "stance"
    if not opp_stances or frame < opp_stances[0].start or frame > opp_stances[-1].end:
        return "unknown"
    return "swing"


def validate_and_trim(stances: dict, midswings: dict, n_frames: int, min_len: int = 10) -> StepTimeline:
    """Enforce the step-consistency rules and trim to the longest valid stretch.

    A mid-swing must fall outside its own leg's stances and inside a stance
    of the contralateral leg of the same girdle. Violating steps invalidate
    their frames; mid-swings whose contralateral state is unobserved (before
    its first or after its last detected stance) are dropped instead.
    """
    stances = {leg: sorted(stances.get(leg, ())) for leg in HOOVES}
    midswings = {leg: sorted(midswings.get(leg, ())) for leg in HOOVES}
    valid = np.ones(n_frames, dtype=bool)
    kept = {leg: [] for leg in HOOVES}
    for leg in HOOVES:
        opp = stances[CONTRALATERAL[leg]]
        for m in midswings[leg]:
            own = _containing(stances[leg], m.frame)
            if own is not None:
                valid[own.start:own.end + 1] = False
                continue
            state = _contra_state(opp, m.frame)
            if state == "stance":
                kept[leg].append(m)
            elif state == "swing":
                lo, hi = _gap_around(stances[leg], m.frame, n_frames)
                valid[lo:hi + 1] = False

    rng = _longest_run(valid)
    if rng is None:
        raise StepError("insufficient steps")
    lo, hi = rng
    trimmed = {}
    for leg in HOOVES:
        clipped = []
        for s in stances[leg]:
            a, b = max(s.start, lo), min(s.end, hi)
            if b - a + 1 >= min_len:
                clipped.append(StancePhase(a, b, leg))
        trimmed[leg] = tuple(clipped)
    mids = {}
    for leg in HOOVES:
        opp = trimmed[CONTRALATERAL[leg]]
        mids[leg] = tuple(
            m for m in kept[leg]
            if lo <= m.frame <= hi and _containing(opp, m.frame) is not None
        )

    for leg in HOOVES:
        if len(trimmed[leg]) < 2:
            raise StepError(f"insufficient steps: {LEG_CODES[leg]} has {len(trimmed[leg])} stance phase(s)")

    intervals = []
    for leg in (KP.LeftHindHoof, KP.RightHindHoof):
        starts = [s.start for s in trimmed[leg] if s.start > lo]
        intervals += list(np.diff(starts))
    if not intervals:
        raise StepError("no hind strides")
    return StepTimeline(trimmed, mids, float(np.median(intervals)), (lo, hi))


def detect_steps(traj: TrajectorySet, params: StepParams = StepParams()) -> StepTimeline:
    """Per-hoof detection followed by cross-leg validation and trimming."""
    stances, mids = {}, {}
    for leg in HOOVES:
        x = traj.x(leg)
        stances[leg] = detect_stances(x, params.stance_min_frames, params.stance_tol_px, leg)
        mids[leg] = detect_midswings(x, stances[leg], params.accel_filter_size, leg)
    return validate_and_trim(stances, mids, traj.n_frames, params.stance_min_frames)
