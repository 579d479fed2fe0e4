"""Kinematic generator of 2-D keypoint trajectories for a walking cow.

Every event and trait value in ``GroundTruth`` is computed from the
configuration alone, never measured from the generated samples, so the
generator can serve as an independent oracle for step detection and
trait extraction.

Geometry: x grows in the walking direction, y grows downward (image
coordinates). All four legs share one cycle of ``stance + swing`` frames
and land at fixed phase offsets (lateral-sequence walk by default).
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pandas as pd

from .trajectory import HOOVES, KP, LEG_CODES, TrajectorySet, kp_index

LEGS = ("LH", "RH", "LF", "RF")
CODE_TO_KP = {v: k for k, v in LEG_CODES.items()}
FRONT_OF = {"LH": "LF", "RH": "RF"}
SIDE_OF = {"LH": 0, "LF": 0, "RH": 1, "RF": 1}

# peak of the swing acceleration profile, as a fraction of the swing
SWING_PEAK_U = math.acos(6.0 / (2.0 * math.pi ** 2)) / (2.0 * math.pi)

STUDY_REPEAT_PROFILE = {1: 24, 2: 21, 3: 25, 4: 17, 5: 6, 6: 3, 7: 1, 8: 1}

IMAGE_WIDTH = 1920.0
GROUND_Y = 820.0
SPINE_Y = 420.0


def swing_profile(u):
    """Fraction of the stride covered at swing fraction ``u`` in [0, 1].

    Mean of the smoothstep and the cycloid: monotone, leaves the ground
    with a finite acceleration and peaks in acceleration at
    ``SWING_PEAK_U``.
    """
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * (3 * u ** 2 - 2 * u ** 3) + 0.5 * (u - np.sin(2 * np.pi * u) / (2 * np.pi))


def swing_acceleration(u):
    """Second derivative of ``swing_profile`` with respect to ``u``."""
    u = np.asarray(u, dtype=np.float64)
    return 3.0 - 6.0 * u + np.pi * np.sin(2 * np.pi * u)


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class GaitConfig:
    """Parameters of one synthetic walk.

    Per-leg tuples are ordered (LH, RH, LF, RF); per-side tuples are
    (left, right). ``stance_frames + swing_frames`` must be equal for all
    legs. ``swing_frames`` counts the frames in which the hoof moves.
    """

    frame_rate: float = 30.0
    n_cycles: float = 3.0
    stance_frames: tuple = (26, 26, 26, 26)
    swing_frames: tuple = (10, 10, 10, 10)
    stride_px: tuple = (330.0, 330.0)
    phase_offsets: tuple = (0.0, 0.5, 0.25, 0.75)
    head_length_px: float = 110.0
    bob_amplitude_px: float = 0.0
    arch_curvature: float = 0.0
    tracking_offset: tuple = (0.0, 0.0)
    noise_sd: float = 0.0
    outlier_rate: float = 0.0
    seed: int = 0
    start_phase: float | None = None
    spine_half_chord_px: float = 140.0
    hoof_lift_px: float = 25.0
    direction: str = "left-to-right"
    video_id: str = "synthetic"
    cow_id: str = "cow"

    def replace(self, **changes) -> "GaitConfig":
        return dataclasses.replace(self, **changes)

    @property
    def cycle_frames(self) -> int:
        return int(self.stance_frames[0] + self.swing_frames[0])

    @property
    def n_frames(self) -> int:
        return int(round(self.n_cycles * self.cycle_frames))

    def validate(self) -> None:
        cyc = {s + w for s, w in zip(self.stance_frames, self.swing_frames)}
        if len(cyc) != 1:
            raise ConfigError("all legs must share one cycle length (stance + swing)")
        if min(self.stance_frames) < 10:
            raise ConfigError("stance_frames must be >= 10")
        if min(self.swing_frames) < 3:
            raise ConfigError("swing_frames must be >= 3")
        for name in ("bob_amplitude_px", "arch_curvature", "noise_sd", "outlier_rate", "hoof_lift_px"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if min(self.stride_px) <= 0 or self.head_length_px <= 0:
            raise ConfigError("stride and head length must be positive")
        if self.arch_curvature * self.spine_half_chord_px >= 1:
            raise ConfigError("arch curvature too large for the spine chord")
        if self.outlier_rate > 0.2:
            raise ConfigError("outlier_rate must be <= 0.2")
        if self.n_frames < 2:
            raise ConfigError("n_cycles too small")
        if self.direction not in ("left-to-right", "right-to-left"):
            raise ConfigError(f"unknown direction {self.direction!r}")


def healthy_preset(**changes) -> GaitConfig:
    return GaitConfig(**changes)


LAME_CURVATURE = 1.0 / 800.0
LAME_BOB_PX = 24.0
LAME_TRACKING = 0.5


def lame_preset(**changes) -> GaitConfig:
    base = dict(
        arch_curvature=LAME_CURVATURE,
        bob_amplitude_px=LAME_BOB_PX,
        tracking_offset=(LAME_TRACKING, LAME_TRACKING),
    )
    base.update(changes)
    return GaitConfig(**base)


PRESETS = {"healthy": healthy_preset, "lame": lame_preset}


@dataclasses.dataclass
class GroundTruth:
    """Analytic events and traits implied by a ``GaitConfig``.

    ``stances`` hold (start, end) intervals clipped to the clip; mid-swing
    frames are real-valued peak-acceleration times.
    """

    stances: dict
    midswings: dict
    gait_period: float
    traits: dict
    outlier_cells: int = 0
    n_cells: int = 0

    @property
    def outlier_fraction(self) -> float:
        return self.outlier_cells / self.n_cells if self.n_cells else 0.0

    def to_dict(self) -> dict:
        return {
            "stances": {leg: [list(s) for s in v] for leg, v in self.stances.items()},
            "midswings": {leg: list(v) for leg, v in self.midswings.items()},
            "gait_period": self.gait_period,
            "traits": dict(self.traits),
            "outlier_cells": self.outlier_cells,
            "n_cells": self.n_cells,
        }


def _landings(cfg: GaitConfig, leg_idx: int, shift: int, n: int):
    """Landing frames (possibly negative) covering the clip, with cycle index."""
    P = cfg.cycle_frames
    off = int(round(cfg.phase_offsets[leg_idx] * P)) - shift
    j0 = math.floor((-off - P) / P) - 1
    out = []
    j = j0
    while off + j * P <= n + P:
        out.append((j, off + j * P))
        j += 1
    return out


def _ground_truth(cfg: GaitConfig, shift: int) -> GroundTruth:
    n = cfg.n_frames
    h = cfg.head_length_px
    stances, mids = {}, {}
    for li, leg in enumerate(LEGS):
        st, sw = cfg.stance_frames[li], cfg.swing_frames[li]
        ivs, ms = [], []
        for _, t0 in _landings(cfg, li, shift, n):
            a, b = t0, t0 + st - 1
            if b >= 0 and a <= n - 1:
                ivs.append((max(a, 0), min(b, n - 1)))
            peak = b + SWING_PEAK_U * (sw + 1)
            if 0 <= peak <= n - 1:
                ms.append(peak)
        stances[leg] = ivs
        mids[leg] = ms
    sl, sr = cfg.stride_px
    st = dict(zip(LEGS, cfg.stance_frames))
    sw = dict(zip(LEGS, cfg.swing_frames))
    traits = {
        "BPM": h * cfg.arch_curvature,
        "HBA": cfg.bob_amplitude_px / 2.0,
        "TRK_L": float(cfg.tracking_offset[0]),
        "TRK_R": float(cfg.tracking_offset[1]),
        "STL_F": abs(sr - sl) / h,
        "STL_H": abs(sr - sl) / h,
        "STD_F": float(abs(st["RF"] - st["LF"])),
        "STD_H": float(abs(st["RH"] - st["LH"])),
        "SWD_F": float(abs(sw["RF"] - sw["LF"])),
        "SWD_H": float(abs(sw["RH"] - sw["LH"])),
    }
    return GroundTruth(stances, mids, float(cfg.cycle_frames), traits)


def _hoof_track(cfg: GaitConfig, li: int, shift: int, prints) -> np.ndarray:
    """x, y of one hoof per frame given its print positions by cycle index."""
    n = cfg.n_frames
    st, sw = cfg.stance_frames[li], cfg.swing_frames[li]
    xy = np.empty((n, 2))
    ground = GROUND_Y - (12.0 if SIDE_OF[LEGS[li]] == 0 else 0.0)
    land = _landings(cfg, li, shift, n)
    for (j, t0), (_, t1) in zip(land, land[1:]):
        lift = t0 + st  # first swing frame
        for t in range(max(t0, 0), min(t1, n)):
            if t < lift:
                xy[t] = (prints(j), ground)
            else:
                u = (t - lift + 1) / (sw + 1)
                x = prints(j) + (prints(j + 1) - prints(j)) * swing_profile(u)
                xy[t] = (x, ground - cfg.hoof_lift_px * math.sin(math.pi * u))
    return xy


def generate(cfg: GaitConfig):
    """Synthesize one walk.

    Returns
    -------
    traj : TrajectorySet
    truth : GroundTruth
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    P = cfg.cycle_frames
    n = cfg.n_frames
    if cfg.start_phase is None:
        shift = int(rng.integers(0, P))
    else:
        shift = int(round(cfg.start_phase * P)) % P
    h = cfg.head_length_px
    speed = 0.5 * (cfg.stride_px[0] + cfg.stride_px[1]) / P
    t = np.arange(n, dtype=np.float64)
    trunk = 300.0 + speed * t
    half = cfg.spine_half_chord_px

    coords = np.zeros((n, 9, 2))
    # hooves: front prints advance with the side's stride; each hind print
    # sits tracking_offset head lengths behind the preceding front print
    for side, (front, hind) in enumerate((("LF", "LH"), ("RF", "RH"))):
        fi, hi = LEGS.index(front), LEGS.index(hind)
        stride = cfg.stride_px[side]
        f_off = int(round(cfg.phase_offsets[fi] * P)) - shift
        h_off = int(round(cfg.phase_offsets[hi] * P)) - shift
        base = 300.0 + half + 0.25 * stride + speed * f_off

        def front_print(j, base=base, stride=stride):
            return base + j * stride

        def hind_print(j, side=side, front_print=front_print, f_off=f_off, h_off=h_off):
            # latest front landing strictly before this hind landing
            jf = math.ceil((h_off + j * P - f_off) / P) - 1
            return front_print(jf) - cfg.tracking_offset[side] * h

        coords[:, kp_index(CODE_TO_KP[front])] = _hoof_track(cfg, fi, shift, front_print)
        coords[:, kp_index(CODE_TO_KP[hind])] = _hoof_track(cfg, hi, shift, hind_print)

    # spine on a circular arc of the configured curvature, apex at the middle
    c = cfg.arch_curvature
    sag = 0.0 if c == 0 else 1.0 / c - math.sqrt(1.0 / c ** 2 - half ** 2)
    coords[:, kp_index(KP.Withers)] = np.column_stack([trunk + half, np.full(n, SPINE_Y)])
    coords[:, kp_index(KP.CaudalThoracic)] = np.column_stack([trunk, np.full(n, SPINE_Y - sag)])
    coords[:, kp_index(KP.Sacrum)] = np.column_stack([trunk - half, np.full(n, SPINE_Y)])

    # head bob locked to the left-hind cycle
    lh_land = int(round(cfg.phase_offsets[0] * P)) - shift
    bob = cfg.bob_amplitude_px * np.sin(2 * np.pi * (t - lh_land) / P)
    fx = trunk + half + 120.0
    fy = SPINE_Y - 30.0 - bob
    coords[:, kp_index(KP.Forehead)] = np.column_stack([fx, fy])
    ang = math.radians(60.0)
    coords[:, kp_index(KP.Nose)] = np.column_stack([fx + h * math.cos(ang), fy + h * math.sin(ang)])

    truth = _ground_truth(cfg, shift)
    truth.n_cells = n * 9

    if cfg.noise_sd > 0:
        coords += rng.normal(0.0, cfg.noise_sd, size=coords.shape)
    if cfg.outlier_rate > 0 and n > 2:
        hits = rng.random((n, 9)) < cfg.outlier_rate
        hits[0] = hits[-1] = False
        for k in range(9):
            last = -10
            for f in np.flatnonzero(hits[:, k]):
                if f - last <= 2:
                    hits[f, k] = False
                else:
                    last = f
        cells = np.argwhere(hits)
        mags = rng.uniform(50.0, 100.0, size=(len(cells), 2))
        signs = rng.choice([-1.0, 1.0], size=(len(cells), 2))
        for (f, k), m, s in zip(cells, mags, signs):
            coords[f, k] += m * s
        truth.outlier_cells = int(len(cells))

    if cfg.direction == "right-to-left":
        coords[:, :, 0] = IMAGE_WIDTH - coords[:, :, 0]
    traj = TrajectorySet(cfg.video_id, cfg.cow_id, coords, cfg.frame_rate)
    return traj, truth


# --------------------------------------------------------------------------
# datasets

@dataclasses.dataclass(frozen=True)
class DatasetJitter:
    """Ranges (uniform) from which per-video configs are drawn.

    Scales are multipliers of the lame preset's value.
    """

    healthy_arch: tuple = (0.0, 0.25)
    lame_arch: tuple = (0.6, 1.4)
    healthy_bob: tuple = (0.0, 0.25)
    lame_bob: tuple = (0.5, 1.5)
    healthy_tracking: tuple = (-0.1, 0.15)
    lame_tracking: tuple = (0.3, 0.8)
    stride_px: tuple = (300.0, 360.0)
    stance_shift: int = 2
    head_length_px: tuple = (95.0, 125.0)
    noise_sd: float = 1.0
    outlier_rate: float = 0.0
    n_cycles: float = 3.0


ZERO_JITTER = DatasetJitter(
    healthy_arch=(0.0, 0.0), lame_arch=(1.0, 1.0), healthy_bob=(0.0, 0.0), lame_bob=(1.0, 1.0),
    healthy_tracking=(0.0, 0.0), lame_tracking=(LAME_TRACKING, LAME_TRACKING),
    stride_px=(330.0, 330.0), stance_shift=0, head_length_px=(110.0, 110.0), noise_sd=0.0,
)


def assign_cows(n_videos: int, profile=None, seed=0) -> list[str]:
    """Cow ids for ``n_videos`` videos following a repeat-multiplicity profile.

    ``profile`` maps multiplicity -> number of cows. Groups are drawn in a
    seeded order until ``n_videos`` is reached; the last group is cut short
    if needed.
    """
    profile = STUDY_REPEAT_PROFILE if profile is None else profile
    rng = np.random.default_rng(seed)
    sizes = [m for m, count in sorted(profile.items()) for _ in range(count)]
    if not sizes:
        raise ValueError("empty repeat profile")
    ids = []
    cow = 0
    while len(ids) < n_videos:
        for size in rng.permutation(sizes):
            take = min(int(size), n_videos - len(ids))
            ids.extend([f"cow{cow:03d}"] * take)
            cow += 1
            if len(ids) >= n_videos:
                break
    order = rng.permutation(n_videos)
    return [ids[i] for i in order]


@dataclasses.dataclass
class SyntheticDataset:
    trajectories: list
    truths: list
    configs: list
    labels: dict

    @property
    def video_ids(self) -> list[str]:
        return [t.video_id for t in self.trajectories]


def _draw_config(label: int, jit: DatasetJitter, rng, video_id, cow_id, head_len, seed) -> GaitConfig:
    lo_hi = (lambda r: rng.uniform(*r))
    if label:
        arch, bob, trk = jit.lame_arch, jit.lame_bob, jit.lame_tracking
    else:
        arch, bob, trk = jit.healthy_arch, jit.healthy_bob, jit.healthy_tracking
    stance = []
    swing = []
    for _ in LEGS:
        d = int(rng.integers(-jit.stance_shift, jit.stance_shift + 1)) if jit.stance_shift else 0
        stance.append(26 + d)
        swing.append(10 - d)
    return GaitConfig(
        n_cycles=jit.n_cycles,
        stance_frames=tuple(stance),
        swing_frames=tuple(swing),
        stride_px=(lo_hi(jit.stride_px), lo_hi(jit.stride_px)),
        head_length_px=head_len,
        arch_curvature=LAME_CURVATURE * lo_hi(arch),
        bob_amplitude_px=LAME_BOB_PX * lo_hi(bob),
        tracking_offset=(lo_hi(trk), lo_hi(trk)),
        noise_sd=jit.noise_sd,
        outlier_rate=jit.outlier_rate,
        seed=seed,
        video_id=video_id,
        cow_id=cow_id,
    )


def generate_dataset(n_healthy: int, n_lame: int, jitter: DatasetJitter = DatasetJitter(),
                     seed: int = 0, repeat_profile=None) -> SyntheticDataset:
    """Synthesize a labelled set of walks around the healthy and lame presets."""
    if n_healthy < 1 or n_lame < 1:
        raise ValueError("n_healthy and n_lame must be >= 1")
    n = n_healthy + n_lame
    ss = np.random.SeedSequence(seed)
    cow_seed, label_seed, *video_seeds = ss.spawn(n + 2)
    cows = assign_cows(n, repeat_profile, np.random.default_rng(cow_seed).integers(2 ** 32))
    # whole cows are lame or healthy where the counts allow; one cow may be split
    labels = np.zeros(n, dtype=np.int64)
    uniq = sorted(set(cows))
    remaining = n_lame
    for j in np.random.default_rng(label_seed).permutation(len(uniq)):
        if remaining == 0:
            break
        idx = [i for i, c in enumerate(cows) if c == uniq[j]][:remaining]
        labels[idx] = 1
        remaining -= len(idx)
    head_rng = np.random.default_rng(ss.generate_state(1)[0])
    heads = {c: float(head_rng.uniform(*jitter.head_length_px)) for c in sorted(set(cows))}

    trajs, truths, cfgs, lab = [], [], [], {}
    for i in range(n):
        vid = f"v{i:04d}"
        rng = np.random.default_rng(video_seeds[i])
        cfg = _draw_config(int(labels[i]), jitter, rng, vid, cows[i], heads[cows[i]],
                           int(rng.integers(2 ** 31)))
        traj, truth = generate(cfg)
        trajs.append(traj)
        truths.append(truth)
        cfgs.append(cfg)
        lab[vid] = int(labels[i])
    return SyntheticDataset(trajs, truths, cfgs, lab)


def synth_scores(labels: dict, cows: dict, observers=None, seed: int = 0):
    """Observer locomotion scores consistent with binary labels.

    Healthy videos have true score 1 and lame ones a per-cow level in 2-4;
    each observer misreads by one level with its own error rate. Videos of one cow are
    spread over a few days so some fall within 48 hours of each other.

    Returns a DataFrame with columns
    ``video_id, cow_id, recorded_at, observer_id, score``.
    """
    observers = observers or {"A": 0.10, "B": 0.35, "C": 0.15, "D": 0.30}
    rng = np.random.default_rng(seed)
    start = pd.Timestamp("2019-05-06T09:00:00")
    cow_day = {c: int(rng.integers(0, 60)) for c in sorted(set(cows.values()))}
    cow_level = {c: int(rng.choice([2, 3, 4], p=[0.55, 0.3, 0.15])) for c in sorted(cow_day)}
    seen = {}
    rows = []
    for vid in sorted(labels):
        cow = cows[vid]
        k = seen.get(cow, 0)
        seen[cow] = k + 1
        when = start + pd.Timedelta(days=cow_day[cow] + int(rng.integers(0, 3)) * k,
                                    hours=int(rng.integers(0, 7)))
        true = 1 if labels[vid] == 0 else cow_level[cow]
        for obs, err in observers.items():
            s = true
            if rng.random() < err:
                s = int(np.clip(true + rng.choice([-1, 1]), 1, 5))
            rows.append((vid, cow, when.isoformat(), obs, s))
    return pd.DataFrame(rows, columns=["video_id", "cow_id", "recorded_at", "observer_id", "score"])
